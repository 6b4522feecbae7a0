use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use calf_core::env::{CartPoleSwingup, EnvId, Environment, Pendulum};
use calf_core::policy::WithFallback;
use calf_core::theory::{certify, Certificate, CertifyConfig, FitConfig};
use calf_core::trainer::{CriticConfig, TrainConfig};
use calf_lab::certify::{format_report, reach_check, ReachCheckConfig, ReportJson};
use calf_lab::config::{ConfigLayer, CriticSource, ExperimentConfig, PolicySource};
use calf_lab::experiment::{load_critic, load_policy, run_experiment, write_outputs};
use calf_lab::train::{train, write_training};
use calf_lab::weights::{load_weights_file, verify_probes, PROBE_TOLERANCE};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "calf",
    version,
    about = "Critic-gated safety wrapper experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mode sweep and write CSV summaries.
    Run(RunArgs),
    /// Train base policies and critics on an environment.
    Train(TrainArgs),
    /// Compute the certificate quantities for a critic and fallback.
    Certify(CertifyArgs),
    /// Check the probes recorded in a weights file.
    ExportCheck(ExportCheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    /// Mode, comma-separated list of modes, or `all`.
    #[arg(long)]
    mode: Option<String>,
    /// Override the relaxation probability of every wrapped mode.
    #[arg(long)]
    p_relax: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Weights file or `constant:<action>`.
    #[arg(long)]
    policy: Option<String>,
    /// Weights file or `handcrafted`.
    #[arg(long)]
    critic: Option<String>,
    /// Label for the checkpoint column.
    #[arg(long)]
    checkpoint: Option<String>,
    /// Forbid relaxation at states valued below the initial state.
    #[arg(long)]
    theorem2_guard: bool,
    /// Write one decision-log CSV per trial.
    #[arg(long)]
    step_logs: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            env: self.env.clone(),
            mode: self.mode.clone(),
            modes: None,
            p_relax: self.p_relax,
            lambda: self.lambda,
            nu: self.nu,
            theorem2_guard: self.theorem2_guard.then_some(true),
            trials: self.trials,
            horizon: self.horizon,
            seed: self.seed,
            policy: self.policy.clone(),
            critic: self.critic.clone(),
            checkpoint: self.checkpoint.clone(),
            out: self.out.clone(),
            step_logs: self.step_logs.then_some(true),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "pendulum")]
    env: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Training episode length (defaults to the environment's).
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    critic_epochs: Option<usize>,
    /// Skip critic fitting.
    #[arg(long)]
    no_critic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, default_value = "pendulum")]
    env: String,
    /// Weights file or `handcrafted`.
    #[arg(long, default_value = "handcrafted")]
    critic: String,
    #[arg(long, default_value_t = 2.0)]
    d_circ: f64,
    #[arg(long, default_value_t = 0.3)]
    d_star: f64,
    #[arg(long, default_value_t = 0.01)]
    nu: f64,
    /// Grid points per state axis.
    #[arg(long, default_value_t = 201)]
    grid: usize,
    /// Grid points over the action interval.
    #[arg(long, default_value_t = 41)]
    actions: usize,
    /// Supply the certificate gain instead of fitting it (needs --a).
    #[arg(long, requires = "a")]
    c: Option<f64>,
    /// Supply the certificate decay rate (needs --c).
    #[arg(long, requires = "c")]
    a: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    fit_trajectories: usize,
    #[arg(long, default_value_t = 1000)]
    fit_horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run wrapper trials and check the settling bound.
    #[arg(long)]
    check: bool,
    /// Base policy for --check: weights file or `constant:<action>`.
    #[arg(long, default_value = "constant:2.0")]
    policy: String,
    #[arg(long, default_value_t = 30)]
    trials: usize,
    #[arg(long, default_value_t = 0.5)]
    p_relax: f64,
    #[arg(long, default_value_t = 0.99)]
    lambda: f64,
    /// Allow relaxation below the initial value during --check.
    #[arg(long)]
    no_guard: bool,
    /// Write the report as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExportCheckArgs {
    file: PathBuf,
    #[arg(long, default_value_t = PROBE_TOLERANCE)]
    tolerance: f64,
    /// Also check the observation size against this environment.
    #[arg(long)]
    env: Option<String>,
}

fn parse_env(s: &str) -> anyhow::Result<EnvId> {
    s.parse().map_err(|e| anyhow::anyhow!("{e}"))
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let file = args
        .config
        .as_deref()
        .map(ConfigLayer::from_file)
        .transpose()?;
    let cfg = ExperimentConfig::resolve(file.as_ref(), &args.layer())?;
    let out = run_experiment(&cfg)?;
    println!(
        "{:<14} {:>8} {:>12} {:>10} {:>8}",
        "mode", "p_relax", "mean_reward", "std", "reached"
    );
    for m in &out.modes {
        let s = &m.summary;
        println!(
            "{:<14} {:>8} {:>12.3} {:>10.3} {:>5}/{}",
            s.mode,
            s.p_relax.map_or("-".into(), |p| p.to_string()),
            s.mean_reward,
            s.std_reward,
            s.reached,
            s.trials
        );
    }
    if let Some(dir) = &cfg.out {
        let files = write_outputs(dir, &cfg, &out)?;
        println!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    match parse_env(&args.env)? {
        EnvId::Pendulum => train_on(&Pendulum::default(), &args),
        EnvId::CartPoleSwingup => train_on(&CartPoleSwingup::default(), &args),
    }
}

fn train_on<E: Environment>(env: &E, args: &TrainArgs) -> anyhow::Result<()> {
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        iterations: args.iterations.unwrap_or(defaults.iterations),
        population: args.population.unwrap_or(defaults.population),
        episodes_per_candidate: args.episodes.unwrap_or(defaults.episodes_per_candidate),
        horizon: args.horizon.unwrap_or(env.descriptor().train_horizon),
        critic: CriticConfig {
            epochs: args.critic_epochs.unwrap_or(defaults.critic.epochs),
            ..defaults.critic.clone()
        },
        seed: args.seed,
        ..defaults
    };
    let trained = train(env, &cfg, !args.no_critic)?;
    if let Some(last) = trained.outcome.history.last() {
        println!(
            "{} iterations: final mean return {:.3}, best {:.3}",
            last.iteration, last.mean_return, last.best_return
        );
    }
    for (tag, fit) in &trained.critics {
        println!(
            "critic {tag}: residual {:.4} -> {:.4} over {} transitions",
            fit.residuals[0],
            fit.residuals.last().copied().unwrap_or(f64::NAN),
            fit.transitions
        );
    }
    let files = write_training(&args.out, env, &cfg, &trained)?;
    println!("wrote {} files to {}", files.len(), args.out.display());
    Ok(())
}

fn cmd_certify(args: CertifyArgs) -> anyhow::Result<()> {
    match parse_env(&args.env)? {
        EnvId::Pendulum => certify_on(&Pendulum::default(), &args),
        EnvId::CartPoleSwingup => certify_on(&CartPoleSwingup::default(), &args),
    }
}

fn certify_on<E: WithFallback>(env: &E, args: &CertifyArgs) -> anyhow::Result<()> {
    let critic = load_critic(env, &args.critic.parse::<CriticSource>()?)?;
    let certificate = match (args.c, args.a) {
        (Some(c), Some(a)) => Some(Certificate::new(c, a)?),
        _ => None,
    };
    let cfg = CertifyConfig {
        d_circ: args.d_circ,
        d_star: args.d_star,
        nu: args.nu,
        grid_points_per_axis: args.grid,
        action_points: args.actions,
        certificate,
        fit: FitConfig {
            trajectories: args.fit_trajectories,
            horizon: args.fit_horizon,
            seed: args.seed,
            ..FitConfig::default()
        },
    };
    let report = certify(env, &*critic, &env.default_fallback(), &cfg)?;
    let name = env.descriptor().id.as_str();
    print!("{}", format_report(name, &report));
    let mut json = ReportJson::new(name, &report);
    if args.check {
        let base = load_policy(env, &args.policy.parse::<PolicySource>()?)?;
        let check = reach_check(
            env,
            &*base,
            &*critic,
            &report,
            &ReachCheckConfig {
                p_relax: args.p_relax,
                lambda: args.lambda,
                theorem2_guard: !args.no_guard,
                trials: args.trials,
                seed: args.seed,
                ..ReachCheckConfig::default()
            },
        )?;
        println!(
            "settling check: {}/{} trials within d_star after (tau + T) * tau_f",
            check.passed(),
            check.trials.len()
        );
        json.trial_check = Some(check);
    }
    if let Some(path) = &args.json {
        write_json(path, &json)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_export_check(args: ExportCheckArgs) -> anyhow::Result<()> {
    let (net, file) = load_weights_file(&args.file)?;
    println!(
        "{}: {} network, {} -> {}, {} layers",
        args.file.display(),
        net.role().as_str(),
        net.observation_dim(),
        net.output_dim(),
        net.layers().len()
    );
    if let Some(env) = &args.env {
        let dim = match parse_env(env)? {
            EnvId::Pendulum => Pendulum::default().descriptor().observation_dim,
            EnvId::CartPoleSwingup => CartPoleSwingup::default().descriptor().observation_dim,
        };
        if dim != net.observation_dim() {
            bail!(
                "{env} observations have {dim} components, the network takes {}",
                net.observation_dim()
            );
        }
    }
    if file.probes.is_empty() {
        bail!("no probes recorded in {}", args.file.display());
    }
    let report = verify_probes(&net, &file.probes, args.tolerance)?;
    println!(
        "{} probes, max abs error {:e} (tolerance {:e})",
        report.probes, report.max_abs_error, report.tolerance
    );
    if !report.passed() {
        bail!(
            "probe {} deviates by {:e}",
            report.worst.unwrap_or_default(),
            report.max_abs_error
        );
    }
    println!("ok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Train(a) => cmd_train(a),
        Command::Certify(a) => cmd_certify(a),
        Command::ExportCheck(a) => cmd_export_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
