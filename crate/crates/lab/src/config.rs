//! Experiment configuration.
//!
//! Values are resolved in three layers: built-in defaults, then a TOML file,
//! then command-line flags. A later layer overrides an earlier one field by
//! field.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use calf_core::env::EnvId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Conservative,
    Balanced,
    Brave,
    BaseOnly,
    FallbackOnly,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Conservative,
        Mode::Balanced,
        Mode::Brave,
        Mode::BaseOnly,
        Mode::FallbackOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Conservative => "conservative",
            Mode::Balanced => "balanced",
            Mode::Brave => "brave",
            Mode::BaseOnly => "base-only",
            Mode::FallbackOnly => "fallback-only",
        }
    }

    /// Relaxation probability of the wrapped modes; `None` for fixed-policy
    /// modes.
    pub fn default_p_relax(self) -> Option<f64> {
        match self {
            Mode::Conservative => Some(0.0),
            Mode::Balanced => Some(0.5),
            Mode::Brave => Some(0.95),
            Mode::BaseOnly | Mode::FallbackOnly => None,
        }
    }

    pub fn is_wrapped(self) -> bool {
        self.default_p_relax().is_some()
    }

    pub fn needs_base(self) -> bool {
        self != Mode::FallbackOnly
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s || m.as_str().replace('-', "_") == s)
            .with_context(|| {
                format!("invalid mode `{s}` (expected conservative, balanced, brave, base-only or fallback-only)")
            })
    }
}

/// Parses `"all"` or a comma-separated list of modes.
pub fn parse_modes(s: &str) -> anyhow::Result<Vec<Mode>> {
    if s.trim() == "all" {
        return Ok(Mode::ALL.to_vec());
    }
    let mut modes = Vec::new();
    for part in s.split(',') {
        let m: Mode = part.trim().parse()?;
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    if modes.is_empty() {
        bail!("no modes given");
    }
    Ok(modes)
}

/// Where the base policy comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySource {
    Weights(PathBuf),
    /// Constant action, mostly for smoke tests and adversarial runs.
    Constant(f64),
}

impl FromStr for PolicySource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s.strip_prefix("constant:") {
            Some(v) => Ok(PolicySource::Constant(
                v.trim()
                    .parse()
                    .with_context(|| format!("bad constant action `{v}`"))?,
            )),
            None => Ok(PolicySource::Weights(PathBuf::from(s))),
        }
    }
}

impl fmt::Display for PolicySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySource::Weights(p) => write!(f, "{}", p.display()),
            PolicySource::Constant(v) => write!(f, "constant:{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CriticSource {
    Weights(PathBuf),
    /// `-goal_distance`.
    Handcrafted,
}

impl FromStr for CriticSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "handcrafted" => CriticSource::Handcrafted,
            path => CriticSource::Weights(PathBuf::from(path)),
        })
    }
}

impl fmt::Display for CriticSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticSource::Weights(p) => write!(f, "{}", p.display()),
            CriticSource::Handcrafted => f.write_str("handcrafted"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvId,
    pub modes: Vec<Mode>,
    /// Overrides the per-mode relaxation probability of every wrapped mode.
    pub p_relax: Option<f64>,
    pub lambda: f64,
    pub nu: f64,
    pub theorem2_guard: bool,
    pub trials: usize,
    /// `None` uses the environment's evaluation horizon.
    pub horizon: Option<usize>,
    pub seed: u64,
    pub policy: Option<PolicySource>,
    pub critic: Option<CriticSource>,
    /// Label written into the checkpoint column of every output row.
    pub checkpoint: String,
    pub out: Option<PathBuf>,
    /// Write one decision-log CSV per trial.
    pub step_logs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvId::Pendulum,
            modes: Mode::ALL.to_vec(),
            p_relax: None,
            lambda: 0.9999,
            nu: 0.01,
            theorem2_guard: false,
            trials: 30,
            horizon: None,
            seed: 0,
            policy: None,
            critic: None,
            checkpoint: "none".into(),
            out: None,
            step_logs: false,
        }
    }
}

/// Every field optional; used both for the TOML layer and the flag layer.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigLayer {
    pub env: Option<String>,
    pub mode: Option<String>,
    pub modes: Option<Vec<String>>,
    pub p_relax: Option<f64>,
    pub lambda: Option<f64>,
    pub nu: Option<f64>,
    pub theorem2_guard: Option<bool>,
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    pub policy: Option<String>,
    pub critic: Option<String>,
    pub checkpoint: Option<String>,
    pub out: Option<PathBuf>,
    pub step_logs: Option<bool>,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("invalid experiment config")
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut layer = Self::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
        // Relative paths in a config file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for src in [&mut layer.policy, &mut layer.critic].into_iter().flatten() {
            if src != "handcrafted"
                && !src.starts_with("constant:")
                && Path::new(src.as_str()).is_relative()
            {
                *src = base.join(&*src).display().to_string();
            }
        }
        if let Some(out) = &mut layer.out {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(layer)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) -> anyhow::Result<()> {
        if let Some(env) = &self.env {
            cfg.env = env.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        }
        match (&self.mode, &self.modes) {
            (Some(_), Some(_)) => bail!("give either `mode` or `modes`, not both"),
            (Some(m), None) => cfg.modes = parse_modes(m)?,
            (None, Some(ms)) => cfg.modes = parse_modes(&ms.join(","))?,
            (None, None) => {}
        }
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        set!(
            lambda,
            nu,
            theorem2_guard,
            trials,
            seed,
            checkpoint,
            step_logs
        );
        if self.p_relax.is_some() {
            cfg.p_relax = self.p_relax;
        }
        if self.horizon.is_some() {
            cfg.horizon = self.horizon;
        }
        if let Some(p) = &self.policy {
            cfg.policy = Some(p.parse()?);
        }
        if let Some(c) = &self.critic {
            cfg.critic = Some(c.parse()?);
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Defaults, then `file`, then `flags`.
    pub fn resolve(file: Option<&ConfigLayer>, flags: &ConfigLayer) -> anyhow::Result<Self> {
        let mut cfg = Self::default();
        if let Some(f) = file {
            f.apply(&mut cfg)?;
        }
        flags.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.modes.is_empty() {
            bail!("no modes selected");
        }
        if self.trials == 0 {
            bail!("trials must be positive");
        }
        if self.horizon == Some(0) {
            bail!("horizon must be positive");
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            bail!("lambda = {} must lie in (0, 1)", self.lambda);
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            bail!("nu = {} must be > 0", self.nu);
        }
        if let Some(p) = self.p_relax {
            if !(0.0..=1.0).contains(&p) {
                bail!("p_relax = {p} must lie in [0, 1]");
            }
        }
        if self.checkpoint.is_empty() || self.checkpoint.contains([',', '\n', '"']) {
            bail!(
                "checkpoint label `{}` must be non-empty and free of commas and quotes",
                self.checkpoint
            );
        }
        Ok(())
    }

    /// Relaxation probability used for `mode`, `None` for fixed-policy modes.
    pub fn p_relax_for(&self, mode: Mode) -> Option<f64> {
        mode.default_p_relax().map(|p| self.p_relax.unwrap_or(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing() {
        assert_eq!("base-only".parse::<Mode>().unwrap(), Mode::BaseOnly);
        assert_eq!("fallback_only".parse::<Mode>().unwrap(), Mode::FallbackOnly);
        assert!("reckless".parse::<Mode>().is_err());
        assert_eq!(
            parse_modes("brave, conservative,brave").unwrap(),
            vec![Mode::Brave, Mode::Conservative]
        );
        assert_eq!(parse_modes("all").unwrap().len(), 5);
    }

    #[test]
    fn sources() {
        assert_eq!(
            "constant:-1.5".parse::<PolicySource>().unwrap(),
            PolicySource::Constant(-1.5)
        );
        assert!("constant:x".parse::<PolicySource>().is_err());
        assert_eq!(
            "handcrafted".parse::<CriticSource>().unwrap(),
            CriticSource::Handcrafted
        );
    }

    #[test]
    fn per_mode_relaxation() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.p_relax_for(Mode::Conservative), Some(0.0));
        assert_eq!(cfg.p_relax_for(Mode::Balanced), Some(0.5));
        assert_eq!(cfg.p_relax_for(Mode::Brave), Some(0.95));
        assert_eq!(cfg.p_relax_for(Mode::BaseOnly), None);
        cfg.p_relax = Some(0.2);
        assert_eq!(cfg.p_relax_for(Mode::Conservative), Some(0.2));
        assert_eq!(cfg.p_relax_for(Mode::FallbackOnly), None);
    }
}
