//! Plot-ready data: a long table with one row per trial and a box-plot
//! aggregate per (mode, checkpoint). Nothing is rendered.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use calf_core::stats::{mean, std_dev};
use serde::{Deserialize, Serialize};

use crate::experiment::{read_csv, TrialRow};

pub const LONG_FILE: &str = "plot_long.csv";
pub const AGGREGATE_FILE: &str = "plot_aggregate.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub mode: String,
    pub checkpoint: String,
    pub trial: usize,
    pub reward: f64,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub mode: String,
    pub checkpoint: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub reach_rate: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Groups rows by (mode, checkpoint) in order of first appearance.
pub fn aggregate(rows: &[PlotRow]) -> anyhow::Result<Vec<AggregateRow>> {
    if rows.is_empty() {
        bail!("no trials to aggregate");
    }
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        let k = (r.mode.as_str(), r.checkpoint.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(mode, checkpoint)| {
            let group: Vec<&PlotRow> = rows
                .iter()
                .filter(|r| r.mode == mode && r.checkpoint == checkpoint)
                .collect();
            let mut rewards: Vec<f64> = group.iter().map(|r| r.reward).collect();
            if rewards.iter().any(|r| r.is_nan()) {
                bail!("NaN reward in {mode}/{checkpoint}");
            }
            let m = mean(&rewards);
            let s = std_dev(&rewards);
            rewards.sort_by(f64::total_cmp);
            Ok(AggregateRow {
                mode: mode.into(),
                checkpoint: checkpoint.into(),
                n: group.len(),
                mean: m,
                std: s,
                min: rewards[0],
                q1: quantile(&rewards, 0.25),
                median: quantile(&rewards, 0.5),
                q3: quantile(&rewards, 0.75),
                max: rewards[rewards.len() - 1],
                reach_rate: group.iter().filter(|r| r.reached).count() as f64 / group.len() as f64,
            })
        })
        .collect()
}

pub fn long_rows(trials: &[TrialRow]) -> Vec<PlotRow> {
    trials
        .iter()
        .map(|t| PlotRow {
            mode: t.mode.clone(),
            checkpoint: t.checkpoint.clone(),
            trial: t.trial,
            reward: t.cumulative_reward,
            reached: t.goal_reached,
        })
        .collect()
}

/// Writes [`LONG_FILE`] and [`AGGREGATE_FILE`] into `dir`.
pub fn emit_plot_data(dir: &Path, trials: &[TrialRow]) -> anyhow::Result<Vec<PathBuf>> {
    let long = long_rows(trials);
    let agg = aggregate(&long)?;
    for (name, result) in [
        (LONG_FILE, write_rows(&dir.join(LONG_FILE), &long)),
        (AGGREGATE_FILE, write_rows(&dir.join(AGGREGATE_FILE), &agg)),
    ] {
        result.with_context(|| format!("writing {name}"))?;
    }
    Ok(vec![
        PathBuf::from(LONG_FILE),
        PathBuf::from(AGGREGATE_FILE),
    ])
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_long(path: &Path) -> anyhow::Result<Vec<PlotRow>> {
    read_csv(path)
}

pub fn read_aggregate(path: &Path) -> anyhow::Result<Vec<AggregateRow>> {
    read_csv(path)
}
