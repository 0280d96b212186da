//! Convergence and accuracy metrics aggregated over seeds.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use hopdeq::training::EvalReport;

/// One evaluated (model, seed) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedMetrics {
    pub label: String,
    pub seed: u64,
    pub accuracy: f64,
    pub mean_iters: f64,
    pub std_iters: f64,
    pub mean_updates: f64,
    pub converged_fraction: f64,
}

impl SeedMetrics {
    pub fn from_eval(label: &str, seed: u64, report: &EvalReport) -> Self {
        Self {
            label: label.to_string(),
            seed,
            accuracy: report.accuracy,
            mean_iters: report.mean_iters(),
            std_iters: report.std_iters(),
            mean_updates: report.mean_updates(),
            converged_fraction: report.converged as f64 / report.iterations.len().max(1) as f64,
        }
    }
}

/// Mean and standard deviation across seeds, with the speedup in state
/// updates relative to a named baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub label: String,
    pub baseline: String,
    pub mean_iters: f64,
    pub std_iters: f64,
    pub accuracy: f64,
    pub std_accuracy: f64,
    pub mean_updates: f64,
    pub speedup: f64,
    pub per_seed: Vec<SeedMetrics>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl MetricsReport {
    /// `baseline_updates` is the baseline's mean update count; `None` makes
    /// this report its own baseline.
    pub fn aggregate(label: &str, baseline: Option<(&str, f64)>, per_seed: Vec<SeedMetrics>) -> Self {
        let (mean_iters, std_iters) = mean_std(per_seed.iter().map(|m| m.mean_iters));
        let (accuracy, std_accuracy) = mean_std(per_seed.iter().map(|m| m.accuracy));
        let (mean_updates, _) = mean_std(per_seed.iter().map(|m| m.mean_updates));
        let (baseline, base_updates) = baseline.unwrap_or((label, mean_updates));
        let speedup = if mean_updates > 0.0 { base_updates / mean_updates } else { f64::NAN };
        Self {
            label: label.to_string(),
            baseline: baseline.to_string(),
            mean_iters,
            std_iters,
            accuracy,
            std_accuracy,
            mean_updates,
            speedup,
            per_seed,
        }
    }
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    label: &'a str,
    seed: String,
    accuracy: f64,
    mean_iters: f64,
    std_iters: f64,
    mean_updates: f64,
    speedup: f64,
    baseline: &'a str,
}

/// One row per seed plus a `mean` row per report.
pub fn write_metrics_csv<W: Write>(writer: W, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        for s in &r.per_seed {
            w.serialize(MetricsRow {
                label: &r.label,
                seed: s.seed.to_string(),
                accuracy: s.accuracy,
                mean_iters: s.mean_iters,
                std_iters: s.std_iters,
                mean_updates: s.mean_updates,
                speedup: if s.mean_updates > 0.0 { r.mean_updates * r.speedup / s.mean_updates } else { f64::NAN },
                baseline: &r.baseline,
            })?;
        }
        w.serialize(MetricsRow {
            label: &r.label,
            seed: "mean".into(),
            accuracy: r.accuracy,
            mean_iters: r.mean_iters,
            std_iters: r.std_iters,
            mean_updates: r.mean_updates,
            speedup: r.speedup,
            baseline: &r.baseline,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// A formatted table in the layout of the published comparison.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut out = format!(
        "{:<22} {:>16} {:>9} {:>16}\n",
        "model", "iterations", "speedup", "accuracy (%)"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<22} {:>8.1} ({:>4.1}) {:>8.2}x {:>8.2} ({:>4.2})\n",
            r.label,
            r.mean_iters,
            r.std_iters,
            r.speedup,
            100.0 * r.accuracy,
            100.0 * r.std_accuracy
        ));
    }
    out
}
