//! The subcommands: train, eval, trace, sim and compare.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use hopdeq::data::{load_mnist, Dataset, Split};
use hopdeq::hopfield::{checkpoint, MapKind, ModelParams};
use hopdeq::solvers::trace::write_trace_csv;
use hopdeq::solvers::Method;
use hopdeq::training::{evaluate, train, write_train_log, xavier_init, LogRow};

use crate::config::{ConfigError, ExperimentConfig, Scheme};
use crate::exit::ReproductionMismatch;
use crate::metrics::{format_table, write_metrics_csv, MetricsReport, SeedMetrics};
use crate::sim::{run_sync_redundancy_sim, SimReport};

fn load_split(cfg: &ExperimentConfig, split: Split, subset: usize) -> Result<Dataset> {
    let dir = cfg.data_dir();
    let ds = load_mnist(&dir, split).with_context(|| format!("loading MNIST from {}", dir.display()))?;
    Ok(if subset > 0 && subset < ds.len() { ds.subset(subset) } else { ds })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LogRow>,
    pub checkpoint: PathBuf,
}

/// Trains from the seeded initialisation on already loaded data and writes
/// `checkpoint.hopdeq` and `train_log.csv` into `cfg.output_dir`.
pub fn train_on(cfg: &ExperimentConfig, train_set: &Dataset, test_set: Option<&Dataset>) -> Result<TrainOutcome> {
    let tc = cfg.train_config()?;
    let mut params = xavier_init(&cfg.arch()?, cfg.variant()?, cfg.seed);
    let solver = cfg.eval_solver()?;
    let log = train(&mut params, train_set, test_set.map(|t| (t, &solver)), &tc, |rows| {
        for r in rows {
            eprintln!(
                "epoch {:>3} {:<5} loss {:.5} acc {:.4} iters {:.2}",
                r.epoch, r.split, r.loss, r.accuracy, r.mean_iters
            );
        }
    })?;
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("checkpoint.hopdeq");
    checkpoint::save(&params, &path)?;
    write_train_log(BufWriter::new(File::create(cfg.output_dir.join("train_log.csv"))?), &log)?;
    Ok(TrainOutcome {
        params,
        log,
        checkpoint: path,
    })
}

pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let train_set = load_split(cfg, Split::Train, cfg.train_subset)?;
    let test_set = load_split(cfg, Split::Test, cfg.test_subset)?;
    train_on(cfg, &train_set, Some(&test_set))
}

fn load_checkpoint(cfg: &ExperimentConfig) -> Result<ModelParams> {
    let path = cfg.checkpoint_path();
    let params = checkpoint::load(&path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    if params.variant != cfg.variant()? {
        bail!(ConfigError(format!(
            "checkpoint holds a {:?} model but the config asks for {:?}",
            params.variant,
            cfg.variant()?
        )));
    }
    Ok(params)
}

fn label(kind: MapKind, method: Method) -> String {
    format!("{kind}/{method}")
}

fn seed_metrics(cfg: &ExperimentConfig, params: &ModelParams, test: &Dataset, kind: MapKind, method: Method, label: &str) -> Result<SeedMetrics> {
    let solver = hopdeq::solvers::SolverConfig {
        method,
        damping: if kind == MapKind::ChnSync { cfg.forward_damping()?.min(0.5) } else { 1.0 },
        ..cfg.eval_solver()?
    };
    let report = evaluate(params, test, kind, &solver, cfg.chn_local_iters, cfg.chn_local_damping)?;
    Ok(SeedMetrics::from_eval(label, cfg.seed, &report))
}

/// Evaluates the checkpoint with the configured scheme and with the
/// synchronous Picard baseline of the same variant, on the same test set.
pub fn eval_params(cfg: &ExperimentConfig, params: &ModelParams, test: &Dataset) -> Result<Vec<MetricsReport>> {
    let kind = cfg.kind()?;
    let method = cfg.method()?;
    let base_kind = MapKind::for_scheme(cfg.variant()?, false);
    let base_label = label(base_kind, Method::Picard);
    let base = seed_metrics(cfg, params, test, base_kind, Method::Picard, &base_label)?;
    let base_report = MetricsReport::aggregate(&base_label, None, vec![base]);
    if kind == base_kind && method == Method::Picard {
        return Ok(vec![base_report]);
    }
    let own_label = label(kind, method);
    let own = seed_metrics(cfg, params, test, kind, method, &own_label)?;
    let base_updates = base_report.mean_updates;
    Ok(vec![
        base_report,
        MetricsReport::aggregate(&own_label, Some((&base_label, base_updates)), vec![own]),
    ])
}

pub fn run_eval(cfg: &ExperimentConfig) -> Result<Vec<MetricsReport>> {
    let params = load_checkpoint(cfg)?;
    let test = load_split(cfg, Split::Test, cfg.test_subset)?;
    let reports = eval_params(cfg, &params, &test)?;
    create_dir(&cfg.output_dir)?;
    write_metrics_csv(BufWriter::new(File::create(cfg.output_dir.join("metrics.csv"))?), &reports)?;
    Ok(reports)
}

/// Residual traces for the first `trace_samples` test images.
pub fn run_trace(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let params = load_checkpoint(cfg)?;
    let n = cfg.trace_samples.max(1);
    let test = load_split(cfg, Split::Test, n)?;
    let kind = cfg.kind()?;
    let report = evaluate(&params, &test, kind, &cfg.eval_solver()?, cfg.chn_local_iters, cfg.chn_local_damping)?;
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(format!("trace_{kind}.csv"));
    write_trace_csv(
        BufWriter::new(File::create(&path)?),
        report.traces.iter().enumerate().map(|(i, t)| (i, t.as_slice())),
    )?;
    Ok(path)
}

pub fn run_sim(cfg: &ExperimentConfig) -> Result<SimReport> {
    if cfg.variant()? != hopdeq::hopfield::Variant::Ham {
        bail!(ConfigError("sim needs the HAM variant".into()));
    }
    Ok(run_sync_redundancy_sim(cfg.sim_instances, cfg.seed, cfg.eval_max_iters, cfg.tol)?)
}

/// One row of the comparison matrix.
#[derive(Debug, Clone)]
pub struct MatrixRow {
    pub label: &'static str,
    pub variant: &'static str,
    pub scheme: Scheme,
    pub solver: &'static str,
    pub epochs: Option<usize>,
    pub max_epochs: Option<usize>,
    /// Reference iterations and accuracy in percent, checked by `--full`.
    pub reference: Option<(f64, f64)>,
    /// Label of the row whose update count is the speedup baseline.
    pub baseline: &'static str,
}

const fn row(
    label: &'static str,
    variant: &'static str,
    scheme: Scheme,
    solver: &'static str,
    max_epochs: Option<usize>,
    reference: Option<(f64, f64)>,
    baseline: &'static str,
) -> MatrixRow {
    MatrixRow {
        label,
        variant,
        scheme,
        solver,
        epochs: None,
        max_epochs,
        reference,
        baseline,
    }
}

fn ham_rows(refs: [Option<(f64, f64)>; 4]) -> Vec<MatrixRow> {
    vec![
        row("HAM", "ham", Scheme::Sync, "picard", None, refs[0], "HAM"),
        row("HAM-DEQ", "ham", Scheme::Sync, "anderson", None, refs[1], "HAM"),
        row("HAM-EO", "ham", Scheme::EvenOdd, "picard", None, refs[2], "HAM"),
        row("HAM-EO-DEQ", "ham", Scheme::EvenOdd, "anderson", None, refs[3], "HAM"),
    ]
}

fn chn_rows(full: bool) -> Vec<MatrixRow> {
    let r = |v: (f64, f64)| if full { Some(v) } else { None };
    let mut rows = vec![];
    if full {
        rows.push(row("CHN (3 epochs)", "chn", Scheme::Sync, "picard", Some(3), r((39.1, 97.0)), "CHN (3 epochs)"));
        rows.push(row("CHN (10 epochs)", "chn", Scheme::Sync, "picard", None, r((75.5, 97.9)), "CHN (3 epochs)"));
        rows.push(row("CHN-DEQ", "chn", Scheme::Sync, "anderson", Some(4), r((20.6, 97.2)), "CHN (3 epochs)"));
        rows.push(row("CHN-EO", "chn", Scheme::EvenOdd, "picard", None, r((16.8, 97.1)), "CHN (3 epochs)"));
        rows.push(row("CHN-EO-DEQ", "chn", Scheme::EvenOdd, "anderson", None, r((16.2, 97.1)), "CHN (3 epochs)"));
    } else {
        rows.push(row("CHN", "chn", Scheme::Sync, "picard", None, None, "CHN"));
        rows.push(row("CHN-DEQ", "chn", Scheme::Sync, "anderson", None, None, "CHN"));
        rows.push(row("CHN-EO", "chn", Scheme::EvenOdd, "picard", None, None, "CHN"));
        rows.push(row("CHN-EO-DEQ", "chn", Scheme::EvenOdd, "anderson", None, None, "CHN"));
    }
    rows
}

/// The published matrix per depth preset.
pub fn full_matrix() -> Vec<(&'static str, Vec<MatrixRow>)> {
    let mut layers3 = chn_rows(true);
    layers3.extend(ham_rows([Some((11.9, 97.9)), Some((9.9, 97.9)), Some((8.0, 97.9)), Some((6.6, 97.9))]));
    vec![
        ("layers3", layers3),
        ("layers5", ham_rows([Some((36.0, 97.1)), Some((33.0, 97.1)), Some((18.3, 97.1)), Some((17.7, 97.1))])),
        ("layers7", ham_rows([Some((67.1, 95.6)), Some((56.0, 95.6)), Some((32.2, 95.5)), Some((31.0, 95.5))])),
    ]
}

/// HAM rows on the configured architecture, plus CHN rows for 3 layers.
pub fn desk_matrix(cfg: &ExperimentConfig) -> Result<Vec<(String, Vec<MatrixRow>)>> {
    let mut rows = Vec::new();
    if cfg.arch()?.num_layers() == 3 {
        rows.extend(chn_rows(false));
    }
    rows.extend(ham_rows([None; 4]));
    Ok(vec![(cfg.architecture.clone(), rows)])
}

pub struct CompareOutcome {
    pub reports: Vec<MetricsReport>,
    pub mismatches: Vec<String>,
}

fn row_config(base: &ExperimentConfig, architecture: &str, r: &MatrixRow, seed: u64, full: bool) -> ExperimentConfig {
    let slug: String = r
        .label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    ExperimentConfig {
        variant: r.variant.into(),
        scheme: r.scheme,
        solver: r.solver.into(),
        architecture: architecture.into(),
        epochs: r.epochs.unwrap_or(if full { 10 } else { base.epochs }),
        max_epochs: r.max_epochs.or(base.max_epochs),
        seed,
        output_dir: base.output_dir.join(architecture).join(slug).join(format!("seed_{seed}")),
        checkpoint: None,
        ..base.clone()
    }
}

/// Trains and evaluates every matrix row for every seed and prints a table
/// per depth. With `full` the published presets are used and the results are
/// checked against the reference values (accuracy within 0.5 points,
/// iterations within 20%).
pub fn run_compare(cfg: &ExperimentConfig, full: bool) -> Result<CompareOutcome> {
    let seeds = if cfg.seeds.is_empty() { (0..5).collect() } else { cfg.seeds.clone() };
    let (train_n, test_n) = match (full, cfg.train_subset, cfg.test_subset) {
        (false, 0, 0) => (10_000, 2_000),
        (_, a, b) => (a, b),
    };
    let train_set = load_split(cfg, Split::Train, train_n)?;
    let test_set = load_split(cfg, Split::Test, test_n)?;
    let matrix: Vec<(String, Vec<MatrixRow>)> = if full {
        full_matrix().into_iter().map(|(a, r)| (a.to_string(), r)).collect()
    } else {
        desk_matrix(cfg)?
    };

    let mut all = Vec::new();
    let mut mismatches = Vec::new();
    for (arch, rows) in &matrix {
        let mut reports: Vec<MetricsReport> = Vec::new();
        for r in rows {
            let mut per_seed = Vec::new();
            for &seed in &seeds {
                let rc = row_config(cfg, arch, r, seed, full);
                eprintln!("== {arch} {} seed {seed}", r.label);
                let outcome = train_on(&rc, &train_set, None)?;
                let label = format!("{arch} {}", r.label);
                let m = seed_metrics(&rc, &outcome.params, &test_set, rc.kind()?, rc.method()?, &label)?;
                per_seed.push(SeedMetrics { seed, ..m });
            }
            let baseline = reports
                .iter()
                .find(|b| b.label == r.baseline)
                .map(|b| (b.label.clone(), b.mean_updates));
            let report = MetricsReport::aggregate(
                r.label,
                baseline.as_ref().map(|(l, u)| (l.as_str(), *u)),
                per_seed,
            );
            if let Some((iters, acc)) = r.reference.filter(|_| full) {
                let acc_pct = 100.0 * report.accuracy;
                if (acc_pct - acc).abs() > 0.5 || (report.mean_iters - iters).abs() > 0.2 * iters {
                    mismatches.push(format!(
                        "{arch} {}: {:.1} iters / {:.2}% vs {iters} / {acc}%",
                        r.label, report.mean_iters, acc_pct
                    ));
                }
            }
            reports.push(report);
        }
        println!("{arch}\n{}", format_table(&reports));
        for r in &mut reports {
            r.label = format!("{arch} {}", r.label);
            r.baseline = format!("{arch} {}", r.baseline);
        }
        all.extend(reports);
    }
    create_dir(&cfg.output_dir)?;
    write_metrics_csv(BufWriter::new(File::create(cfg.output_dir.join("metrics.csv"))?), &all)?;
    if full && !mismatches.is_empty() {
        return Err(ReproductionMismatch(mismatches).into());
    }
    Ok(CompareOutcome {
        reports: all,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_matrix_has_the_published_rows() {
        let m = full_matrix();
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].1.len(), 9);
        assert!(m.iter().all(|(_, rows)| rows.iter().all(|r| r.reference.is_some())));
        for (arch, rows) in &m {
            for r in rows {
                assert!(rows.iter().any(|b| b.label == r.baseline), "{arch} {}", r.label);
                let base = ExperimentConfig::default();
                let rc = row_config(&base, arch, r, 0, true);
                rc.train_config().unwrap();
            }
        }
    }

    #[test]
    fn row_configs_use_separate_directories() {
        let base = ExperimentConfig::default();
        let rows = ham_rows([None; 4]);
        let a = row_config(&base, "tiny3", &rows[0], 0, false);
        let b = row_config(&base, "tiny3", &rows[2], 1, false);
        assert_ne!(a.output_dir, b.output_dir);
        assert_eq!(a.epochs, base.epochs);
    }
}
