//! Experiment configuration: a TOML file plus `--key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use hopdeq::hopfield::{Architecture, MapKind, Variant};
use hopdeq::solvers::{Method, SolverConfig};
use hopdeq::training::TrainConfig;

/// Environment variable consulted when `data_dir` is not set.
pub const DATA_DIR_ENV: &str = "HOPDEQ_MNIST_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Sync,
    EvenOdd,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// `"ham"` or `"chn"`.
    pub variant: String,
    pub scheme: Scheme,
    /// `"picard"` or `"anderson"`.
    pub solver: String,
    /// A preset name (`layers3`, `layers5`, `layers7`, `tiny3`, `tiny5`) or
    /// dash-separated sizes such as `"784-128-10"`.
    pub architecture: String,
    pub epochs: usize,
    /// Stops training early while keeping the learning-rate schedule of `epochs`.
    pub max_epochs: Option<usize>,
    pub batch_size: usize,
    pub forward_iters: Option<usize>,
    pub backward_iters: Option<usize>,
    /// Forward damping; defaults to 0.5 for synchronous CHN, 1 otherwise.
    pub damping: Option<f64>,
    pub lr0: Option<f64>,
    pub lr_final_fraction: f64,
    pub seed: u64,
    /// Seeds for aggregate reports; empty means `[seed]` for `eval` and
    /// `0..5` for `compare`.
    pub seeds: Vec<u64>,
    pub chn_local_iters: usize,
    pub chn_local_damping: f64,
    pub anderson_window: usize,
    pub tikhonov: f64,
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Checkpoint read by `eval` and `trace`; defaults to `output_dir/checkpoint.hopdeq`.
    pub checkpoint: Option<PathBuf>,
    /// Training and test subset sizes; 0 keeps the full split.
    pub train_subset: usize,
    pub test_subset: usize,
    pub tol: f64,
    pub eval_max_iters: usize,
    pub trace_samples: usize,
    pub sim_instances: usize,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: "ham".into(),
            scheme: Scheme::Sync,
            solver: "picard".into(),
            architecture: "tiny3".into(),
            epochs: 2,
            max_epochs: None,
            batch_size: 64,
            forward_iters: None,
            backward_iters: None,
            damping: None,
            lr0: None,
            lr_final_fraction: 0.1,
            seed: 0,
            seeds: Vec::new(),
            chn_local_iters: 10,
            chn_local_damping: 0.5,
            anderson_window: 4,
            tikhonov: 1e-10,
            data_dir: None,
            output_dir: PathBuf::from("runs/default"),
            checkpoint: None,
            train_subset: 0,
            test_subset: 0,
            tol: 1e-4,
            eval_max_iters: 500,
            trace_samples: 16,
            sim_instances: 100,
            threads: 0,
        }
    }
}

/// Layer sizes for a preset name or a dash-separated size list.
pub fn parse_architecture(spec: &str) -> Result<Architecture> {
    let sizes = match spec {
        "layers3" => vec![784, 1990, 10],
        "layers5" => vec![784, 1280, 510, 200, 10],
        "layers7" => vec![784, 1024, 512, 256, 128, 70, 10],
        "tiny3" => vec![784, 32, 10],
        "tiny5" => vec![784, 64, 32, 16, 10],
        other => other
            .split('-')
            .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad layer size {t:?} in {other:?}")))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(Architecture::new(sizes)?)
}

/// Applies one `key=value` override to a TOML table. The value is parsed as
/// TOML when possible, otherwise taken as a string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let assignment = assignment.trim_start_matches("--");
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!(ConfigError(format!("override {assignment:?} is not key=value"))))?;
    let key = key.trim().replace('-', "_");
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    table.insert(key, value);
    Ok(())
}

/// Configuration problems reported with the usage exit code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .map_err(|e| anyhow!(ConfigError(format!("{}: {e}", p.display()))))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| anyhow!(ConfigError(e.to_string())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        self.variant()?;
        self.method()?;
        let arch = self.arch()?;
        if self.scheme == Scheme::EvenOdd && self.variant()? == Variant::Ham && arch.num_layers() % 2 == 0 {
            bail!(ConfigError(
                "even-odd HAM training needs an odd number of layers so the output layer is even".into()
            ));
        }
        if self.batch_size == 0 {
            bail!(ConfigError("batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn variant(&self) -> Result<Variant> {
        match self.variant.to_ascii_lowercase().as_str() {
            "ham" => Ok(Variant::Ham),
            "chn" => Ok(Variant::Chn),
            other => bail!(ConfigError(format!("unknown variant {other:?}"))),
        }
    }

    pub fn method(&self) -> Result<Method> {
        self.solver
            .parse::<Method>()
            .map_err(|e| anyhow!(ConfigError(e.to_string())))
    }

    pub fn arch(&self) -> Result<Architecture> {
        parse_architecture(&self.architecture).map_err(|e| anyhow!(ConfigError(e.to_string())))
    }

    pub fn kind(&self) -> Result<MapKind> {
        Ok(MapKind::for_scheme(self.variant()?, self.scheme == Scheme::EvenOdd))
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data/mnist"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.output_dir.join("checkpoint.hopdeq"))
    }

    /// Synchronous CHN iterations are damped by default and get twice the budget.
    fn damped_chn(&self) -> Result<bool> {
        Ok(self.kind()? == MapKind::ChnSync && self.forward_damping()? < 1.0)
    }

    pub fn forward_damping(&self) -> Result<f64> {
        let default = if self.kind()? == MapKind::ChnSync { 0.5 } else { 1.0 };
        let d = self.damping.unwrap_or(default);
        if !(d > 0.0 && d <= 1.0) {
            bail!(ConfigError(format!("damping must lie in (0, 1], got {d}")));
        }
        Ok(d)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let arch = self.arch()?;
        let hidden_depth = arch.num_layers();
        let (fwd, bwd) = match hidden_depth {
            0..=3 => (40, 8),
            4..=5 => (80, 16),
            _ => (120, 24),
        };
        let factor = if self.damped_chn()? { 2 } else { 1 };
        let damping = self.forward_damping()?;
        // The even-odd CHN adjoint runs on the undamped sync Jacobian, which
        // is rarely contractive, so it gets the damped sync budget.
        let (bwd_damping, bwd_factor) = match self.kind()? {
            MapKind::ChnEvenOdd => (0.5, 2),
            _ => (damping, factor),
        };
        let cfg = TrainConfig {
            kind: self.kind()?,
            method: self.method()?,
            epochs: self.epochs,
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            forward_iters: self.forward_iters.unwrap_or(fwd) * factor,
            backward_iters: self.backward_iters.unwrap_or(bwd) * bwd_factor,
            forward_damping: damping,
            backward_damping: bwd_damping,
            lr0: self.lr0.unwrap_or(if hidden_depth <= 3 { 0.01 } else { 0.005 }),
            lr_final_fraction: self.lr_final_fraction,
            seed: self.seed,
            chn_local_iters: self.chn_local_iters,
            chn_local_damping: self.chn_local_damping,
            tol: self.tol,
            ..TrainConfig::default()
        };
        cfg.validate().map_err(|e| anyhow!(ConfigError(e.to_string())))?;
        Ok(cfg)
    }

    /// Early-stopping solver used for evaluation and traces.
    pub fn eval_solver(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            method: self.method()?,
            damping: self.forward_damping()?,
            max_iters: self.eval_max_iters,
            tol: self.tol,
            anderson_window: self.anderson_window,
            tikhonov: self.tikhonov,
            safeguard: true,
            early_stop: true,
        };
        cfg.validate().map_err(|e| anyhow!(ConfigError(e.to_string())))?;
        Ok(cfg)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_parse_as_toml_with_string_fallback() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "--epochs=3").unwrap();
        apply_override(&mut t, "--architecture=784-64-10").unwrap();
        apply_override(&mut t, "seeds=[1, 2]").unwrap();
        apply_override(&mut t, "tol=1e-6").unwrap();
        assert_eq!(t["epochs"].as_integer(), Some(3));
        assert_eq!(t["architecture"].as_str(), Some("784-64-10"));
        assert_eq!(t["seeds"].as_array().unwrap().len(), 2);
        assert_eq!(t["tol"].as_float(), Some(1e-6));
        assert!(apply_override(&mut t, "--novalue").is_err());
    }

    #[test]
    fn presets_and_explicit_sizes() {
        assert_eq!(parse_architecture("layers5").unwrap().layer_sizes(), &[784, 1280, 510, 200, 10]);
        assert_eq!(parse_architecture("6-4-3").unwrap().layer_sizes(), &[6, 4, 3]);
        assert!(parse_architecture("6-x-3").is_err());
    }

    #[test]
    fn depth_defaults_and_damped_chn() {
        let cfg = ExperimentConfig::load(None, &["--architecture=layers5".into()]).unwrap();
        let t = cfg.train_config().unwrap();
        assert_eq!((t.forward_iters, t.backward_iters, t.lr0), (80, 16, 0.005));

        let cfg = ExperimentConfig::load(None, &["--variant=chn".into()]).unwrap();
        let t = cfg.train_config().unwrap();
        assert_eq!((t.forward_iters, t.backward_iters, t.forward_damping), (80, 16, 0.5));

        let cfg = ExperimentConfig::load(None, &["--variant=chn".into(), "--scheme=even_odd".into()]).unwrap();
        let t = cfg.train_config().unwrap();
        assert_eq!((t.forward_iters, t.forward_damping), (40, 1.0));
        assert_eq!((t.backward_iters, t.backward_damping), (16, 0.5));
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        for bad in ["--variant=xyz", "--solver=newton", "--bogus_key=1", "--batch_size=0"] {
            let err = ExperimentConfig::load(None, &[bad.into()]).unwrap_err();
            assert!(err.downcast_ref::<ConfigError>().is_some(), "{bad}: {err}");
        }
        let err = ExperimentConfig::load(
            None,
            &["--scheme=even_odd".into(), "--architecture=4-3-3-2".into()],
        )
        .unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }
}
