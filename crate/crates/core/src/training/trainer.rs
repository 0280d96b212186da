//! Epoch loop: fixed-budget forward solves, recurrent backprop, Madam.

use std::io::Write;

use ndarray::{s, Array1, ArrayView1};
use rayon::prelude::*;

use super::{batch_param_grads, lr_schedule, madam_step, mse_loss, recurrent_backprop_cotangents};
use super::{BackpropConfig, LayerCotangents, MadamConfig, OptimizerState};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hopfield::{HopfieldMap, MapKind, ModelParams, StateLayout};
use crate::solvers::{solve, FixedPointMap, FixedPointResult, Method, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: MapKind,
    pub method: Method,
    /// Length of the learning-rate schedule.
    pub epochs: usize,
    /// Stop after this many epochs while keeping the schedule of `epochs`.
    pub max_epochs: Option<usize>,
    pub batch_size: usize,
    pub forward_iters: usize,
    pub backward_iters: usize,
    pub forward_damping: f64,
    pub backward_damping: f64,
    pub lr0: f64,
    pub lr_final_fraction: f64,
    pub seed: u64,
    pub chn_local_iters: usize,
    pub chn_local_damping: f64,
    /// Convergence threshold used for reported iteration counts.
    pub tol: f64,
    pub madam: MadamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: MapKind::HamSync,
            method: Method::Picard,
            epochs: 10,
            max_epochs: None,
            batch_size: 64,
            forward_iters: 40,
            backward_iters: 8,
            forward_damping: 1.0,
            backward_damping: 1.0,
            lr0: 0.01,
            lr_final_fraction: 0.1,
            seed: 0,
            chn_local_iters: crate::hopfield::maps::DEFAULT_CHN_LOCAL_ITERS,
            chn_local_damping: crate::hopfield::maps::DEFAULT_CHN_LOCAL_DAMPING,
            tol: 1e-4,
            madam: MadamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn forward_solver(&self) -> SolverConfig {
        SolverConfig {
            method: self.method,
            damping: self.forward_damping,
            max_iters: self.forward_iters,
            tol: self.tol,
            early_stop: false,
            ..SolverConfig::default()
        }
    }

    pub fn backprop(&self) -> BackpropConfig {
        BackpropConfig {
            iters: self.backward_iters,
            damping: self.backward_damping,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.forward_iters == 0 || self.backward_iters == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, forward_iters and backward_iters must be positive".into(),
            ));
        }
        if self.lr0.is_nan() || self.lr0 <= 0.0 {
            return Err(Error::InvalidConfig(format!("lr0 must be positive, got {}", self.lr0)));
        }
        self.forward_solver().validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub accuracy: f64,
    pub mean_iters: f64,
}

pub fn write_train_log<W: Write>(writer: W, rows: &[LogRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["epoch", "split", "loss", "accuracy", "mean_iters"]).map_err(to_err)?;
    for r in rows {
        w.write_record(&[
            r.epoch.to_string(),
            r.split.to_string(),
            format!("{:.6}", r.loss),
            format!("{:.6}", r.accuracy),
            format!("{:.4}", r.mean_iters),
        ])
        .map_err(to_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Position of the output layer inside a solver state.
fn output_range(map: &HopfieldMap<'_>) -> Result<std::ops::Range<usize>> {
    let p = map.params();
    let layout = p.layout();
    match map.kind() {
        MapKind::HamFused => {
            if StateLayout::is_even(p.arch().output_layer()) {
                Ok(layout.permuted_output_range())
            } else {
                Err(Error::InvalidConfig(
                    "fused even-odd training needs an even output layer (an odd number of layers)".into(),
                ))
            }
        }
        _ => Ok(layout.output_range()),
    }
}

pub fn argmax(v: ArrayView1<f64>) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

struct SampleOutcome {
    loss: f64,
    correct: bool,
    iters_to_tol: usize,
    cotangents: LayerCotangents,
}

fn train_sample(p: &ModelParams, x: ArrayView1<f64>, target: ArrayView1<f64>, label: u8, cfg: &TrainConfig) -> Result<SampleOutcome> {
    let map = HopfieldMap::new(cfg.kind, p, x)?.with_chn_local(cfg.chn_local_iters, cfg.chn_local_damping);
    let range = output_range(&map)?;
    let sol = solve(&map, map.initial_state().view(), &cfg.forward_solver())?;
    if sol.diverged {
        return Err(Error::Diverged { iteration: sol.iterations });
    }
    let out = sol.equilibrium.slice(s![range.clone()]);
    let (loss, dy) = mse_loss(out, target)?;
    let mut g = Array1::zeros(map.dim());
    g.slice_mut(s![range]).assign(&dy);
    let cotangents = recurrent_backprop_cotangents(&map, sol.equilibrium.view(), g.view(), cfg.backprop())?;
    Ok(SampleOutcome {
        loss,
        correct: argmax(out) == label as usize,
        iters_to_tol: sol.iterations_to(cfg.tol).unwrap_or(sol.iterations),
        cotangents,
    })
}

/// Trains `params` in place and returns one train row (and one test row when
/// `test` is given) per epoch.
pub fn train(
    params: &mut ModelParams,
    train_set: &Dataset,
    test: Option<(&Dataset, &SolverConfig)>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&[LogRow]),
) -> Result<Vec<LogRow>> {
    cfg.validate()?;
    let mut opt = OptimizerState::new(params, cfg.madam);
    let mut log = Vec::new();
    let run = cfg.max_epochs.map_or(cfg.epochs, |m| m.min(cfg.epochs));
    for epoch in 0..run {
        let lr = lr_schedule(epoch as f64, cfg.epochs, cfg.lr0, cfg.lr_final_fraction)?;
        let shuffle_seed = cfg.seed.wrapping_add((epoch as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let (mut loss_sum, mut correct, mut iters) = (0.0, 0usize, 0usize);
        for (step, batch) in train_set.batches(cfg.batch_size, shuffle_seed, true)?.enumerate() {
            let snapshot = &*params;
            let outcomes: Vec<Result<SampleOutcome>> = (0..batch.indices.len())
                .into_par_iter()
                .map(|r| train_sample(snapshot, batch.inputs.row(r), batch.targets.row(r), batch.labels[r], cfg))
                .collect();
            let mut cots = Vec::with_capacity(outcomes.len());
            for o in outcomes {
                let o = o.map_err(|e| match e {
                    Error::Diverged { .. } | Error::NonFiniteAdjoint { .. } | Error::NonFinite { .. } => {
                        Error::TrainingDiverged { epoch, step }
                    }
                    other => other,
                })?;
                loss_sum += o.loss;
                correct += o.correct as usize;
                iters += o.iters_to_tol;
                cots.push(o.cotangents);
            }
            let mut grads = batch_param_grads(&cots);
            grads.scale(1.0 / cots.len() as f64);
            if !grads.max_abs().is_finite() {
                return Err(Error::TrainingDiverged { epoch, step });
            }
            madam_step(params, &grads, &mut opt, lr)?;
        }
        let n = train_set.len() as f64;
        let mut rows = vec![LogRow {
            epoch,
            split: "train",
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
            mean_iters: iters as f64 / n,
        }];
        if let Some((test_set, solver)) = test {
            let report = evaluate(params, test_set, cfg.kind, solver, cfg.chn_local_iters, cfg.chn_local_damping)?;
            rows.push(LogRow {
                epoch,
                split: "test",
                loss: report.loss,
                accuracy: report.accuracy,
                mean_iters: report.mean_iters(),
            });
        }
        on_epoch(&rows);
        log.extend(rows);
    }
    Ok(log)
}

/// Per-sample evaluation results.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub loss: f64,
    pub accuracy: f64,
    /// Iterations until the residual first fell below tolerance (the budget if never).
    pub iterations: Vec<usize>,
    /// Scalar state updates spent until convergence, per sample.
    pub updates: Vec<u64>,
    pub converged: usize,
    pub traces: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn mean_iters(&self) -> f64 {
        mean(self.iterations.iter().map(|&v| v as f64))
    }

    pub fn std_iters(&self) -> f64 {
        let m = self.mean_iters();
        mean(self.iterations.iter().map(|&v| (v as f64 - m).powi(2))).sqrt()
    }

    pub fn mean_updates(&self) -> f64 {
        mean(self.updates.iter().map(|&v| v as f64))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Solves every sample of `ds` with `solver` (normally early-stopping at
/// `tol = 1e-4`) and reports loss, accuracy and iteration counts.
pub fn evaluate(
    params: &ModelParams,
    ds: &Dataset,
    kind: MapKind,
    solver: &SolverConfig,
    chn_local_iters: usize,
    chn_local_damping: f64,
) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results: Vec<Result<(f64, bool, FixedPointResult)>> = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let map = HopfieldMap::new(kind, params, ds.image(i))?.with_chn_local(chn_local_iters, chn_local_damping);
            let sol = solve(&map, map.initial_state().view(), solver)?;
            if sol.diverged {
                return Err(Error::Diverged { iteration: sol.iterations });
            }
            let out = map.output(sol.equilibrium.view());
            let target = Array1::from(crate::data::one_hot(ds.labels[i]).to_vec());
            let (loss, _) = mse_loss(out.view(), target.view())?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { index: i, value: loss });
            }
            let correct = argmax(out.view()) == ds.labels[i] as usize;
            Ok((loss, correct, sol))
        })
        .collect();
    let mut report = EvalReport {
        loss: 0.0,
        accuracy: 0.0,
        iterations: Vec::with_capacity(ds.len()),
        updates: Vec::with_capacity(ds.len()),
        converged: 0,
        traces: Vec::with_capacity(ds.len()),
    };
    for r in results {
        let (loss, correct, sol) = r?;
        report.loss += loss;
        report.accuracy += correct as u8 as f64;
        let per_iter = if sol.iterations == 0 { 0 } else { sol.update_count / sol.iterations as u64 };
        let iters = sol.iterations_to(solver.tol).unwrap_or(sol.iterations);
        report.converged += sol.converged as usize;
        report.iterations.push(iters);
        report.updates.push(iters as u64 * per_iter);
        report.traces.push(sol.trace);
    }
    report.loss /= ds.len() as f64;
    report.accuracy /= ds.len() as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode_idx, parse_idx, Split};
    use crate::hopfield::{Architecture, Variant};
    use crate::training::xavier_init;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two separable classes on 6 inputs.
    fn toy_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            for j in 0..6 {
                let hot = (j < 3) == (label == 0);
                let base: u8 = if hot { 200 } else { 30 };
                pixels.push(base.saturating_add(rng.random_range(0..40)));
            }
            labels.push(label);
        }
        let images = parse_idx(&encode_idx(&[n, 6], &pixels)).unwrap();
        let labels = parse_idx(&encode_idx(&[n], &labels)).unwrap();
        Dataset::from_idx(&images, &labels, Split::Train).unwrap()
    }

    #[test]
    fn overfits_a_small_batch() {
        let ds = toy_dataset(8, 1);
        let arch = Architecture::new(vec![6, 4, 10]).unwrap();
        let mut p = xavier_init(&arch, Variant::Ham, 0);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 8,
            forward_iters: 30,
            backward_iters: 20,
            lr0: 0.05,
            lr_final_fraction: 1.0,
            ..TrainConfig::default()
        };
        let log = train(&mut p, &ds, None, &cfg, |_| {}).unwrap();
        let first = log.first().unwrap().loss;
        let last = log.last().unwrap().loss;
        assert!(last < 0.5 * first, "{first} -> {last}");
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy_dataset(20, 2);
        let arch = Architecture::new(vec![6, 5, 10]).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 6,
            ..TrainConfig::default()
        };
        let run = || {
            let mut p = xavier_init(&arch, Variant::Ham, 3);
            train(&mut p, &ds, None, &cfg, |_| {}).unwrap();
            crate::hopfield::checkpoint::to_bytes(&p)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_epochs_keep_initialisation() {
        let ds = toy_dataset(4, 3);
        let arch = Architecture::new(vec![6, 3, 10]).unwrap();
        let mut p = xavier_init(&arch, Variant::Ham, 1);
        let init = p.clone();
        let log = train(&mut p, &ds, None, &TrainConfig { epochs: 0, ..TrainConfig::default() }, |_| {}).unwrap();
        assert!(log.is_empty());
        assert_eq!(p, init);
    }

    #[test]
    fn constant_map_converges_immediately() {
        let ds = toy_dataset(6, 4);
        let mut p = ModelParams::zeros(Architecture::new(vec![6, 3, 10]).unwrap(), Variant::Ham);
        p.biases.iter_mut().for_each(|b| b.fill(0.3));
        let solver = SolverConfig::picard(50, 1e-4);
        let r = evaluate(&p, &ds, MapKind::HamSync, &solver, 10, 0.5).unwrap();
        assert!(r.iterations.iter().all(|&i| i <= 2));
        assert_eq!(r.converged, 6);
    }

    #[test]
    fn log_csv_header() {
        let mut buf = Vec::new();
        let rows = [LogRow { epoch: 0, split: "train", loss: 0.5, accuracy: 0.25, mean_iters: 3.0 }];
        write_train_log(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,split,loss,accuracy,mean_iters\n0,train,"));
    }
}
