//! Fixed-point solvers for `s = f(s)`: damped Picard and Anderson acceleration.

mod anderson;
mod picard;
pub mod trace;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

pub use anderson::anderson_solve;
pub use picard::picard_solve;

/// Relative residual above which an iteration is treated as diverged.
pub const DIVERGENCE_CUTOFF: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Picard,
    Anderson,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Picard => "picard",
            Method::Anderson => "anderson",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "picard" => Ok(Method::Picard),
            "anderson" => Ok(Method::Anderson),
            other => Err(Error::InvalidConfig(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Step `s <- (1 - damping) s + damping f(s)`.
    pub damping: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub anderson_window: usize,
    pub tikhonov: f64,
    /// Reject Anderson steps that increase the residual norm.
    pub safeguard: bool,
    /// Stop as soon as the relative residual drops below `tol`. When false
    /// exactly `max_iters` iterations are run (unless the iterate diverges).
    pub early_stop: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Picard,
            damping: 1.0,
            max_iters: 100,
            tol: 1e-4,
            anderson_window: 4,
            tikhonov: 1e-10,
            safeguard: true,
            early_stop: true,
        }
    }
}

impl SolverConfig {
    pub fn picard(max_iters: usize, tol: f64) -> Self {
        Self {
            max_iters,
            tol,
            ..Self::default()
        }
    }

    pub fn anderson(max_iters: usize, tol: f64) -> Self {
        Self {
            method: Method::Anderson,
            max_iters,
            tol,
            ..Self::default()
        }
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_early_stop(mut self, early_stop: bool) -> Self {
        self.early_stop = early_stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return fail(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.max_iters == 0 {
            return fail("max_iters must be positive".into());
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if self.anderson_window == 0 {
            return fail("anderson_window must be at least 1".into());
        }
        if self.tikhonov.is_nan() || self.tikhonov < 0.0 {
            return fail(format!("tikhonov must be nonnegative, got {}", self.tikhonov));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub equilibrium: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Relative residual of every iteration; `trace.len() == iterations`.
    pub trace: Vec<f64>,
    /// Total scalar state updates performed.
    pub update_count: u64,
}

impl FixedPointResult {
    pub fn final_residual(&self) -> f64 {
        self.trace.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Iterations needed to first reach `tol`, if ever.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.trace.iter().position(|&r| r < tol).map(|i| i + 1)
    }
}

/// A map whose fixed point is sought.
pub trait FixedPointMap {
    fn dim(&self) -> usize;

    fn apply(&self, s: ArrayView1<f64>) -> Array1<f64>;

    /// Scalar state updates performed by one application of the map.
    fn updates_per_iteration(&self) -> u64 {
        self.dim() as u64
    }
}

/// Adapts a closure into a [`FixedPointMap`].
pub struct FnMap<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(ArrayView1<f64>) -> Array1<f64>> FnMap<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(ArrayView1<f64>) -> Array1<f64>> FixedPointMap for FnMap<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, s: ArrayView1<f64>) -> Array1<f64> {
        (self.f)(s)
    }
}

/// `||s_next - s||_2 / ||s_next||_2`.
///
/// If `s_next = 0` the result is `+inf` unless `s = 0` as well, in which case it is 0.
pub fn relative_residual(s_next: ArrayView1<f64>, s: ArrayView1<f64>) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (&a, &b) in s_next.iter().zip(s.iter()) {
        diff += (a - b) * (a - b);
        norm += a * a;
    }
    if norm == 0.0 {
        return if diff == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (diff / norm).sqrt()
}

pub fn solve(f: &dyn FixedPointMap, s0: ArrayView1<f64>, cfg: &SolverConfig) -> Result<FixedPointResult> {
    match cfg.method {
        Method::Picard => picard_solve(f, s0, cfg),
        Method::Anderson => anderson_solve(f, s0, cfg),
    }
}

/// Shared bookkeeping for both solvers.
pub(crate) struct Progress {
    trace: Vec<f64>,
    converged: bool,
    diverged: bool,
}

pub(crate) enum Step {
    Continue,
    Stop,
}

impl Progress {
    fn new(capacity: usize) -> Self {
        Self {
            trace: Vec::with_capacity(capacity),
            converged: false,
            diverged: false,
        }
    }

    /// Records the move from `s` to `next` and decides whether to stop.
    fn record(&mut self, next: ArrayView1<f64>, s: ArrayView1<f64>, cfg: &SolverConfig) -> Step {
        if next.iter().any(|v| !v.is_finite()) {
            self.trace.push(f64::INFINITY);
            self.diverged = true;
            return Step::Stop;
        }
        let r = relative_residual(next, s);
        self.trace.push(r);
        if r.is_finite() && r > DIVERGENCE_CUTOFF {
            self.diverged = true;
            return Step::Stop;
        }
        self.converged = r < cfg.tol;
        if self.converged && cfg.early_stop {
            Step::Stop
        } else {
            Step::Continue
        }
    }

    fn finish(self, equilibrium: Array1<f64>, f: &dyn FixedPointMap) -> FixedPointResult {
        let iterations = self.trace.len();
        FixedPointResult {
            equilibrium,
            iterations,
            converged: self.converged && !self.diverged,
            diverged: self.diverged,
            update_count: iterations as u64 * f.updates_per_iteration(),
            trace: self.trace,
        }
    }
}

pub(crate) fn check_start(f: &dyn FixedPointMap, s0: ArrayView1<f64>, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    crate::error::check_len("initial state", f.dim(), s0.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn residual_examples() {
        let s = array![1.0, -2.0];
        assert_eq!(relative_residual(s.view(), s.view()), 0.0);
        assert_eq!(relative_residual(array![2.0, 0.0].view(), array![1.0, 0.0].view()), 0.5);
        let zero = array![0.0, 0.0];
        assert_eq!(relative_residual(zero.view(), s.view()), f64::INFINITY);
        assert_eq!(relative_residual(zero.view(), zero.view()), 0.0);
    }

    #[test]
    fn residual_matches_naive_norms() {
        let a = array![0.3, -1.2, 4.0, 0.01];
        let b = array![0.1, -1.0, 3.5, 0.2];
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..4 {
            num += (a[i] - b[i]) * (a[i] - b[i]);
            den += a[i] * a[i];
        }
        let expected = num.sqrt() / den.sqrt();
        assert!((relative_residual(a.view(), b.view()) - expected).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig::default().with_damping(1.5).validate().is_err());
        assert!(SolverConfig::default().with_damping(0.0).validate().is_err());
        assert!(SolverConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { anderson_window: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { max_iters: 0, ..Default::default() }.validate().is_err());
        assert_eq!("Anderson".parse::<Method>().unwrap(), Method::Anderson);
        assert!("broyden".parse::<Method>().is_err());
    }
}
