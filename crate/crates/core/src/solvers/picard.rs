use ndarray::{Array1, ArrayView1, Zip};

use super::{check_start, FixedPointMap, FixedPointResult, Progress, SolverConfig, Step};
use crate::error::Result;

/// Damped Picard iteration `s <- (1 - a) s + a f(s)`; equivalent to forward
/// Euler with step `a` on `ds/dt = f(s) - s`.
pub fn picard_solve(f: &dyn FixedPointMap, s0: ArrayView1<f64>, cfg: &SolverConfig) -> Result<FixedPointResult> {
    check_start(f, s0, cfg)?;
    let a = cfg.damping;
    let mut s = s0.to_owned();
    let mut progress = Progress::new(cfg.max_iters);
    for _ in 0..cfg.max_iters {
        let mut next: Array1<f64> = f.apply(s.view());
        if a != 1.0 {
            Zip::from(&mut next)
                .and(&s)
                .for_each(|n, &si| *n = (1.0 - a) * si + a * *n);
        }
        let step = progress.record(next.view(), s.view(), cfg);
        s = next;
        if let Step::Stop = step {
            break;
        }
    }
    Ok(progress.finish(s, f))
}
