use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1};

use super::{check_start, FixedPointMap, FixedPointResult, Progress, SolverConfig, Step};
use crate::error::Result;

/// Anderson acceleration with a FIFO window of past iterates and map values.
///
/// Mixing weights solve `min ||G a||^2 + lam ||a||^2` subject to `sum(a) = 1`,
/// with `lam` scaled by the largest squared residual norm in the window,
/// through the bordered normal equations, followed by one refinement step
/// against the unregularised system. The next iterate is
/// `beta * sum a_i f(x_i) + (1 - beta) * sum a_i x_i`.
pub fn anderson_solve(f: &dyn FixedPointMap, s0: ArrayView1<f64>, cfg: &SolverConfig) -> Result<FixedPointResult> {
    check_start(f, s0, cfg)?;
    let beta = cfg.damping;
    let m = cfg.anderson_window;
    let mut xs: VecDeque<Array1<f64>> = VecDeque::with_capacity(m);
    let mut fs: VecDeque<Array1<f64>> = VecDeque::with_capacity(m);
    let mut progress = Progress::new(cfg.max_iters);

    let mut x = s0.to_owned();
    // last accepted point, its residual and whether x came from a mixing step
    let mut previous: Option<(Array1<f64>, Array1<f64>, f64)> = None;
    let mut mixed = false;

    for _ in 0..cfg.max_iters {
        let fx = f.apply(x.view());
        let g = &fx - &x;
        let g_norm = g.dot(&g).sqrt();

        let next = match &previous {
            Some((x_prev, g_prev, prev_norm)) if cfg.safeguard && mixed && g_norm > *prev_norm => {
                // rejected: replace the mixing step by a damped Picard step
                mixed = false;
                x_prev + &(g_prev * beta)
            }
            _ => {
                if xs.len() == m {
                    xs.pop_front();
                    fs.pop_front();
                }
                xs.push_back(x.clone());
                fs.push_back(fx);
                let next = if xs.len() >= 2 {
                    mixing_weights(&xs, &fs, cfg.tikhonov).map(|alpha| {
                        let mut out = Array1::zeros(x.len());
                        for (i, &a) in alpha.iter().enumerate() {
                            out.scaled_add(a * beta, &fs[i]);
                            if beta != 1.0 {
                                out.scaled_add(a * (1.0 - beta), &xs[i]);
                            }
                        }
                        out
                    })
                } else {
                    None
                };
                mixed = next.is_some();
                let next = next.unwrap_or_else(|| &x + &(&g * beta));
                previous = Some((x.clone(), g, g_norm));
                next
            }
        };

        let step = progress.record(next.view(), x.view(), cfg);
        x = next;
        if let Step::Stop = step {
            break;
        }
    }
    Ok(progress.finish(x, f))
}

/// Solves `[[0, 1^T], [1, G^T G + lam I]] [nu; a] = [1; 0]` for the weights `a`.
fn mixing_weights(xs: &VecDeque<Array1<f64>>, fs: &VecDeque<Array1<f64>>, lam: f64) -> Option<Vec<f64>> {
    let k = xs.len();
    let residuals: Vec<Array1<f64>> = xs.iter().zip(fs).map(|(x, f)| f - x).collect();
    let mut plain = DMatrix::<f64>::zeros(k + 1, k + 1);
    for i in 0..k {
        plain[(0, i + 1)] = 1.0;
        plain[(i + 1, 0)] = 1.0;
        for j in i..k {
            let v = residuals[i].dot(&residuals[j]);
            plain[(i + 1, j + 1)] = v;
            plain[(j + 1, i + 1)] = v;
        }
    }
    // relative to the largest squared residual norm so the term stays
    // negligible once residuals become small
    let scale = (1..=k).map(|i| plain[(i, i)]).fold(0.0f64, f64::max);
    let lam = if scale > 0.0 { lam * scale } else { lam };
    let mut regularised = plain.clone();
    for i in 0..k {
        regularised[(i + 1, i + 1)] += lam;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[0] = 1.0;
    let lu = regularised.lu();
    let mut z = lu.solve(&rhs)?;
    let correction = lu.solve(&(&rhs - &plain * &z))?;
    z += correction;
    if z.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(z.iter().skip(1).copied().collect())
}
