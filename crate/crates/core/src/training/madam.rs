//! Madam: a multiplicative optimizer with normalised, clipped gradients.

use ndarray::{ArrayViewMut, Dimension, Zip};

use crate::error::{check_len, Result};
use crate::hopfield::{ModelParams, ParamGrads};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadamConfig {
    pub p_scale: f64,
    pub g_bound: f64,
    pub beta: f64,
    pub eps: f64,
}

impl Default for MadamConfig {
    fn default() -> Self {
        Self {
            p_scale: 1024.0,
            g_bound: 3.0,
            beta: 0.999,
            eps: 1e-12,
        }
    }
}

/// Second moments, per-tensor magnitude caps and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: MadamConfig,
    pub second_moments: ParamGrads,
    /// `p_scale * rms(initial tensor)`, blocks first, then biases.
    pub max_magnitude: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, config: MadamConfig) -> Self {
        let rms = |it: &mut dyn Iterator<Item = &f64>, n: usize| {
            if n == 0 {
                0.0
            } else {
                (it.map(|v| v * v).sum::<f64>() / n as f64).sqrt()
            }
        };
        let max_magnitude = params
            .blocks
            .iter()
            .map(|b| config.p_scale * rms(&mut b.iter(), b.len()))
            .chain(params.biases.iter().map(|b| config.p_scale * rms(&mut b.iter(), b.len())))
            .collect();
        Self {
            config,
            second_moments: ParamGrads::zeros_like(params),
            max_magnitude,
            step: 0,
        }
    }
}

/// One Madam step:
/// `v <- beta v + (1 - beta) g^2`, `g* = clip(g / sqrt(v / (1 - beta^t) + eps), +-g_bound)`,
/// `w <- w exp(-lr g* sign(w))`, then `|w| <= max_magnitude`.
pub fn madam_step(params: &mut ModelParams, grads: &ParamGrads, state: &mut OptimizerState, lr: f64) -> Result<()> {
    check_len("gradient blocks", params.blocks.len(), grads.blocks.len())?;
    check_len("gradient biases", params.biases.len(), grads.biases.len())?;
    for (w, g) in params.blocks.iter().zip(&grads.blocks) {
        check_len("gradient block size", w.len(), g.len())?;
    }
    for (w, g) in params.biases.iter().zip(&grads.biases) {
        check_len("gradient bias size", w.len(), g.len())?;
    }
    state.step += 1;
    let cfg = state.config;
    let correction = 1.0 - cfg.beta.powi(state.step.min(i32::MAX as u64) as i32);
    let num_blocks = params.blocks.len();
    for (i, (w, g)) in params.blocks.iter_mut().zip(&grads.blocks).enumerate() {
        let v = &mut state.second_moments.blocks[i];
        update(w.view_mut(), g.view(), v.view_mut(), cfg, correction, lr, state.max_magnitude[i]);
    }
    for (i, (w, g)) in params.biases.iter_mut().zip(&grads.biases).enumerate() {
        let v = &mut state.second_moments.biases[i];
        let cap = state.max_magnitude[num_blocks + i];
        update(w.view_mut(), g.view(), v.view_mut(), cfg, correction, lr, cap);
    }
    Ok(())
}

fn update<D: Dimension>(
    w: ArrayViewMut<f64, D>,
    g: ndarray::ArrayView<f64, D>,
    v: ArrayViewMut<f64, D>,
    cfg: MadamConfig,
    correction: f64,
    lr: f64,
    cap: f64,
) {
    Zip::from(w).and(g).and(v).for_each(|w, &g, v| {
        *v = cfg.beta * *v + (1.0 - cfg.beta) * g * g;
        let normed = (g / (*v / correction + cfg.eps).sqrt()).clamp(-cfg.g_bound, cfg.g_bound);
        let sign = if *w > 0.0 {
            1.0
        } else if *w < 0.0 {
            -1.0
        } else {
            0.0
        };
        *w = (*w * (-lr * normed * sign).exp()).clamp(-cap, cap);
    });
}
