//! Energies and ODE velocities.
//!
//! The input layer is clamped to `x`; it enters through the `W_0` interaction
//! term only. Its self terms (`||x||^2 / 2`, or `x . rho(x) - L(x)` for the HAM)
//! are constants and are not included.

use ndarray::{Array1, ArrayView1, Zip};

use super::deq::{affine_drive, layer_activations};
use super::nonlinearity::lagrangian_sum;
use super::params::{ModelParams, Variant};
use crate::error::Result;

/// `-1/2 rho(s)^T W rho(s) - b^T rho(s)` over the full state with `s_0 = x`.
fn interaction(p: &ModelParams, acts: &[Array1<f64>], x_act: &Array1<f64>) -> f64 {
    let mut total = 0.0;
    for (i, w) in p.blocks.iter().enumerate() {
        let lower = if i == 0 { x_act } else { &acts[i] };
        total += acts[i + 1].dot(&w.dot(lower));
    }
    let bias: f64 = (1..p.num_layers()).map(|k| p.bias(k).dot(&acts[k])).sum();
    -total - bias
}

fn prepare(
    p: &ModelParams,
    s: ArrayView1<f64>,
    x: ArrayView1<f64>,
) -> Result<(Vec<Array1<f64>>, Array1<f64>)> {
    p.check_state(s)?;
    crate::error::check_len("input", p.arch().input_dim(), x.len())?;
    super::nonlinearity::rho_vec(s, &p.nonlinearity)?;
    let x_act = super::nonlinearity::rho_vec(x, &p.nonlinearity)?;
    Ok((layer_activations(p, s), x_act))
}

/// `E(s) = 1/2 ||s||^2 - 1/2 rho(s)^T W rho(s) - b^T rho(s)`.
pub fn energy_chn(s: ArrayView1<f64>, p: &ModelParams, x: ArrayView1<f64>) -> Result<f64> {
    p.require(Variant::Chn)?;
    let (acts, x_act) = prepare(p, s, x)?;
    Ok(0.5 * s.dot(&s) + interaction(p, &acts, &x_act))
}

/// `E(s) = s^T rho(s) - L(s) - 1/2 rho(s)^T W rho(s) - b^T rho(s)`.
pub fn energy_ham(s: ArrayView1<f64>, p: &ModelParams, x: ArrayView1<f64>) -> Result<f64> {
    p.require(Variant::Ham)?;
    let (acts, x_act) = prepare(p, s, x)?;
    let rho_all = s.mapv(p.nonlinearity.evaluate);
    let lagrangian = lagrangian_sum(s, &p.nonlinearity)?;
    Ok(s.dot(&rho_all) - lagrangian + interaction(p, &acts, &x_act))
}

pub fn energy(s: ArrayView1<f64>, p: &ModelParams, x: ArrayView1<f64>) -> Result<f64> {
    match p.variant {
        Variant::Chn => energy_chn(s, p, x),
        Variant::Ham => energy_ham(s, p, x),
    }
}

/// `ds/dt = -s + rho'(s) * (W rho(s) + b)` on the hidden coordinates.
pub fn chn_velocity(s: ArrayView1<f64>, p: &ModelParams, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (acts, _) = prepare(p, s, x)?;
    let input = p.input_drive(x)?;
    let mut v = affine_drive(p, &acts, &input);
    let nl = &p.nonlinearity;
    Zip::from(&mut v)
        .and(&s)
        .for_each(|v, &si| *v = -si + nl.rho_prime(si) * *v);
    Ok(v)
}

/// `ds/dt = -s + W rho(s) + b` on the hidden coordinates.
pub fn ham_velocity(s: ArrayView1<f64>, p: &ModelParams, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let (acts, _) = prepare(p, s, x)?;
    let input = p.input_drive(x)?;
    Ok(affine_drive(p, &acts, &input) - s)
}

pub fn velocity(s: ArrayView1<f64>, p: &ModelParams, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    match p.variant {
        Variant::Chn => chn_velocity(s, p, x),
        Variant::Ham => ham_velocity(s, p, x),
    }
}
