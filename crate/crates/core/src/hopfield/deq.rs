//! Synchronous DEQ maps of layered CHNs and HAMs on the hidden (input-separated) state.

use ndarray::{Array1, ArrayView1, ArrayViewMut1, Zip};

use super::params::{InputDrive, ModelParams, Variant};
use crate::error::{check_len, Result};

/// `rho(s_k)` for every hidden layer; index 0 is left empty.
pub(crate) fn layer_activations(p: &ModelParams, s: ArrayView1<f64>) -> Vec<Array1<f64>> {
    let layout = p.layout();
    let nl = &p.nonlinearity;
    let mut acts = Vec::with_capacity(p.num_layers());
    acts.push(Array1::zeros(0));
    for k in 1..p.num_layers() {
        acts.push(s.slice(ndarray::s![layout.range(k)]).mapv(nl.evaluate));
    }
    acts
}

/// Writes the affine drive of hidden layer `k`,
/// `(W~ rho(s) + b~ + U rho(x))_k`, given per-layer activations.
///
/// Summation order is fixed (lower neighbour, upper neighbour, bias, input)
/// so that the natural and even-odd layouts produce bitwise-equal results.
pub(crate) fn layer_drive(
    p: &ModelParams,
    k: usize,
    acts: &[Array1<f64>],
    input: &InputDrive,
    out: &mut ArrayViewMut1<f64>,
) {
    out.fill(0.0);
    if k >= 2 {
        p.add_coupling(out, k, k - 1, acts[k - 1].view());
    }
    if k + 1 < p.num_layers() {
        p.add_coupling(out, k, k + 1, acts[k + 1].view());
    }
    *out += p.bias(k);
    if k == 1 {
        *out += &input.0;
    }
}

/// `W~ rho(s) + b~ + U rho(x)` in natural layer order.
pub(crate) fn affine_drive(p: &ModelParams, acts: &[Array1<f64>], input: &InputDrive) -> Array1<f64> {
    let layout = p.layout();
    let mut out = Array1::zeros(layout.dim());
    for k in 1..p.num_layers() {
        let mut view = out.slice_mut(ndarray::s![layout.range(k)]);
        layer_drive(p, k, acts, input, &mut view);
    }
    out
}

/// `W~ v` for a per-layer split `v` (index 0 unused).
pub(crate) fn hidden_coupling(p: &ModelParams, v: &[Array1<f64>]) -> Array1<f64> {
    let layout = p.layout();
    let mut out = Array1::zeros(layout.dim());
    for k in 1..p.num_layers() {
        let mut view = out.slice_mut(ndarray::s![layout.range(k)]);
        if k >= 2 {
            p.add_coupling(&mut view, k, k - 1, v[k - 1].view());
        }
        if k + 1 < p.num_layers() {
            p.add_coupling(&mut view, k, k + 1, v[k + 1].view());
        }
    }
    out
}

/// Splits a natural-order hidden vector into per-layer pieces (index 0 empty).
pub(crate) fn split_layers(p: &ModelParams, v: ArrayView1<f64>) -> Vec<Array1<f64>> {
    let layout = p.layout();
    let mut out = Vec::with_capacity(p.num_layers());
    out.push(Array1::zeros(0));
    for k in 1..p.num_layers() {
        out.push(v.slice(ndarray::s![layout.range(k)]).to_owned());
    }
    out
}

pub(crate) fn ham_map_unchecked(p: &ModelParams, s: ArrayView1<f64>, input: &InputDrive) -> Array1<f64> {
    let acts = layer_activations(p, s);
    affine_drive(p, &acts, input)
}

pub(crate) fn chn_map_unchecked(p: &ModelParams, s: ArrayView1<f64>, input: &InputDrive) -> Array1<f64> {
    let acts = layer_activations(p, s);
    let mut drive = affine_drive(p, &acts, input);
    let nl = &p.nonlinearity;
    Zip::from(&mut drive)
        .and(&s)
        .for_each(|d, &si| *d *= nl.rho_prime(si));
    drive
}

fn check(p: &ModelParams, s: ArrayView1<f64>, input: &InputDrive) -> Result<()> {
    p.check_state(s)?;
    check_len("input drive", p.arch().layer_sizes()[1], input.0.len())
}

/// One synchronous step of the HAM DEQ, `f(s) = W~ rho(s) + b~ + U rho(x)`.
pub fn ham_deq_map(s: ArrayView1<f64>, p: &ModelParams, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let input = p.input_drive(x)?;
    ham_deq_map_with_drive(s, p, &input)
}

pub fn ham_deq_map_with_drive(
    s: ArrayView1<f64>,
    p: &ModelParams,
    input: &InputDrive,
) -> Result<Array1<f64>> {
    check(p, s, input)?;
    Ok(ham_map_unchecked(p, s, input))
}

/// One synchronous step of the CHN DEQ, `f(s) = rho'(s) * (W~ rho(s) + b~ + U rho(x))`.
pub fn chn_deq_map(s: ArrayView1<f64>, p: &ModelParams, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let input = p.input_drive(x)?;
    chn_deq_map_with_drive(s, p, &input)
}

pub fn chn_deq_map_with_drive(
    s: ArrayView1<f64>,
    p: &ModelParams,
    input: &InputDrive,
) -> Result<Array1<f64>> {
    check(p, s, input)?;
    Ok(chn_map_unchecked(p, s, input))
}

/// The synchronous DEQ step for whichever variant `p` belongs to.
pub fn deq_map_with_drive(
    s: ArrayView1<f64>,
    p: &ModelParams,
    input: &InputDrive,
) -> Result<Array1<f64>> {
    match p.variant {
        Variant::Chn => chn_deq_map_with_drive(s, p, input),
        Variant::Ham => ham_deq_map_with_drive(s, p, input),
    }
}
