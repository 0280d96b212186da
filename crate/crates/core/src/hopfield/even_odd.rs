//! Even-odd splitting of layered networks.
//!
//! The permutation `P` reorders `[s_1; s_2; s_3; ...]` into
//! `[s_even; s_odd]` with `s_even = [s_2; s_4; ...]` and `s_odd = [s_1; s_3; ...]`.
//! Under `P` the hidden coupling becomes `[[0, W_P^T], [W_P, 0]]`, where block
//! `(i, j)` of `W_P` couples even layer `2j + 2` into odd layer `2i + 1`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewMut1, Zip};

use super::params::{InputDrive, ModelParams, Variant};
use crate::error::{check_len, Result};

/// One block of `W_P`, expressed through the layer interface matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Zero,
    /// `W_i`, mapping layer `i` into layer `i + 1`.
    Forward(usize),
    /// `W_i^T`, mapping layer `i + 1` into layer `i`.
    Transposed(usize),
}

impl Coupling {
    fn between(target: usize, source: usize) -> Self {
        if source + 1 == target {
            Coupling::Forward(source)
        } else if target + 1 == source {
            Coupling::Transposed(target)
        } else {
            Coupling::Zero
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvenOddOperator<'a> {
    params: &'a ModelParams,
    even_layers: Vec<usize>,
    odd_layers: Vec<usize>,
    /// `w_p[i][j]`: odd layer `2i + 1` <- even layer `2j + 2`.
    w_p: Vec<Vec<Coupling>>,
    b_even: Array1<f64>,
    b_odd: Array1<f64>,
}

/// Result of a fused step: the new even half and the odd half it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedStep {
    pub even: Array1<f64>,
    pub odd: Array1<f64>,
}

pub fn build_even_odd(p: &ModelParams) -> EvenOddOperator<'_> {
    let layout = p.layout();
    let even_layers: Vec<usize> = layout.even_layers().collect();
    let odd_layers: Vec<usize> = layout.odd_layers().collect();
    let w_p = odd_layers
        .iter()
        .map(|&o| even_layers.iter().map(|&e| Coupling::between(o, e)).collect())
        .collect();
    let gather = |layers: &[usize]| {
        let parts: Vec<ArrayView1<f64>> = layers.iter().map(|&k| p.bias(k).view()).collect();
        if parts.is_empty() {
            Array1::zeros(0)
        } else {
            ndarray::concatenate(ndarray::Axis(0), &parts).expect("1-d concatenation")
        }
    };
    EvenOddOperator {
        params: p,
        b_even: gather(&even_layers),
        b_odd: gather(&odd_layers),
        even_layers,
        odd_layers,
        w_p,
    }
}

impl<'a> EvenOddOperator<'a> {
    pub fn params(&self) -> &'a ModelParams {
        self.params
    }

    pub fn even_layers(&self) -> &[usize] {
        &self.even_layers
    }

    pub fn odd_layers(&self) -> &[usize] {
        &self.odd_layers
    }

    pub fn even_dim(&self) -> usize {
        self.b_even.len()
    }

    pub fn odd_dim(&self) -> usize {
        self.b_odd.len()
    }

    pub fn b_even(&self) -> &Array1<f64> {
        &self.b_even
    }

    pub fn b_odd(&self) -> &Array1<f64> {
        &self.b_odd
    }

    /// Block `(i, j)` of `W_P`.
    pub fn block(&self, i: usize, j: usize) -> Coupling {
        self.w_p[i][j]
    }

    /// Range of layer `k` inside its own half.
    fn half_range(&self, k: usize) -> std::ops::Range<usize> {
        let r = self.params.layout().permuted_range(k);
        if k.is_multiple_of(2) {
            r
        } else {
            let offset = self.even_dim();
            r.start - offset..r.end - offset
        }
    }

    fn coupling_matrix(&self, c: Coupling) -> Option<Array2<f64>> {
        match c {
            Coupling::Zero => None,
            Coupling::Forward(i) => Some(self.params.blocks[i].clone()),
            Coupling::Transposed(i) => Some(self.params.blocks[i].t().to_owned()),
        }
    }

    /// Dense `W_P (odd_dim x even_dim)`.
    pub fn dense_w_p(&self) -> Array2<f64> {
        let mut w = Array2::zeros((self.odd_dim(), self.even_dim()));
        for (i, &o) in self.odd_layers.iter().enumerate() {
            for (j, &e) in self.even_layers.iter().enumerate() {
                if let Some(m) = self.coupling_matrix(self.w_p[i][j]) {
                    w.slice_mut(s![self.half_range(o), self.half_range(e)]).assign(&m);
                }
            }
        }
        w
    }

    /// Dense `U_odd = [W_0; 0; ...] (odd_dim x d)`.
    pub fn dense_u_odd(&self) -> Array2<f64> {
        let p = self.params;
        let mut u = Array2::zeros((self.odd_dim(), p.arch().input_dim()));
        u.slice_mut(s![self.half_range(1), ..]).assign(&p.blocks[0]);
        u
    }

    fn check_halves(&self, even: Option<ArrayView1<f64>>, odd: Option<ArrayView1<f64>>, input: Option<&InputDrive>) -> Result<()> {
        if let Some(e) = even {
            check_len("even half", self.even_dim(), e.len())?;
        }
        if let Some(o) = odd {
            check_len("odd half", self.odd_dim(), o.len())?;
        }
        if let Some(u) = input {
            check_len("input drive", self.params.layout().layer_size(1), u.0.len())?;
        }
        Ok(())
    }

    /// `W_P rho(s_even) + b_odd + U_odd rho(x)`.
    pub(crate) fn odd_drive(&self, rho_even: ArrayView1<f64>, input: &InputDrive) -> Array1<f64> {
        let p = self.params;
        let mut out = Array1::zeros(self.odd_dim());
        for (i, &o) in self.odd_layers.iter().enumerate() {
            let mut view = out.slice_mut(s![self.half_range(o)]);
            view.fill(0.0);
            for (j, &e) in self.even_layers.iter().enumerate() {
                if self.w_p[i][j] != Coupling::Zero {
                    p.add_coupling(&mut view, o, e, rho_even.slice(s![self.half_range(e)]));
                }
            }
            view += p.bias(o);
            if o == 1 {
                view += &input.0;
            }
        }
        out
    }

    /// `W_P^T rho(s_odd) + b_even`.
    pub(crate) fn even_drive(&self, rho_odd: ArrayView1<f64>) -> Array1<f64> {
        let p = self.params;
        let mut out = Array1::zeros(self.even_dim());
        for (j, &e) in self.even_layers.iter().enumerate() {
            let mut view = out.slice_mut(s![self.half_range(e)]);
            view.fill(0.0);
            for (i, &o) in self.odd_layers.iter().enumerate() {
                if self.w_p[i][j] != Coupling::Zero {
                    p.add_coupling(&mut view, e, o, rho_odd.slice(s![self.half_range(o)]));
                }
            }
            view += p.bias(e);
        }
        out
    }

    /// `W_P v` for an even-half vector `v`.
    pub(crate) fn w_p_mul(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let p = self.params;
        let mut out = Array1::zeros(self.odd_dim());
        for (i, &o) in self.odd_layers.iter().enumerate() {
            let mut view = out.slice_mut(s![self.half_range(o)]);
            for (j, &e) in self.even_layers.iter().enumerate() {
                if self.w_p[i][j] != Coupling::Zero {
                    p.add_coupling(&mut view, o, e, v.slice(s![self.half_range(e)]));
                }
            }
        }
        out
    }

    /// `W_P^T v` for an odd-half vector `v`.
    pub(crate) fn w_p_t_mul(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let p = self.params;
        let mut out = Array1::zeros(self.even_dim());
        for (j, &e) in self.even_layers.iter().enumerate() {
            let mut view = out.slice_mut(s![self.half_range(e)]);
            for (i, &o) in self.odd_layers.iter().enumerate() {
                if self.w_p[i][j] != Coupling::Zero {
                    p.add_coupling(&mut view, e, o, v.slice(s![self.half_range(o)]));
                }
            }
        }
        out
    }

    fn rho(&self, v: ArrayView1<f64>) -> Array1<f64> {
        v.mapv(self.params.nonlinearity.evaluate)
    }

    fn times_rho_prime(&self, mut drive: Array1<f64>, s: ArrayView1<f64>) -> Array1<f64> {
        let nl = &self.params.nonlinearity;
        Zip::from(&mut drive)
            .and(&s)
            .for_each(|d, &si| *d *= nl.rho_prime(si));
        drive
    }

    pub(crate) fn odd_update_ham(&self, even: ArrayView1<f64>, input: &InputDrive) -> Array1<f64> {
        self.odd_drive(self.rho(even).view(), input)
    }

    pub(crate) fn even_update_ham(&self, odd: ArrayView1<f64>) -> Array1<f64> {
        self.even_drive(self.rho(odd).view())
    }

    /// One parallel HAM update of both halves from the previous iterate.
    pub fn eo_step_ham(
        &self,
        even: ArrayView1<f64>,
        odd: ArrayView1<f64>,
        input: &InputDrive,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        self.check_halves(Some(even), Some(odd), Some(input))?;
        Ok((self.even_update_ham(odd), self.odd_update_ham(even, input)))
    }

    /// One parallel CHN update of both halves; each half is multiplied by
    /// `rho'` of its own previous value.
    pub fn eo_step_chn(
        &self,
        even: ArrayView1<f64>,
        odd: ArrayView1<f64>,
        input: &InputDrive,
    ) -> Result<(Array1<f64>, Array1<f64>)> {
        self.check_halves(Some(even), Some(odd), Some(input))?;
        let e = self.times_rho_prime(self.even_drive(self.rho(odd).view()), even);
        let o = self.times_rho_prime(self.odd_drive(self.rho(even).view(), input), odd);
        Ok((e, o))
    }

    /// Advances the even half two time steps: the odd half is recomputed from
    /// `s_even` and immediately fed back.
    pub fn eo_fused_step_ham(&self, even: ArrayView1<f64>, input: &InputDrive) -> Result<FusedStep> {
        self.params.require(Variant::Ham)?;
        self.check_halves(Some(even), None, Some(input))?;
        Ok(self.fused_unchecked(even, input))
    }

    pub(crate) fn fused_unchecked(&self, even: ArrayView1<f64>, input: &InputDrive) -> FusedStep {
        let odd = self.odd_update_ham(even, input);
        let even = self.even_update_ham(odd.view());
        FusedStep { even, odd }
    }

    /// Even-half initialisation `W_P^T rho(s_odd^0) + b_even`, after which a
    /// synchronous step leaves `s_even` unchanged.
    pub fn eo_init(&self, odd0: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.params.require(Variant::Ham)?;
        self.check_halves(None, Some(odd0), None)?;
        Ok(self.even_update_ham(odd0))
    }

    /// Damped Picard iterations on the odd half with the even half frozen (CHN).
    pub(crate) fn chn_local_odd(
        &self,
        even: ArrayView1<f64>,
        mut odd: Array1<f64>,
        input: &InputDrive,
        iters: usize,
        damping: f64,
    ) -> Array1<f64> {
        let drive = self.odd_drive(self.rho(even).view(), input);
        for _ in 0..iters {
            chn_damped_update(&self.params.nonlinearity, &drive, odd.view_mut(), damping);
        }
        odd
    }

    /// Damped Picard iterations on the even half with the odd half frozen (CHN).
    pub(crate) fn chn_local_even(
        &self,
        odd: ArrayView1<f64>,
        mut even: Array1<f64>,
        iters: usize,
        damping: f64,
    ) -> Array1<f64> {
        let drive = self.even_drive(self.rho(odd).view());
        for _ in 0..iters {
            chn_damped_update(&self.params.nonlinearity, &drive, even.view_mut(), damping);
        }
        even
    }
}

fn chn_damped_update(
    nl: &super::nonlinearity::Nonlinearity,
    drive: &Array1<f64>,
    state: ArrayViewMut1<f64>,
    damping: f64,
) {
    Zip::from(state).and(drive).for_each(|s, &d| {
        let f = nl.rho_prime(*s) * d;
        *s = (1.0 - damping) * *s + damping * f;
    });
}
