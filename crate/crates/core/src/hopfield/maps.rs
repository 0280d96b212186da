//! Hopfield DEQ maps packaged as [`FixedPointMap`]s for the solvers.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, ArrayView1};

use super::architecture::StateLayout;
use super::deq::{chn_map_unchecked, ham_map_unchecked};
use super::even_odd::{build_even_odd, EvenOddOperator};
use super::nonlinearity::rho_vec;
use super::params::{InputDrive, ModelParams, Variant};
use crate::error::{check_len, Error, Result};
use crate::solvers::FixedPointMap;

pub const DEFAULT_CHN_LOCAL_ITERS: usize = 10;
pub const DEFAULT_CHN_LOCAL_DAMPING: f64 = 0.5;

/// Which map is iterated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MapKind {
    /// `rho'(s) * (W~ rho(s) + b~ + U rho(x))` on the full hidden state.
    ChnSync,
    /// `W~ rho(s) + b~ + U rho(x)` on the full hidden state.
    HamSync,
    /// The fused two-step map on the even half only.
    HamFused,
    /// Alternating local equilibria of the odd, then even half (CHN).
    ChnEvenOdd,
}

impl MapKind {
    pub fn variant(self) -> Variant {
        match self {
            MapKind::ChnSync | MapKind::ChnEvenOdd => Variant::Chn,
            MapKind::HamSync | MapKind::HamFused => Variant::Ham,
        }
    }

    pub fn is_even_odd(self) -> bool {
        matches!(self, MapKind::HamFused | MapKind::ChnEvenOdd)
    }

    pub fn for_scheme(variant: Variant, even_odd: bool) -> Self {
        match (variant, even_odd) {
            (Variant::Chn, false) => MapKind::ChnSync,
            (Variant::Chn, true) => MapKind::ChnEvenOdd,
            (Variant::Ham, false) => MapKind::HamSync,
            (Variant::Ham, true) => MapKind::HamFused,
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::ChnSync => "chn_sync",
            MapKind::HamSync => "ham_sync",
            MapKind::HamFused => "ham_fused",
            MapKind::ChnEvenOdd => "chn_even_odd",
        })
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chn_sync" => Ok(MapKind::ChnSync),
            "ham_sync" => Ok(MapKind::HamSync),
            "ham_fused" | "ham_eo" => Ok(MapKind::HamFused),
            "chn_even_odd" | "chn_eo" => Ok(MapKind::ChnEvenOdd),
            _ => Err(Error::UnknownMapKind(s.to_string())),
        }
    }
}

/// A Hopfield DEQ map bound to one input sample.
///
/// The solver state is the natural-order hidden state, except for
/// [`MapKind::HamFused`] whose state is the even half `s_even`.
#[derive(Debug, Clone)]
pub struct HopfieldMap<'a> {
    kind: MapKind,
    params: &'a ModelParams,
    eo: EvenOddOperator<'a>,
    input: InputDrive,
    input_act: Array1<f64>,
    chn_local_iters: usize,
    chn_local_damping: f64,
}

impl<'a> HopfieldMap<'a> {
    pub fn new(kind: MapKind, params: &'a ModelParams, x: ArrayView1<f64>) -> Result<Self> {
        params.require(kind.variant())?;
        check_len("input", params.arch().input_dim(), x.len())?;
        let input_act = rho_vec(x, &params.nonlinearity)?;
        let input = InputDrive(params.blocks[0].dot(&input_act));
        Ok(Self {
            kind,
            params,
            eo: build_even_odd(params),
            input,
            input_act,
            chn_local_iters: DEFAULT_CHN_LOCAL_ITERS,
            chn_local_damping: DEFAULT_CHN_LOCAL_DAMPING,
        })
    }

    pub fn with_chn_local(mut self, iters: usize, damping: f64) -> Self {
        self.chn_local_iters = iters;
        self.chn_local_damping = damping;
        self
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn params(&self) -> &'a ModelParams {
        self.params
    }

    pub fn input(&self) -> &InputDrive {
        &self.input
    }

    /// `rho(x)`.
    pub fn input_activation(&self) -> &Array1<f64> {
        &self.input_act
    }

    pub fn chn_local(&self) -> (usize, f64) {
        (self.chn_local_iters, self.chn_local_damping)
    }

    pub fn even_odd(&self) -> &EvenOddOperator<'a> {
        &self.eo
    }

    pub fn initial_state(&self) -> Array1<f64> {
        Array1::zeros(self.dim())
    }

    /// Natural-order hidden state for a solver state. For the fused map the
    /// odd half is the one implied by `s_even`.
    pub fn full_state(&self, state: ArrayView1<f64>) -> Array1<f64> {
        match self.kind {
            MapKind::HamFused => {
                let odd = self.eo.odd_update_ham(state, &self.input);
                let layout = self.params.layout();
                layout.unpermute(layout.join(state, odd.view()).view())
            }
            _ => state.to_owned(),
        }
    }

    /// Output-layer values of a solver state.
    pub fn output(&self, state: ArrayView1<f64>) -> Array1<f64> {
        let layout = self.params.layout();
        match self.kind {
            MapKind::HamFused if StateLayout::is_even(self.params.arch().output_layer()) => {
                state.slice(s![layout.permuted_output_range()]).to_owned()
            }
            MapKind::HamFused => self.full_state(state).slice(s![layout.output_range()]).to_owned(),
            _ => state.slice(s![layout.output_range()]).to_owned(),
        }
    }
}

impl FixedPointMap for HopfieldMap<'_> {
    fn dim(&self) -> usize {
        match self.kind {
            MapKind::HamFused => self.eo.even_dim(),
            _ => self.params.layout().dim(),
        }
    }

    fn apply(&self, s: ArrayView1<f64>) -> Array1<f64> {
        match self.kind {
            MapKind::HamSync => ham_map_unchecked(self.params, s, &self.input),
            MapKind::ChnSync => chn_map_unchecked(self.params, s, &self.input),
            MapKind::HamFused => self.eo.fused_unchecked(s, &self.input).even,
            MapKind::ChnEvenOdd => {
                let layout = self.params.layout();
                let permuted = layout.permute(s);
                let (even, odd) = layout.split(&permuted);
                let (iters, damping) = (self.chn_local_iters, self.chn_local_damping);
                let odd = self.eo.chn_local_odd(even, odd.to_owned(), &self.input, iters, damping);
                let even = self.eo.chn_local_even(odd.view(), even.to_owned(), iters, damping);
                layout.unpermute(layout.join(even.view(), odd.view()).view())
            }
        }
    }

    /// Sync and fused maps touch every hidden unit once per iteration. An
    /// even-odd CHN iteration is charged `2 * chn_local_iters` local
    /// iterations at the full state size.
    fn updates_per_iteration(&self) -> u64 {
        let n = self.params.layout().dim() as u64;
        match self.kind {
            MapKind::ChnEvenOdd => 2 * self.chn_local_iters as u64 * n,
            _ => n,
        }
    }
}
