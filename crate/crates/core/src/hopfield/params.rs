use std::fmt;
use std::str::FromStr;

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayViewMut1};

use super::architecture::{Architecture, StateLayout};
use super::nonlinearity::Nonlinearity;
use crate::error::{check_len, Error, Result};

/// Which Hopfield energy/dynamics the parameters belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Chn,
    Ham,
}

impl Variant {
    pub fn code(self) -> u8 {
        match self {
            Variant::Chn => 0,
            Variant::Ham => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Variant::Chn),
            1 => Some(Variant::Ham),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Chn => "CHN",
            Variant::Ham => "HAM",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chn" => Ok(Variant::Chn),
            "ham" => Ok(Variant::Ham),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

/// Weights of a layered Hopfield network.
///
/// `blocks[i]` has shape `(n_{i+1}, n_i)` and couples layer `i` to layer
/// `i + 1`; the reverse direction uses its transpose, so the implied full
/// matrix is symmetric and block-tridiagonal with zero diagonal blocks.
/// `blocks[0]` is the input map `U`. `biases[k - 1]` belongs to hidden layer `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Architecture,
    layout: StateLayout,
    pub variant: Variant,
    pub nonlinearity: Nonlinearity,
    pub blocks: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl ModelParams {
    pub fn zeros(arch: Architecture, variant: Variant) -> Self {
        let sizes = arch.layer_sizes();
        let blocks = sizes
            .windows(2)
            .map(|w| Array2::zeros((w[1], w[0])))
            .collect();
        let biases = sizes[1..].iter().map(|&n| Array1::zeros(n)).collect();
        let layout = arch.layout();
        Self {
            arch,
            layout,
            variant,
            nonlinearity: Nonlinearity::default(),
            blocks,
            biases,
        }
    }

    pub fn new(
        arch: Architecture,
        variant: Variant,
        blocks: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        let sizes = arch.layer_sizes();
        check_len("number of weight blocks", sizes.len() - 1, blocks.len())?;
        check_len("number of bias vectors", sizes.len() - 1, biases.len())?;
        for (i, b) in blocks.iter().enumerate() {
            check_len("weight block rows", sizes[i + 1], b.nrows())?;
            check_len("weight block columns", sizes[i], b.ncols())?;
        }
        for (k, b) in biases.iter().enumerate() {
            check_len("bias length", sizes[k + 1], b.len())?;
        }
        let layout = arch.layout();
        Ok(Self {
            arch,
            layout,
            variant,
            nonlinearity: Nonlinearity::default(),
            blocks,
            biases,
        })
    }

    pub fn with_nonlinearity(mut self, nl: Nonlinearity) -> Self {
        self.nonlinearity = nl;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn num_layers(&self) -> usize {
        self.arch.num_layers()
    }

    pub fn bias(&self, k: usize) -> &Array1<f64> {
        &self.biases[k - 1]
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub(crate) fn require(&self, variant: Variant) -> Result<()> {
        if self.variant == variant {
            Ok(())
        } else {
            Err(Error::WrongVariant {
                expected: match variant {
                    Variant::Chn => "CHN",
                    Variant::Ham => "HAM",
                },
            })
        }
    }

    pub(crate) fn check_state(&self, s: ArrayView1<f64>) -> Result<()> {
        check_len("hidden state", self.layout.dim(), s.len())
    }

    /// `U rho(x)` restricted to its nonzero block, i.e. `W_0 rho(x)`.
    pub fn input_drive(&self, x: ArrayView1<f64>) -> Result<InputDrive> {
        check_len("input", self.arch.input_dim(), x.len())?;
        let act = self.nonlinearity.apply(x);
        Ok(InputDrive(self.blocks[0].dot(&act)))
    }

    /// Adds the coupling from layer `source` into layer `target`
    /// (`W_{source}` upward, `W_{target}^T` downward).
    #[inline]
    pub(crate) fn add_coupling(
        &self,
        out: &mut ArrayViewMut1<f64>,
        target: usize,
        source: usize,
        act: ArrayView1<f64>,
    ) {
        if source + 1 == target {
            general_mat_vec_mul(1.0, &self.blocks[source], &act, 1.0, out);
        } else {
            debug_assert_eq!(target + 1, source);
            general_mat_vec_mul(1.0, &self.blocks[target].t(), &act, 1.0, out);
        }
    }

    /// Dense `W~ (N x N)` over hidden layers, for diagnostics and reference checks.
    pub fn dense_hidden_weights(&self) -> Array2<f64> {
        let n = self.layout.dim();
        let mut w = Array2::zeros((n, n));
        for i in 1..self.blocks.len() {
            let lo = self.layout.range(i);
            let hi = self.layout.range(i + 1);
            w.slice_mut(s![hi.clone(), lo.clone()]).assign(&self.blocks[i]);
            w.slice_mut(s![lo, hi]).assign(&self.blocks[i].t());
        }
        w
    }

    /// Dense `U = [W_0; 0; ...] (N x d)`.
    pub fn dense_input_map(&self) -> Array2<f64> {
        let mut u = Array2::zeros((self.layout.dim(), self.arch.input_dim()));
        u.slice_mut(s![self.layout.range(1), ..])
            .assign(&self.blocks[0]);
        u
    }

    /// Concatenated hidden biases `b~`.
    pub fn dense_bias(&self) -> Array1<f64> {
        let mut b = Array1::zeros(self.layout.dim());
        for k in 1..self.num_layers() {
            b.slice_mut(s![self.layout.range(k)])
                .assign(self.bias(k));
        }
        b
    }
}

/// Precomputed `W_0 rho(x)`, the only nonzero block of `U rho(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDrive(pub Array1<f64>);

/// Gradient (or any other quantity) shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub blocks: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(p: &ModelParams) -> Self {
        Self {
            blocks: p.blocks.iter().map(|b| Array2::zeros(b.raw_dim())).collect(),
            biases: p.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.blocks.iter_mut().for_each(|b| *b *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}
