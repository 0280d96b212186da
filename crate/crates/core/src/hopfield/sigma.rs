//! The change of variables `sigma(s) = s / rho'(s)` that maps a CHN onto an
//! equivalent HAM with nonlinearity `rho o sigma^-1`.

use ndarray::{Array1, ArrayView1};

use super::nonlinearity::Nonlinearity;
use super::params::{InputDrive, ModelParams};
use crate::error::{check_len, Error, Result};

pub const DEFAULT_RANGE: (f64, f64) = (-6.0, 6.0);
pub const DEFAULT_GRID_POINTS: usize = 4001;
pub const DEFAULT_INVERSE_TOL: f64 = 1e-10;

/// `sigma` together with a grid on which it was verified strictly increasing.
#[derive(Debug, Clone)]
pub struct SigmaTransform {
    nl: Nonlinearity,
    grid_s: Vec<f64>,
    grid_t: Vec<f64>,
}

impl SigmaTransform {
    /// Samples `sigma` on `DEFAULT_GRID_POINTS` points of `DEFAULT_RANGE`.
    pub fn new(nl: Nonlinearity) -> Result<Self> {
        Self::with_grid(nl, DEFAULT_RANGE.0, DEFAULT_RANGE.1, DEFAULT_GRID_POINTS)
    }

    pub fn with_grid(nl: Nonlinearity, low: f64, high: f64, points: usize) -> Result<Self> {
        if low.is_nan() || high.is_nan() || low >= high || points < 2 {
            return Err(Error::InvalidConfig(format!(
                "sigma grid needs low < high and at least 2 points, got [{low}, {high}] with {points}"
            )));
        }
        let step = (high - low) / (points - 1) as f64;
        let grid_s: Vec<f64> = (0..points)
            .map(|i| if i + 1 == points { high } else { low + step * i as f64 })
            .collect();
        let mut grid_t = Vec::with_capacity(points);
        for &s in &grid_s {
            let t = sigma_scalar(&nl, s);
            if !t.is_finite() {
                return Err(Error::NonBijective { at: s });
            }
            if let Some(&prev) = grid_t.last() {
                if t <= prev {
                    return Err(Error::NonBijective { at: s });
                }
            }
            grid_t.push(t);
        }
        Ok(Self { nl, grid_s, grid_t })
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    /// `[sigma(low), sigma(high)]`, the range on which the inverse is defined.
    pub fn image(&self) -> (f64, f64) {
        (self.grid_t[0], *self.grid_t.last().unwrap())
    }

    pub fn sigma(&self, s: ArrayView1<f64>) -> Result<Array1<f64>> {
        sigma(s, &self.nl)
    }

    /// Per-coordinate inverse by grid bracketing and safeguarded Newton.
    pub fn sigma_inverse(&self, t: ArrayView1<f64>, tol: f64) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(t.len());
        for (i, &ti) in t.iter().enumerate() {
            out[i] = self.inverse_scalar(i, ti, tol)?;
        }
        Ok(out)
    }

    fn inverse_scalar(&self, coordinate: usize, target: f64, tol: f64) -> Result<f64> {
        let (low, high) = self.image();
        if !(target >= low && target <= high) {
            return Err(Error::SigmaOutOfRange {
                coordinate,
                target,
                low,
                high,
            });
        }
        // first grid index whose value is >= target
        let j = self.grid_t.partition_point(|&v| v < target);
        if self.grid_t[j] == target {
            return Ok(self.grid_s[j]);
        }
        let (mut a, mut b) = (self.grid_s[j - 1], self.grid_s[j]);
        let (ta, tb) = (self.grid_t[j - 1], self.grid_t[j]);
        // secant guess inside the bracket
        let mut s = a + (b - a) * (target - ta) / (tb - ta);
        for _ in 0..200 {
            let residual = sigma_scalar(&self.nl, s) - target;
            if residual == 0.0 {
                return Ok(s);
            }
            if residual < 0.0 {
                a = s;
            } else {
                b = s;
            }
            let slope = sigma_slope(&self.nl, s);
            let newton = s - residual / slope;
            let next = if slope > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            let done = (next - s).abs() <= tol || (b - a) <= tol;
            s = next;
            if done {
                return Ok(s);
            }
        }
        Ok(s)
    }

    /// `rho_sigma(t) = rho(sigma^-1(t))`.
    pub fn rho_sigma(&self, t: ArrayView1<f64>, tol: f64) -> Result<Array1<f64>> {
        Ok(self.sigma_inverse(t, tol)?.mapv(self.nl.evaluate))
    }
}

fn sigma_scalar(nl: &Nonlinearity, s: f64) -> f64 {
    s / nl.rho_prime(s)
}

/// `d sigma / ds = (rho' - s rho'') / rho'^2`.
fn sigma_slope(nl: &Nonlinearity, s: f64) -> f64 {
    let d = nl.rho_prime(s);
    (d - s * nl.rho_second(s)) / (d * d)
}

/// `s / rho'(s)` elementwise.
pub fn sigma(s: ArrayView1<f64>, nl: &Nonlinearity) -> Result<Array1<f64>> {
    let mut out = Array1::zeros(s.len());
    for (i, &si) in s.iter().enumerate() {
        let t = sigma_scalar(nl, si);
        if !t.is_finite() {
            return Err(Error::NonFinite { index: i, value: t });
        }
        out[i] = t;
    }
    Ok(out)
}

/// One step of the transformed HAM,
/// `W~ rho_sigma(s_sigma) + b~ + U rho_sigma(sigma(x))`.
pub fn ham_sigma_map(
    s_sigma: ArrayView1<f64>,
    p: &ModelParams,
    x: ArrayView1<f64>,
    transform: &SigmaTransform,
) -> Result<Array1<f64>> {
    p.check_state(s_sigma)?;
    check_len("input", p.arch().input_dim(), x.len())?;
    let input = sigma_input_drive(p, x, transform)?;
    ham_sigma_map_with_drive(s_sigma, p, &input, transform)
}

/// `W_0 rho_sigma(sigma(x))`, which equals `W_0 rho(x)` up to the inverse tolerance.
pub fn sigma_input_drive(
    p: &ModelParams,
    x: ArrayView1<f64>,
    transform: &SigmaTransform,
) -> Result<InputDrive> {
    let x_sigma = transform.sigma(x)?;
    let act = transform.rho_sigma(x_sigma.view(), DEFAULT_INVERSE_TOL)?;
    Ok(InputDrive(p.blocks[0].dot(&act)))
}

pub fn ham_sigma_map_with_drive(
    s_sigma: ArrayView1<f64>,
    p: &ModelParams,
    input: &InputDrive,
    transform: &SigmaTransform,
) -> Result<Array1<f64>> {
    p.check_state(s_sigma)?;
    let s = transform.sigma_inverse(s_sigma, DEFAULT_INVERSE_TOL)?;
    let acts = super::deq::layer_activations(p, s.view());
    Ok(super::deq::affine_drive(p, &acts, input))
}
