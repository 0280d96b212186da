//! Elementwise activation functions together with their derivatives and
//! Lagrangian (antiderivative) terms.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// A scalar activation `rho` applied elementwise to states.
///
/// `antiderivative` is the per-element term of the Lagrangian, so that
/// `d/ds antiderivative(s) = evaluate(s)`. `second_derivative` is needed for
/// the Jacobian of the CHN map.
#[derive(Clone, Copy)]
pub struct Nonlinearity {
    pub name: &'static str,
    pub evaluate: fn(f64) -> f64,
    pub derivative: fn(f64) -> f64,
    pub second_derivative: fn(f64) -> f64,
    pub antiderivative: fn(f64) -> f64,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .finish()
    }
}

impl PartialEq for Nonlinearity {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Self::shifted_sigmoid()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    // log(1 + e^x) without overflow
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn shifted_sigmoid(x: f64) -> f64 {
    sigmoid(4.0 * x - 2.0)
}

fn shifted_sigmoid_prime(x: f64) -> f64 {
    let s = sigmoid(4.0 * x - 2.0);
    4.0 * s * (1.0 - s)
}

fn shifted_sigmoid_second(x: f64) -> f64 {
    let s = sigmoid(4.0 * x - 2.0);
    16.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
}

fn shifted_sigmoid_lagrangian(x: f64) -> f64 {
    0.25 * softplus(4.0 * x - 2.0)
}

fn identity(x: f64) -> f64 {
    x
}

fn one(_: f64) -> f64 {
    1.0
}

fn zero(_: f64) -> f64 {
    0.0
}

fn half_square(x: f64) -> f64 {
    0.5 * x * x
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

// Extended so that rho'(0) = 1.
fn relu_prime(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn relu_lagrangian(x: f64) -> f64 {
    if x > 0.0 {
        0.5 * x * x
    } else {
        0.0
    }
}

impl Nonlinearity {
    /// `sigmoid(4x - 2)`, with Lagrangian `softplus(4x - 2) / 4`.
    pub fn shifted_sigmoid() -> Self {
        Self {
            name: "shifted_sigmoid",
            evaluate: shifted_sigmoid,
            derivative: shifted_sigmoid_prime,
            second_derivative: shifted_sigmoid_second,
            antiderivative: shifted_sigmoid_lagrangian,
        }
    }

    /// Linear activation; used for hand-built oscillation examples.
    pub fn identity() -> Self {
        Self {
            name: "identity",
            evaluate: identity,
            derivative: one,
            second_derivative: zero,
            antiderivative: half_square,
        }
    }

    pub fn relu() -> Self {
        Self {
            name: "relu",
            evaluate: relu,
            derivative: relu_prime,
            second_derivative: zero,
            antiderivative: relu_lagrangian,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "shifted_sigmoid" => Some(Self::shifted_sigmoid()),
            "identity" => Some(Self::identity()),
            "relu" => Some(Self::relu()),
            _ => None,
        }
    }

    #[inline]
    pub fn rho(&self, x: f64) -> f64 {
        (self.evaluate)(x)
    }

    #[inline]
    pub fn rho_prime(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    #[inline]
    pub fn rho_second(&self, x: f64) -> f64 {
        (self.second_derivative)(x)
    }

    #[inline]
    pub fn lagrangian(&self, x: f64) -> f64 {
        (self.antiderivative)(x)
    }

    pub(crate) fn apply(&self, s: ArrayView1<f64>) -> Array1<f64> {
        s.mapv(self.evaluate)
    }

    pub(crate) fn apply_prime(&self, s: ArrayView1<f64>) -> Array1<f64> {
        s.mapv(self.derivative)
    }
}

fn check_finite(s: ArrayView1<f64>) -> Result<()> {
    match s.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: s[index],
        }),
        None => Ok(()),
    }
}

/// Elementwise `rho(s)`.
pub fn rho_vec(s: ArrayView1<f64>, nl: &Nonlinearity) -> Result<Array1<f64>> {
    check_finite(s)?;
    Ok(nl.apply(s))
}

/// Elementwise `rho'(s)`.
pub fn rho_prime_vec(s: ArrayView1<f64>, nl: &Nonlinearity) -> Result<Array1<f64>> {
    check_finite(s)?;
    Ok(nl.apply_prime(s))
}

/// The additive Lagrangian `L(s) = sum_i antiderivative(s_i)`.
pub fn lagrangian_sum(s: ArrayView1<f64>, nl: &Nonlinearity) -> Result<f64> {
    check_finite(s)?;
    Ok(s.iter().map(|&v| nl.lagrangian(v)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn central_diff(f: fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
    }

    fn grid() -> impl Iterator<Item = f64> {
        (0..=240).map(|i| -3.0 + 0.025 * i as f64)
    }

    #[test]
    fn rho_examples() {
        let nl = Nonlinearity::default();
        assert_eq!(rho_vec(array![0.5].view(), &nl).unwrap()[0], 0.5);
        assert_eq!(rho_prime_vec(array![0.5].view(), &nl).unwrap()[0], 1.0);
        // sigmoid(-2) = 1 / (1 + e^2)
        let expected = 1.0 / (1.0 + 2f64.exp());
        let got = rho_vec(array![0.0].view(), &nl).unwrap()[0];
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.1192).abs() < 1e-4);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for nl in [Nonlinearity::shifted_sigmoid(), Nonlinearity::identity()] {
            for x in grid() {
                let d = nl.rho_prime(x);
                let fd = central_diff(nl.evaluate, x);
                if d.abs() > 1e-6 {
                    assert!(rel_err(d, fd) < 1e-6, "{} rho' at {x}", nl.name);
                }
                let fd_l = central_diff(nl.antiderivative, x);
                assert!(rel_err(nl.rho(x), fd_l) < 1e-6, "{} L' at {x}", nl.name);
                let fd2 = central_diff(nl.derivative, x);
                assert!((nl.rho_second(x) - fd2).abs() < 1e-6, "{} rho'' at {x}", nl.name);
            }
        }
    }

    #[test]
    fn shifted_sigmoid_range_and_monotonicity() {
        let nl = Nonlinearity::shifted_sigmoid();
        for x in (-400..=400).map(|i| i as f64 * 0.02) {
            let r = nl.rho(x);
            assert!(r > 0.0 && r < 1.0);
            assert!(nl.rho_prime(x) > 0.0);
        }
        // the lagrangian stays finite far from the origin
        assert!(nl.lagrangian(-300.0).is_finite());
        assert!((nl.lagrangian(300.0) - 0.25 * (4.0 * 300.0 - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn non_finite_input_reports_index() {
        let nl = Nonlinearity::default();
        let err = rho_vec(array![0.0, 1.0, f64::NAN].view(), &nl).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 2, .. }));
        let err = lagrangian_sum(array![f64::INFINITY].view(), &nl).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0, .. }));
    }

    #[test]
    fn lagrangian_sum_adds_terms() {
        let nl = Nonlinearity::default();
        let s = array![0.0, 0.5];
        let expected = 0.25 * (1.0 + (-2f64).exp()).ln() + 0.25 * 2f64.ln();
        assert!((lagrangian_sum(s.view(), &nl).unwrap() - expected).abs() < 1e-15);
    }
}
