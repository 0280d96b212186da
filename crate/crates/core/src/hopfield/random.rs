//! Random model instances for randomized checks and simulations.

use ndarray::{Array1, Array2};
use rand::Rng;

use super::architecture::Architecture;
use super::params::{ModelParams, Variant};

/// Weights uniform in `±scale / sqrt(max(n_in, n_out))`, biases uniform in `±0.5 scale`.
pub fn random_params<R: Rng>(rng: &mut R, sizes: &[usize], variant: Variant, scale: f64) -> ModelParams {
    let arch = Architecture::new(sizes.to_vec()).expect("valid sizes");
    let mut p = ModelParams::zeros(arch, variant);
    for b in p.blocks.iter_mut() {
        let bound = scale / (b.nrows().max(b.ncols()) as f64).sqrt();
        b.mapv_inplace(|_| rng.random_range(-bound..=bound));
    }
    for b in p.biases.iter_mut() {
        b.mapv_inplace(|_| rng.random_range(-0.5..=0.5) * scale);
    }
    p
}

/// Largest singular value of the symmetric hidden coupling `W~`, by power iteration.
pub fn spectral_norm(w: &Array2<f64>) -> f64 {
    let n = w.nrows();
    if n == 0 {
        return 0.0;
    }
    // deterministic, non-degenerate start vector
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
    v /= v.dot(&v).sqrt();
    let mut sigma = 0.0;
    for _ in 0..2000 {
        let u = w.t().dot(&w.dot(&v));
        let norm = u.dot(&u).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        v = u / norm;
        if (next - sigma).abs() <= 1e-13 * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// A random model whose hidden coupling has `||W~||_2 = target_norm / max rho'`.
/// For the shifted sigmoid `max rho' = 1`, so any `target_norm < 1` gives a
/// contraction of the HAM map.
pub fn contractive_params<R: Rng>(
    rng: &mut R,
    sizes: &[usize],
    variant: Variant,
    target_norm: f64,
) -> ModelParams {
    let mut p = random_params(rng, sizes, variant, 1.0);
    let norm = spectral_norm(&p.dense_hidden_weights());
    if norm > 0.0 {
        let factor = target_norm / norm;
        for b in p.blocks.iter_mut().skip(1) {
            *b *= factor;
        }
    }
    p
}

/// Random layer sizes with `layers` entries, each in `2..=max_sizes[i]`.
pub fn random_sizes<R: Rng>(rng: &mut R, max_sizes: &[usize]) -> Vec<usize> {
    max_sizes
        .iter()
        .map(|&m| rng.random_range(2..=m.max(2)))
        .collect()
}

pub fn random_input<R: Rng>(rng: &mut R, dim: usize) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.random_range(0.0..1.0))
}

pub fn random_state<R: Rng>(rng: &mut R, dim: usize, spread: f64) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.random_range(-spread..spread))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spectral_norm_of_diagonal_and_symmetric() {
        let w = Array2::from_diag(&Array1::from_vec(vec![0.5, -2.0, 1.0]));
        assert!((spectral_norm(&w) - 2.0).abs() < 1e-10);
        let w = ndarray::array![[0.0, 3.0], [3.0, 0.0]];
        assert!((spectral_norm(&w) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn contractive_params_hit_target_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = contractive_params(&mut rng, &[6, 8, 5, 4], Variant::Ham, 0.7);
        assert!((spectral_norm(&p.dense_hidden_weights()) - 0.7).abs() < 1e-8);
    }
}
