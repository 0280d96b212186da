use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::hopfield::{Architecture, ModelParams, Variant};

pub const BIAS_STD: f64 = 0.01;

/// Xavier-uniform bound `sqrt(6 / (n_in + n_out))`.
pub fn xavier_bound(n_in: usize, n_out: usize) -> f64 {
    (6.0 / (n_in + n_out) as f64).sqrt()
}

/// Xavier-uniform blocks, one interface at a time, and `N(0, 0.01^2)` biases.
///
/// Every tensor draws from its own ChaCha8 stream of `seed`, numbered blocks
/// first, then biases, so shapes never shift each other's samples.
pub fn xavier_init(arch: &Architecture, variant: Variant, seed: u64) -> ModelParams {
    let mut p = ModelParams::zeros(arch.clone(), variant);
    let num_blocks = p.blocks.len();
    for (i, b) in p.blocks.iter_mut().enumerate() {
        let mut rng = stream(seed, i as u64);
        let bound = xavier_bound(b.ncols(), b.nrows());
        b.mapv_inplace(|_| rng.random_range(-bound..=bound));
    }
    let normal = Normal::new(0.0, BIAS_STD).expect("valid standard deviation");
    for (i, b) in p.biases.iter_mut().enumerate() {
        let mut rng = stream(seed, (num_blocks + i) as u64);
        b.mapv_inplace(|_| normal.sample(&mut rng));
    }
    p
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_and_support() {
        assert_eq!(xavier_bound(784, 1990), (6.0f64 / 2774.0).sqrt());
        let arch = Architecture::new(vec![784, 64, 10]).unwrap();
        let p = xavier_init(&arch, Variant::Ham, 3);
        let bound = xavier_bound(784, 64);
        assert!(p.blocks[0].iter().all(|v| v.abs() <= bound));
        let spread = p.blocks[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(spread > 0.9 * bound);
        let mean: f64 = p.biases[0].mean().unwrap();
        assert!(mean.abs() < 0.01);
    }

    #[test]
    fn deterministic_per_seed() {
        let arch = Architecture::new(vec![20, 8, 5, 3]).unwrap();
        assert_eq!(xavier_init(&arch, Variant::Chn, 7), xavier_init(&arch, Variant::Chn, 7));
        assert_ne!(xavier_init(&arch, Variant::Chn, 7), xavier_init(&arch, Variant::Chn, 8));
    }
}
