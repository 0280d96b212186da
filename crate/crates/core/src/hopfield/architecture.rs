use std::ops::Range;

use ndarray::{s, Array1, ArrayView1, ArrayViewMut1};

use crate::error::{Error, Result};

/// Layer sizes `[d, n_1, ..., n_{L-1}]`; layer 0 is the clamped input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least 2 layers, got {}",
                layer_sizes.len()
            )));
        }
        if let Some(i) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidArchitecture(format!("layer {i} has size 0")));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of layers `L`, including the input layer.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn output_layer(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new(&self.layer_sizes)
    }
}

/// Offsets of hidden layers inside a flat state vector, in both the natural
/// layer order `[s_1; s_2; ...]` and the even-odd order `[s_even; s_odd]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    /// `sizes[k]` is the size of layer `k`; index 0 is the input.
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    permuted_offsets: Vec<usize>,
    even_dim: usize,
    dim: usize,
}

impl StateLayout {
    fn new(layer_sizes: &[usize]) -> Self {
        let num_layers = layer_sizes.len();
        let mut offsets = vec![0; num_layers];
        let mut acc = 0;
        for k in 1..num_layers {
            offsets[k] = acc;
            acc += layer_sizes[k];
        }
        let dim = acc;
        let mut permuted_offsets = vec![0; num_layers];
        let mut acc = 0;
        for k in (2..num_layers).step_by(2) {
            permuted_offsets[k] = acc;
            acc += layer_sizes[k];
        }
        let even_dim = acc;
        for k in (1..num_layers).step_by(2) {
            permuted_offsets[k] = acc;
            acc += layer_sizes[k];
        }
        Self {
            sizes: layer_sizes.to_vec(),
            offsets,
            permuted_offsets,
            even_dim,
            dim,
        }
    }

    /// Total hidden dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn even_dim(&self) -> usize {
        self.even_dim
    }

    pub fn odd_dim(&self) -> usize {
        self.dim - self.even_dim
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len()
    }

    pub fn layer_size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    /// Hidden layer indices 2, 4, ...
    pub fn even_layers(&self) -> impl Iterator<Item = usize> {
        (2..self.sizes.len()).step_by(2)
    }

    /// Hidden layer indices 1, 3, ...
    pub fn odd_layers(&self) -> impl Iterator<Item = usize> {
        (1..self.sizes.len()).step_by(2)
    }

    pub fn is_even(k: usize) -> bool {
        k.is_multiple_of(2)
    }

    /// Range of hidden layer `k >= 1` in the natural order.
    pub fn range(&self, k: usize) -> Range<usize> {
        debug_assert!(k >= 1);
        self.offsets[k]..self.offsets[k] + self.sizes[k]
    }

    /// Range of hidden layer `k >= 1` in the `[s_even; s_odd]` order.
    pub fn permuted_range(&self, k: usize) -> Range<usize> {
        debug_assert!(k >= 1);
        self.permuted_offsets[k]..self.permuted_offsets[k] + self.sizes[k]
    }

    pub fn output_range(&self) -> Range<usize> {
        self.range(self.sizes.len() - 1)
    }

    pub fn permuted_output_range(&self) -> Range<usize> {
        self.permuted_range(self.sizes.len() - 1)
    }

    pub fn layer<'a>(&self, s: &'a Array1<f64>, k: usize) -> ArrayView1<'a, f64> {
        s.slice(s![self.range(k)])
    }

    pub fn layer_mut<'a>(&self, s: &'a mut Array1<f64>, k: usize) -> ArrayViewMut1<'a, f64> {
        s.slice_mut(s![self.range(k)])
    }

    /// Natural-order indices of the even layers, in `s_even` order.
    pub fn even_indices(&self) -> Vec<usize> {
        self.even_layers().flat_map(|k| self.range(k)).collect()
    }

    pub fn odd_indices(&self) -> Vec<usize> {
        self.odd_layers().flat_map(|k| self.range(k)).collect()
    }

    /// Applies the permutation `P`: `[s_1; s_2; s_3; ...] -> [s_even; s_odd]`.
    pub fn permute(&self, s: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.dim);
        for k in 1..self.sizes.len() {
            out.slice_mut(s![self.permuted_range(k)])
                .assign(&s.slice(s![self.range(k)]));
        }
        out
    }

    /// Applies `P^T`.
    pub fn unpermute(&self, p: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.dim);
        for k in 1..self.sizes.len() {
            out.slice_mut(s![self.range(k)])
                .assign(&p.slice(s![self.permuted_range(k)]));
        }
        out
    }

    /// Splits a permuted vector into its even and odd halves.
    pub fn split<'a>(&self, p: &'a Array1<f64>) -> (ArrayView1<'a, f64>, ArrayView1<'a, f64>) {
        (
            p.slice(s![..self.even_dim]),
            p.slice(s![self.even_dim..]),
        )
    }

    pub fn join(&self, even: ArrayView1<f64>, odd: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.dim);
        out.slice_mut(s![..self.even_dim]).assign(&even);
        out.slice_mut(s![self.even_dim..]).assign(&odd);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_architectures() {
        assert!(Architecture::new(vec![784]).is_err());
        assert!(Architecture::new(vec![784, 0, 10]).is_err());
        assert!(Architecture::new(vec![784, 10]).is_ok());
    }

    #[test]
    fn five_layer_partition() {
        let arch = Architecture::new(vec![3, 4, 5, 6, 7]).unwrap();
        let layout = arch.layout();
        assert_eq!(layout.dim(), 22);
        assert_eq!(layout.even_layers().collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(layout.odd_layers().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(layout.even_dim(), 12);
        assert_eq!(layout.permuted_range(2), 0..5);
        assert_eq!(layout.permuted_range(4), 5..12);
        assert_eq!(layout.permuted_range(1), 12..16);
        assert_eq!(layout.permuted_range(3), 16..22);
        assert_eq!(layout.output_range(), 15..22);
    }

    #[test]
    fn three_layer_partition() {
        let layout = Architecture::new(vec![784, 32, 10]).unwrap().layout();
        assert_eq!(layout.even_indices(), (32..42).collect::<Vec<_>>());
        assert_eq!(layout.odd_indices(), (0..32).collect::<Vec<_>>());
    }

    fn layout_strategy() -> impl Strategy<Value = StateLayout> {
        prop::collection::vec(1usize..6, 2..8)
            .prop_map(|sizes| Architecture::new(sizes).unwrap().layout())
    }

    proptest! {
        #[test]
        fn views_partition_the_state(layout in layout_strategy()) {
            let mut all: Vec<usize> = layout.even_indices();
            all.extend(layout.odd_indices());
            prop_assert_eq!(all.len(), layout.dim());
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all, (0..layout.dim()).collect::<Vec<_>>());
        }

        #[test]
        fn permutation_round_trip_and_hadamard(
            layout in layout_strategy(),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = layout.dim();
            let a = Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
            let b = Array1::from_shape_fn(n, |_| rng.random_range(-2.0..2.0));
            prop_assert_eq!(layout.unpermute(layout.permute(a.view()).view()), a.clone());
            let lhs = layout.permute((&a * &b).view());
            let rhs = &layout.permute(a.view()) * &layout.permute(b.view());
            prop_assert_eq!(lhs, rhs);
        }
    }
}
