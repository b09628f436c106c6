//! Shared helpers for unit tests.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::graph::{DenseGraphTensor, Dims};

/// Seeded tensor with `x` in `[0, 1.1)` and `a` in `[0, 1)`.
pub fn random_tensor(dims: Dims, seed: u64) -> DenseGraphTensor {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    DenseGraphTensor {
        x: Array2::from_shape_fn((dims.n, dims.node_channels()), |_| rng.random_range(0.0..1.1)),
        a: Array3::from_shape_fn((dims.n, dims.n, dims.bond_channels()), |_| {
            rng.random_range(0.0..1.0)
        }),
    }
}
