//! Seeded randomness. Every stochastic component draws from a ChaCha stream
//! so runs are reproducible from their seeds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::Tensor;

pub type Rng64 = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream from a parent seed and a label.
pub fn derive(seed: u64, stream: u64) -> Rng64 {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn normal(rng: &mut Rng64) -> f64 {
    StandardNormal.sample(rng)
}

pub fn uniform(rng: &mut Rng64, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn index(rng: &mut Rng64, n: usize) -> usize {
    rng.random_range(0..n)
}

impl Tensor {
    pub fn randn(shape: &[usize], rng: &mut Rng64) -> Tensor {
        Tensor::from_fn(shape, |_| normal(rng))
    }

    pub fn rand_uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng64) -> Tensor {
        Tensor::from_fn(shape, |_| uniform(rng, lo, hi))
    }
}

/// `m` distinct indices drawn uniformly from `0..n`.
pub fn sample_indices(rng: &mut Rng64, n: usize, m: usize) -> alloc::vec::Vec<usize> {
    rand::seq::index::sample(rng, n, m.min(n)).into_vec()
}
