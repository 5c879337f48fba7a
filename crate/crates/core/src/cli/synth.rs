//! Seeded fixtures: random inputs, random head weights, and attention
//! matrices spanning the sparsity spectrum from uniform to one-hot.

use clap::ValueEnum;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::attention::AttentionWeights;
use crate::sampling::RngStream;
use crate::tensor::{softmax_rows, Matrix};

/// Stream ids at the top of the range are reserved for fixtures so they
/// never collide with per-trial or per-token streams.
pub const FIXTURE_STREAM_BASE: u64 = u64::MAX - (1 << 20);

pub fn fixture_rng(seed: u64, fixture: u64) -> RngStream {
    RngStream::new(seed, FIXTURE_STREAM_BASE + fixture)
}

pub fn gaussian_matrix(rows: usize, cols: usize, scale: f64, rng: &mut RngStream) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(len: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Gaussian matrix whose rows are rescaled by log-normal factors, so that
/// row norms (and hence sampling probabilities) are visibly non-uniform.
pub fn uneven_rows(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
    let mut m = gaussian_matrix(rows, cols, 1.0, rng);
    for i in 0..rows {
        let factor = (0.5 * rng.sample::<f64, _>(StandardNormal)).exp();
        m.row_mut(i).iter_mut().for_each(|v| *v *= factor);
    }
    m
}

/// Query and key projections with `N(0, 1/d)` entries, encoding projection
/// with uneven row norms.
pub fn random_weights(d: usize, rng: &mut RngStream) -> AttentionWeights {
    let s = 1.0 / (d as f64).sqrt();
    let w_q = gaussian_matrix(d, d, s, rng);
    let w_k = gaussian_matrix(d, d, s, rng);
    let w = uneven_rows(d, d, rng);
    AttentionWeights::new(w_q, w_k, w).expect("square weights")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttentionKind {
    /// softmax(Q K^T / sqrt(d)) of the random input and weights
    Computed,
    Uniform,
    /// queries split into blocks; each block puts `1 - eps` on one token
    Peaked,
    /// softmax of standard normal logits divided by a temperature
    Gaussian,
}

pub fn uniform_attention(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |_, _| 1.0 / n as f64)
}

/// Rows are split into `blocks` contiguous groups; group `b` puts mass
/// `1 - eps` on its first token and spreads `eps` over the others.
pub fn peaked_attention(n: usize, blocks: usize, eps: f64) -> Matrix {
    let blocks = blocks.clamp(1, n);
    if n == 1 {
        return Matrix::identity(1);
    }
    Matrix::from_fn(n, n, |i, j| {
        let block = i * blocks / n;
        let dominant = (block * n).div_ceil(blocks);
        if j == dominant {
            1.0 - eps
        } else {
            eps / (n - 1) as f64
        }
    })
}

pub fn gaussian_attention(n: usize, temperature: f64, rng: &mut RngStream) -> Matrix {
    softmax_rows(&gaussian_matrix(n, n, 1.0, rng), 1.0 / temperature)
}
