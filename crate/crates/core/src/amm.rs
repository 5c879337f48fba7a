//! Approximate matrix multiplication by sampling column-row outer products.
//!
//! `AB = sum_i A[:, i] B[i]`. Drawing `r` indices `s` i.i.d. from `p` and
//! averaging `A[:, s] B[s] / p(s)` gives an unbiased estimate of the product
//! whose Frobenius error shrinks like `1/sqrt(r)`.

use crate::error::{McaError, Result};
use crate::sampling::{draw_indices, make_distribution, RngStream, SamplingDistribution};
use crate::tensor::{axpy, col_l2_norms, frobenius_norm, row_l2_norms, Matrix};

/// Sampled estimate of a matrix product.
#[derive(Debug, Clone, PartialEq)]
pub struct AmmEstimate {
    pub value: Matrix,
    pub samples_used: usize,
    /// [`SamplingDistribution::id`] of the distribution the indices came from.
    pub distribution_id: u64,
}

/// Scalar operations charged per drawn sample on top of the `2 * width`
/// row accumulation: `r * p`, its reciprocal, and the product with `x[s]`.
pub const COEFFICIENT_OPS: u64 = 3;

/// Probabilities proportional to `||a[:, i]|| * ||b[i]||`, the choice that
/// minimizes the expected squared Frobenius error.
pub fn optimal_probs(a: &Matrix, b: &Matrix) -> Result<SamplingDistribution> {
    if a.cols() != b.rows() {
        return Err(McaError::Shape(format!(
            "left factor has {} columns, right factor {} rows",
            a.cols(),
            b.rows()
        )));
    }
    let weights: Vec<f64> = col_l2_norms(a)
        .iter()
        .zip(row_l2_norms(b))
        .map(|(ca, rb)| ca * rb)
        .collect();
    make_distribution(&weights).map_err(|e| match e {
        McaError::Degenerate(_) => {
            McaError::Degenerate("every column-row norm product is zero".into())
        }
        other => other,
    })
}

/// Input-independent probabilities `||w[i]||^2 / ||w||_F^2`. Depends on the
/// weight matrix only, so it is computed once and cached alongside it.
pub fn weight_probs(w: &Matrix) -> Result<SamplingDistribution> {
    if frobenius_norm(w) == 0.0 {
        return Err(McaError::Degenerate("weight matrix is zero".into()));
    }
    let weights: Vec<f64> = row_l2_norms(w).iter().map(|n| n * n).collect();
    make_distribution(&weights)
}

fn check_support(
    dist: &SamplingDistribution,
    contributes: impl Fn(usize) -> bool,
) -> Result<()> {
    for (i, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 && contributes(i) {
            return Err(McaError::Domain(format!(
                "index {i} contributes to the product but has zero sampling probability"
            )));
        }
    }
    Ok(())
}

/// Unbiased estimate of `a * b` from `r` sampled column-row pairs.
pub fn approx_matmul(
    a: &Matrix,
    b: &Matrix,
    dist: &SamplingDistribution,
    r: usize,
    rng: &mut RngStream,
) -> Result<AmmEstimate> {
    if a.cols() != b.rows() || a.cols() != dist.len() {
        return Err(McaError::Shape(format!(
            "approx_matmul {}x{} by {}x{} with {} probabilities",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            dist.len()
        )));
    }
    if r == 0 {
        return Err(McaError::Domain("sample count must be at least 1".into()));
    }
    check_support(dist, |i| {
        (0..a.rows()).any(|row| a.get(row, i) != 0.0) && b.row(i).iter().any(|&v| v != 0.0)
    })?;

    let r_f = r as f64;
    let mut value = Matrix::zeros(a.rows(), b.cols());
    for _ in 0..r {
        let s = dist.sample(rng);
        let inv = 1.0 / (r_f * dist.probs()[s]);
        let b_row = b.row(s);
        for i in 0..a.rows() {
            axpy(a.get(i, s) * inv, b_row, value.row_mut(i));
        }
    }
    Ok(AmmEstimate {
        value,
        samples_used: r,
        distribution_id: dist.id(),
    })
}

/// Row-vector specialization of [`approx_matmul`]: estimates `x_row * w`.
pub fn approx_encode_row(
    x_row: &[f64],
    w: &Matrix,
    dist: &SamplingDistribution,
    r: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_encode_args(x_row, w, dist, r)?;
    let indices = draw_indices(dist, r, rng)?;
    let mut out = vec![0.0; w.cols()];
    accumulate_drawn(x_row, w, dist, &indices, &mut out);
    Ok(out)
}

pub(crate) fn check_encode_args(
    x_row: &[f64],
    w: &Matrix,
    dist: &SamplingDistribution,
    r: usize,
) -> Result<()> {
    if x_row.len() != w.rows() || w.rows() != dist.len() {
        return Err(McaError::Shape(format!(
            "row of length {} against {}x{} weights with {} probabilities",
            x_row.len(),
            w.rows(),
            w.cols(),
            dist.len()
        )));
    }
    if r == 0 {
        return Err(McaError::Domain("sample count must be at least 1".into()));
    }
    check_support(dist, |i| {
        x_row[i] != 0.0 && w.row(i).iter().any(|&v| v != 0.0)
    })
}

/// Adds `(1/r) * sum_k x[s_k] / p(s_k) * w[s_k]` into `out` for the drawn
/// indices `s` (`r = s.len()`) and returns the number of floating-point
/// operations executed.
pub(crate) fn accumulate_drawn(
    x_row: &[f64],
    w: &Matrix,
    dist: &SamplingDistribution,
    indices: &[usize],
    out: &mut [f64],
) -> u64 {
    let r_f = indices.len() as f64;
    let probs = dist.probs();
    let mut ops = 0u64;
    for &s in indices {
        let denom = r_f * probs[s];
        let inv = 1.0 / denom;
        let coef = x_row[s] * inv;
        ops += COEFFICIENT_OPS;
        axpy(coef, w.row(s), out);
        ops += 2 * out.len() as u64;
    }
    ops
}

/// Dense `x_row * w` added into `out`, counting operations like
/// [`accumulate_drawn`].
pub(crate) fn accumulate_exact(x_row: &[f64], w: &Matrix, out: &mut [f64]) -> u64 {
    let mut ops = 0u64;
    for (k, &xk) in x_row.iter().enumerate() {
        axpy(xk, w.row(k), out);
        ops += 2 * out.len() as u64;
    }
    ops
}
