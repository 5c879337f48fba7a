//! Self-attention `Y = A (X W)` with a Monte-Carlo encoding step.
//!
//! The attention matrix `A = softmax(Q K^T / sqrt(d))` is always computed
//! exactly. In approximation mode each token row `X[j] W` is replaced by a
//! sampled estimate `H[j]` using `r_j` draws from the cached weight
//! distribution, where
//!
//! ```text
//! sqrt(r_j) = n * max_i A[i, j] / alpha
//! ```
//!
//! A token whose budget reaches `d` is encoded exactly instead. One estimate
//! per token is shared by every output row, and token `j` of head `h` draws
//! from stream `h * n + j` of the forward seed, so the result does not depend
//! on how the token loop is scheduled.

use rayon::prelude::*;

use crate::amm::{accumulate_drawn, accumulate_exact, check_encode_args, weight_probs};
use crate::error::{McaError, Result};
use crate::metrics::{flops_for_plan, FlopsReport};
use crate::sampling::{draw_indices, RngStream, SamplingDistribution};
use crate::tensor::{col_maxima, matmul, softmax_rows, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Regular,
    Approximation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McaConfig {
    /// Attention error coefficient in `(0, 1]`.
    pub alpha: f64,
    pub mode: Mode,
    pub min_samples: usize,
    pub heads: usize,
}

impl McaConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            mode: Mode::Approximation,
            min_samples: 1,
            heads: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.heads = heads;
        self
    }

    pub fn with_min_samples(mut self, min_samples: usize) -> Self {
        self.min_samples = min_samples;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(McaError::Config(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.min_samples == 0 {
            return Err(McaError::Config("min_samples must be at least 1".into()));
        }
        if self.heads == 0 {
            return Err(McaError::Config("heads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Query, key and encoding projections of one head, plus the sampling
/// distribution derived from the encoding projection.
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    w_q: Matrix,
    w_k: Matrix,
    w: Matrix,
    cached_dist: Option<SamplingDistribution>,
}

impl AttentionWeights {
    /// All three matrices must be square with the same dimension. A zero
    /// encoding projection is accepted, but only regular mode can use it.
    pub fn new(w_q: Matrix, w_k: Matrix, w: Matrix) -> Result<Self> {
        let d = w.rows();
        for (name, m) in [("w_q", &w_q), ("w_k", &w_k), ("w", &w)] {
            if m.shape() != (d, d) {
                return Err(McaError::Shape(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        let cached_dist = weight_probs(&w).ok();
        Ok(Self {
            w_q,
            w_k,
            w,
            cached_dist,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn w_q(&self) -> &Matrix {
        &self.w_q
    }

    pub fn w_k(&self) -> &Matrix {
        &self.w_k
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn cached_dist(&self) -> Option<&SamplingDistribution> {
        self.cached_dist.as_ref()
    }

    /// Replaces the encoding projection and rebuilds the cached distribution.
    pub fn set_w(&mut self, w: Matrix) -> Result<()> {
        if w.shape() != self.w.shape() {
            return Err(McaError::Shape(format!(
                "w is {}x{}, expected {}x{}",
                w.rows(),
                w.cols(),
                self.w.rows(),
                self.w.cols()
            )));
        }
        self.cached_dist = weight_probs(&w).ok();
        self.w = w;
        Ok(())
    }

    fn sampling_dist(&self) -> Result<&SamplingDistribution> {
        self.cached_dist.as_ref().ok_or_else(|| {
            McaError::Config("encoding projection is zero; approximation mode needs a nonzero W".into())
        })
    }
}

/// Per-token sample counts, which tokens are encoded exactly, and the drawn
/// indices of the sampled ones (empty for exact tokens).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePlan {
    pub budgets: Vec<usize>,
    pub exact_mask: Vec<bool>,
    pub draws: Vec<Vec<usize>>,
}

impl SamplePlan {
    /// Plan of the dense layer: every token exact.
    pub fn all_exact(n: usize, d: usize) -> Self {
        Self {
            budgets: vec![d; n],
            exact_mask: vec![true; n],
            draws: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.budgets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.budgets.is_empty()
    }

    pub fn sampled_tokens(&self) -> usize {
        self.exact_mask.iter().filter(|e| !**e).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub y: Matrix,
    pub plan: SamplePlan,
    pub flops: FlopsReport,
    pub attn: Matrix,
    /// Operations counted inside the encoding loop while it ran.
    pub encoding_ops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadOutput {
    /// Head outputs concatenated along the feature axis.
    pub y: Matrix,
    pub heads: Vec<AttentionOutput>,
    pub flops: FlopsReport,
}

/// Exact `softmax(Q K^T / sqrt(d))` with `Q = X W_q`, `K = X W_k`.
pub fn attention_matrix(x: &Matrix, weights: &AttentionWeights) -> Result<Matrix> {
    check_input(x, weights)?;
    let q = matmul(x, &weights.w_q)?;
    let k = matmul(x, &weights.w_k)?;
    let scores = matmul(&q, &k.transpose())?;
    Ok(softmax_rows(&scores, 1.0 / (x.cols() as f64).sqrt()))
}

fn check_input(x: &Matrix, weights: &AttentionWeights) -> Result<()> {
    if x.cols() != weights.dim() {
        return Err(McaError::Shape(format!(
            "input has {} features, weights expect {}",
            x.cols(),
            weights.dim()
        )));
    }
    Ok(())
}

fn check_attention(attn: &Matrix, n: usize) -> Result<()> {
    if attn.shape() != (n, n) {
        return Err(McaError::Shape(format!(
            "attention is {}x{}, expected {n}x{n}",
            attn.rows(),
            attn.cols()
        )));
    }
    Ok(())
}

/// Unclamped budgets `(n * max_i A[i, j] / alpha)^2`, one per token `j`.
pub fn raw_budgets(attn: &Matrix, alpha: f64) -> Vec<f64> {
    let n = attn.rows() as f64;
    col_maxima(attn)
        .into_iter()
        .map(|m| {
            let root = n * m / alpha;
            root * root
        })
        .collect()
}

/// Budgets for every token: `clamp(ceil(raw), min_samples, d)`, with tokens
/// whose ceiling reaches `d` marked for exact encoding. Draws are left empty.
pub fn sample_budgets(attn: &Matrix, cfg: &McaConfig, d: usize) -> Result<SamplePlan> {
    cfg.validate()?;
    check_attention(attn, attn.rows())?;
    if d == 0 {
        return Err(McaError::Shape("feature dimension must be positive".into()));
    }
    let n = attn.rows();
    let mut budgets = Vec::with_capacity(n);
    let mut exact_mask = Vec::with_capacity(n);
    for raw in raw_budgets(attn, cfg.alpha) {
        let ceiled = raw.ceil();
        if ceiled >= d as f64 {
            budgets.push(d);
            exact_mask.push(true);
        } else {
            budgets.push((ceiled as usize).max(cfg.min_samples).min(d));
            exact_mask.push(false);
        }
    }
    Ok(SamplePlan {
        budgets,
        exact_mask,
        draws: vec![Vec::new(); n],
    })
}

/// Dense reference layer, `Y = A (X W)`.
pub fn regular_forward(x: &Matrix, weights: &AttentionWeights) -> Result<AttentionOutput> {
    let attn = attention_matrix(x, weights)?;
    regular_with_attention(x, &attn, weights)
}

/// [`regular_forward`] with a caller-supplied attention matrix.
pub fn regular_with_attention(
    x: &Matrix,
    attn: &Matrix,
    weights: &AttentionWeights,
) -> Result<AttentionOutput> {
    check_input(x, weights)?;
    let (n, d) = x.shape();
    check_attention(attn, n)?;
    let rows: Vec<(Vec<f64>, u64)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut out = vec![0.0; d];
            let ops = accumulate_exact(x.row(j), &weights.w, &mut out);
            (out, ops)
        })
        .collect();
    let encoding_ops = rows.iter().map(|(_, ops)| ops).sum();
    let encoded = Matrix::new(n, d, rows.into_iter().flat_map(|(r, _)| r).collect())?;
    Ok(AttentionOutput {
        y: matmul(attn, &encoded)?,
        plan: SamplePlan::all_exact(n, d),
        flops: FlopsReport::exact(n, d),
        attn: attn.clone(),
        encoding_ops,
    })
}

/// Monte-Carlo attention forward pass. Deterministic in `seed`.
pub fn mca_forward(
    x: &Matrix,
    weights: &AttentionWeights,
    cfg: &McaConfig,
    seed: u64,
) -> Result<AttentionOutput> {
    let attn = attention_matrix(x, weights)?;
    approximate(x, &attn, weights, cfg, seed, 0)
}

/// [`mca_forward`] with a caller-supplied attention matrix, e.g. one dumped
/// from a trained model or produced by a synthetic generator.
pub fn mca_forward_with_attention(
    x: &Matrix,
    attn: &Matrix,
    weights: &AttentionWeights,
    cfg: &McaConfig,
    seed: u64,
) -> Result<AttentionOutput> {
    approximate(x, attn, weights, cfg, seed, 0)
}

/// Runs [`regular_forward`] or [`mca_forward`] according to `cfg.mode`.
pub fn forward(
    x: &Matrix,
    weights: &AttentionWeights,
    cfg: &McaConfig,
    seed: u64,
) -> Result<AttentionOutput> {
    match cfg.mode {
        Mode::Regular => regular_forward(x, weights),
        Mode::Approximation => mca_forward(x, weights, cfg, seed),
    }
}

fn approximate(
    x: &Matrix,
    attn: &Matrix,
    weights: &AttentionWeights,
    cfg: &McaConfig,
    seed: u64,
    head: usize,
) -> Result<AttentionOutput> {
    cfg.validate()?;
    check_input(x, weights)?;
    let (n, d) = x.shape();
    check_attention(attn, n)?;
    let dist = weights.sampling_dist()?;
    let mut plan = sample_budgets(attn, cfg, d)?;
    let stream_base = (head as u64) * n as u64;

    let tokens: Vec<(Vec<f64>, Vec<usize>, u64)> = (0..n)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let x_row = x.row(j);
            let mut out = vec![0.0; d];
            if plan.exact_mask[j] {
                let ops = accumulate_exact(x_row, &weights.w, &mut out);
                return Ok((out, Vec::new(), ops));
            }
            let r = plan.budgets[j];
            check_encode_args(x_row, &weights.w, dist, r)?;
            let mut rng = RngStream::new(seed, stream_base + j as u64);
            let indices = draw_indices(dist, r, &mut rng)?;
            let ops = accumulate_drawn(x_row, &weights.w, dist, &indices, &mut out);
            Ok((out, indices, ops))
        })
        .collect::<Result<_>>()?;

    let mut encoded = Vec::with_capacity(n * d);
    let mut encoding_ops = 0;
    for (j, (row, indices, ops)) in tokens.into_iter().enumerate() {
        encoded.extend_from_slice(&row);
        plan.draws[j] = indices;
        encoding_ops += ops;
    }
    let encoded = Matrix::new(n, d, encoded)?;
    let flops = flops_for_plan(&plan, n, d)?;
    Ok(AttentionOutput {
        y: matmul(attn, &encoded)?,
        plan,
        flops,
        attn: attn.clone(),
        encoding_ops,
    })
}

/// Splits the features into `per_head.len()` equal slices, runs each head on
/// its slice (own attention, own cached distribution, own stream range) and
/// concatenates the outputs.
pub fn multihead_forward(
    x: &Matrix,
    per_head: &[AttentionWeights],
    cfg: &McaConfig,
    seed: u64,
) -> Result<MultiHeadOutput> {
    multihead(x, per_head, cfg, seed, None)
}

/// [`multihead_forward`] with one supplied attention matrix shared by all heads.
pub fn multihead_forward_with_attention(
    x: &Matrix,
    attn: &Matrix,
    per_head: &[AttentionWeights],
    cfg: &McaConfig,
    seed: u64,
) -> Result<MultiHeadOutput> {
    multihead(x, per_head, cfg, seed, Some(attn))
}

fn multihead(
    x: &Matrix,
    per_head: &[AttentionWeights],
    cfg: &McaConfig,
    seed: u64,
    attn: Option<&Matrix>,
) -> Result<MultiHeadOutput> {
    cfg.validate()?;
    let heads = per_head.len();
    if heads != cfg.heads {
        return Err(McaError::Config(format!(
            "config expects {} heads, got weights for {heads}",
            cfg.heads
        )));
    }
    let d = x.cols();
    if !d.is_multiple_of(heads) {
        return Err(McaError::Config(format!(
            "feature dimension {d} is not divisible by {heads} heads"
        )));
    }
    let width = d / heads;
    let outputs = per_head
        .iter()
        .enumerate()
        .map(|(h, weights)| {
            let slice = x.column_block(h * width, width)?;
            let attn = match attn {
                Some(a) => a.clone(),
                None => attention_matrix(&slice, weights)?,
            };
            match cfg.mode {
                Mode::Regular => regular_with_attention(&slice, &attn, weights),
                Mode::Approximation => approximate(&slice, &attn, weights, cfg, seed, h),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let y = Matrix::hconcat(&outputs.iter().map(|o| o.y.clone()).collect::<Vec<_>>())?;
    let flops = outputs[1..]
        .iter()
        .fold(outputs[0].flops, |acc, o| acc.combine(&o.flops));
    Ok(MultiHeadOutput {
        y,
        heads: outputs,
        flops,
    })
}
