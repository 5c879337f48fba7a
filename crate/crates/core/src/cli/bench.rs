//! FLOPs-reduction and error benchmark over seeded synthetic inputs or an
//! imported attention matrix.

use std::fmt::Write as _;
use std::path::PathBuf;

use super::io::{import_attention, MatrixFormat};
use super::synth::{
    fixture_rng, gaussian_attention, gaussian_matrix, peaked_attention, random_weights,
    uniform_attention, AttentionKind,
};
use crate::attention::{
    multihead_forward, multihead_forward_with_attention, McaConfig, Mode, MultiHeadOutput,
};
use crate::error::{McaError, Result};
use crate::tensor::{l2_norm, Matrix};

pub const CSV_HEADER: &str =
    "alpha,n,d,reduction_factor,total_reduction,mean_row_error,max_row_error";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    /// Attention matrix to load; replaces the synthetic generator.
    pub input: Option<PathBuf>,
    pub format: MatrixFormat,
    pub synthetic: AttentionKind,
    pub temperature: f64,
    /// Query blocks of the peaked generator.
    pub blocks: usize,
    pub peak_eps: f64,
    pub alphas: Vec<f64>,
    pub heads: usize,
    pub seed: u64,
    pub mode: Mode,
    pub n: usize,
    pub d: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            input: None,
            format: MatrixFormat::Mcam,
            synthetic: AttentionKind::Computed,
            temperature: 1.0,
            blocks: 4,
            peak_eps: 0.01,
            alphas: vec![0.2, 0.4, 0.6, 1.0],
            heads: 1,
            seed: 0,
            mode: Mode::Approximation,
            n: 32,
            d: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub alpha: f64,
    pub n: usize,
    pub d: usize,
    pub reduction_factor: f64,
    pub total_reduction: f64,
    pub mean_row_error: f64,
    pub max_row_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    /// Rows of an imported attention matrix that were renormalized.
    pub renormalized_rows: Vec<usize>,
}

impl BenchResult {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.alpha,
                r.n,
                r.d,
                r.reduction_factor,
                r.total_reduction,
                r.mean_row_error,
                r.max_row_error
            )
            .unwrap();
        }
        out
    }
}

pub fn run_bench(params: &BenchParams) -> Result<BenchResult> {
    if params.heads == 0 || !params.d.is_multiple_of(params.heads) {
        return Err(McaError::Config(format!(
            "feature dimension {} is not divisible by {} heads",
            params.d, params.heads
        )));
    }
    let mut rng = fixture_rng(params.seed, 0);
    let mut renormalized_rows = Vec::new();
    let attn = match (&params.input, params.synthetic) {
        (Some(path), _) => {
            let imported = import_attention(path, params.format)?;
            renormalized_rows = imported.renormalized_rows;
            Some(imported.matrix)
        }
        (None, AttentionKind::Computed) => None,
        (None, AttentionKind::Uniform) => Some(uniform_attention(params.n)),
        (None, AttentionKind::Peaked) => {
            Some(peaked_attention(params.n, params.blocks, params.peak_eps))
        }
        (None, AttentionKind::Gaussian) => {
            if params.temperature.is_nan() || params.temperature <= 0.0 {
                return Err(McaError::Config("temperature must be positive".into()));
            }
            Some(gaussian_attention(params.n, params.temperature, &mut rng))
        }
    };
    let n = attn.as_ref().map_or(params.n, Matrix::rows);
    let d = params.d;
    let x = gaussian_matrix(n, d, 1.0, &mut rng);
    let head_dim = d / params.heads;
    let weights: Vec<_> = (0..params.heads)
        .map(|_| random_weights(head_dim, &mut rng))
        .collect();

    let run = |cfg: &McaConfig| -> Result<MultiHeadOutput> {
        match &attn {
            Some(a) => multihead_forward_with_attention(&x, a, &weights, cfg, params.seed),
            None => multihead_forward(&x, &weights, cfg, params.seed),
        }
    };

    let mut rows = Vec::with_capacity(params.alphas.len());
    for &alpha in &params.alphas {
        let cfg = McaConfig::new(alpha)?.with_heads(params.heads);
        let exact = run(&cfg.clone().with_mode(Mode::Regular))?;
        let out = match params.mode {
            Mode::Regular => exact.clone(),
            Mode::Approximation => run(&cfg)?,
        };
        let diff = out.y.sub(&exact.y)?;
        let errors: Vec<f64> = (0..n).map(|i| l2_norm(diff.row(i))).collect();
        rows.push(BenchRow {
            alpha,
            n,
            d,
            reduction_factor: out.flops.reduction_factor,
            total_reduction: out.flops.total_reduction,
            mean_row_error: errors.iter().sum::<f64>() / n as f64,
            max_row_error: errors.iter().copied().fold(0.0, f64::max),
        });
    }
    Ok(BenchResult {
        rows,
        renormalized_rows,
    })
}
