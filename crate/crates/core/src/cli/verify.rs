//! Statistical verification suites for the sampled estimators.
//!
//! Every trial draws from a stream keyed by the suite seed and the trial
//! index, and trial statistics are summed in fixed-size chunks whose order
//! does not depend on the thread pool. Reports are therefore bitwise
//! reproducible for a given seed on any number of threads.

use std::fmt::Write as _;

use clap::ValueEnum;
use rayon::prelude::*;

use super::synth::{fixture_rng, gaussian_matrix, gaussian_vector, random_weights, uneven_rows};
use crate::amm::{approx_encode_row, approx_matmul, optimal_probs, weight_probs};
use crate::attention::{
    attention_matrix, mca_forward_with_attention, raw_budgets, regular_forward, sample_budgets,
    McaConfig,
};
use crate::error::{McaError, Result};
use crate::sampling::{derive_seed, RngStream};
use crate::tensor::{frobenius_norm, l2_norm, matmul, vecmat, Matrix};

pub const CSV_HEADER: &str = "suite,case,params,statistic,lower,upper,status";

/// Largest sequence length and feature dimension accepted without `--large`.
pub const MAX_DESK_N: usize = 64;
pub const MAX_DESK_D: usize = 512;
pub const MIN_TRIALS: usize = 100;

/// Fraction of components whose mean must fall inside three standard errors.
pub const UNBIASED_MIN_FRACTION: f64 = 0.95;
pub const UNBIASED_Z: f64 = 3.0;
pub const SCALING_SLOPE_RANGE: (f64, f64) = (-0.6, -0.4);
/// Slack added to `delta` when checking the empirical tail fraction.
pub const TAIL_SLACK: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    #[value(name = "unbiased")]
    Unbiased,
    #[value(name = "lemma1")]
    Lemma1,
    #[value(name = "scaling")]
    Scaling,
    #[value(name = "theorem1-mean")]
    Theorem1Mean,
    #[value(name = "theorem1-tail")]
    Theorem1Tail,
    #[value(name = "budget")]
    Budget,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Unbiased,
        Suite::Lemma1,
        Suite::Scaling,
        Suite::Theorem1Mean,
        Suite::Theorem1Tail,
        Suite::Budget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Unbiased => "unbiased",
            Suite::Lemma1 => "lemma1",
            Suite::Scaling => "scaling",
            Suite::Theorem1Mean => "theorem1-mean",
            Suite::Theorem1Tail => "theorem1-tail",
            Suite::Budget => "budget",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyParams {
    pub trials: usize,
    pub seed: u64,
    /// `m x k x p` for the product suites, `n x d` for the attention suites,
    /// `d` (or `n x d`) for lemma1. `None` picks the suite default.
    pub dims: Option<Vec<usize>>,
    pub alphas: Option<Vec<f64>>,
    /// Sample counts for unbiased (first entry), lemma1 and scaling.
    pub samples: Option<Vec<usize>>,
    pub delta: f64,
    pub fixtures: usize,
    pub allow_large: bool,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            trials: 10_000,
            seed: 0,
            dims: None,
            alphas: None,
            samples: None,
            delta: 0.1,
            fixtures: 10,
            allow_large: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Diagnostic row; does not affect the overall verdict.
    Info,
}

impl Status {
    fn check(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub case: String,
    /// `key=value` pairs joined by `;`.
    pub params: String,
    pub statistic: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub status: Status,
}

impl CaseRecord {
    fn at_most(case: &str, params: String, statistic: f64, upper: f64) -> Self {
        Self {
            case: case.into(),
            params,
            statistic,
            lower: None,
            upper: Some(upper),
            status: Status::check(statistic <= upper),
        }
    }

    fn at_least(case: &str, params: String, statistic: f64, lower: f64) -> Self {
        Self {
            case: case.into(),
            params,
            statistic,
            lower: Some(lower),
            upper: None,
            status: Status::check(statistic >= lower),
        }
    }

    fn within(case: &str, params: String, statistic: f64, (lower, upper): (f64, f64)) -> Self {
        Self {
            case: case.into(),
            params,
            statistic,
            lower: Some(lower),
            upper: Some(upper),
            status: Status::check((lower..=upper).contains(&statistic)),
        }
    }

    fn flag(case: &str, params: String, ok: bool) -> Self {
        Self {
            case: case.into(),
            params,
            statistic: if ok { 1.0 } else { 0.0 },
            lower: Some(1.0),
            upper: None,
            status: Status::check(ok),
        }
    }

    fn info(case: &str, params: String, statistic: f64) -> Self {
        Self {
            case: case.into(),
            params,
            statistic,
            lower: None,
            upper: None,
            status: Status::Info,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suite: Suite,
    pub trials: usize,
    pub cases: Vec<CaseRecord>,
}

impl VerifyReport {
    /// True iff every non-diagnostic case passed.
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.status != Status::Fail)
    }

    pub fn checked_cases(&self) -> impl Iterator<Item = &CaseRecord> {
        self.cases.iter().filter(|c| c.status != Status::Info)
    }

    /// CSV rows without the header.
    pub fn csv_rows(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::new();
        for c in &self.cases {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.suite.name(),
                c.case,
                c.params,
                c.statistic,
                opt(c.lower),
                opt(c.upper),
                c.status.as_str()
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows())
    }
}

pub fn run_suite(suite: Suite, params: &VerifyParams) -> Result<VerifyReport> {
    if params.trials < MIN_TRIALS && suite != Suite::Budget {
        return Err(McaError::Config(format!(
            "at least {MIN_TRIALS} trials required, got {}",
            params.trials
        )));
    }
    let cases = match suite {
        Suite::Unbiased => unbiased(params)?,
        Suite::Lemma1 => lemma1(params)?,
        Suite::Scaling => scaling(params)?,
        Suite::Theorem1Mean => theorem1_statistics(params)?.mean_cases(),
        Suite::Theorem1Tail => theorem1_statistics(params)?.tail_cases(),
        Suite::Budget => budget(params)?,
    };
    Ok(VerifyReport {
        suite,
        trials: params.trials,
        cases,
    })
}

const CHUNK: usize = 256;

/// Sums per-trial statistics of width `width` over `trials` trials.
fn chunked_sums<F>(trials: usize, width: usize, per_trial: F) -> Result<Vec<f64>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let partial: Vec<Vec<f64>> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                per_trial(t as u64, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; width];
    for acc in partial {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
    }
    Ok(total)
}

fn check_dims(dims: &[usize], limits: &[usize], allow_large: bool) -> Result<()> {
    if dims.contains(&0) {
        return Err(McaError::Config(format!("dimensions must be positive: {dims:?}")));
    }
    if !allow_large {
        if let Some((v, lim)) = dims.iter().zip(limits).find(|(v, lim)| v > lim) {
            return Err(McaError::Config(format!(
                "dimension {v} exceeds desk-scale limit {lim}; pass --large to override"
            )));
        }
    }
    Ok(())
}

fn product_dims(params: &VerifyParams, default: [usize; 3]) -> Result<[usize; 3]> {
    let dims = params.dims.clone().unwrap_or_else(|| default.to_vec());
    let dims: [usize; 3] = dims.as_slice().try_into().map_err(|_| {
        McaError::Config(format!("expected dims MxKxP, got {} values", dims.len()))
    })?;
    check_dims(&dims, &[MAX_DESK_D; 3], params.allow_large)?;
    Ok(dims)
}

fn sample_counts(params: &VerifyParams, default: &[usize]) -> Result<Vec<usize>> {
    let counts = params.samples.clone().unwrap_or_else(|| default.to_vec());
    if counts.is_empty() || counts.contains(&0) {
        return Err(McaError::Config(format!(
            "sample counts must be positive, got {counts:?}"
        )));
    }
    Ok(counts)
}

fn unbiased(params: &VerifyParams) -> Result<Vec<CaseRecord>> {
    let [m, k, p] = product_dims(params, [4, 6, 5])?;
    let r = sample_counts(params, &[k])?[0];
    let mut rng = fixture_rng(params.seed, 0);
    let a = gaussian_matrix(m, k, 1.0, &mut rng);
    let b = uneven_rows(k, p, &mut rng);
    let dist = optimal_probs(&a, &b)?;
    let exact = matmul(&a, &b)?;
    let size = m * p;

    let sums = chunked_sums(params.trials, 2 * size, |t, acc| {
        let est = approx_matmul(&a, &b, &dist, r, &mut RngStream::new(params.seed, t))?;
        for (c, &v) in est.value.data().iter().enumerate() {
            acc[c] += v;
            acc[size + c] += v * v;
        }
        Ok(())
    })?;

    let trials = params.trials as f64;
    let mut cases = Vec::with_capacity(size + 1);
    let mut within = 0;
    for c in 0..size {
        let mean = sums[c] / trials;
        let var = ((sums[size + c] - trials * mean * mean) / (trials - 1.0)).max(0.0);
        let se = (var / trials).sqrt();
        let dev = (mean - exact.data()[c]).abs();
        let z = if se > 0.0 {
            dev / se
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if z <= UNBIASED_Z {
            within += 1;
        }
        cases.push(CaseRecord::info(
            "component_z",
            format!("row={};col={};r={r}", c / p, c % p),
            z,
        ));
    }
    cases.push(CaseRecord::at_least(
        "fraction_within_3se",
        format!("dims={m}x{k}x{p};r={r}"),
        within as f64 / size as f64,
        UNBIASED_MIN_FRACTION,
    ));
    Ok(cases)
}

fn lemma1(params: &VerifyParams) -> Result<Vec<CaseRecord>> {
    let d = match params.dims.as_deref() {
        None => 128,
        Some([d]) | Some([_, d]) => *d,
        Some(other) => {
            return Err(McaError::Config(format!(
                "expected dims D or NxD, got {} values",
                other.len()
            )))
        }
    };
    check_dims(&[d], &[MAX_DESK_D], params.allow_large)?;
    let counts = sample_counts(params, &[1, 4, 16, 64])?;
    let mut cases = Vec::new();
    for f in 0..params.fixtures {
        let mut rng = fixture_rng(params.seed, f as u64);
        let x = gaussian_vector(d, &mut rng);
        let w = uneven_rows(d, d, &mut rng);
        let dist = weight_probs(&w)?;
        let exact = vecmat(&x, &w)?;
        let scale = l2_norm(&x) * frobenius_norm(&w);
        for (ri, &r) in counts.iter().enumerate() {
            let cell_seed = derive_seed(params.seed, (f * counts.len() + ri) as u64);
            let sums = chunked_sums(params.trials, 1, |t, acc| {
                let h = approx_encode_row(&x, &w, &dist, r, &mut RngStream::new(cell_seed, t))?;
                let sq: f64 = h.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum();
                acc[0] += sq.sqrt();
                Ok(())
            })?;
            cases.push(CaseRecord::at_most(
                "mean_error",
                format!("fixture={f};d={d};r={r}"),
                sums[0] / params.trials as f64,
                scale / (r as f64).sqrt(),
            ));
        }
    }
    Ok(cases)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn scaling(params: &VerifyParams) -> Result<Vec<CaseRecord>> {
    let [m, k, p] = product_dims(params, [8, 32, 8])?;
    let counts = sample_counts(params, &[1, 2, 4, 8, 16, 32, 64, 128, 256])?;
    let mut distinct = counts.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(McaError::Config("scaling needs at least two sample counts".into()));
    }
    let mut rng = fixture_rng(params.seed, 0);
    let a = gaussian_matrix(m, k, 1.0, &mut rng);
    let b = uneven_rows(k, p, &mut rng);
    let dist = optimal_probs(&a, &b)?;
    let exact = matmul(&a, &b)?;

    let mut cases = Vec::new();
    let mut log_r = Vec::new();
    let mut log_err = Vec::new();
    for (ri, &r) in counts.iter().enumerate() {
        let cell_seed = derive_seed(params.seed, ri as u64);
        let sums = chunked_sums(params.trials, 1, |t, acc| {
            let est = approx_matmul(&a, &b, &dist, r, &mut RngStream::new(cell_seed, t))?;
            acc[0] += frobenius_norm(&est.value.sub(&exact)?);
            Ok(())
        })?;
        let mean = sums[0] / params.trials as f64;
        cases.push(CaseRecord::info("mean_error", format!("r={r}"), mean));
        log_r.push((r as f64).ln());
        log_err.push(mean.ln());
    }
    cases.push(CaseRecord::within(
        "loglog_slope",
        format!("dims={m}x{k}x{p};points={}", counts.len()),
        ols_slope(&log_r, &log_err),
        SCALING_SLOPE_RANGE,
    ));
    Ok(cases)
}

/// Error statistics of the attention layer for every requested alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Stats {
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub delta: f64,
    /// Mean input row norm.
    pub beta: f64,
    pub w_norm: f64,
    pub row_norms: Vec<f64>,
    pub per_alpha: Vec<AlphaStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaStats {
    pub alpha: f64,
    /// `alpha * beta * ||W||_F`
    pub bound: f64,
    pub mean_row_errors: Vec<f64>,
    /// Fraction of trials whose row error exceeded `bound / delta`.
    pub exceed_fraction: Vec<f64>,
    pub reduction_factor: f64,
}

impl AlphaStats {
    pub fn mean_error(&self) -> f64 {
        self.mean_row_errors.iter().sum::<f64>() / self.mean_row_errors.len() as f64
    }
}

impl Theorem1Stats {
    pub fn mean_cases(&self) -> Vec<CaseRecord> {
        let mut cases = Vec::new();
        for s in &self.per_alpha {
            for (i, &err) in s.mean_row_errors.iter().enumerate() {
                cases.push(CaseRecord::at_most(
                    "row_mean_error",
                    format!("alpha={};row={i};row_norm={}", s.alpha, self.row_norms[i]),
                    err,
                    s.bound,
                ));
            }
            cases.push(CaseRecord::info(
                "mean_error_all_rows",
                format!("alpha={};reduction={}", s.alpha, s.reduction_factor),
                s.mean_error(),
            ));
        }
        cases
    }

    pub fn tail_cases(&self) -> Vec<CaseRecord> {
        let mut cases = Vec::new();
        for s in &self.per_alpha {
            for (i, &frac) in s.exceed_fraction.iter().enumerate() {
                cases.push(CaseRecord::at_most(
                    "row_exceed_fraction",
                    format!(
                        "alpha={};row={i};delta={};threshold={}",
                        s.alpha,
                        self.delta,
                        s.bound / self.delta
                    ),
                    frac,
                    self.delta + TAIL_SLACK,
                ));
            }
        }
        cases
    }
}

pub fn theorem1_statistics(params: &VerifyParams) -> Result<Theorem1Stats> {
    let dims = params.dims.clone().unwrap_or_else(|| vec![32, 128]);
    let [n, d]: [usize; 2] = dims.as_slice().try_into().map_err(|_| {
        McaError::Config(format!("expected dims NxD, got {} values", dims.len()))
    })?;
    check_dims(&[n, d], &[MAX_DESK_N, MAX_DESK_D], params.allow_large)?;
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(McaError::Config(format!(
            "delta must lie in (0, 1), got {}",
            params.delta
        )));
    }
    let alphas = params.alphas.clone().unwrap_or_else(|| vec![0.2, 0.4, 0.6, 1.0]);
    let configs = alphas
        .iter()
        .map(|&a| McaConfig::new(a))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = fixture_rng(params.seed, 0);
    let x = gaussian_matrix(n, d, 1.0, &mut rng);
    let weights = random_weights(d, &mut rng);
    let attn = attention_matrix(&x, &weights)?;
    let exact = regular_forward(&x, &weights)?.y;
    let row_norms: Vec<f64> = (0..n).map(|i| l2_norm(x.row(i))).collect();
    let beta = row_norms.iter().sum::<f64>() / n as f64;
    let w_norm = frobenius_norm(weights.w());

    let trials = params.trials as f64;
    let mut per_alpha = Vec::with_capacity(configs.len());
    for (ai, cfg) in configs.iter().enumerate() {
        let bound = cfg.alpha * beta * w_norm;
        let threshold = bound / params.delta;
        let alpha_seed = derive_seed(params.seed, ai as u64);
        let sums = chunked_sums(params.trials, 2 * n, |t, acc| {
            let seed = derive_seed(alpha_seed, t);
            let out = mca_forward_with_attention(&x, &attn, &weights, cfg, seed)?;
            for i in 0..n {
                let sq: f64 = out
                    .y
                    .row(i)
                    .iter()
                    .zip(exact.row(i))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let err = sq.sqrt();
                acc[i] += err;
                if err > threshold {
                    acc[n + i] += 1.0;
                }
            }
            Ok(())
        })?;
        let plan = sample_budgets(&attn, cfg, d)?;
        per_alpha.push(AlphaStats {
            alpha: cfg.alpha,
            bound,
            mean_row_errors: sums[..n].iter().map(|s| s / trials).collect(),
            exceed_fraction: sums[n..].iter().map(|s| s / trials).collect(),
            reduction_factor: crate::metrics::flops_for_plan(&plan, n, d)?.reduction_factor,
        });
    }
    Ok(Theorem1Stats {
        n,
        d,
        trials: params.trials,
        delta: params.delta,
        beta,
        w_norm,
        row_norms,
        per_alpha,
    })
}

/// Attention matrix, budget parameters and hand-computed expectations.
pub struct BudgetCase {
    pub name: &'static str,
    pub attn: Matrix,
    pub alpha: f64,
    pub d: usize,
    pub min_samples: usize,
    pub budgets: Vec<usize>,
    pub exact: Vec<bool>,
}

pub fn crafted_budget_cases() -> Vec<BudgetCase> {
    let uniform = |n: usize| Matrix::from_fn(n, n, |_, _| 1.0 / n as f64);
    let case = |name, attn, alpha, d, min_samples, budgets: &[usize], exact: &[bool]| BudgetCase {
        name,
        attn,
        alpha,
        d,
        min_samples,
        budgets: budgets.to_vec(),
        exact: exact.to_vec(),
    };
    let skewed = Matrix::from_rows(&[
        [0.5, 0.25, 0.125, 0.125],
        [0.25, 0.25, 0.25, 0.25],
        [0.25, 0.25, 0.25, 0.25],
        [0.25, 0.25, 0.25, 0.25],
    ])
    .unwrap();
    vec![
        // (4 * 1/4 / 1)^2 = 1
        case("uniform_alpha1", uniform(4), 1.0, 64, 1, &[1; 4], &[false; 4]),
        // (1 / 0.5)^2 = 4
        case("uniform_alpha0.5", uniform(4), 0.5, 64, 1, &[4; 4], &[false; 4]),
        // (1 / 0.3)^2 = 11.1 -> 12
        case("uniform_alpha0.3", uniform(5), 0.3, 64, 1, &[12; 5], &[false; 5]),
        // (4 * 1 / 1)^2 = 16
        case("one_hot_alpha1", Matrix::identity(4), 1.0, 64, 1, &[16; 4], &[false; 4]),
        // (4 / 0.2)^2 = 400 >= 64
        case("one_hot_clamped", Matrix::identity(4), 0.2, 64, 1, &[64; 4], &[true; 4]),
        // (8 / 1)^2 = 64 == d sits on the exact boundary
        case("one_hot_at_d", Matrix::identity(8), 1.0, 64, 1, &[64; 8], &[true; 8]),
        // raw 64 < d = 65 stays sampled
        case("one_hot_below_d", Matrix::identity(8), 1.0, 65, 1, &[64; 8], &[false; 8]),
        // column maxima [0.5, 0.25, 0.25, 0.25]: 100 -> exact, then 25 each
        case(
            "skewed_alpha0.2",
            skewed,
            0.2,
            64,
            1,
            &[64, 25, 25, 25],
            &[true, false, false, false],
        ),
        // raw 1 raised to min_samples
        case("min_samples_floor", uniform(4), 1.0, 64, 3, &[3; 4], &[false; 4]),
        // maxima [0.9, 0.4]: (3.6)^2 = 12.96 -> 13, (1.6)^2 = 2.56 -> 3
        case(
            "two_tokens_alpha0.5",
            Matrix::from_rows(&[[0.9, 0.1], [0.6, 0.4]]).unwrap(),
            0.5,
            64,
            1,
            &[13, 3],
            &[false, false],
        ),
        // maxima [0.98, 0.49, 0.01]: 8.64 -> 9, 2.16 -> 3, 0.0009 -> 1
        case(
            "tiny_column",
            Matrix::from_rows(&[[0.5, 0.49, 0.01], [0.5, 0.49, 0.01], [0.98, 0.01, 0.01]])
                .unwrap(),
            1.0,
            16,
            1,
            &[9, 3, 1],
            &[false, false, false],
        ),
    ]
}

fn budget(params: &VerifyParams) -> Result<Vec<CaseRecord>> {
    let mut cases = Vec::new();
    for c in crafted_budget_cases() {
        let cfg = McaConfig::new(c.alpha)?.with_min_samples(c.min_samples);
        let plan = sample_budgets(&c.attn, &cfg, c.d)?;
        let ok = plan.budgets == c.budgets && plan.exact_mask == c.exact;
        cases.push(CaseRecord::flag(
            "crafted",
            format!("name={};alpha={};d={}", c.name, c.alpha, c.d),
            ok,
        ));
    }

    let alphas = params.alphas.clone().unwrap_or_else(|| vec![0.2, 0.4, 0.6, 1.0]);
    for &alpha in &alphas {
        McaConfig::new(alpha)?;
    }
    for f in 0..params.fixtures.max(1) {
        let mut rng = fixture_rng(params.seed, f as u64);
        let n = 4 + f % 13;
        let x = gaussian_matrix(n, 16, 1.0 + f as f64 * 0.25, &mut rng);
        let attn = attention_matrix(&x, &random_weights(16, &mut rng))?;
        let halving = alphas.iter().all(|&alpha| {
            let wide = raw_budgets(&attn, alpha);
            let tight = raw_budgets(&attn, alpha / 2.0);
            wide.iter().zip(&tight).all(|(w, t)| *t == 4.0 * w)
        });
        cases.push(CaseRecord::flag(
            "alpha_halving_quadruples",
            format!("fixture={f};n={n}"),
            halving,
        ));

        let mut sorted = alphas.clone();
        sorted.sort_by(f64::total_cmp);
        let plans = sorted
            .iter()
            .map(|&a| sample_budgets(&attn, &McaConfig::new(a)?, 64))
            .collect::<Result<Vec<_>>>()?;
        let monotone = plans.windows(2).all(|p| {
            p[0].budgets.iter().zip(&p[1].budgets).all(|(lo, hi)| lo >= hi)
        });
        cases.push(CaseRecord::flag(
            "nonincreasing_in_alpha",
            format!("fixture={f};n={n}"),
            monotone,
        ));
    }
    Ok(cases)
}
