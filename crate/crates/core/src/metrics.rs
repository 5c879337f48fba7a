//! FLOPs accounting for the token-encoding step `X W`.
//!
//! Multiplies and adds count separately. An exactly encoded token costs
//! `2 d^2`; a sampled token costs `r (2 d + 3)`. The aggregation `A H` is
//! reported on its own and the score computation is not counted at all.

use crate::amm::COEFFICIENT_OPS;
use crate::attention::{sample_budgets, McaConfig, SamplePlan};
use crate::error::{McaError, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlopsReport {
    pub exact_encoding: u64,
    pub approx_encoding: u64,
    pub aggregation: u64,
    pub reduction_factor: f64,
    pub total_reduction: f64,
}

impl FlopsReport {
    pub fn from_counts(exact_encoding: u64, approx_encoding: u64, aggregation: u64) -> Self {
        Self {
            exact_encoding,
            approx_encoding,
            aggregation,
            reduction_factor: exact_encoding as f64 / approx_encoding as f64,
            total_reduction: (exact_encoding + aggregation) as f64
                / (approx_encoding + aggregation) as f64,
        }
    }

    /// Report for the dense layer, where both encoding counters coincide.
    pub fn exact(n: usize, d: usize) -> Self {
        let exact = exact_token_cost(d) * n as u64;
        Self::from_counts(exact, exact, aggregation_cost(n, d))
    }

    /// Sums the counters of two reports and recomputes both ratios.
    pub fn combine(&self, other: &FlopsReport) -> FlopsReport {
        Self::from_counts(
            self.exact_encoding + other.exact_encoding,
            self.approx_encoding + other.approx_encoding,
            self.aggregation + other.aggregation,
        )
    }
}

pub fn exact_token_cost(d: usize) -> u64 {
    2 * (d as u64) * (d as u64)
}

pub fn sampled_token_cost(r: usize, d: usize) -> u64 {
    r as u64 * (2 * d as u64 + COEFFICIENT_OPS)
}

pub fn aggregation_cost(n: usize, d: usize) -> u64 {
    2 * (n as u64) * (n as u64) * d as u64
}

pub fn flops_for_plan(plan: &SamplePlan, n: usize, d: usize) -> Result<FlopsReport> {
    if plan.budgets.len() != n || plan.exact_mask.len() != n {
        return Err(McaError::Shape(format!(
            "plan covers {} tokens, expected {n}",
            plan.budgets.len()
        )));
    }
    let approx = plan
        .budgets
        .iter()
        .zip(&plan.exact_mask)
        .map(|(&r, &exact)| {
            if exact {
                exact_token_cost(d)
            } else {
                sampled_token_cost(r, d)
            }
        })
        .sum();
    Ok(FlopsReport::from_counts(
        exact_token_cost(d) * n as u64,
        approx,
        aggregation_cost(n, d),
    ))
}

/// Reduction factor the approximate forward pass would report for `attn`,
/// without running it.
pub fn predicted_reduction(attn: &Matrix, cfg: &McaConfig, d: usize) -> Result<f64> {
    let plan = sample_budgets(attn, cfg, d)?;
    Ok(flops_for_plan(&plan, attn.rows(), d)?.reduction_factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(budgets: Vec<usize>, exact_mask: Vec<bool>) -> SamplePlan {
        let n = budgets.len();
        SamplePlan {
            budgets,
            exact_mask,
            draws: vec![Vec::new(); n],
        }
    }

    #[test]
    fn all_exact_is_unit_reduction() {
        let report = flops_for_plan(&plan(vec![8; 4], vec![true; 4]), 4, 8).unwrap();
        assert_eq!(report.reduction_factor, 1.0);
        assert_eq!(report.total_reduction, 1.0);
        assert_eq!(report, FlopsReport::exact(4, 8));
    }

    #[test]
    fn bert_sized_hand_value() {
        let d = 768;
        let report = flops_for_plan(&plan(vec![96; 10], vec![false; 10]), 10, d).unwrap();
        let expected = 2.0 * 768.0f64.powi(2) / (96.0 * (2.0 * 768.0 + 3.0));
        assert!((report.reduction_factor - expected).abs() < 1e-12);
        assert!((report.reduction_factor - 7.98).abs() < 5e-3);
    }

    #[test]
    fn single_sample_limit_approaches_d() {
        let d = 4096;
        let report = flops_for_plan(&plan(vec![1; 3], vec![false; 3]), 3, d).unwrap();
        let expected = 2.0 * (d as f64).powi(2) / (2.0 * d as f64 + 3.0);
        assert!((report.reduction_factor - expected).abs() < 1e-9);
        assert!((report.reduction_factor / d as f64 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn plan_length_mismatch() {
        assert!(flops_for_plan(&plan(vec![1; 3], vec![false; 3]), 4, 8).is_err());
    }

    #[test]
    fn combine_sums_counters() {
        let a = FlopsReport::from_counts(100, 10, 5);
        let b = FlopsReport::from_counts(100, 40, 5);
        let c = a.combine(&b);
        assert_eq!((c.exact_encoding, c.approx_encoding, c.aggregation), (200, 50, 10));
        assert_eq!(c.reduction_factor, 4.0);
    }

    #[test]
    fn predicted_uniform_and_one_hot() {
        let d = 64;
        let n = 16;
        let cfg = McaConfig::new(1.0).unwrap();
        let uniform = Matrix::from_fn(n, n, |_, _| 1.0 / n as f64);
        let expected = 2.0 * (d * d) as f64 / (2.0 * d as f64 + 3.0);
        assert!((predicted_reduction(&uniform, &cfg, d).unwrap() - expected).abs() < 1e-9);

        let cfg = McaConfig::new(0.2).unwrap();
        let one_hot = Matrix::from_fn(n, n, |i, j| if i == j { 0.97 } else { 0.03 / 15.0 });
        assert_eq!(predicted_reduction(&one_hot, &cfg, d).unwrap(), 1.0);
    }

    #[test]
    fn sparse_columns_beat_moderate_columns() {
        let n = 32;
        let d = 128;
        let cfg = McaConfig::new(0.2).unwrap();
        // every query attends almost entirely to token 0 or token 1
        let eps = 1e-3;
        let peaked = Matrix::from_fn(n, n, |i, j| {
            if j == i % 2 {
                1.0 - eps
            } else {
                eps / (n - 1) as f64
            }
        });
        let moderate = Matrix::from_fn(n, n, |_, _| 1.0 / n as f64);
        let peaked_factor = predicted_reduction(&peaked, &cfg, d).unwrap();
        let moderate_factor = predicted_reduction(&moderate, &cfg, d).unwrap();
        // peaked: 2 exact tokens + 30 single-sample tokens
        let expected_peaked = (32.0 * 2.0 * 128.0 * 128.0) / (2.0 * 2.0 * 128.0 * 128.0 + 30.0 * 259.0);
        // moderate: every token gets ceil(1/0.2^2) = 25 samples
        let expected_moderate = (2.0 * 128.0 * 128.0) / (25.0 * 259.0);
        assert!((peaked_factor - expected_peaked).abs() < 1e-9);
        assert!((moderate_factor - expected_moderate).abs() < 1e-9);
        assert!(peaked_factor > moderate_factor);
    }
}
