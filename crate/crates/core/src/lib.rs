//! Monte-Carlo attention: self-attention whose token-encoding step `X W` is
//! replaced by sampled column-row outer products, with per-token sample
//! budgets driven by how much attention each token receives.

pub mod amm;
pub mod attention;
pub mod cli;
pub mod error;
pub mod metrics;
pub mod sampling;
pub mod tensor;

pub use attention::{
    attention_matrix, forward, mca_forward, mca_forward_with_attention, multihead_forward,
    regular_forward, sample_budgets, AttentionOutput, AttentionWeights, McaConfig, Mode,
    MultiHeadOutput, SamplePlan,
};
pub use error::{McaError, Result};
pub use metrics::{flops_for_plan, predicted_reduction, FlopsReport};
pub use sampling::{RngStream, SamplingDistribution};
pub use tensor::Matrix;
