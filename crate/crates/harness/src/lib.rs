//! Seeded datasets, "why not" questions and method-comparison experiments.

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod questions;
pub mod sampling;

pub use error::HarnessError;
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport, ResultRow, Scale, Summary};
pub use metrics::{compute_metrics, MetricsRecord};
pub use questions::{generate_questions, CeQuestion, QuestionRegion, QuestionSet};
pub use sampling::{sample_dcopf_demands, sample_uc_profiles, ProfileOptions};
