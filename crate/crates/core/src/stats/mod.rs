//! Statistical tests and summaries used to compare corpora.

pub mod correlation;
pub mod importance;
pub mod mwu;

pub use correlation::{spearman, split_half_correlation, split_half_sessions, CorrelationEntry};
pub use importance::{feature_importance, ImportanceEntry, ImportanceParams, ImportanceResult};
pub use mwu::{mann_whitney_u, mann_whitney_u_with, TestMethod, TestResult, DEFAULT_EXACT_THRESHOLD};
