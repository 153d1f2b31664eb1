//! Token error rate with substitution/insertion/deletion accounting,
//! stratified by tier plus a pooled global row.
//!
//! Tokens are synthetic symbols rather than words; the rate is still
//! reported as "WER" so tables line up with the usual ASR layout.

mod align;
mod report;

pub use align::{edit_distance, levenshtein_alignment, wer, EditCounts, WerStats};
pub use report::{
    evaluate_hypotheses, evaluate_model, read_hypotheses, write_hypotheses, EvalReport, Hypothesis,
};
