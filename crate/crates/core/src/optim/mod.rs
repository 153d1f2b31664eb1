//! AdamW, per-stage warmup + cosine schedules, and the six ablation
//! conditions.

mod adamw;
mod condition;
mod schedule;

pub use adamw::{adamw_step, OptimHyper, OptimState};
pub use condition::{
    build_condition, build_condition_with, Condition, StepBudget, TierMixture, CONDITION_IDS,
};
pub use schedule::{lr_at, warmup_steps, StageConfig};
