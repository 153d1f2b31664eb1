use serde::{Deserialize, Serialize};

use super::StageConfig;
use crate::synth::Tier;
use crate::{Error, Result};

/// Which training tiers a stage draws from.
///
/// `Natural` pools every trainable tier, so each tier's share of frames
/// equals its share of the training split. `Frames` fixes the expected
/// share of frames per tier; `{A: 1, C: 1}` is a 1:1 mixture by duration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierMixture {
    Natural,
    Frames(Vec<(Tier, f64)>),
}

impl TierMixture {
    pub fn single(tier: Tier) -> Self {
        TierMixture::Frames(vec![(tier, 1.0)])
    }

    pub fn equal(a: Tier, b: Tier) -> Self {
        TierMixture::Frames(vec![(a, 1.0), (b, 1.0)])
    }

    pub fn validate(&self) -> Result<()> {
        if let TierMixture::Frames(parts) = self {
            if parts.iter().any(|(t, w)| *t == Tier::D && *w > 0.0) {
                return Err(Error::Config("tier D cannot appear in a training mixture".into()));
            }
            if parts.iter().any(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
                return Err(Error::Config("mixture weights must be finite and >= 0".into()));
            }
            if !parts.iter().any(|(_, w)| *w > 0.0) {
                return Err(Error::Config("mixture weights are all zero".into()));
            }
        }
        Ok(())
    }

    /// Order-independent label, e.g. `A+C` or `all`.
    pub fn label(&self) -> String {
        match self {
            TierMixture::Natural => "all".into(),
            TierMixture::Frames(parts) => {
                let mut tiers: Vec<Tier> = parts.iter().filter(|(_, w)| *w > 0.0).map(|(t, _)| *t).collect();
                tiers.sort();
                tiers.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("+")
            }
        }
    }

    /// Stream key for batch sampling: identical mixtures draw identical
    /// batches, independent of the learning rate attached to the stage.
    pub fn stream_key(&self) -> u64 {
        let mut parts: Vec<(Tier, u64)> = match self {
            TierMixture::Natural => return crate::rng::tag("natural"),
            TierMixture::Frames(p) => p.iter().map(|(t, w)| (*t, w.to_bits())).collect(),
        };
        parts.sort();
        parts
            .iter()
            .fold(crate::rng::tag("frames"), |acc, (t, w)| {
                crate::rng::derive_seed(acc, &[*t as u64, *w])
            })
    }
}

/// Step budget per stage; every condition consumes the same total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepBudget {
    pub steps_per_stage: usize,
    pub single_stage_steps: usize,
    pub batch_size: usize,
    pub warmup_fraction: f64,
}

impl Default for StepBudget {
    fn default() -> Self {
        StepBudget {
            steps_per_stage: 1200,
            single_stage_steps: 3600,
            batch_size: 32,
            warmup_fraction: 0.10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub id: u32,
    pub name: String,
    pub stages: Vec<StageConfig>,
}

impl Condition {
    pub fn total_steps(&self) -> usize {
        self.stages.iter().map(|s| s.total_steps).sum()
    }

    pub fn schedule_label(&self) -> String {
        self.stages
            .iter()
            .map(|s| format!("{:e}", s.peak_lr))
            .collect::<Vec<_>>()
            .join(" -> ")
    }

    pub fn curriculum_label(&self) -> String {
        self.stages
            .iter()
            .map(|s| s.mixture.label())
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

pub const CONDITION_IDS: std::ops::RangeInclusive<u32> = 1..=6;

pub fn build_condition(id: u32) -> Result<Condition> {
    build_condition_with(id, &StepBudget::default())
}

/// The six ablation conditions. 3–6 cross LR direction (decreasing for
/// 3/4, increasing for 5/6) with curriculum direction (easy-to-hard for
/// 3/5, hard-to-easy for 4/6).
pub fn build_condition_with(id: u32, budget: &StepBudget) -> Result<Condition> {
    const HIGH: f64 = 2e-4;
    const MID: f64 = 1e-4;
    const LOW: f64 = 1e-5;
    let stage = |mixture: TierMixture, peak_lr: f64, total_steps: usize| StageConfig {
        mixture,
        peak_lr,
        total_steps,
        warmup_fraction: budget.warmup_fraction,
        batch_size: budget.batch_size,
    };
    let easy_to_hard = [
        TierMixture::single(Tier::A),
        TierMixture::single(Tier::B),
        TierMixture::equal(Tier::C, Tier::A),
    ];
    let hard_to_easy = [
        TierMixture::single(Tier::C),
        TierMixture::single(Tier::B),
        TierMixture::equal(Tier::A, Tier::C),
    ];
    let staged = |curriculum: [TierMixture; 3], peaks: [f64; 3]| -> Vec<StageConfig> {
        curriculum
            .into_iter()
            .zip(peaks)
            .map(|(m, lr)| stage(m, lr, budget.steps_per_stage))
            .collect()
    };
    let (name, stages) = match id {
        1 => (
            "Single-stage, low LR",
            vec![stage(TierMixture::Natural, LOW, budget.single_stage_steps)],
        ),
        2 => (
            "Single-stage, high LR",
            vec![stage(TierMixture::Natural, HIGH, budget.single_stage_steps)],
        ),
        3 => ("Standard MFT", staged(easy_to_hard, [HIGH, MID, LOW])),
        4 => ("R-MFT", staged(hard_to_easy, [HIGH, MID, LOW])),
        5 => ("Increasing LR, E->H", staged(easy_to_hard, [LOW, MID, HIGH])),
        6 => ("Increasing LR, H->E", staged(hard_to_easy, [LOW, MID, HIGH])),
        other => {
            return Err(Error::Config(format!(
                "unknown condition {other}; valid ids are 1-6"
            )))
        }
    };
    let condition = Condition {
        id,
        name: name.into(),
        stages,
    };
    for s in &condition.stages {
        s.validate()?;
    }
    Ok(condition)
}
