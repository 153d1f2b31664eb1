use serde::{Deserialize, Serialize};

use super::TierMixture;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub mixture: TierMixture,
    pub peak_lr: f64,
    pub total_steps: usize,
    pub warmup_fraction: f64,
    pub batch_size: usize,
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        self.mixture.validate()?;
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return Err(Error::Config(format!("peak_lr must be > 0, got {}", self.peak_lr)));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::Config(format!(
                "warmup_fraction must be in (0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if self.total_steps == 0 || self.batch_size == 0 {
            return Err(Error::Config("stage needs at least one step and one example".into()));
        }
        Ok(())
    }
}

/// Number of linear-warmup steps, `round(warmup_fraction * total_steps)`.
pub fn warmup_steps(stage: &StageConfig) -> usize {
    (stage.warmup_fraction * stage.total_steps as f64).round() as usize
}

/// Learning rate at `step` of a stage.
///
/// Warmup rises linearly from 0 at step 0 to the peak at step `W`; the
/// cosine phase then covers steps `W..=total-1` and reaches exactly 0 on
/// the last step of the stage.
pub fn lr_at(stage: &StageConfig, step: usize) -> Result<f64> {
    if step >= stage.total_steps {
        return Err(Error::Config(format!(
            "step {step} outside stage of {} steps",
            stage.total_steps
        )));
    }
    let peak = stage.peak_lr;
    let w = warmup_steps(stage);
    if step < w {
        return Ok(peak * step as f64 / w as f64);
    }
    let span = stage.total_steps - 1 - w;
    if span == 0 {
        return Ok(peak);
    }
    let progress = (step - w) as f64 / span as f64;
    Ok(peak * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Tier;

    fn stage(peak: f64, total: usize) -> StageConfig {
        StageConfig {
            mixture: TierMixture::single(Tier::A),
            peak_lr: peak,
            total_steps: total,
            warmup_fraction: 0.1,
            batch_size: 4,
        }
    }

    #[test]
    fn landmarks() {
        let s = stage(2e-4, 101);
        let w = warmup_steps(&s);
        assert_eq!(w, 10);
        assert_eq!(lr_at(&s, 0).unwrap(), 0.0);
        assert_eq!(lr_at(&s, w).unwrap(), 2e-4);
        assert!((lr_at(&s, 55).unwrap() - 1e-4).abs() < 1e-18);
        assert!(lr_at(&s, 100).unwrap().abs() < 1e-18);
        assert!(lr_at(&s, 101).is_err());
    }

    #[test]
    fn shape_properties() {
        for total in [1usize, 2, 5, 9, 37, 1200] {
            let s = stage(1e-3, total);
            let lrs: Vec<f64> = (0..total).map(|k| lr_at(&s, k).unwrap()).collect();
            assert!(lrs.iter().all(|l| (0.0..=1e-3).contains(l)));
            let max = lrs.iter().cloned().fold(0.0, f64::max);
            assert_eq!(max, 1e-3, "total {total}");
            let w = warmup_steps(&s);
            // cosine phase never increases
            for k in w.max(1)..total {
                assert!(lrs[k] <= lrs[k - 1] || k <= w);
            }
            // warmup-to-cosine seam: one warmup increment at most
            if w >= 1 && w < total {
                assert!(lrs[w] - lrs[w - 1] <= 1e-3 / w as f64 + 1e-18);
            }
        }
    }

    #[test]
    fn validation() {
        assert!(stage(1e-4, 10).validate().is_ok());
        assert!(stage(0.0, 10).validate().is_err());
        let mut s = stage(1e-4, 10);
        s.warmup_fraction = 1.0;
        assert!(s.validate().is_err());
    }
}
