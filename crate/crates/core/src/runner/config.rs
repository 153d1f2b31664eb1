use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::fnv1a64;
use crate::model::ModelConfig;
use crate::optim::{build_condition_with, Condition, OptimHyper, StepBudget, TierMixture};
use crate::synth::{CorpusConfig, SplitCounts};
use crate::{Error, Result};

/// Learning-rate multiplier mapping the nominal peaks onto this model size.
pub const DESK_LR_SCALE: f64 = 15.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub steps: usize,
    pub peak_lr: f64,
    pub batch_size: usize,
    pub warmup_fraction: f64,
    pub mixture: TierMixture,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 3000,
            peak_lr: 2e-4,
            batch_size: 32,
            warmup_fraction: 0.1,
            mixture: TierMixture::Natural,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Validation-loss cadence in optimizer steps; 0 disables it.
    pub val_every: usize,
    /// Steps averaged for a stage's final-window loss.
    pub final_window: usize,
    pub include_d_in_global: bool,
    /// Also decode the eval split after every stage, not just the last.
    pub per_stage_eval: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            val_every: 100,
            final_window: 50,
            include_d_in_global: true,
            per_stage_eval: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub probe_size: usize,
    pub max_rows: usize,
    pub energy_threshold: f64,
    pub per_dimension_emd: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            probe_size: 64,
            max_rows: 4096,
            energy_threshold: 0.99,
            per_dimension_emd: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub conditions: Vec<u32>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            conditions: (1..=6).collect(),
        }
    }
}

/// Every knob of a run. The config hash is taken over the canonical TOML
/// rendering of this struct, so comments and key order in the file on
/// disk do not matter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus_seed: u64,
    /// Multiplies every nominal peak learning rate, pretraining included.
    /// Ratios and timing between stages are unchanged.
    pub lr_scale: f64,
    pub source: CorpusConfig,
    pub target: CorpusConfig,
    pub model: ModelConfig,
    pub optim: OptimHyper,
    pub budget: StepBudget,
    pub pretrain: PretrainConfig,
    pub eval: EvalConfig,
    pub analysis: AnalysisConfig,
    pub grid: GridConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_seed: 17,
            lr_scale: DESK_LR_SCALE,
            source: CorpusConfig::source(),
            target: CorpusConfig::target(),
            model: ModelConfig::default(),
            optim: OptimHyper::default(),
            budget: StepBudget::default(),
            pretrain: PretrainConfig::default(),
            eval: EvalConfig::default(),
            analysis: AnalysisConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

impl RunConfig {
    /// A reduced grid that runs in minutes on one core; same structure
    /// as the default, smaller corpora and step budgets.
    pub fn quick() -> Self {
        let mut c = RunConfig::default();
        c.source.train = SplitCounts { a: 300, b: 300, c: 0, d: 0 };
        c.source.val = SplitCounts { a: 20, b: 20, c: 0, d: 0 };
        c.source.eval = SplitCounts { a: 40, b: 0, c: 0, d: 0 };
        c.target.train = SplitCounts { a: 150, b: 150, c: 300, d: 0 };
        c.target.val = SplitCounts { a: 20, b: 20, c: 20, d: 0 };
        c.target.eval = SplitCounts { a: 40, b: 40, c: 40, d: 40 };
        c.budget = StepBudget {
            steps_per_stage: 200,
            single_stage_steps: 600,
            batch_size: 16,
            warmup_fraction: 0.1,
        };
        c.pretrain.steps = 600;
        c.pretrain.batch_size = 16;
        c.eval.val_every = 50;
        c.eval.final_window = 25;
        c.analysis.probe_size = 32;
        c.analysis.max_rows = 2048;
        c
    }

    /// A grid condition with this run's budget and learning-rate scale.
    pub fn condition(&self, id: u32) -> Result<Condition> {
        let mut c = build_condition_with(id, &self.budget)?;
        for s in &mut c.stages {
            s.peak_lr *= self.lr_scale;
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_scale.is_finite() && self.lr_scale > 0.0) {
            return Err(Error::Config(format!("lr_scale {} must be positive", self.lr_scale)));
        }
        self.source.validate()?;
        self.target.validate()?;
        self.model.validate()?;
        self.optim.validate()?;
        self.pretrain.mixture.validate()?;
        if self.source.feature_dim != self.model.feature_dim || self.target.feature_dim != self.model.feature_dim {
            return Err(Error::Config("corpus feature_dim must equal model feature_dim".into()));
        }
        if self.source.vocab_size > self.model.content_vocab || self.target.vocab_size > self.model.content_vocab {
            return Err(Error::Config("corpus vocabulary exceeds model content vocabulary".into()));
        }
        if self.eval.final_window == 0 {
            return Err(Error::Config("final_window must be >= 1".into()));
        }
        if !(self.analysis.energy_threshold > 0.0 && self.analysis.energy_threshold <= 1.0) {
            return Err(Error::Config("energy_threshold must be in (0, 1]".into()));
        }
        if self.analysis.probe_size == 0 || self.analysis.max_rows < 2 {
            return Err(Error::Config("probe needs at least one utterance and two rows".into()));
        }
        for &id in &self.grid.conditions {
            self.condition(id)?;
        }
        Ok(())
    }

    pub fn canonical_text(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical_text().as_bytes())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => e.into(),
        })?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.canonical_text())?;
        Ok(())
    }
}
