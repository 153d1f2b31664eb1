use serde::{Deserialize, Serialize};

use super::sampler::{batch_indices, MixtureSampler};
use super::RunConfig;
use crate::eval::{evaluate_model, EvalReport};
use crate::io::{Checkpoint, CheckpointMeta};
use crate::model::{backward, forward_loss, init_params, Batch, Parameters};
use crate::optim::{adamw_step, lr_at, Condition, OptimState, StageConfig};
use crate::rng::{derive_seed, tag};
use crate::synth::{Corpus, Features, Split, Tier, Utterance};
use crate::{Error, Result};

pub const CODE_VERSION: &str = concat!("rmft ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Global optimizer step across all stages.
    pub step: usize,
    pub stage: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValRecord {
    pub step: usize,
    pub stage: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub steps: usize,
    /// Mean training loss over the stage's last `final_window` steps.
    pub final_window_loss: f64,
    pub eval: Option<EvalReport>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub val: Vec<ValRecord>,
    pub stages: Vec<StageSummary>,
}

impl TrainLog {
    pub fn final_window_loss(&self) -> Option<f64> {
        self.stages.last().map(|s| s.final_window_loss)
    }

    /// Step log as comma-separated text.
    pub fn steps_csv(&self) -> String {
        let mut s = String::from("step,stage,lr,loss\n");
        for r in &self.steps {
            s.push_str(&format!("{},{},{:e},{}\n", r.step, r.stage, r.lr, r.loss));
        }
        s
    }

    pub fn val_csv(&self) -> String {
        let mut s = String::from("step,stage,val_loss\n");
        for r in &self.val {
            s.push_str(&format!("{},{},{}\n", r.step, r.stage, r.loss));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: u64,
    pub seed: u64,
    pub code_version: String,
    pub checkpoint_format: u32,
    pub feature_format: u32,
}

impl Provenance {
    pub fn new(config: &RunConfig, seed: u64) -> Self {
        Provenance {
            config_hash: config.hash(),
            seed,
            code_version: CODE_VERSION.into(),
            checkpoint_format: crate::io::CKPT_VERSION,
            feature_format: crate::synth::BLOB_VERSION,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// One checkpoint per stage, in stage order.
    pub checkpoints: Vec<Checkpoint>,
    pub log: TrainLog,
    pub provenance: Provenance,
}

/// A failed run keeps whatever was logged before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial_log: TrainLog,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} logged steps)", self.error, self.partial_log.steps.len())
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Error {
        f.error
    }
}

fn batch_for(corpus: &Corpus, indices: &[usize], params: &Parameters<f32>) -> Result<Batch<f32>> {
    let examples: Vec<(&Features, &[usize])> = indices
        .iter()
        .map(|&i| {
            let u = &corpus.utterances[i];
            (&u.features, u.tokens.as_slice())
        })
        .collect();
    Batch::new(&params.config, &examples)
}

/// Token-weighted loss over a list of utterances without building a
/// gradient cache for all of them at once.
pub fn mean_loss(params: &Parameters<f32>, utterances: &[&Utterance]) -> Result<f64> {
    let (mut total, mut tokens) = (0.0f64, 0usize);
    for chunk in utterances.chunks(32) {
        let ex: Vec<(&Features, &[usize])> = chunk.iter().map(|u| (&u.features, u.tokens.as_slice())).collect();
        let batch: Batch<f32> = Batch::new(&params.config, &ex)?;
        let (loss, cache) = forward_loss(params, &batch)?;
        total += loss as f64 * cache.n_tokens as f64;
        tokens += cache.n_tokens;
    }
    Ok(if tokens == 0 { 0.0 } else { total / tokens as f64 })
}

/// Hard guard on every drawn batch: tier D and held-out splits never
/// reach the optimizer, whatever the sampler does.
pub(crate) fn check_training_batch(corpus: &Corpus, indices: &[usize]) -> Result<()> {
    for &i in indices {
        let u = &corpus.utterances[i];
        if u.tier == Tier::D {
            return Err(Error::TierDInTraining(u.id.clone()));
        }
        if u.split != Split::Train {
            return Err(Error::Config(format!("held-out utterance {} drawn for training", u.id)));
        }
    }
    Ok(())
}

pub(crate) struct StageRunner<'a> {
    pub corpus: &'a Corpus,
    pub config: &'a RunConfig,
    pub seed: u64,
    /// Eval set for per-stage decoding, if requested.
    pub eval_corpus: Option<&'a Corpus>,
}

impl StageRunner<'_> {
    /// Train through `stages` in order. The optimizer state restarts at
    /// every stage, matching independent fine-tuning jobs chained by
    /// their checkpoints. `on_stage_end` sees the parameters after each
    /// stage.
    pub fn run(
        &self,
        params: &mut Parameters<f32>,
        stages: &[StageConfig],
        log: &mut TrainLog,
        mut on_stage_end: impl FnMut(usize, &Parameters<f32>, &OptimState) -> Result<()>,
    ) -> Result<()> {
        let val: Vec<&Utterance> = self.corpus.split(Split::Val).collect();
        let window = self.config.eval.final_window;
        let mut global = log.steps.last().map_or(0, |r| r.step + 1);
        for (si, stage) in stages.iter().enumerate() {
            stage.validate()?;
            let sampler = MixtureSampler::new(self.corpus, &stage.mixture)?;
            let mut state = OptimState::new(params);
            for step in 0..stage.total_steps {
                let idx = batch_indices(&sampler, self.seed, si, &stage.mixture, step, stage.batch_size);
                check_training_batch(self.corpus, &idx)?;
                let batch = batch_for(self.corpus, &idx, params)?;
                let (loss, cache) = forward_loss(params, &batch).map_err(|e| match e {
                    Error::NonFinite(_) => Error::Divergence {
                        stage: si,
                        step,
                        loss: f64::NAN,
                    },
                    other => other,
                })?;
                let grads = backward(params, &cache);
                let lr = lr_at(stage, step)?;
                adamw_step(&mut state, params, &grads, lr, &self.config.optim)?;
                log.steps.push(StepRecord {
                    step: global,
                    stage: si,
                    lr,
                    loss: loss as f64,
                });
                let every = self.config.eval.val_every;
                if every > 0 && !val.is_empty() && (step + 1) % every == 0 {
                    log.val.push(ValRecord {
                        step: global,
                        stage: si,
                        loss: mean_loss(params, &val)?,
                    });
                }
                global += 1;
            }
            let tail = &log.steps[log.steps.len() - stage.total_steps.min(window)..];
            let final_window_loss = tail.iter().map(|r| r.loss).sum::<f64>() / tail.len() as f64;
            let last = si + 1 == stages.len();
            let eval = match self.eval_corpus {
                Some(c) if last || self.config.eval.per_stage_eval => {
                    Some(evaluate_model(params, c, self.config.eval.include_d_in_global).0)
                }
                _ => None,
            };
            log.stages.push(StageSummary {
                stage: si,
                steps: stage.total_steps,
                final_window_loss,
                eval,
            });
            on_stage_end(si, params, &state)?;
        }
        Ok(())
    }
}

pub fn pretrain_stage(config: &RunConfig) -> StageConfig {
    StageConfig {
        mixture: config.pretrain.mixture.clone(),
        peak_lr: config.pretrain.peak_lr * config.lr_scale,
        total_steps: config.pretrain.steps,
        warmup_fraction: config.pretrain.warmup_fraction,
        batch_size: config.pretrain.batch_size,
    }
}

/// Train the shared base model on the source language from a fresh
/// initialization.
pub fn pretrain(config: &RunConfig, source: &Corpus, seed: u64) -> Result<(Checkpoint, TrainLog), RunFailure> {
    let mut log = TrainLog::default();
    let result = (|| {
        config.validate()?;
        let mut params = init_params(&config.model, derive_seed(seed, &[tag("init")]))?;
        let runner = StageRunner {
            corpus: source,
            config,
            seed: derive_seed(seed, &[tag("pretrain")]),
            eval_corpus: None,
        };
        runner.run(&mut params, &[pretrain_stage(config)], &mut log, |_, _, _| Ok(()))?;
        Ok(Checkpoint {
            meta: CheckpointMeta {
                condition_id: None,
                stage_index: None,
                step: config.pretrain.steps as u64,
                seed,
                config_hash: config.hash(),
                model: config.model.clone(),
                payload_hash: 0,
            },
            params,
            optim: None,
        })
    })();
    result
        .map(|ck| (ck, log.clone()))
        .map_err(|error| RunFailure { error, partial_log: log })
}

/// Fine-tune a copy of the base checkpoint through every stage of
/// `condition` on the target corpus.
pub fn run_condition(
    base: &Checkpoint,
    condition: &Condition,
    target: &Corpus,
    seed: u64,
    config: &RunConfig,
) -> Result<RunResult, RunFailure> {
    let mut log = TrainLog::default();
    let mut checkpoints = Vec::new();
    let result = (|| {
        base.params.validate()?;
        if base.params.config != config.model {
            return Err(Error::Config("base checkpoint model config differs from run config".into()));
        }
        let mut params = base.params.clone();
        let runner = StageRunner {
            corpus: target,
            config,
            seed: derive_seed(seed, &[tag("finetune")]),
            eval_corpus: Some(target),
        };
        let mut step = 0u64;
        runner.run(&mut params, &condition.stages, &mut log, |si, p, state| {
            step += condition.stages[si].total_steps as u64;
            checkpoints.push(Checkpoint {
                meta: CheckpointMeta {
                    condition_id: Some(condition.id),
                    stage_index: Some(si),
                    step,
                    seed,
                    config_hash: config.hash(),
                    model: config.model.clone(),
                    payload_hash: 0,
                },
                params: p.clone(),
                optim: Some(state.clone()),
            });
            Ok(())
        })
    })();
    match result {
        Ok(()) => Ok(RunResult {
            checkpoints,
            log,
            provenance: Provenance::new(config, seed),
        }),
        Err(error) => Err(RunFailure { error, partial_log: log }),
    }
}

/// Every utterance index a condition's run would draw, in order, without
/// training. Used to audit data isolation across conditions.
pub fn sampled_examples(condition: &Condition, target: &Corpus, seed: u64) -> Result<Vec<usize>> {
    let seed = derive_seed(seed, &[tag("finetune")]);
    let mut out = Vec::new();
    for (si, stage) in condition.stages.iter().enumerate() {
        let sampler = MixtureSampler::new(target, &stage.mixture)?;
        for step in 0..stage.total_steps {
            out.extend(batch_indices(&sampler, seed, si, &stage.mixture, step, stage.batch_size));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{build_corpus, CorpusConfig, SplitCounts};

    #[test]
    fn batch_guard_rejects_tier_d_and_held_out() {
        let mut cfg = CorpusConfig::target();
        cfg.train = SplitCounts { a: 2, b: 0, c: 2, d: 0 };
        cfg.val = SplitCounts { a: 1, b: 0, c: 0, d: 0 };
        cfg.eval = SplitCounts { a: 2, b: 0, c: 0, d: 2 };
        let corpus = build_corpus(&cfg, 1).unwrap();
        let pos = |f: &dyn Fn(&Utterance) -> bool| corpus.utterances.iter().position(f).unwrap();
        let train = pos(&|u| u.split == Split::Train);
        let d = pos(&|u| u.tier == Tier::D);
        let val = pos(&|u| u.split == Split::Val);
        assert!(check_training_batch(&corpus, &[train, train]).is_ok());
        assert!(matches!(check_training_batch(&corpus, &[train, d]), Err(Error::TierDInTraining(_))));
        assert!(matches!(check_training_batch(&corpus, &[val]), Err(Error::Config(_))));
    }
}
