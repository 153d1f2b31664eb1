use rand::Rng as _;

use crate::optim::TierMixture;
use crate::rng::{rng_for, tag};
use crate::synth::{Corpus, Split, Tier};
use crate::{Error, Result};

/// Draws training utterances for one mixture.
///
/// A tier with frame share `w` is picked with probability proportional to
/// `w / mean_frames(tier)`, so expected frames per tier follow the
/// mixture weights; within a tier the utterance is uniform.
#[derive(Clone, Debug)]
pub struct MixtureSampler {
    pools: Vec<Vec<usize>>,
    cumulative: Vec<f64>,
}

impl MixtureSampler {
    pub fn new(corpus: &Corpus, mixture: &TierMixture) -> Result<Self> {
        mixture.validate()?;
        let pool = |tier: Tier| -> Vec<usize> {
            corpus
                .utterances
                .iter()
                .enumerate()
                .filter(|(_, u)| u.split == Split::Train && u.tier == tier)
                .map(|(i, _)| i)
                .collect()
        };
        let (pools, weights): (Vec<Vec<usize>>, Vec<f64>) = match mixture {
            TierMixture::Natural => {
                let all: Vec<usize> = Tier::TRAINABLE.iter().flat_map(|&t| pool(t)).collect();
                (vec![all], vec![1.0])
            }
            TierMixture::Frames(parts) => parts
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|&(tier, w)| {
                    let p = pool(tier);
                    if p.is_empty() {
                        return Err(Error::Config(format!("mixture needs tier {tier} but the train split has none")));
                    }
                    let frames: usize = p.iter().map(|&i| corpus.utterances[i].n_frames()).sum();
                    let mean = frames as f64 / p.len() as f64;
                    Ok((p, w / mean))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip(),
        };
        if pools.iter().any(|p| p.is_empty()) {
            return Err(Error::Config("training split is empty".into()));
        }
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(MixtureSampler { pools, cumulative })
    }

    pub fn draw(&self, rng: &mut crate::rng::Rng, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.pools.len() - 1);
                let pool = &self.pools[k];
                pool[rng.random_range(0..pool.len())]
            })
            .collect()
    }
}

/// Utterance indices for one optimizer step. The stream depends on the
/// mixture and position, never on the stage's learning rate, so
/// conditions with the same curriculum see the same batches.
pub fn batch_indices(
    sampler: &MixtureSampler,
    seed: u64,
    stage_index: usize,
    mixture: &TierMixture,
    step: usize,
    batch_size: usize,
) -> Vec<usize> {
    let mut rng = rng_for(
        seed,
        &[tag("batch"), stage_index as u64, mixture.stream_key(), step as u64],
    );
    sampler.draw(&mut rng, batch_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{build_corpus, CorpusConfig, SplitCounts};

    fn corpus() -> Corpus {
        let cfg = CorpusConfig {
            train: SplitCounts { a: 40, b: 40, c: 80, d: 0 },
            val: SplitCounts::default(),
            eval: SplitCounts { a: 2, b: 0, c: 0, d: 2 },
            ..CorpusConfig::target()
        };
        build_corpus(&cfg, 1).unwrap()
    }

    #[test]
    fn equal_duration_mixture_balances_frames() {
        let c = corpus();
        let mix = TierMixture::equal(Tier::A, Tier::C);
        let s = MixtureSampler::new(&c, &mix).unwrap();
        let mut frames = [0usize; 4];
        for step in 0..2000 {
            for i in batch_indices(&s, 3, 2, &mix, step, 16) {
                let u = &c.utterances[i];
                assert!(u.tier == Tier::A || u.tier == Tier::C);
                frames[u.tier.index()] += u.n_frames();
            }
        }
        let ratio = frames[0] as f64 / frames[2] as f64;
        assert!((ratio - 1.0).abs() < 0.05, "A/C frame ratio {ratio}");
    }

    #[test]
    fn natural_mixture_never_yields_tier_d_or_eval() {
        let c = corpus();
        let s = MixtureSampler::new(&c, &TierMixture::Natural).unwrap();
        for step in 0..200 {
            for i in batch_indices(&s, 1, 0, &TierMixture::Natural, step, 8) {
                let u = &c.utterances[i];
                assert_eq!(u.split, Split::Train);
                assert_ne!(u.tier, Tier::D);
            }
        }
    }

    #[test]
    fn missing_tier_is_config_error() {
        let c = corpus();
        let s = MixtureSampler::new(&c, &TierMixture::single(Tier::D));
        assert!(s.is_err());
    }
}
