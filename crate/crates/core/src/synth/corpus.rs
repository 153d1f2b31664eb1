use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_noise_profile, make_language, render_features, sample_transcript, Features,
    LanguageSpec, NoiseProfile, Split, Tier, TierSpec,
};
use crate::rng::{rng_for, tag};
use crate::{Error, Result};

/// Utterance counts for one split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    #[serde(rename = "A", default)]
    pub a: usize,
    #[serde(rename = "B", default)]
    pub b: usize,
    #[serde(rename = "C", default)]
    pub c: usize,
    #[serde(rename = "D", default)]
    pub d: usize,
}

impl SplitCounts {
    pub fn get(&self, tier: Tier) -> usize {
        match tier {
            Tier::A => self.a,
            Tier::B => self.b,
            Tier::C => self.c,
            Tier::D => self.d,
        }
    }

    pub fn total(&self) -> usize {
        self.a + self.b + self.c + self.d
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TierSpecs {
    #[serde(rename = "A")]
    pub a: TierSpec,
    #[serde(rename = "B")]
    pub b: TierSpec,
    #[serde(rename = "C")]
    pub c: TierSpec,
}

impl Default for TierSpecs {
    fn default() -> Self {
        TierSpecs {
            a: TierSpec::studio(),
            b: TierSpec::broadcast(),
            c: TierSpec::spontaneous(),
        }
    }
}

impl TierSpecs {
    /// Tier D renders with Tier A acoustics before the noise profile.
    pub fn get(&self, tier: Tier) -> &TierSpec {
        match tier {
            Tier::A | Tier::D => &self.a,
            Tier::B => &self.b,
            Tier::C => &self.c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub language_id: String,
    pub language_seed: u64,
    pub vocab_size: usize,
    pub feature_dim: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub tier_d_gain: f64,
    pub tiers: TierSpecs,
    pub train: SplitCounts,
    pub val: SplitCounts,
    pub eval: SplitCounts,
}

impl CorpusConfig {
    /// Fine-tuning language, weighted toward Tier C in train.
    pub fn target() -> Self {
        CorpusConfig {
            language_id: "target".into(),
            language_seed: 2,
            vocab_size: 32,
            feature_dim: 16,
            len_min: 5,
            len_max: 20,
            tier_d_gain: 0.5,
            tiers: TierSpecs::default(),
            train: SplitCounts { a: 600, b: 600, c: 1200, d: 0 },
            val: SplitCounts { a: 100, b: 100, c: 100, d: 0 },
            eval: SplitCounts { a: 100, b: 100, c: 100, d: 100 },
        }
    }

    /// Pretraining language: clean tiers only.
    pub fn source() -> Self {
        CorpusConfig {
            language_id: "source".into(),
            language_seed: 1,
            train: SplitCounts { a: 1200, b: 1200, c: 0, d: 0 },
            val: SplitCounts { a: 100, b: 100, c: 0, d: 0 },
            eval: SplitCounts { a: 100, b: 0, c: 0, d: 0 },
            ..Self::target()
        }
    }

    pub fn counts(&self, split: Split) -> &SplitCounts {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Eval => &self.eval,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.d > 0 || self.val.d > 0 {
            return Err(Error::Config(
                "tier D is evaluation-only and must be held out of train and val".into(),
            ));
        }
        if self.eval.d > 0 && self.eval.a == 0 {
            return Err(Error::Config("tier D needs tier A eval transcripts to derive from".into()));
        }
        if self.len_min == 0 || self.len_min > self.len_max {
            return Err(Error::Config(format!(
                "invalid transcript length range {}..={}",
                self.len_min, self.len_max
            )));
        }
        if !(self.tier_d_gain >= 0.0 && self.tier_d_gain.is_finite()) {
            return Err(Error::Config("tier D gain must be finite and >= 0".into()));
        }
        for t in Tier::TRAINABLE {
            self.tiers.get(t).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub tier: Tier,
    pub split: Split,
    /// Reference transcript over content symbols; fillers and repeated
    /// blocks never appear here.
    pub tokens: Vec<usize>,
    pub features: Features,
}

impl Utterance {
    pub fn n_frames(&self) -> usize {
        self.features.n_frames
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub language: LanguageSpec,
    pub utterances: Vec<Utterance>,
}

impl Corpus {
    pub fn select(&self, split: Split, tier: Tier) -> impl Iterator<Item = &Utterance> {
        self.utterances
            .iter()
            .filter(move |u| u.split == split && u.tier == tier)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.split == split)
    }

    pub fn count(&self, split: Split, tier: Tier) -> usize {
        self.select(split, tier).count()
    }

    /// Total frames per tier (A, B, C, D) in a split; the desk-scale
    /// analogue of hours of audio.
    pub fn frames_by_tier(&self, split: Split) -> [usize; 4] {
        let mut out = [0; 4];
        for u in self.split(split) {
            out[u.tier.index()] += u.n_frames();
        }
        out
    }

    pub fn find(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }
}

fn split_code(split: Split) -> u64 {
    split as u64
}

/// Build a corpus. Pure function of `(config, seed)`; every utterance
/// draws from its own counter-derived stream, so the parallel map is
/// identical to a sequential one.
pub fn build_corpus(config: &CorpusConfig, seed: u64) -> Result<Corpus> {
    config.validate()?;
    let mut language = make_language(config.language_seed, config.vocab_size, config.feature_dim)?;
    language.language_id = config.language_id.clone();

    let mut jobs = Vec::new();
    for split in Split::ALL {
        for tier in Tier::TRAINABLE {
            for i in 0..config.counts(split).get(tier) {
                jobs.push((split, tier, i));
            }
        }
    }
    let mut utterances: Vec<Utterance> = jobs
        .into_par_iter()
        .map(|(split, tier, i)| {
            let mut rng = rng_for(seed, &[tag("utt"), split_code(split), tier as u64, i as u64]);
            let tokens = sample_transcript(&language, &mut rng, config.len_min, config.len_max);
            let features = render_features(&language, &tokens, config.tiers.get(tier), &mut rng);
            Utterance {
                id: format!("{}-{}-{}-{:05}", config.language_id, split, tier, i),
                tier,
                split,
                tokens,
                features,
            }
        })
        .collect();

    if config.eval.d > 0 {
        let held_out: Vec<&Utterance> = utterances
            .iter()
            .filter(|u| u.split == Split::Eval && u.tier == Tier::A)
            .collect();
        let tier_d: Vec<Utterance> = (0..config.eval.d)
            .into_par_iter()
            .map(|j| {
                let src_idx = j % held_out.len();
                let src = held_out[src_idx];
                let mut rng = rng_for(seed, &[tag("tier-d"), j as u64]);
                let clean = render_features(&language, &src.tokens, config.tiers.get(Tier::D), &mut rng);
                let donors: Vec<&Features> = held_out
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != src_idx || held_out.len() == 1)
                    .map(|(_, u)| &u.features)
                    .collect();
                let profile = NoiseProfile::ALL[j % NoiseProfile::ALL.len()];
                let features =
                    apply_noise_profile(&clean, profile, config.tier_d_gain, &mut rng, &donors)?;
                Ok(Utterance {
                    id: format!("{}-eval-D-{:05}", config.language_id, j),
                    tier: Tier::D,
                    split: Split::Eval,
                    tokens: src.tokens.clone(),
                    features,
                })
            })
            .collect::<Result<_>>()?;
        utterances.extend(tier_d);
    }
    Ok(Corpus {
        language,
        utterances,
    })
}
