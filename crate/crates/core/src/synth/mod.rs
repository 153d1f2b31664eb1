//! Seeded synthetic corpora stratified into four complexity tiers.
//!
//! A [`LanguageSpec`] fixes symbol prototypes in feature space plus a
//! Markov chain over symbols. Utterances render a transcript into frames,
//! with tier-dependent noise, speaking rate, filler insertions and block
//! repetitions. Tier D is Tier A audio with an added noise profile and is
//! only ever produced for the eval split.

mod corpus;
mod language;
mod noise;
mod render;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use corpus::{build_corpus, Corpus, CorpusConfig, SplitCounts, TierSpecs, Utterance};
pub use language::{make_language, sample_transcript, LanguageSpec};
pub use noise::{apply_noise_profile, NoiseProfile};
pub use render::{render_features, render_features_labeled, Features, RateFactor, TierSpec};
pub use store::{load_corpus, save_corpus, ManifestRecord, BLOB_MAGIC, BLOB_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    A,
    B,
    C,
    D,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::A, Tier::B, Tier::C, Tier::D];
    pub const TRAINABLE: [Tier; 3] = [Tier::A, Tier::B, Tier::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Tier::A => "Studio",
            Tier::B => "Broadcast",
            Tier::C => "Spont.",
            Tier::D => "Noise",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tier::A => "A",
            Tier::B => "B",
            Tier::C => "C",
            Tier::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Tier {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "A" => Ok(Tier::A),
            "B" => Ok(Tier::B),
            "C" => Ok(Tier::C),
            "D" => Ok(Tier::D),
            other => Err(crate::Error::Config(format!("unknown tier {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Eval,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Eval];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Eval => "eval",
        })
    }
}
