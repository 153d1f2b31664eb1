use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{LanguageSpec, Tier};
use crate::rng::Rng;
use crate::{Error, Result};

/// Frame-rate warp. A per-utterance range is drawn once per rendering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateFactor {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

impl RateFactor {
    fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            RateFactor::Fixed(r) => r,
            RateFactor::Uniform { lo, hi } if lo == hi => lo,
            RateFactor::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }

    /// Mean rate; used for documentation and sanity checks.
    pub fn mean(self) -> f64 {
        match self {
            RateFactor::Fixed(r) => r,
            RateFactor::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    fn is_valid(self) -> bool {
        match self {
            RateFactor::Fixed(r) => r > 0.0 && r.is_finite(),
            RateFactor::Uniform { lo, hi } => lo > 0.0 && hi >= lo && hi.is_finite(),
        }
    }
}

/// Acoustic parameters for one complexity tier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TierSpec {
    pub tier: Tier,
    pub noise_std: f64,
    pub rate_factor: RateFactor,
    pub disfluency_prob: f64,
    pub repetition_prob: f64,
    pub frames_per_symbol: u32,
}

impl TierSpec {
    pub fn studio() -> Self {
        TierSpec {
            tier: Tier::A,
            noise_std: 0.05,
            rate_factor: RateFactor::Fixed(1.0),
            disfluency_prob: 0.0,
            repetition_prob: 0.0,
            frames_per_symbol: 4,
        }
    }

    pub fn broadcast() -> Self {
        TierSpec {
            tier: Tier::B,
            noise_std: 0.08,
            rate_factor: RateFactor::Fixed(1.8),
            ..Self::studio()
        }
    }

    pub fn spontaneous() -> Self {
        TierSpec {
            tier: Tier::C,
            noise_std: 0.25,
            rate_factor: RateFactor::Uniform { lo: 0.8, hi: 1.6 },
            disfluency_prob: 0.15,
            repetition_prob: 0.1,
            frames_per_symbol: 4,
        }
    }

    pub fn default_for(tier: Tier) -> Self {
        match tier {
            Tier::A => Self::studio(),
            Tier::B => Self::broadcast(),
            Tier::C => Self::spontaneous(),
            Tier::D => TierSpec {
                tier: Tier::D,
                ..Self::studio()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite())
            || !self.rate_factor.is_valid()
            || !prob_ok(self.disfluency_prob)
            || !prob_ok(self.repetition_prob)
            || self.frames_per_symbol == 0
        {
            return Err(Error::Config(format!("invalid tier spec {self:?}")));
        }
        Ok(())
    }
}

/// A `n_frames × dim` feature matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub n_frames: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Features {
    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

fn stochastic_round(x: f64, rng: &mut Rng) -> usize {
    let base = x.floor();
    let frac = x - base;
    let up = frac > 0.0 && rng.random::<f64>() < frac;
    (base as usize + up as usize).max(1)
}

fn emit_block(
    lang: &LanguageSpec,
    symbol: usize,
    frames: usize,
    noise: Option<&Normal<f64>>,
    rng: &mut Rng,
    out: &mut Vec<f32>,
) {
    let proto = lang.prototype(symbol);
    for _ in 0..frames {
        for &p in proto {
            let v = match noise {
                Some(n) => p + n.sample(rng),
                None => p,
            };
            out.push(v as f32);
        }
    }
}

/// Render a transcript to frames. Also returns, for every frame, the
/// symbol whose prototype generated it (fillers included).
pub fn render_features_labeled(
    lang: &LanguageSpec,
    tokens: &[usize],
    spec: &TierSpec,
    rng: &mut Rng,
) -> (Features, Vec<usize>) {
    assert!(!tokens.is_empty(), "cannot render an empty transcript");
    let dim = lang.dim;
    let noise = (spec.noise_std > 0.0).then(|| Normal::new(0.0, spec.noise_std).expect("valid std"));
    let rate = spec.rate_factor.draw(rng);
    let frames_f = spec.frames_per_symbol as f64 / rate;

    let mut data = Vec::with_capacity(tokens.len() * spec.frames_per_symbol as usize * dim * 2);
    let mut labels = Vec::new();
    for &symbol in tokens {
        if spec.disfluency_prob > 0.0 && rng.random::<f64>() < spec.disfluency_prob {
            let filler = rng.random_range(0..lang.vocab_size);
            let n = stochastic_round(frames_f, rng);
            emit_block(lang, filler, n, noise.as_ref(), rng, &mut data);
            labels.extend(std::iter::repeat_n(filler, n));
        }
        let n = stochastic_round(frames_f, rng);
        let start = data.len();
        emit_block(lang, symbol, n, noise.as_ref(), rng, &mut data);
        labels.extend(std::iter::repeat_n(symbol, n));
        if spec.repetition_prob > 0.0 && rng.random::<f64>() < spec.repetition_prob {
            data.extend_from_within(start..);
            labels.extend(std::iter::repeat_n(symbol, n));
        }
    }
    let n_frames = data.len() / dim;
    (Features { n_frames, dim, data }, labels)
}

pub fn render_features(
    lang: &LanguageSpec,
    tokens: &[usize],
    spec: &TierSpec,
    rng: &mut Rng,
) -> Features {
    render_features_labeled(lang, tokens, spec, rng).0
}
