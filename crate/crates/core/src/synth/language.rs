use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{rng_for, tag, Rng};
use crate::{Error, Result};

/// Dirichlet concentration for transition rows; small values give peaked,
/// language-specific successor distributions.
const TRANSITION_CONCENTRATION: f64 = 0.5;

/// A synthetic "language": where each content symbol sits in feature
/// space, and which symbols tend to follow which.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageSpec {
    pub language_id: String,
    /// Number of content symbols. Model specials (PAD/BOS/EOS) are not
    /// counted here.
    pub vocab_size: usize,
    pub dim: usize,
    /// `vocab_size × dim`, row-major, unit rows.
    pub prototypes: Vec<f64>,
    /// `vocab_size × vocab_size`, row-stochastic.
    pub transition: Vec<f64>,
    pub seed: u64,
}

impl LanguageSpec {
    pub fn prototype(&self, symbol: usize) -> &[f64] {
        &self.prototypes[symbol * self.dim..(symbol + 1) * self.dim]
    }

    pub fn transition_row(&self, symbol: usize) -> &[f64] {
        &self.transition[symbol * self.vocab_size..(symbol + 1) * self.vocab_size]
    }
}

pub fn make_language(seed: u64, vocab_size: usize, dim: usize) -> Result<LanguageSpec> {
    if vocab_size < 2 {
        return Err(Error::Config(format!("vocab_size must be >= 2, got {vocab_size}")));
    }
    if dim < 2 {
        return Err(Error::Config(format!("feature dim must be >= 2, got {dim}")));
    }
    let mut rng = rng_for(seed, &[tag("prototypes")]);
    let mut prototypes = Vec::with_capacity(vocab_size * dim);
    for _ in 0..vocab_size {
        let mut row: Vec<f64> = loop {
            let r: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if r.iter().any(|v| *v != 0.0) {
                break r;
            }
        };
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= n);
        prototypes.extend(row);
    }

    let gamma = Gamma::new(TRANSITION_CONCENTRATION, 1.0).expect("valid gamma");
    let mut rng = rng_for(seed, &[tag("transition")]);
    let mut transition = Vec::with_capacity(vocab_size * vocab_size);
    for _ in 0..vocab_size {
        let mut row: Vec<f64> = (0..vocab_size)
            .map(|_| gamma.sample(&mut rng).max(f64::MIN_POSITIVE))
            .collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
        transition.extend(row);
    }

    Ok(LanguageSpec {
        language_id: format!("lang{seed}"),
        vocab_size,
        dim,
        prototypes,
        transition,
        seed,
    })
}

fn sample_row(row: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the final cumulative sum
    row.iter().rposition(|p| *p > 0.0).unwrap_or(row.len() - 1)
}

/// Draw a transcript: uniform length, uniform first symbol, then the
/// language's Markov chain.
pub fn sample_transcript(
    lang: &LanguageSpec,
    rng: &mut Rng,
    len_min: usize,
    len_max: usize,
) -> Vec<usize> {
    assert!(len_min >= 1 && len_min <= len_max, "invalid transcript length range");
    let len = rng.random_range(len_min..=len_max);
    let mut tokens = Vec::with_capacity(len);
    let mut cur = rng.random_range(0..lang.vocab_size);
    tokens.push(cur);
    while tokens.len() < len {
        cur = sample_row(lang.transition_row(cur), rng);
        tokens.push(cur);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn deterministic_and_normalized() {
        let a = make_language(7, 32, 16).unwrap();
        let b = make_language(7, 32, 16).unwrap();
        assert_eq!(a, b);
        for s in 0..32 {
            let n: f64 = a.prototype(s).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
            let row = a.transition_row(s);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = make_language(7, 32, 16).unwrap();
        let b = make_language(8, 32, 16).unwrap();
        assert_ne!(a.transition, b.transition);
        let mut max_cos = f64::MIN;
        for i in 0..32 {
            for j in 0..32 {
                let c: f64 = a.prototype(i).iter().zip(b.prototype(j)).map(|(x, y)| x * y).sum();
                max_cos = max_cos.max(c);
            }
        }
        assert!(max_cos < 1.0, "max cosine {max_cos}");
    }

    #[test]
    fn rejects_tiny_sizes() {
        assert!(matches!(make_language(1, 1, 16), Err(Error::Config(_))));
        assert!(matches!(make_language(1, 32, 1), Err(Error::Config(_))));
    }

    #[test]
    fn fixed_length_transcripts() {
        let lang = make_language(3, 8, 4).unwrap();
        let mut rng = Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(sample_transcript(&lang, &mut rng, 5, 5).len(), 5);
        }
    }

    #[test]
    fn identity_chain_is_absorbing() {
        let mut lang = make_language(3, 6, 4).unwrap();
        lang.transition = (0..36).map(|i| if i / 6 == i % 6 { 1.0 } else { 0.0 }).collect();
        let mut rng = Rng::seed_from_u64(11);
        for _ in 0..50 {
            let t = sample_transcript(&lang, &mut rng, 3, 9);
            assert!(t.iter().all(|&s| s == t[0]));
        }
    }

    #[test]
    fn bigrams_converge_to_transition_rows() {
        let lang = make_language(21, 6, 4).unwrap();
        let k = lang.vocab_size;
        let mut counts = vec![0u64; k * k];
        let mut rng = Rng::seed_from_u64(5);
        for _ in 0..100_000 {
            let t = sample_transcript(&lang, &mut rng, 5, 20);
            for w in t.windows(2) {
                counts[w[0] * k + w[1]] += 1;
            }
        }
        for s in 0..k {
            let row = &counts[s * k..(s + 1) * k];
            let total: u64 = row.iter().sum();
            let tv: f64 = row
                .iter()
                .zip(lang.transition_row(s))
                .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv < 0.02, "row {s}: total variation {tv}");
        }
    }
}
