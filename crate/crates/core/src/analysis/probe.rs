use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::model::{encoder_states, teacher_forced_states, Batch, Parameters};
use crate::rng::{rng_for, tag};
use crate::synth::{Corpus, Features, Split, Tier};
use crate::{Error, Result};

/// Fixed probe set: utterance ids plus the row subsampling budget.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationProbe {
    pub ids: Vec<String>,
    pub max_rows: usize,
    pub seed: u64,
}

impl ActivationProbe {
    /// Seeded pick of `size` eval utterances split evenly between tiers A
    /// and C (A takes the odd one).
    pub fn new(corpus: &Corpus, size: usize, max_rows: usize, seed: u64) -> Result<Self> {
        let mut ids = Vec::with_capacity(size);
        for (k, tier) in [Tier::A, Tier::C].into_iter().enumerate() {
            let want = if k == 0 { size - size / 2 } else { size / 2 };
            let pool: Vec<&str> = corpus.select(Split::Eval, tier).map(|u| u.id.as_str()).collect();
            if pool.len() < want {
                return Err(Error::Config(format!(
                    "probe wants {want} tier {tier} eval utterances, corpus has {}",
                    pool.len()
                )));
            }
            let mut rng = rng_for(seed, &[tag("probe"), tier.index() as u64]);
            let mut picked = sample(&mut rng, pool.len(), want).into_vec();
            picked.sort_unstable();
            ids.extend(picked.into_iter().map(|i| pool[i].to_string()));
        }
        if ids.is_empty() || max_rows < 2 {
            return Err(Error::Config("probe needs at least one utterance and two rows".into()));
        }
        Ok(ActivationProbe { ids, max_rows, seed })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Activations {
    /// Rows are frames, columns encoder units.
    pub encoder: DMatrix<f64>,
    /// Rows are teacher-forced decode steps, columns decoder units.
    pub decoder: DMatrix<f64>,
}

fn stack(parts: &[Vec<f32>], cols: usize, max_rows: usize, seed: u64, label: u64) -> DMatrix<f64> {
    let rows: usize = parts.iter().map(|p| p.len() / cols).sum();
    let flat: Vec<f32> = parts.concat();
    let keep: Vec<usize> = if rows > max_rows {
        let mut rng = rng_for(seed, &[tag("rows"), label, rows as u64]);
        let mut k = sample(&mut rng, rows, max_rows).into_vec();
        k.sort_unstable();
        k
    } else {
        (0..rows).collect()
    };
    DMatrix::from_fn(keep.len(), cols, |r, c| flat[keep[r] * cols + c] as f64)
}

/// Final encoder states over every probe frame and decoder states under
/// teacher forcing, each stacked then subsampled with the probe seed.
/// Row selection depends only on the probe, so two models give matrices
/// whose rows correspond.
pub fn capture_activations(params: &Parameters<f32>, corpus: &Corpus, probe: &ActivationProbe) -> Result<Activations> {
    let utts = probe
        .ids
        .iter()
        .map(|id| corpus.find(id).ok_or_else(|| Error::Config(format!("probe utterance {id} not in corpus"))))
        .collect::<Result<Vec<_>>>()?;
    let (mut enc, mut dec) = (Vec::new(), Vec::new());
    for chunk in utts.chunks(16) {
        let ex: Vec<(&Features, &[usize])> = chunk.iter().map(|u| (&u.features, u.tokens.as_slice())).collect();
        let batch: Batch<f32> = Batch::new(&params.config, &ex)?;
        enc.extend(encoder_states(params, &batch)?);
        dec.extend(teacher_forced_states(params, &batch)?);
    }
    let c = &params.config;
    Ok(Activations {
        encoder: stack(&enc, c.enc_hidden, probe.max_rows, probe.seed, 0),
        decoder: stack(&dec, c.dec_hidden, probe.max_rows, probe.seed, 1),
    })
}
