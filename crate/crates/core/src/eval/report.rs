use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::WerStats;
use crate::model::{greedy_decode, max_decode_len, Parameters};
use crate::synth::{Corpus, Split, Tier, Utterance};
use crate::Result;

/// One decoded eval utterance, enough to re-score independently.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    pub tier: Tier,
    #[serde(rename = "ref")]
    pub reference: Vec<usize>,
    pub hyp: Vec<usize>,
}

/// Per-tier statistics plus a pooled global row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tiers: BTreeMap<Tier, WerStats>,
    pub global: WerStats,
    pub include_d_in_global: bool,
    /// Utterances whose decode failed and were scored as empty hypotheses.
    pub failures: Vec<String>,
}

impl EvalReport {
    pub fn from_hypotheses(hyps: &[Hypothesis], include_d_in_global: bool) -> Self {
        let mut tiers: BTreeMap<Tier, WerStats> = Tier::ALL.iter().map(|t| (*t, WerStats::default())).collect();
        for h in hyps {
            *tiers.get_mut(&h.tier).unwrap() += WerStats::from_pair(&h.reference, &h.hyp);
        }
        let global = tiers
            .iter()
            .filter(|(t, _)| include_d_in_global || **t != Tier::D)
            .fold(WerStats::default(), |acc, (_, s)| acc + *s);
        EvalReport {
            tiers,
            global,
            include_d_in_global,
            failures: Vec::new(),
        }
    }

    pub fn tier(&self, tier: Tier) -> WerStats {
        self.tiers.get(&tier).copied().unwrap_or_default()
    }

    /// Rows in table order: A, B, C, D, Global.
    pub fn rows(&self) -> Vec<(String, WerStats)> {
        let mut rows: Vec<(String, WerStats)> = Tier::ALL.iter().map(|t| (t.to_string(), self.tier(*t))).collect();
        rows.push(("Global".into(), self.global));
        rows
    }
}

/// Score the eval split with an arbitrary decoder. `None` marks a decode
/// failure, scored as an empty hypothesis.
pub fn evaluate_hypotheses<F>(corpus: &Corpus, include_d_in_global: bool, decode: F) -> (EvalReport, Vec<Hypothesis>)
where
    F: Fn(&Utterance) -> Option<Vec<usize>> + Sync,
{
    let eval: Vec<&Utterance> = corpus.split(Split::Eval).collect();
    let decoded: Vec<(Hypothesis, bool)> = eval
        .par_iter()
        .map(|u| {
            let out = decode(u);
            let failed = out.is_none();
            (
                Hypothesis {
                    id: u.id.clone(),
                    tier: u.tier,
                    reference: u.tokens.clone(),
                    hyp: out.unwrap_or_default(),
                },
                failed,
            )
        })
        .collect();
    let failures = decoded.iter().filter(|(_, f)| *f).map(|(h, _)| h.id.clone()).collect();
    let hyps: Vec<Hypothesis> = decoded.into_iter().map(|(h, _)| h).collect();
    let mut report = EvalReport::from_hypotheses(&hyps, include_d_in_global);
    report.failures = failures;
    (report, hyps)
}

/// Greedy-decode every eval utterance and score it.
pub fn evaluate_model(params: &Parameters<f32>, corpus: &Corpus, include_d_in_global: bool) -> (EvalReport, Vec<Hypothesis>) {
    let dim = params.config.feature_dim;
    evaluate_hypotheses(corpus, include_d_in_global, |u| {
        if u.features.n_frames == 0 || u.features.dim != dim {
            return None;
        }
        Some(greedy_decode(params, &u.features, max_decode_len(u.tokens.len())))
    })
}

pub fn write_hypotheses(path: &Path, hyps: &[Hypothesis]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for h in hyps {
        serde_json::to_writer(&mut w, h)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_hypotheses(path: &Path) -> Result<Vec<Hypothesis>> {
    let mut out = Vec::new();
    for line in BufReader::new(fs::File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
