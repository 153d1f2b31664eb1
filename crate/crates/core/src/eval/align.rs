use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Edit operation counts for one alignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Minimal unit-cost alignment of `hyp` against `reference`.
///
/// The backtrace prefers the diagonal (match or substitution), then
/// insertion, then deletion, so equal-cost alignments always resolve the
/// same way.
pub fn levenshtein_alignment<T: PartialEq>(reference: &[T], hyp: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut dp = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        dp[j] = j;
    }
    for i in 1..=n {
        dp[i * w] = i;
        for j in 1..=m {
            let sub = dp[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let ins = dp[i * w + j - 1] + 1;
            let del = dp[(i - 1) * w + j] + 1;
            dp[i * w + j] = sub.min(ins).min(del);
        }
    }
    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 {
            let mismatch = usize::from(reference[i - 1] != hyp[j - 1]);
            if dp[(i - 1) * w + j - 1] + mismatch == here {
                counts.substitutions += mismatch;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dp[i * w + j - 1] + 1 == here {
            counts.insertions += 1;
            j -= 1;
        } else {
            counts.deletions += 1;
            i -= 1;
        }
    }
    counts
}

pub fn edit_distance<T: PartialEq>(reference: &[T], hyp: &[T]) -> usize {
    levenshtein_alignment(reference, hyp).total()
}

/// Pooled error counts over a set of utterances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WerStats {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_tokens: usize,
}

impl WerStats {
    pub fn from_pair<T: PartialEq>(reference: &[T], hyp: &[T]) -> Self {
        let e = levenshtein_alignment(reference, hyp);
        WerStats {
            substitutions: e.substitutions,
            insertions: e.insertions,
            deletions: e.deletions,
            ref_tokens: reference.len(),
        }
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// Error rate as a percentage; may exceed 100.
    pub fn wer(&self) -> Result<f64> {
        if self.ref_tokens == 0 {
            return Err(Error::UndefinedWer);
        }
        Ok(100.0 * self.errors() as f64 / self.ref_tokens as f64)
    }

    /// Two-decimal rendering, `—` when undefined.
    pub fn render(&self) -> String {
        match self.wer() {
            Ok(w) => format!("{w:.2}"),
            Err(_) => "—".into(),
        }
    }
}

impl Add for WerStats {
    type Output = WerStats;
    fn add(self, o: WerStats) -> WerStats {
        WerStats {
            substitutions: self.substitutions + o.substitutions,
            insertions: self.insertions + o.insertions,
            deletions: self.deletions + o.deletions,
            ref_tokens: self.ref_tokens + o.ref_tokens,
        }
    }
}

impl AddAssign for WerStats {
    fn add_assign(&mut self, o: WerStats) {
        *self = *self + o;
    }
}

/// Pool edit counts over `(reference, hypothesis)` pairs: total edits over
/// total reference tokens, not a mean of per-utterance rates.
pub fn wer<T: PartialEq>(pairs: &[(&[T], &[T])]) -> Result<WerStats> {
    let stats = pairs
        .iter()
        .fold(WerStats::default(), |acc, (r, h)| acc + WerStats::from_pair(r, h));
    if stats.ref_tokens == 0 {
        return Err(Error::UndefinedWer);
    }
    Ok(stats)
}
