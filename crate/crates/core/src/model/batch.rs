use super::ModelConfig;
use crate::synth::Features;
use crate::tensor::Real;
use crate::{Error, Result};

/// Padded batch. Decoder inputs are BOS-prefixed transcripts, targets are
/// EOS-suffixed; both are PAD-filled past the true length.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub size: usize,
    pub max_frames: usize,
    pub feature_dim: usize,
    pub max_steps: usize,
    /// `[size, max_frames, feature_dim]`
    pub features: Vec<T>,
    /// `[size, max_frames]`
    pub frame_mask: Vec<bool>,
    /// `[size, max_steps]`
    pub input_tokens: Vec<usize>,
    /// `[size, max_steps]`
    pub target_tokens: Vec<usize>,
    /// `[size, max_steps]`
    pub token_mask: Vec<bool>,
}

impl<T: Real> Batch<T> {
    pub fn new(config: &ModelConfig, examples: &[(&Features, &[usize])]) -> Result<Self> {
        Self::padded(config, examples, 0, 0)
    }

    /// Like [`Batch::new`] but with `extra_frames` / `extra_steps` of
    /// masked padding beyond the longest example.
    pub fn padded(
        config: &ModelConfig,
        examples: &[(&Features, &[usize])],
        extra_frames: usize,
        extra_steps: usize,
    ) -> Result<Self> {
        let d = config.feature_dim;
        for (f, toks) in examples {
            if f.dim != d {
                return Err(Error::Shape(format!("feature dim {} vs model {d}", f.dim)));
            }
            if f.n_frames == 0 {
                return Err(Error::Shape("utterance with zero frames".into()));
            }
            if let Some(&t) = toks.iter().find(|&&t| t >= config.content_vocab) {
                return Err(Error::Shape(format!("token {t} outside content vocabulary")));
            }
        }
        let size = examples.len();
        let max_frames = examples.iter().map(|(f, _)| f.n_frames).max().unwrap_or(0) + extra_frames;
        let max_steps = examples.iter().map(|(_, t)| t.len() + 1).max().unwrap_or(0) + extra_steps;
        let mut features = vec![T::zero(); size * max_frames * d];
        let mut frame_mask = vec![false; size * max_frames];
        let mut input_tokens = vec![config.pad(); size * max_steps];
        let mut target_tokens = vec![config.pad(); size * max_steps];
        let mut token_mask = vec![false; size * max_steps];
        for (b, (f, toks)) in examples.iter().enumerate() {
            for (dst, &src) in features[b * max_frames * d..].iter_mut().zip(&f.data) {
                *dst = T::of(src as f64);
            }
            frame_mask[b * max_frames..b * max_frames + f.n_frames].fill(true);
            let row = b * max_steps;
            input_tokens[row] = config.bos();
            for (j, &t) in toks.iter().enumerate() {
                input_tokens[row + j + 1] = t;
                target_tokens[row + j] = t;
            }
            target_tokens[row + toks.len()] = config.eos();
            token_mask[row..row + toks.len() + 1].fill(true);
        }
        Ok(Batch {
            size,
            max_frames,
            feature_dim: d,
            max_steps,
            features,
            frame_mask,
            input_tokens,
            target_tokens,
            token_mask,
        })
    }

    pub fn cast<U: Real>(&self) -> Batch<U> {
        Batch {
            size: self.size,
            max_frames: self.max_frames,
            feature_dim: self.feature_dim,
            max_steps: self.max_steps,
            features: self.features.iter().map(|v| U::of(v.f64())).collect(),
            frame_mask: self.frame_mask.clone(),
            input_tokens: self.input_tokens.clone(),
            target_tokens: self.target_tokens.clone(),
            token_mask: self.token_mask.clone(),
        }
    }

    fn prefix_len(mask: &[bool], what: &str) -> Result<usize> {
        let n = mask.iter().take_while(|m| **m).count();
        if mask[n..].iter().any(|m| *m) {
            return Err(Error::Shape(format!("{what} mask is not a contiguous prefix")));
        }
        Ok(n)
    }

    pub(crate) fn n_frames(&self, b: usize) -> Result<usize> {
        Self::prefix_len(&self.frame_mask[b * self.max_frames..(b + 1) * self.max_frames], "frame")
    }

    pub(crate) fn n_steps(&self, b: usize) -> Result<usize> {
        Self::prefix_len(&self.token_mask[b * self.max_steps..(b + 1) * self.max_steps], "token")
    }

    pub(crate) fn frames(&self, b: usize, n: usize) -> &[T] {
        let start = b * self.max_frames * self.feature_dim;
        &self.features[start..start + n * self.feature_dim]
    }
}
