//! Small attention-based encoder–decoder with hand-derived gradients.
//!
//! Encoder: single-layer GRU over feature frames, zero initial state.
//! Decoder: single-layer GRU fed `[embedding(prev token); context]`, with
//! additive attention `v·tanh(W_q s_prev + W_k h_t)` over encoder states and
//! logits `W_o [s; context] + b_o`. Loss is mean token cross-entropy over
//! non-PAD targets (teacher forcing).

mod batch;
mod decode;
mod gradcheck;
mod network;
mod params;

use serde::{Deserialize, Serialize};

pub use batch::Batch;
pub use decode::{greedy_decode, max_decode_len};
pub use gradcheck::grad_check;
pub use network::{backward, encoder_states, forward_loss, teacher_forced_states, Cache};
pub use params::{init_params, Component, NamedTensor, Parameters, TensorId};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub feature_dim: usize,
    /// Content symbols; PAD, BOS and EOS are appended after them.
    pub content_vocab: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub emb_dim: usize,
    pub attn_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_dim: 16,
            content_vocab: 32,
            enc_hidden: 48,
            dec_hidden: 48,
            emb_dim: 24,
            attn_dim: 32,
        }
    }
}

impl ModelConfig {
    pub fn vocab_total(&self) -> usize {
        self.content_vocab + 3
    }
    pub fn pad(&self) -> usize {
        self.content_vocab
    }
    pub fn bos(&self) -> usize {
        self.content_vocab + 1
    }
    pub fn eos(&self) -> usize {
        self.content_vocab + 2
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.feature_dim,
            self.enc_hidden,
            self.dec_hidden,
            self.emb_dim,
            self.attn_dim,
        ];
        if dims.contains(&0) || self.vocab_total() < 4 {
            return Err(Error::Config(format!("invalid model config {self:?}")));
        }
        Ok(())
    }
}
