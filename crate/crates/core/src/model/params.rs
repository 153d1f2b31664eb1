use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ModelConfig;
use crate::rng::{rng_for, tag};
use crate::tensor::{Real, Tensor};
use crate::{Error, Result};

/// Which half of the network a tensor belongs to. Token embedding and
/// output projection count as decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Encoder,
    Decoder,
}

impl Component {
    pub const ALL: [Component; 2] = [Component::Encoder, Component::Decoder];

    pub fn tag(self) -> u8 {
        match self {
            Component::Encoder => 0,
            Component::Decoder => 1,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Component::Encoder),
            1 => Some(Component::Decoder),
            _ => None,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Component::Encoder => "enc",
            Component::Decoder => "dec",
        }
    }
}

/// Fixed tensor layout. GRU weights stack the update, reset and candidate
/// blocks along rows, in that order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum TensorId {
    EncWIn,
    EncWRec,
    EncBias,
    Embed,
    AttQuery,
    AttKey,
    AttV,
    DecWIn,
    DecWRec,
    DecBias,
    OutW,
    OutB,
}

impl TensorId {
    pub const ALL: [TensorId; 12] = [
        TensorId::EncWIn,
        TensorId::EncWRec,
        TensorId::EncBias,
        TensorId::Embed,
        TensorId::AttQuery,
        TensorId::AttKey,
        TensorId::AttV,
        TensorId::DecWIn,
        TensorId::DecWRec,
        TensorId::DecBias,
        TensorId::OutW,
        TensorId::OutB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TensorId::EncWIn => "encoder.gru.w_in",
            TensorId::EncWRec => "encoder.gru.w_rec",
            TensorId::EncBias => "encoder.gru.bias",
            TensorId::Embed => "decoder.embed",
            TensorId::AttQuery => "decoder.attn.w_query",
            TensorId::AttKey => "decoder.attn.w_key",
            TensorId::AttV => "decoder.attn.v",
            TensorId::DecWIn => "decoder.gru.w_in",
            TensorId::DecWRec => "decoder.gru.w_rec",
            TensorId::DecBias => "decoder.gru.bias",
            TensorId::OutW => "decoder.out.w",
            TensorId::OutB => "decoder.out.b",
        }
    }

    pub fn component(self) -> Component {
        match self {
            TensorId::EncWIn | TensorId::EncWRec | TensorId::EncBias => Component::Encoder,
            _ => Component::Decoder,
        }
    }

    pub fn shape(self, c: &ModelConfig) -> Vec<usize> {
        let (he, hd) = (c.enc_hidden, c.dec_hidden);
        match self {
            TensorId::EncWIn => vec![3 * he, c.feature_dim],
            TensorId::EncWRec => vec![3 * he, he],
            TensorId::EncBias => vec![3 * he],
            TensorId::Embed => vec![c.vocab_total(), c.emb_dim],
            TensorId::AttQuery => vec![c.attn_dim, hd],
            TensorId::AttKey => vec![c.attn_dim, he],
            TensorId::AttV => vec![c.attn_dim],
            TensorId::DecWIn => vec![3 * hd, c.emb_dim + he],
            TensorId::DecWRec => vec![3 * hd, hd],
            TensorId::DecBias => vec![3 * hd],
            TensorId::OutW => vec![c.vocab_total(), hd + he],
            TensorId::OutB => vec![c.vocab_total()],
        }
    }

    /// Fan-in used to scale the uniform initializer.
    fn fan_in(self, c: &ModelConfig) -> usize {
        match self {
            TensorId::EncBias => c.enc_hidden,
            TensorId::DecBias => c.dec_hidden,
            TensorId::AttV => c.attn_dim,
            TensorId::OutB => c.dec_hidden + c.enc_hidden,
            other => *other.shape(c).last().unwrap(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub component: Component,
    pub tensor: Tensor<T>,
}

/// Named tensor map in [`TensorId`] order. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters<T> {
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor<T>>,
}

impl<T: Real> Parameters<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let tensors = TensorId::ALL
            .iter()
            .map(|&id| NamedTensor {
                name: id.name().to_string(),
                component: id.component(),
                tensor: Tensor::zeros(&id.shape(config)),
            })
            .collect();
        Parameters {
            config: config.clone(),
            tensors,
        }
    }

    #[inline]
    pub fn get(&self, id: TensorId) -> &[T] {
        &self.tensors[id as usize].tensor.data
    }

    #[inline]
    pub fn get_mut(&mut self, id: TensorId) -> &mut [T] {
        &mut self.tensors[id as usize].tensor.data
    }

    pub fn by_name(&self, name: &str) -> Option<&NamedTensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn cast<U: Real>(&self) -> Parameters<U> {
        Parameters {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| NamedTensor {
                    name: t.name.clone(),
                    component: t.component,
                    tensor: t.tensor.cast(),
                })
                .collect(),
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.tensor.len()).sum()
    }

    /// Check names, tags and shapes against the fixed layout.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.tensors.len() != TensorId::ALL.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, found {}",
                TensorId::ALL.len(),
                self.tensors.len()
            )));
        }
        for (id, t) in TensorId::ALL.iter().zip(&self.tensors) {
            let shape = id.shape(&self.config);
            if t.name != id.name() || t.component != id.component() || t.tensor.shape != shape {
                return Err(Error::Shape(format!(
                    "tensor {:?} {:?} {:?} does not match layout {} {:?} {:?}",
                    t.name,
                    t.component,
                    t.tensor.shape,
                    id.name(),
                    id.component(),
                    shape
                )));
            }
            if t.tensor.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Shape(format!("tensor {} data length", t.name)));
            }
        }
        Ok(())
    }

    pub fn same_layout(&self, other: &Parameters<T>) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.tensor.shape == b.tensor.shape)
    }
}

/// Seeded `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
pub fn init_params<T: Real>(config: &ModelConfig, seed: u64) -> Result<Parameters<T>> {
    config.validate()?;
    let mut params = Parameters::zeros(config);
    for (k, id) in TensorId::ALL.iter().enumerate() {
        let bound = 1.0 / (id.fan_in(config) as f64).sqrt();
        let mut rng = rng_for(seed, &[tag("init"), k as u64]);
        for v in params.get_mut(*id) {
            *v = T::of(rng.random_range(-bound..bound));
        }
    }
    Ok(params)
}
