//! Binary checkpoint format.
//!
//! ```text
//! "RMFT" | version u32 | meta_len u32 | meta (JSON, meta_len bytes)
//! | tensor_count u32
//! | per tensor: name_len u16 | name | tag u8 | rank u8 | dims u32*rank | f32 data
//! | has_optim u8 | [step u64 | m tensors | v tensors]
//! ```
//! All integers and floats are little-endian. The metadata carries an
//! FNV-1a hash of everything after it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fnv1a64;
use crate::model::{Component, ModelConfig, NamedTensor, Parameters};
use crate::optim::OptimState;
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const CKPT_MAGIC: [u8; 4] = *b"RMFT";
pub const CKPT_VERSION: u32 = 1;
const MAX_RANK: u8 = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub condition_id: Option<u32>,
    pub stage_index: Option<usize>,
    pub step: u64,
    pub seed: u64,
    pub config_hash: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub payload_hash: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: Parameters<f32>,
    pub optim: Option<OptimState>,
}

fn put_f32s(out: &mut Vec<u8>, data: &[f32]) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode_payload(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(&(ckpt.params.tensors.len() as u32).to_le_bytes());
    for t in &ckpt.params.tensors {
        let name = t.name.as_bytes();
        let name_len = u16::try_from(name.len()).map_err(|_| Error::Shape(format!("tensor name too long: {}", t.name)))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.push(t.component.tag());
        let rank = u8::try_from(t.tensor.shape.len()).ok().filter(|r| *r <= MAX_RANK);
        let rank = rank.ok_or_else(|| Error::Shape(format!("tensor {} rank too large", t.name)))?;
        out.push(rank);
        for &d in &t.tensor.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        put_f32s(&mut out, &t.tensor.data);
    }
    match &ckpt.optim {
        None => out.push(0),
        Some(st) => {
            out.push(1);
            out.extend_from_slice(&st.step.to_le_bytes());
            for m in &st.m {
                put_f32s(&mut out, m);
            }
            for v in &st.v {
                put_f32s(&mut out, v);
            }
        }
    }
    Ok(out)
}

/// Serialize; the stored payload hash is recomputed, whatever
/// `ckpt.meta.payload_hash` holds.
pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let payload = encode_payload(ckpt)?;
    let meta = CheckpointMeta {
        payload_hash: fnv1a64(&payload),
        ..ckpt.meta.clone()
    };
    let meta_json = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(12 + meta_json.len() + payload.len());
    out.extend_from_slice(&CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&payload);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Truncated(format!("{what} at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| corrupt("element count overflow"))?, what)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

fn corrupt(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

pub fn decode_checkpoint(buf: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != CKPT_MAGIC {
        return Err(Error::BadMagic {
            expected: CKPT_MAGIC,
            found: magic,
        });
    }
    let version = r.u32("version")?;
    if version != CKPT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CKPT_VERSION,
            found: version,
        });
    }
    let meta_len = r.u32("metadata length")? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| corrupt(format!("metadata: {e}")))?;
    let payload_start = r.pos;
    let found = fnv1a64(&buf[payload_start..]);
    if found != meta.payload_hash {
        return Err(Error::HashMismatch {
            what: "payload",
            expected: meta.payload_hash,
            found,
        });
    }

    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for k in 0..count {
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| corrupt(format!("tensor {k} name is not UTF-8")))?
            .to_string();
        let tag = r.u8("component tag")?;
        let component = Component::from_tag(tag).ok_or_else(|| corrupt(format!("tensor {name}: bad tag {tag}")))?;
        let rank = r.u8("rank")?;
        if rank > MAX_RANK {
            return Err(corrupt(format!("tensor {name}: rank {rank}")));
        }
        let shape: Vec<usize> = (0..rank).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<_>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| corrupt(format!("tensor {name}: dims overflow")))?;
        let data = r.f32s(n, "tensor data")?;
        tensors.push(NamedTensor {
            name,
            component,
            tensor: Tensor::from_vec(&shape, data),
        });
    }
    let params = Parameters {
        config: meta.model.clone(),
        tensors,
    };
    params.validate()?;

    let optim = match r.u8("optimizer flag")? {
        0 => None,
        1 => {
            let step = r.u64("optimizer step")?;
            let sizes: Vec<usize> = params.tensors.iter().map(|t| t.tensor.len()).collect();
            let m = sizes.iter().map(|&n| r.f32s(n, "first moments")).collect::<Result<_>>()?;
            let v = sizes.iter().map(|&n| r.f32s(n, "second moments")).collect::<Result<_>>()?;
            Some(OptimState { step, m, v })
        }
        other => return Err(corrupt(format!("optimizer flag {other}"))),
    };
    if r.pos != buf.len() {
        return Err(corrupt(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(Checkpoint {
        meta: CheckpointMeta {
            payload_hash: found,
            ..meta
        },
        params,
        optim,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, encode_checkpoint(ckpt)?)?;
    Ok(())
}

/// Load and verify. With `expected_config_hash`, a checkpoint written under
/// a different run config is rejected.
pub fn load_checkpoint(path: &Path, expected_config_hash: Option<u64>) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })?;
    let ckpt = decode_checkpoint(&bytes)?;
    if let Some(expected) = expected_config_hash {
        if ckpt.meta.config_hash != expected {
            return Err(Error::HashMismatch {
                what: "config",
                expected,
                found: ckpt.meta.config_hash,
            });
        }
    }
    Ok(ckpt)
}
