//! On-disk corpus layout: `manifest.jsonl`, `features.vfea`, `language.json`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, Features, LanguageSpec, Split, Tier, Utterance};
use crate::{Error, Result};

pub const BLOB_MAGIC: [u8; 4] = *b"VFEA";
pub const BLOB_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const BLOB_FILE: &str = "features.vfea";
pub const LANGUAGE_FILE: &str = "language.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub tier: Tier,
    pub split: Split,
    pub tokens: Vec<usize>,
    pub n_frames: usize,
    /// Byte offset of this utterance's `n_frames` field in the blob.
    pub offset: u64,
}

pub fn save_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    fs::create_dir_all(dir)?;
    let dim = corpus.language.dim;
    let mut blob = Vec::new();
    blob.extend_from_slice(&BLOB_MAGIC);
    blob.extend_from_slice(&BLOB_VERSION.to_le_bytes());
    blob.extend_from_slice(&(dim as u32).to_le_bytes());
    blob.extend_from_slice(&(corpus.utterances.len() as u32).to_le_bytes());

    let mut manifest = BufWriter::new(fs::File::create(dir.join(MANIFEST_FILE))?);
    for u in &corpus.utterances {
        if u.features.dim != dim {
            return Err(Error::Shape(format!("utterance {} has dim {}", u.id, u.features.dim)));
        }
        let rec = ManifestRecord {
            id: u.id.clone(),
            tier: u.tier,
            split: u.split,
            tokens: u.tokens.clone(),
            n_frames: u.n_frames(),
            offset: blob.len() as u64,
        };
        serde_json::to_writer(&mut manifest, &rec)?;
        manifest.write_all(b"\n")?;
        blob.extend_from_slice(&(u.n_frames() as u32).to_le_bytes());
        for v in &u.features.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    manifest.flush()?;
    fs::write(dir.join(BLOB_FILE), blob)?;
    fs::write(
        dir.join(LANGUAGE_FILE),
        serde_json::to_string_pretty(&corpus.language)?,
    )?;
    Ok(())
}

fn read_u32(buf: &[u8], pos: usize) -> Result<u32> {
    buf.get(pos..pos + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format {
            what: "feature blob",
            detail: format!("truncated at byte {pos}"),
        })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })
}

pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let language: LanguageSpec = serde_json::from_reader(BufReader::new(open(&dir.join(LANGUAGE_FILE))?))?;
    let mut blob = Vec::new();
    open(&dir.join(BLOB_FILE))?.read_to_end(&mut blob)?;
    let bad = |detail: String| Error::Format {
        what: "feature blob",
        detail,
    };
    if blob.len() < 16 || blob[0..4] != BLOB_MAGIC {
        return Err(bad("missing VFEA header".into()));
    }
    let version = read_u32(&blob, 4)?;
    if version != BLOB_VERSION {
        return Err(Error::VersionMismatch {
            expected: BLOB_VERSION,
            found: version,
        });
    }
    let dim = read_u32(&blob, 8)? as usize;
    let count = read_u32(&blob, 12)? as usize;
    if dim != language.dim {
        return Err(bad(format!("blob dim {dim} != language dim {}", language.dim)));
    }

    let mut utterances = Vec::with_capacity(count);
    for (line_no, line) in BufReader::new(open(&dir.join(MANIFEST_FILE))?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| Error::Format {
            what: "manifest",
            detail: format!("line {}: {e}", line_no + 1),
        })?;
        if rec.tier == Tier::D && rec.split != Split::Eval {
            return Err(Error::Format {
                what: "manifest",
                detail: format!("tier D record {} outside eval split", rec.id),
            });
        }
        let pos = rec.offset as usize;
        let n = read_u32(&blob, pos)? as usize;
        if n != rec.n_frames || n == 0 {
            return Err(bad(format!("{}: frame count {n} vs manifest {}", rec.id, rec.n_frames)));
        }
        let start = pos + 4;
        let end = start + n * dim * 4;
        let bytes = blob
            .get(start..end)
            .ok_or_else(|| bad(format!("{}: payload truncated", rec.id)))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        utterances.push(Utterance {
            id: rec.id,
            tier: rec.tier,
            split: rec.split,
            tokens: rec.tokens,
            features: Features {
                n_frames: n,
                dim,
                data,
            },
        });
    }
    if utterances.len() != count {
        return Err(bad(format!("manifest lists {} utterances, blob header {count}", utterances.len())));
    }
    Ok(Corpus {
        language,
        utterances,
    })
}
