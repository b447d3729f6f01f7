//! Binary checkpoint files.
//!
//! Layout: `TGCK` magic, `u32` version, `u64` header length, UTF-8 JSON
//! header (config and metadata), `u32` tensor count, then per tensor the
//! `u32`-prefixed name, `u32` rank, `u64` dims and little-endian `f32`
//! values. A trailing `u64` xxHash64 covers every preceding byte. All
//! integers are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use twox_hash::XxHash64;

use super::{ClassifierConfig, NetError, Parameters, Tensor};

const MAGIC: &[u8; 4] = b"TGCK";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const PIXEL_NORMALIZATION: &str = "rgb / 255";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    /// How input pixels were scaled before the first layer.
    pub normalization: String,
    pub init_seed: Option<u64>,
    pub shuffle_seed: Option<u64>,
    /// Content fingerprint of the training manifest.
    pub corpus_fingerprint: Option<String>,
    pub epochs_trained: usize,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl Default for CheckpointMetadata {
    fn default() -> Self {
        Self {
            normalization: PIXEL_NORMALIZATION.into(),
            init_seed: None,
            shuffle_seed: None,
            corpus_fingerprint: None,
            epochs_trained: 0,
            notes: BTreeMap::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ClassifierConfig,
    metadata: CheckpointMetadata,
}

fn encode(params: &Parameters<f32>, config: &ClassifierConfig, metadata: &CheckpointMetadata) -> Vec<u8> {
    let header = serde_json::to_vec(&Header { config: config.clone(), metadata: metadata.clone() }).expect("header serializes");
    let mut buf = Vec::with_capacity(header.len() + params.total_elements() * 4 + 1024);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = XxHash64::oneshot(0, &buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    buf
}

/// Writes atomically through a temporary sibling file.
pub fn save_checkpoint(
    path: &Path,
    params: &Parameters<f32>,
    config: &ClassifierConfig,
    metadata: &CheckpointMetadata,
) -> Result<(), NetError> {
    let io = |source| NetError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(params, config, metadata)).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("truncated record")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn decode(bytes: &[u8]) -> Result<(Parameters<f32>, Header), String> {
    if bytes.len() < MAGIC.len() + 8 || &bytes[..4] != MAGIC {
        return Err("bad magic bytes".into());
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if XxHash64::oneshot(0, body) != stored {
        return Err("checksum mismatch".into());
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let header_len = usize::try_from(r.u64()?).map_err(|_| "header too large")?;
    let header: Header = serde_json::from_slice(r.take(header_len)?).map_err(|e| format!("bad header: {e}"))?;
    let count = r.u32()?;
    let mut params = Parameters::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| "tensor name is not UTF-8")?.to_string();
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let numel = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("tensor too large")?;
        let raw = r.take(numel.checked_mul(4).ok_or("tensor too large")?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        params.insert(name, Tensor::from_vec(&dims, data).map_err(|e| e.to_string())?);
    }
    if r.pos != body.len() {
        return Err("trailing bytes after tensor records".into());
    }
    Ok((params, header))
}

pub fn load_checkpoint(path: &Path) -> Result<(Parameters<f32>, ClassifierConfig, CheckpointMetadata), NetError> {
    let bytes = fs::read(path).map_err(|source| NetError::Io { path: path.to_path_buf(), source })?;
    let (params, header) = decode(&bytes).map_err(|reason| NetError::Integrity { path: path.to_path_buf(), reason })?;
    Ok((params, header.config, header.metadata))
}

/// Loads a checkpoint and insists it matches the requested architecture
/// and class count. The stored input size may differ.
pub fn load_checkpoint_for(
    path: &Path,
    requested: &ClassifierConfig,
) -> Result<(Parameters<f32>, ClassifierConfig, CheckpointMetadata), NetError> {
    let (params, config, metadata) = load_checkpoint(path)?;
    if config.architecture != requested.architecture || config.num_classes != requested.num_classes {
        return Err(NetError::ConfigConflict {
            path: path.to_path_buf(),
            found: format!("{} ({} classes)", config.name(), config.num_classes),
            requested: format!("{} ({} classes)", requested.name(), requested.num_classes),
        });
    }
    params.check_against(&requested.param_specs())?;
    Ok((params, config, metadata))
}
