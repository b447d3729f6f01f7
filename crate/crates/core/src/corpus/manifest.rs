//! JSON Lines manifest: one header line, then one record per line.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusConfig, CorpusError, CorpusManifest, CorpusStats, SampleRecord};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: CorpusConfig,
    stats: CorpusStats,
}

pub fn write_manifest(manifest: &CorpusManifest, path: &Path) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    let header = Header { version: manifest.version, config: manifest.config.clone(), stats: manifest.stats.clone() };
    serde_json::to_writer(&mut w, &header).map_err(|e| io(e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    for r in &manifest.records {
        serde_json::to_writer(&mut w, r).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a manifest; image paths resolve against the file's directory.
pub fn read_manifest(path: &Path) -> Result<CorpusManifest, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let bad = |line: usize, reason: String| CorpusError::Manifest { path: path.to_path_buf(), line, reason };
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let first = first.map_err(|e| bad(1, e.to_string()))?;
    let header: Header = serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
    if header.version != MANIFEST_VERSION {
        return Err(bad(1, format!("unsupported version {}", header.version)));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| bad(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line).map_err(|e| bad(i + 1, e.to_string()))?;
        records.push(record);
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(CorpusManifest { version: header.version, config: header.config, records, stats: header.stats, root })
}
