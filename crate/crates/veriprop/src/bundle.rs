//! Corpus bundle on disk.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/ehr/<id>.json
//! <dir>/summary/<id>.json
//! <dir>/gold/<id>.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use veriprop_core::extract::Document;
use veriprop_core::metrics::GoldFile;
use veriprop_core::simcorpus::{CorpusDoc, FaultKind, FaultSpec, SizeParams};

use crate::error::{Error, Result};
use crate::io::{read_json, to_json_bytes};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub seed: u64,
    pub applied: Vec<FaultKind>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub docs: usize,
    pub faults: Vec<FaultSpec>,
    pub size: SizeParams,
    pub documents: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(seed: u64, faults: &[FaultSpec], size: SizeParams, docs: &[CorpusDoc]) -> Self {
        Manifest {
            seed,
            docs: docs.len(),
            faults: faults.to_vec(),
            size,
            documents: docs
                .iter()
                .map(|d| ManifestEntry {
                    id: d.gold.doc_id.trim_end_matches("-summary").to_string(),
                    seed: d.seed,
                    applied: d.applied.clone(),
                })
                .collect(),
        }
    }
}

/// One pair read back from a bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleDoc {
    pub id: String,
    pub ehr: Document,
    pub summary: Document,
    pub gold: GoldFile,
}

fn doc_path(dir: &Path, part: &str, id: &str) -> PathBuf {
    dir.join(part).join(format!("{id}.json"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the bundle into a fresh temporary directory beside `dir` and
/// renames it into place. `dir` must be absent or an empty directory.
pub fn write_bundle(dir: &Path, manifest: &Manifest, docs: &[CorpusDoc]) -> Result<()> {
    if dir.exists() {
        let empty = dir.is_dir() && fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_none();
        if !empty {
            return Err(Error::Other(format!("{}: output exists and is not an empty directory", dir.display())));
        }
    }
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::Builder::new()
        .prefix(".veriprop-corpus-")
        .tempdir_in(parent)
        .map_err(|e| Error::io(parent, e))?;
    for part in ["ehr", "summary", "gold"] {
        let p = tmp.path().join(part);
        fs::create_dir(&p).map_err(|e| Error::io(&p, e))?;
    }
    for (entry, doc) in manifest.documents.iter().zip(docs) {
        write_file(&doc_path(tmp.path(), "ehr", &entry.id), &to_json_bytes(&doc.ehr))?;
        write_file(&doc_path(tmp.path(), "summary", &entry.id), &to_json_bytes(&doc.summary))?;
        write_file(&doc_path(tmp.path(), "gold", &entry.id), &to_json_bytes(&doc.gold))?;
    }
    write_file(&tmp.path().join("manifest.json"), &to_json_bytes(manifest))?;
    if dir.exists() {
        fs::remove_dir(dir).map_err(|e| Error::io(dir, e))?;
    }
    let staged = tmp.keep();
    fs::rename(&staged, dir).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        Error::io(dir, e)
    })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    read_json(&dir.join("manifest.json"))
}

/// Reads every pair listed in the manifest, in manifest order.
pub fn read_bundle(dir: &Path) -> Result<Vec<BundleDoc>> {
    read_manifest(dir)?
        .documents
        .into_iter()
        .map(|e| {
            Ok(BundleDoc {
                ehr: read_json(&doc_path(dir, "ehr", &e.id))?,
                summary: read_json(&doc_path(dir, "summary", &e.id))?,
                gold: read_json(&doc_path(dir, "gold", &e.id))?,
                id: e.id,
            })
        })
        .collect()
}
