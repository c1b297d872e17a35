//! Reading inputs and writing outputs.
//!
//! Every output goes through [`write_atomic`]: the bytes are written to a
//! temporary file in the destination directory and renamed into place, so a
//! failed run never leaves a partial file behind.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use veriprop_core::align::PrecomputedEmbeddings;
use veriprop_core::checks::VerificationReport;
use veriprop_core::kb::{KbError, KbSources, KnowledgeBase};
use veriprop_core::metrics::GoldFile;
use veriprop_core::PropositionId;

use crate::error::{Error, Result};

/// Environment variable naming the default knowledge-base directory.
pub const KB_ENV: &str = "VERIPROP_KB";

pub const KB_FILES: [&str; 5] = [
    "synonyms.tsv",
    "classes.tsv",
    "implications.tsv",
    "exclusivity.tsv",
    "units.tsv",
];

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    let line = (e.line() > 0).then_some(e.line());
    Error::data(path, line, e)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}

/// One value or an array of values.
#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    Many(Vec<T>),
    One(T),
}

pub fn read_json_list<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(match read_json::<OneOrMany<T>>(path)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(x) => vec![x],
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = parent_dir(path);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value))
}

fn kb_error(dir: &Path, e: KbError) -> Error {
    match e {
        KbError::Parse { file, line, reason } => Error::data(&dir.join(file), Some(line), reason),
        other => Error::data(dir, None, other),
    }
}

/// Loads a bundle directory. `cues.tsv` is optional.
pub fn load_kb_dir(dir: &Path) -> Result<KnowledgeBase> {
    let mut texts = Vec::with_capacity(KB_FILES.len());
    for name in KB_FILES {
        texts.push(read_text(&dir.join(name))?);
    }
    let cues_path = dir.join("cues.tsv");
    let cues = if cues_path.exists() {
        Some(read_text(&cues_path)?)
    } else {
        None
    };
    KnowledgeBase::from_sources(KbSources {
        synonyms: &texts[0],
        classes: &texts[1],
        implications: &texts[2],
        exclusivity: &texts[3],
        units: &texts[4],
        cues: cues.as_deref(),
    })
    .map_err(|e| kb_error(dir, e))
}

/// `--kb`, then `VERIPROP_KB`, then the built-in bundle.
pub fn resolve_kb(flag: Option<&Path>) -> Result<KnowledgeBase> {
    match flag {
        Some(dir) => load_kb_dir(dir),
        None => match std::env::var_os(KB_ENV) {
            Some(dir) if !dir.is_empty() => load_kb_dir(Path::new(&dir)),
            _ => Ok(KnowledgeBase::builtin()),
        },
    }
}

#[derive(Deserialize)]
struct EmbeddingLine {
    id: PropositionId,
    vector: Vec<f64>,
}

/// JSON lines `{"id": ["doc", index], "vector": [..]}`; blank lines are
/// skipped.
pub fn load_embeddings(path: &Path) -> Result<PrecomputedEmbeddings> {
    let text = read_text(path)?;
    let mut out = PrecomputedEmbeddings::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: EmbeddingLine = serde_json::from_str(line).map_err(|e| Error::data(path, Some(i + 1), e))?;
        out.insert(row.id, &row.vector)
            .map_err(|e| Error::data(path, Some(i + 1), e))?;
    }
    Ok(out)
}

pub fn read_reports(path: &Path) -> Result<Vec<VerificationReport>> {
    read_json_list(path)
}

/// A gold file, an array of gold files, or a directory of `*.json` gold
/// files read in name order.
pub fn read_golds(path: &Path) -> Result<Vec<GoldFile>> {
    if !path.is_dir() {
        return read_json_list(path);
    }
    let mut out = Vec::new();
    for file in json_files(path)? {
        out.extend(read_json_list::<GoldFile>(&file)?);
    }
    Ok(out)
}

pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}
