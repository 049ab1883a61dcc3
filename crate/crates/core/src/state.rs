//! Run-state documents.
//!
//! A [`RunState`] is stored as a JSON object with the top-level fields
//! `format_version, t, eta, R_t, rng, brackets, ledger, next_config_id`,
//! followed by `phase_start`, `benchmark`, `cache` and a SHA-256 `checksum`
//! of the document body. Array order is significant and preserved.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arm::ConfigId;
use crate::eval::{EvaluationCache, PullLedger};
use crate::hyperband::{BracketState, HbParams, RunState};
use crate::sampler::RngState;

pub const FORMAT_VERSION: u32 = 1;

/// Top-level fields in document order.
const SECTIONS: [&str; 12] = [
    "format_version",
    "t",
    "eta",
    "R_t",
    "rng",
    "brackets",
    "ledger",
    "next_config_id",
    "phase_start",
    "benchmark",
    "cache",
    "checksum",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("document is truncated inside or before section `{section}`")]
    Truncated { section: String },
    #[error("document lacks section `{0}`")]
    MissingSection(String),
    #[error("malformed document: {0}")]
    Json(String),
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("checksum mismatch: document was modified after saving")]
    ChecksumMismatch,
    #[error("inconsistent run state: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Serialize, Deserialize)]
struct Document {
    format_version: u32,
    t: u32,
    eta: u64,
    #[serde(rename = "R_t")]
    r_t: u64,
    rng: RngState,
    brackets: Vec<BracketState>,
    ledger: Vec<(ConfigId, u64)>,
    next_config_id: u64,
    phase_start: usize,
    benchmark: Option<String>,
    cache: Vec<(ConfigId, u64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checksum: Option<String>,
}

fn digest(doc: &Document) -> String {
    let body = serde_json::to_vec(doc).expect("run state serializes");
    hex::encode(Sha256::digest(&body))
}

/// Serializes `state`. Equal states give byte-identical documents.
pub fn save_state(state: &RunState) -> String {
    let mut doc = Document {
        format_version: FORMAT_VERSION,
        t: state.t,
        eta: state.params.eta(),
        r_t: state.params.max_size(),
        rng: state.rng.clone(),
        brackets: state.brackets.clone(),
        ledger: state.ledger.entries().to_vec(),
        next_config_id: state.next_config_id,
        phase_start: state.phase_start,
        benchmark: state.benchmark.clone(),
        cache: state.cache.iter().collect(),
        checksum: None,
    };
    doc.checksum = Some(digest(&doc));
    let mut out = serde_json::to_string_pretty(&doc).expect("run state serializes");
    out.push('\n');
    out
}

/// Parses a document produced by [`save_state`].
pub fn load_state(text: &str) -> Result<RunState, StateError> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) if e.is_eof() => {
            return Err(StateError::Truncated {
                section: truncated_section(text).to_string(),
            })
        }
        Err(e) => return Err(StateError::Json(e.to_string())),
    };
    let obj = value
        .as_object()
        .ok_or_else(|| StateError::Json("top level is not an object".into()))?;
    let version = obj
        .get("format_version")
        .ok_or_else(|| StateError::MissingSection("format_version".into()))?;
    match version.as_u64() {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(StateError::VersionMismatch {
                found: v,
                expected: FORMAT_VERSION,
            })
        }
        None => return Err(StateError::Json("format_version is not an integer".into())),
    }
    for key in SECTIONS {
        if !obj.contains_key(key) {
            return Err(StateError::MissingSection(key.into()));
        }
    }
    let mut doc: Document =
        serde_json::from_value(value).map_err(|e| StateError::Json(e.to_string()))?;
    let stored = doc.checksum.take();
    if stored.as_deref() != Some(digest(&doc).as_str()) {
        return Err(StateError::ChecksumMismatch);
    }
    into_state(doc)
}

fn into_state(doc: Document) -> Result<RunState, StateError> {
    let invalid = |m: String| StateError::Invalid(m);
    let params = HbParams::new(doc.r_t, doc.eta).map_err(|e| invalid(e.to_string()))?;
    let mut cache = EvaluationCache::new();
    for (c, level, loss) in doc.cache {
        if !cache.insert(c, level, loss) {
            return Err(invalid(format!("cache key ({c}, {level}) appears twice")));
        }
    }
    for &(c, level) in &doc.ledger {
        if !cache.contains(c, level) {
            return Err(invalid(format!(
                "ledger entry ({c}, {level}) has no cached loss"
            )));
        }
    }
    if doc.phase_start > doc.ledger.len() {
        return Err(invalid("phase start lies beyond the ledger".into()));
    }
    if doc.rng.position != doc.next_config_id {
        return Err(invalid(format!(
            "rng position {} disagrees with next_config_id {}",
            doc.rng.position, doc.next_config_id
        )));
    }
    for b in &doc.brackets {
        for it in &b.iterations {
            for &(c, loss) in &it.losses {
                if cache.get(c, it.r_i) != Some(loss) {
                    return Err(invalid(format!(
                        "bracket {} loss of {c} at level {} is not backed by the cache",
                        b.s, it.r_i
                    )));
                }
            }
        }
    }
    Ok(RunState {
        t: doc.t,
        params,
        brackets: doc.brackets,
        cache,
        rng: doc.rng,
        ledger: PullLedger::from_entries(doc.ledger),
        next_config_id: doc.next_config_id,
        phase_start: doc.phase_start,
        benchmark: doc.benchmark,
    })
}

/// First required section that does not appear complete in a cut-off
/// document: the last top-level key seen, or the first one never reached.
fn truncated_section(text: &str) -> &'static str {
    let seen = top_level_keys(text);
    match seen.last() {
        Some(last) => SECTIONS
            .iter()
            .find(|s| *s == last)
            .copied()
            .unwrap_or(SECTIONS[0]),
        None => SECTIONS[0],
    }
}

/// Keys of the outermost object, in order of appearance.
fn top_level_keys(text: &str) -> Vec<String> {
    let mut keys = Vec::new();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut current = String::new();
    let mut expect_key = false;
    let chars = text.chars();
    for ch in chars {
        if in_string {
            if escaped {
                escaped = false;
                current.push(ch);
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
                if expect_key && depth == 1 {
                    keys.push(std::mem::take(&mut current));
                }
                current.clear();
            } else {
                current.push(ch);
            }
            continue;
        }
        match ch {
            '"' => in_string = true,
            '{' | '[' => {
                depth += 1;
                expect_key = ch == '{';
            }
            '}' | ']' => depth = depth.saturating_sub(1),
            ',' => expect_key = depth == 1,
            ':' => expect_key = false,
            _ => {}
        }
    }
    keys
}

pub fn write_state(path: &Path, state: &RunState) -> Result<(), StateError> {
    std::fs::write(path, save_state(state)).map_err(|e| StateError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_state(path: &Path) -> Result<RunState, StateError> {
    let text = std::fs::read_to_string(path).map_err(|e| StateError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_state(&text)
}
