use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::Level;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("malformed level document: {0}")]
    Parse(String),
    #[error("level document schema violation: {0}")]
    Schema(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelDocument {
    schema_version: u32,
    level: Level,
}

/// Pretty JSON with keys sorted at every depth. Floats use the shortest
/// decimal that round-trips.
pub fn export_level_json(level: &Level) -> Vec<u8> {
    let doc = LevelDocument { schema_version: SCHEMA_VERSION, level: level.clone() };
    // Going through `Value` sorts object keys.
    let value = serde_json::to_value(&doc).expect("levels serialize");
    let mut out = serde_json::to_vec_pretty(&value).expect("values serialize");
    out.push(b'\n');
    out
}

pub fn import_level_json(bytes: &[u8]) -> Result<Level, ExportError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| ExportError::Parse(e.to_string()))?;
    let doc: LevelDocument = serde_json::from_value(value).map_err(|e| ExportError::Schema(e.to_string()))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(ExportError::Schema(format!("unsupported schema_version {}", doc.schema_version)));
    }
    check(&doc.level)?;
    Ok(doc.level)
}

fn check(level: &Level) -> Result<(), ExportError> {
    let sk = &level.skeleton;
    let n = sk.rooms.len();
    for (i, r) in sk.rooms.iter().enumerate() {
        if r.id != i {
            return Err(ExportError::Schema(format!("room at index {i} has id {}", r.id)));
        }
        if r.floor >= sk.floors.max(1) {
            return Err(ExportError::Schema(format!("room {i} is on floor {} of {}", r.floor, sk.floors)));
        }
    }
    let mut taus: Vec<u32> = sk.rooms.iter().map(|r| r.tau).collect();
    taus.sort_unstable();
    if taus.iter().enumerate().any(|(k, &t)| t as usize != k + 1) {
        return Err(ExportError::Schema("room tau values must be exactly 1..n".into()));
    }
    let bad_room = |r: usize| r >= n;
    if let Some(f) = level.facilities.iter().find(|f| bad_room(f.room)) {
        return Err(ExportError::Schema(format!("facility {} references room {}", f.id, f.room)));
    }
    if let Some(m) = level.mechanics.iter().find(|m| bad_room(m.room)) {
        return Err(ExportError::Schema(format!("mechanic {} references room {}", m.id, m.room)));
    }
    let links = sk
        .doors
        .iter()
        .map(|d| (d.room_a, d.room_b))
        .chain(sk.open_edges.iter().map(|e| (e.room_a, e.room_b)))
        .chain(sk.stairs.iter().map(|s| (s.room, s.upper_room)))
        .chain(sk.adjacency.iter().copied());
    for (a, b) in links {
        if bad_room(a) || bad_room(b) {
            return Err(ExportError::Schema(format!("connection {a}-{b} references a missing room")));
        }
    }
    Ok(())
}
