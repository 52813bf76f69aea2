//! Facility, room-template and mechanic databases.
//!
//! A database is one JSON object with `facilities`, `rooms` and `mechanics`
//! arrays. Loading binds every cross-reference; [`validate_database`] reports
//! the remaining authoring mistakes as data.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{ArchType, ConstraintKind, ConstraintSpec, Tier};
use crate::geometry::{footprint_half_extents, Dimensions, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positioning {
    Fixed,
    Adaptable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilityDef {
    pub name: String,
    pub dimensions: Dimensions,
    pub positioning: Positioning,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    pub instance_guideline: u32,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// Predetermined position of a fixed facility inside its template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPosition {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicFacility {
    pub facility: String,
    pub count: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positions: Vec<FixedPosition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomTemplate {
    pub name: String,
    pub dimensions: Dimensions,
    #[serde(default)]
    pub characteristic_facilities: Vec<CharacteristicFacility>,
    pub max_instances: u32,
    pub arch_type: ArchType,
    #[serde(default)]
    pub room_constraints: Vec<ConstraintSpec>,
    /// Marks the template the first room of a level is built from.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub initial: bool,
}

impl RoomTemplate {
    /// Instance cap: `max_instances` tightened by any `MaxInstances` constraint.
    pub fn instance_cap(&self) -> u32 {
        self.room_constraints
            .iter()
            .filter_map(|c| match c.kind {
                ConstraintKind::MaxInstances { count } => Some(count),
                _ => None,
            })
            .fold(self.max_instances, u32::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopoKind {
    Precedes,
    TopologicalNear,
    TopologicalFar,
}

/// Topological rule between two mechanic components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstraintSpec", into = "ConstraintSpec")]
pub struct TopoConstraint {
    pub kind: TopoKind,
    pub other: String,
    /// `d_max` for near, `d_min` for far, unused for precedence.
    pub threshold: Option<u32>,
    pub weight: Option<f64>,
}

impl TryFrom<ConstraintSpec> for TopoConstraint {
    type Error = String;

    fn try_from(spec: ConstraintSpec) -> Result<Self, Self::Error> {
        let (kind, other, threshold) = match spec.kind {
            ConstraintKind::Precedes { other } => (TopoKind::Precedes, other, None),
            ConstraintKind::TopologicalNear { other, d_max } => {
                (TopoKind::TopologicalNear, other, d_max)
            }
            ConstraintKind::TopologicalFar { other, d_min } => {
                (TopoKind::TopologicalFar, other, d_min)
            }
            other => return Err(format!("{} is not a topological constraint", other.name())),
        };
        Ok(Self { kind, other, threshold, weight: spec.weight })
    }
}

impl From<TopoConstraint> for ConstraintSpec {
    fn from(t: TopoConstraint) -> Self {
        let kind = match t.kind {
            TopoKind::Precedes => ConstraintKind::Precedes { other: t.other },
            TopoKind::TopologicalNear => {
                ConstraintKind::TopologicalNear { other: t.other, d_max: t.threshold }
            }
            TopoKind::TopologicalFar => {
                ConstraintKind::TopologicalFar { other: t.other, d_min: t.threshold }
            }
        };
        ConstraintSpec { kind, weight: t.weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicDef {
    pub name: String,
    pub dimensions: Dimensions,
    #[serde(default)]
    pub standard_constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub topo_constraints: Vec<TopoConstraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Database {
    pub facilities: Vec<FacilityDef>,
    pub rooms: Vec<RoomTemplate>,
    pub mechanics: Vec<MechanicDef>,
}

impl Database {
    pub fn facility(&self, name: &str) -> Option<&FacilityDef> {
        self.facilities.iter().find(|f| f.name == name)
    }

    pub fn room(&self, name: &str) -> Option<&RoomTemplate> {
        self.rooms.iter().find(|r| r.name == name)
    }

    pub fn mechanic(&self, name: &str) -> Option<&MechanicDef> {
        self.mechanics.iter().find(|m| m.name == name)
    }

    /// Template levels start from: the one flagged `initial`, else the first.
    pub fn initial_template(&self) -> Option<&RoomTemplate> {
        self.rooms.iter().find(|r| r.initial).or_else(|| self.rooms.first())
    }
}

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("malformed database document: {0}")]
    Parse(String),
    #[error("database schema violation: {0}")]
    Schema(String),
    #[error("unresolved reference to {name:?} from {from}")]
    Reference { name: String, from: String },
}

/// Parses a database document and binds its cross-references.
pub fn load_database(bytes: &[u8]) -> Result<Database, DatabaseError> {
    let db: Database = serde_json::from_slice(bytes).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => DatabaseError::Schema(e.to_string()),
            Category::Io | Category::Syntax | Category::Eof => DatabaseError::Parse(e.to_string()),
        }
    })?;
    let facilities: HashSet<&str> = db.facilities.iter().map(|f| f.name.as_str()).collect();
    for room in &db.rooms {
        for cf in &room.characteristic_facilities {
            if !facilities.contains(cf.facility.as_str()) {
                return Err(DatabaseError::Reference {
                    name: cf.facility.clone(),
                    from: format!("room template {:?}", room.name),
                });
            }
        }
    }
    let mechanics: HashSet<&str> = db.mechanics.iter().map(|m| m.name.as_str()).collect();
    for m in &db.mechanics {
        for t in &m.topo_constraints {
            if !mechanics.contains(t.other.as_str()) {
                return Err(DatabaseError::Reference {
                    name: t.other.clone(),
                    from: format!("mechanic {:?}", m.name),
                });
            }
        }
    }
    Ok(db)
}

/// Normalized serialized form; `load_database(save_database(db))` returns `db`.
pub fn save_database(db: &Database) -> String {
    let mut s = serde_json::to_string_pretty(db).expect("database serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub entity: String,
    pub rule: &'static str,
    pub message: String,
}

/// Checks every database invariant. Violations come back sorted by entity.
pub fn validate_database(db: &Database) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: String, rule: &'static str, message: String| {
        out.push(Violation { entity, rule, message });
    };

    let dup = |names: Vec<&str>| -> BTreeSet<String> {
        let mut seen = HashSet::new();
        names
            .into_iter()
            .filter(|n| !seen.insert(*n))
            .map(str::to_owned)
            .collect()
    };
    for n in dup(db.facilities.iter().map(|f| f.name.as_str()).collect()) {
        push(format!("facility/{n}"), "unique-name", format!("facility name {n:?} is defined more than once"));
    }
    for n in dup(db.rooms.iter().map(|r| r.name.as_str()).collect()) {
        push(format!("room/{n}"), "unique-name", format!("room template name {n:?} is defined more than once"));
    }
    for n in dup(db.mechanics.iter().map(|m| m.name.as_str()).collect()) {
        push(format!("mechanic/{n}"), "unique-name", format!("mechanic name {n:?} is defined more than once"));
    }

    let check_constraints =
        |entity: &str, list: &[ConstraintSpec], tier: Tier, push: &mut dyn FnMut(String, &'static str, String)| {
            for c in list {
                if !c.kind.allowed_in(tier) {
                    push(entity.to_owned(), "constraint-tier", format!("{} is not a {tier:?}-tier constraint", c.kind.name()));
                }
                if let Some(w) = c.weight {
                    if !(w.is_finite() && w >= 0.0) {
                        push(entity.to_owned(), "constraint-weight", format!("{} weight must be finite and >= 0", c.kind.name()));
                    }
                }
                if let Some(p) = c.kind.parameter_problem() {
                    push(entity.to_owned(), "constraint-parameters", p);
                }
            }
        };

    for f in &db.facilities {
        let entity = format!("facility/{}", f.name);
        if !f.dimensions.is_valid() {
            push(entity.clone(), "positive-dimensions", "dimensions must be positive and finite".into());
        }
        if f.instance_guideline == 0 {
            push(entity.clone(), "instance-guideline", "instance guideline must be at least 1".into());
        }
        if f.name.trim().is_empty() {
            push(entity.clone(), "name", "name must not be empty".into());
        }
        check_constraints(&entity, &f.constraints, Tier::Facility, &mut push);
    }

    for r in &db.rooms {
        let entity = format!("room/{}", r.name);
        if !r.dimensions.is_valid() {
            push(entity.clone(), "positive-dimensions", "dimensions must be positive and finite".into());
        }
        if r.max_instances == 0 {
            push(entity.clone(), "max-instances", "max_instances must be at least 1".into());
        }
        if r.name.trim().is_empty() {
            push(entity.clone(), "name", "name must not be empty".into());
        }
        check_constraints(&entity, &r.room_constraints, Tier::Room, &mut push);
        for c in &r.room_constraints {
            if let ConstraintKind::SetType { arch } = c.kind {
                if arch != r.arch_type {
                    push(entity.clone(), "arch-type", format!("SetType {arch:?} disagrees with arch_type {:?}", r.arch_type));
                }
            }
        }
        let room_rect = Rect::new(0.0, 0.0, r.dimensions.width, r.dimensions.length);
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for cf in &r.characteristic_facilities {
            *counts.entry(cf.facility.as_str()).or_default() += cf.count;
            let Some(f) = db.facility(&cf.facility) else {
                push(entity.clone(), "facility-reference", format!("unknown facility {:?}", cf.facility));
                continue;
            };
            if cf.count == 0 {
                push(entity.clone(), "facility-count", format!("{} listed with count 0", cf.facility));
            }
            let fits = |yaw: f64| {
                let (hx, hy) = footprint_half_extents(f.dimensions, yaw);
                2.0 * hx <= r.dimensions.width && 2.0 * hy <= r.dimensions.length
            };
            if f.dimensions.is_valid() && r.dimensions.is_valid() && !(fits(0.0) || fits(std::f64::consts::FRAC_PI_2)) {
                push(entity.clone(), "footprint-fits", format!("{} does not fit inside the room", cf.facility));
            }
            if f.dimensions.height > r.dimensions.height {
                push(entity.clone(), "footprint-fits", format!("{} is taller than the room", cf.facility));
            }
            match f.positioning {
                Positioning::Fixed => {
                    if cf.positions.len() != cf.count as usize {
                        push(entity.clone(), "fixed-positions", format!(
                            "fixed facility {} needs {} positions, has {}",
                            cf.facility, cf.count, cf.positions.len()));
                    }
                    for p in &cf.positions {
                        let (hx, hy) = footprint_half_extents(f.dimensions, p.yaw_deg.to_radians());
                        let fp = Rect::new(p.x - hx, p.y - hy, p.x + hx, p.y + hy);
                        if !fp.within(&room_rect) {
                            push(entity.clone(), "fixed-positions", format!(
                                "fixed facility {} at ({}, {}) leaves the room", cf.facility, p.x, p.y));
                        }
                    }
                }
                Positioning::Adaptable => {
                    if !cf.positions.is_empty() {
                        push(entity.clone(), "fixed-positions", format!(
                            "adaptable facility {} must not carry positions", cf.facility));
                    }
                }
            }
        }
        for (name, count) in counts {
            if let Some(f) = db.facility(name) {
                if count > f.instance_guideline {
                    push(entity.clone(), "instance-guideline", format!(
                        "{count} instances of {name} exceed its guideline of {}", f.instance_guideline));
                }
            }
        }
    }
    if db.rooms.iter().filter(|r| r.initial).count() > 1 {
        push("room/*".into(), "initial-template", "more than one template is flagged initial".into());
    }

    let mechanic_names: HashSet<&str> = db.mechanics.iter().map(|m| m.name.as_str()).collect();
    for m in &db.mechanics {
        let entity = format!("mechanic/{}", m.name);
        if !m.dimensions.is_valid() {
            push(entity.clone(), "positive-dimensions", "dimensions must be positive and finite".into());
        }
        if m.name.trim().is_empty() {
            push(entity.clone(), "name", "name must not be empty".into());
        }
        check_constraints(&entity, &m.standard_constraints, Tier::Facility, &mut push);
        for t in &m.topo_constraints {
            if !mechanic_names.contains(t.other.as_str()) {
                push(entity.clone(), "mechanic-reference", format!("unknown mechanic {:?}", t.other));
            }
            if let Some(w) = t.weight {
                if !(w.is_finite() && w >= 0.0) {
                    push(entity.clone(), "constraint-weight", "topological weight must be finite and >= 0".into());
                }
            }
        }
    }

    out.sort();
    out
}

/// Curated databases shipped with the crate.
pub mod samples {
    use super::{load_database, Database};

    pub const HOSPITAL_JSON: &str = include_str!("../data/sh_hospital.json");
    pub const MINIMAL_JSON: &str = include_str!("../data/minimal.json");

    /// Survival-horror hospital theme used for the experiments.
    pub fn hospital() -> Database {
        load_database(HOSPITAL_JSON.as_bytes()).expect("shipped hospital database loads")
    }

    /// Small synthetic theme for tests.
    pub fn minimal() -> Database {
        load_database(MINIMAL_JSON.as_bytes()).expect("shipped minimal database loads")
    }
}
