//! Constraint specifications and their penalty functions.
//!
//! Every penalty is a soft cost: non-negative, finite, linear in its weight
//! and zero exactly when the constraint is satisfied. Facility-tier kinds are
//! evaluated against other facilities in the same room, room-tier kinds
//! against the rooms placed so far, and the topological kinds are handled by
//! [`crate::mechanics`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_diff, dist2, dist3, Pose, Rect, MIN_SHARED_WALL};

/// Which database section a constraint kind may appear in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Facility,
    Room,
    Mechanic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisFunction {
    CenteredXy,
    OnFloor,
    NearLevelEntrance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchType {
    Enclosed,
    Open,
}

/// Constraint kind together with its parameters. Serialized under the
/// `type`/`parameters` keys of a constraint object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "parameters", deny_unknown_fields)]
pub enum ConstraintKind {
    AxisFunction {
        function: AxisFunction,
    },
    PlaceInRange {
        p1: [f64; 3],
        p2: [f64; 3],
    },
    PlaceByWall {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        orientation_deg: Option<f64>,
    },
    Near {
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_min: Option<f64>,
    },
    Far {
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_max: Option<f64>,
    },
    CanSee {
        target: String,
    },
    Focus {
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold_deg: Option<f64>,
    },
    Alignment {
        target: String,
        axis: Axis,
    },
    Orientation {
        target: String,
    },
    AdjacentTo {
        target: String,
    },
    SeparateFrom {
        target: String,
    },
    MaxInstances {
        count: u32,
    },
    SetType {
        #[serde(rename = "type")]
        arch: ArchType,
    },
    Precedes {
        other: String,
    },
    TopologicalNear {
        other: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_max: Option<u32>,
    },
    TopologicalFar {
        other: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d_min: Option<u32>,
    },
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::AxisFunction { .. } => "AxisFunction",
            ConstraintKind::PlaceInRange { .. } => "PlaceInRange",
            ConstraintKind::PlaceByWall { .. } => "PlaceByWall",
            ConstraintKind::Near { .. } => "Near",
            ConstraintKind::Far { .. } => "Far",
            ConstraintKind::CanSee { .. } => "CanSee",
            ConstraintKind::Focus { .. } => "Focus",
            ConstraintKind::Alignment { .. } => "Alignment",
            ConstraintKind::Orientation { .. } => "Orientation",
            ConstraintKind::AdjacentTo { .. } => "AdjacentTo",
            ConstraintKind::SeparateFrom { .. } => "SeparateFrom",
            ConstraintKind::MaxInstances { .. } => "MaxInstances",
            ConstraintKind::SetType { .. } => "SetType",
            ConstraintKind::Precedes { .. } => "Precedes",
            ConstraintKind::TopologicalNear { .. } => "TopologicalNear",
            ConstraintKind::TopologicalFar { .. } => "TopologicalFar",
        }
    }

    pub fn allowed_in(&self, tier: Tier) -> bool {
        use ConstraintKind::*;
        match self {
            AxisFunction { .. } => matches!(tier, Tier::Facility | Tier::Room),
            PlaceInRange { .. } | PlaceByWall { .. } | Near { .. } | Far { .. } | CanSee { .. }
            | Focus { .. } | Alignment { .. } | Orientation { .. } => tier == Tier::Facility,
            AdjacentTo { .. } | SeparateFrom { .. } | MaxInstances { .. } | SetType { .. } => {
                tier == Tier::Room
            }
            Precedes { .. } | TopologicalNear { .. } | TopologicalFar { .. } => {
                tier == Tier::Mechanic
            }
        }
    }

    /// Numeric parameters that must be finite (and positive where they are
    /// distances). Returns a description of the first bad one.
    pub fn parameter_problem(&self) -> Option<String> {
        let finite = |v: f64| v.is_finite();
        match self {
            ConstraintKind::PlaceInRange { p1, p2 } => {
                if !p1.iter().chain(p2.iter()).all(|v| finite(*v)) {
                    return Some("PlaceInRange corners must be finite".into());
                }
            }
            ConstraintKind::PlaceByWall { orientation_deg: Some(o) } if !finite(*o) => {
                return Some("PlaceByWall orientation must be finite".into());
            }
            ConstraintKind::Near { d_min: Some(d), .. } if !(finite(*d) && *d >= 0.0) => {
                return Some("Near d_min must be finite and non-negative".into());
            }
            ConstraintKind::Far { d_max: Some(d), .. } if !(finite(*d) && *d >= 0.0) => {
                return Some("Far d_max must be finite and non-negative".into());
            }
            ConstraintKind::Focus { threshold_deg: Some(t), .. }
                if !(finite(*t) && *t >= 0.0) =>
            {
                return Some("Focus threshold must be finite and non-negative".into());
            }
            ConstraintKind::MaxInstances { count } if *count == 0 => {
                return Some("MaxInstances count must be at least 1".into());
            }
            _ => {}
        }
        let target = match self {
            ConstraintKind::Near { target, .. }
            | ConstraintKind::Far { target, .. }
            | ConstraintKind::CanSee { target }
            | ConstraintKind::Focus { target, .. }
            | ConstraintKind::Alignment { target, .. }
            | ConstraintKind::Orientation { target }
            | ConstraintKind::AdjacentTo { target }
            | ConstraintKind::SeparateFrom { target } => Some(target),
            ConstraintKind::Precedes { other }
            | ConstraintKind::TopologicalNear { other, .. }
            | ConstraintKind::TopologicalFar { other, .. } => Some(other),
            _ => None,
        };
        match target {
            Some(t) if t.trim().is_empty() => Some(format!("{} target is empty", self.name())),
            _ => None,
        }
    }
}

/// A constraint with an optional weight override. Without one, the kind's
/// default weight from [`WeightConfig`] applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstraint", into = "RawConstraint")]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    pub weight: Option<f64>,
}

impl ConstraintSpec {
    pub fn new(kind: ConstraintKind) -> Self {
        Self { kind, weight: None }
    }

    pub fn weighted(kind: ConstraintKind, weight: f64) -> Self {
        Self { kind, weight: Some(weight) }
    }

    pub fn effective_weight(&self, weights: &WeightConfig) -> f64 {
        self.weight.unwrap_or_else(|| weights.default_weight(&self.kind))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default = "empty_object")]
    parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(serde_json::Map::new())
}

impl TryFrom<RawConstraint> for ConstraintSpec {
    type Error = String;

    fn try_from(raw: RawConstraint) -> Result<Self, Self::Error> {
        let tagged = serde_json::json!({ "type": raw.kind, "parameters": raw.parameters });
        let kind: ConstraintKind =
            serde_json::from_value(tagged).map_err(|e| format!("constraint {}: {e}", raw.kind))?;
        if let Some(w) = raw.weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(format!("constraint {}: weight must be finite and >= 0", raw.kind));
            }
        }
        Ok(ConstraintSpec { kind, weight: raw.weight })
    }
}

impl From<ConstraintSpec> for RawConstraint {
    fn from(spec: ConstraintSpec) -> Self {
        let value = serde_json::to_value(&spec.kind).expect("constraint kinds serialize");
        let (kind, parameters) = match value {
            serde_json::Value::Object(mut map) => {
                let kind = map
                    .remove("type")
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default();
                (kind, map.remove("parameters").unwrap_or_else(empty_object))
            }
            _ => unreachable!("adjacently tagged enums serialize to objects"),
        };
        RawConstraint { kind, parameters, weight: spec.weight }
    }
}

/// Objective and penalty weights. Every field has a default; partial JSON
/// configs fill in the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub w_axis: f64,
    pub w_range: f64,
    pub w_wall: f64,
    pub w_near: f64,
    pub near_d_min: f64,
    pub w_far: f64,
    pub far_d_max: f64,
    pub w_can_see: f64,
    pub w_focus: f64,
    pub focus_threshold: f64,
    pub w_align: f64,
    pub w_orient: f64,
    pub w_overlap: f64,
    pub w_bounds: f64,
    pub w_pos_room: f64,
    pub w_adj: f64,
    pub w_sep: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub topo_d_max: u32,
    pub w4: f64,
    pub topo_d_min: u32,
    pub strong_far_scale: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 100.0,
            gamma: 500.0,
            epsilon: 0.1,
            w_axis: 20.0,
            w_range: 20.0,
            w_wall: 20.0,
            w_near: 10.0,
            near_d_min: 5.0,
            w_far: 15.0,
            far_d_max: 10.0,
            w_can_see: 2.0,
            w_focus: 10.0,
            focus_threshold: 15f64.to_radians(),
            w_align: 15.0,
            w_orient: 20.0,
            w_overlap: 30.0,
            w_bounds: 30.0,
            w_pos_room: 20.0,
            w_adj: 10.0,
            w_sep: 15.0,
            w1: 50.0,
            w2: 1.0,
            w3: 10.0,
            topo_d_max: 4,
            w4: 15.0,
            topo_d_min: 3,
            strong_far_scale: 3.0,
        }
    }
}

impl WeightConfig {
    pub fn default_weight(&self, kind: &ConstraintKind) -> f64 {
        use ConstraintKind::*;
        match kind {
            AxisFunction { .. } => self.w_axis,
            PlaceInRange { .. } => self.w_range,
            PlaceByWall { .. } => self.w_wall,
            Near { .. } => self.w_near,
            Far { .. } => self.w_far,
            CanSee { .. } => self.w_can_see,
            Focus { .. } => self.w_focus,
            Alignment { .. } => self.w_align,
            Orientation { .. } => self.w_orient,
            AdjacentTo { .. } => self.w_adj,
            SeparateFrom { .. } => self.w_sep,
            MaxInstances { .. } | SetType { .. } => 0.0,
            Precedes { .. } => self.w1,
            TopologicalNear { .. } => self.w3,
            TopologicalFar { .. } => self.w4,
        }
    }

    /// Room-tier positional preferences reuse `w_axis` under a separate name.
    fn room_axis_weight(&self, spec: &ConstraintSpec) -> f64 {
        spec.weight.unwrap_or(self.w_pos_room)
    }

    pub fn all_non_negative(&self) -> bool {
        [
            self.alpha, self.beta, self.gamma, self.epsilon, self.w_axis, self.w_range,
            self.w_wall, self.w_near, self.near_d_min, self.w_far, self.far_d_max,
            self.w_can_see, self.w_focus, self.focus_threshold, self.w_align, self.w_orient,
            self.w_overlap, self.w_bounds, self.w_pos_room, self.w_adj, self.w_sep, self.w1,
            self.w2, self.w3, self.w4, self.strong_far_scale,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("constraint kind {kind} cannot be evaluated at the {tier:?} tier")]
    UnknownKind { kind: &'static str, tier: Tier },
}

/// Room interior in its local frame `[0, w] x [0, l] x [0, h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomGeometry {
    pub width: f64,
    pub length: f64,
    pub height: f64,
    /// Local positions of the room's doorways.
    pub entrances: Vec<[f64; 2]>,
}

impl RoomGeometry {
    pub fn new(width: f64, length: f64, height: f64) -> Self {
        Self { width, length, height, entrances: Vec::new() }
    }

    pub fn rect(&self) -> Rect {
        Rect::new(0.0, 0.0, self.width, self.length)
    }
}

/// Another facility already in the room.
#[derive(Debug, Clone, Copy)]
pub struct PlacedFacility<'a> {
    pub name: &'a str,
    pub pose: Pose,
}

fn nearest_target<'a, 'b>(
    others: &'b [PlacedFacility<'a>],
    name: &str,
    from: &Pose,
) -> Option<(usize, &'b PlacedFacility<'a>)> {
    others
        .iter()
        .enumerate()
        .filter(|(_, o)| o.name == name)
        .min_by(|a, b| from.distance(&a.1.pose).total_cmp(&from.distance(&b.1.pose)))
}

/// Penalty of one facility-tier constraint for `subject`.
pub fn eval_facility_penalty(
    spec: &ConstraintSpec,
    subject: &Pose,
    room: &RoomGeometry,
    others: &[PlacedFacility<'_>],
    weights: &WeightConfig,
) -> Result<f64, ConstraintError> {
    use ConstraintKind::*;
    if !spec.kind.allowed_in(Tier::Facility) {
        return Err(ConstraintError::UnknownKind { kind: spec.kind.name(), tier: Tier::Facility });
    }
    let w = spec.effective_weight(weights);
    let value = match &spec.kind {
        AxisFunction { function } => {
            let delta = facility_axis_deviation(*function, subject, room);
            w * delta * delta
        }
        PlaceInRange { p1, p2 } => {
            let mut sq = 0.0;
            for axis in 0..3 {
                let lo = p1[axis].min(p2[axis]);
                let hi = p1[axis].max(p2[axis]);
                let c = subject.center[axis];
                let out = (lo - c).max(c - hi).max(0.0);
                sq += out * out;
            }
            w * sq
        }
        PlaceByWall { orientation_deg } => {
            let r = subject.footprint();
            let wall = r.x0.min(room.width - r.x1).min(r.y0).min(room.length - r.y1).max(0.0);
            let turn = orientation_deg.map_or(0.0, |o| angle_diff(subject.yaw, o.to_radians()));
            let e = wall + turn;
            w * e * e
        }
        Near { target, d_min } => match nearest_target(others, target, subject) {
            Some((_, t)) => {
                let d_min = d_min.unwrap_or(weights.near_d_min);
                let d = subject.distance(&t.pose);
                if d > d_min {
                    w * (d_min - d) * (d_min - d)
                } else {
                    0.0
                }
            }
            None => 0.0,
        },
        Far { target, d_max } => match nearest_target(others, target, subject) {
            Some((_, t)) => {
                let d_max = d_max.unwrap_or(weights.far_d_max);
                let d = subject.distance(&t.pose);
                if d < d_max {
                    w * (d - d_max) * (d - d_max)
                } else {
                    0.0
                }
            }
            None => 0.0,
        },
        CanSee { target } => match nearest_target(others, target, subject) {
            Some((ti, t)) => {
                let blocked = others
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != ti)
                    .any(|(_, o)| o.pose.aabb().intersects_segment(subject.center, t.pose.center));
                if blocked {
                    w
                } else {
                    0.0
                }
            }
            None => 0.0,
        },
        Focus { target, threshold_deg } => match nearest_target(others, target, subject) {
            Some((_, t)) => {
                let th = threshold_deg.map_or(weights.focus_threshold, f64::to_radians);
                let phi = view_angle(subject, t.pose.planar());
                if phi > th {
                    w * (phi - th) * (phi - th)
                } else {
                    0.0
                }
            }
            None => 0.0,
        },
        Alignment { target, axis } => match nearest_target(others, target, subject) {
            Some((_, t)) => {
                let dx = t.pose.center[0] - subject.center[0];
                let dy = t.pose.center[1] - subject.center[1];
                let (par, perp) = match axis {
                    Axis::X => (dx.abs(), dy.abs()),
                    Axis::Y => (dy.abs(), dx.abs()),
                };
                let theta = if par == 0.0 && perp == 0.0 { 0.0 } else { perp.atan2(par) };
                w * theta * theta
            }
            None => 0.0,
        },
        Orientation { target } => match nearest_target(others, target, subject) {
            Some((_, t)) => {
                let theta = angle_diff(subject.yaw, t.pose.yaw);
                w * theta * theta
            }
            None => 0.0,
        },
        _ => unreachable!("tier checked above"),
    };
    Ok(value)
}

/// Angle between the subject's facing direction and the direction to `target`.
pub fn view_angle(subject: &Pose, target: [f64; 2]) -> f64 {
    let dx = target[0] - subject.center[0];
    let dy = target[1] - subject.center[1];
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    let [fx, fy] = subject.facing();
    let cos = ((fx * dx + fy * dy) / dx.hypot(dy)).clamp(-1.0, 1.0);
    cos.acos().min(PI)
}

fn facility_axis_deviation(function: AxisFunction, subject: &Pose, room: &RoomGeometry) -> f64 {
    match function {
        AxisFunction::CenteredXy => {
            dist2(subject.planar(), [room.width * 0.5, room.length * 0.5])
        }
        AxisFunction::OnFloor => subject.center[2] - subject.dims.height * 0.5,
        AxisFunction::NearLevelEntrance => room
            .entrances
            .iter()
            .map(|e| dist2(subject.planar(), *e))
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
            .unwrap_or(0.0),
    }
}

/// `w * depth^2`, with depth the minimal separating translation of the two
/// footprints.
pub fn eval_overlap_penalty(a: &Pose, b: &Pose, w_overlap: f64) -> f64 {
    let depth = a.footprint().penetration_depth(&b.footprint());
    w_overlap * depth * depth
}

/// `w * depth^2` for the part of the footprint outside the room.
pub fn eval_bounds_penalty(pose: &Pose, room: &RoomGeometry, w_bounds: f64) -> f64 {
    let r = pose.footprint();
    let px = (-r.x0).max(0.0) + (r.x1 - room.width).max(0.0);
    let py = (-r.y0).max(0.0) + (r.y1 - room.length).max(0.0);
    w_bounds * (px * px + py * py)
}

/// Sum of a facility's constraint penalties.
pub fn total_constraint_penalty(
    constraints: &[ConstraintSpec],
    subject: &Pose,
    room: &RoomGeometry,
    others: &[PlacedFacility<'_>],
    weights: &WeightConfig,
) -> Result<f64, ConstraintError> {
    constraints
        .iter()
        .map(|c| eval_facility_penalty(c, subject, room, others, weights))
        .sum()
}

/// A room footprint as seen by room-tier constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomBox {
    pub template: String,
    pub floor: usize,
    pub rect: Rect,
}

impl RoomBox {
    fn z_range(&self, floor_height: f64) -> (f64, f64) {
        let z0 = self.floor as f64 * floor_height;
        (z0, z0 + floor_height)
    }

    pub fn center3(&self, floor_height: f64) -> [f64; 3] {
        let c = self.rect.center();
        let (z0, z1) = self.z_range(floor_height);
        [c[0], c[1], (z0 + z1) * 0.5]
    }

    /// Gap between the two room volumes (0 when touching).
    pub fn gap(&self, other: &RoomBox, floor_height: f64) -> f64 {
        let planar = self.rect.gap(&other.rect);
        let (a0, a1) = self.z_range(floor_height);
        let (b0, b1) = other.z_range(floor_height);
        let dz = (a0 - b1).max(b0 - a1).max(0.0);
        planar.hypot(dz)
    }

    pub fn shares_wall(&self, other: &RoomBox) -> bool {
        self.floor == other.floor
            && self.rect.shared_edge(&other.rect).is_some_and(|e| e.len() >= MIN_SHARED_WALL)
    }
}

/// Level state visible to room-tier constraints.
#[derive(Debug, Clone)]
pub struct RoomContext<'a> {
    pub level_width: f64,
    pub level_length: f64,
    pub floor_height: f64,
    pub entrance: [f64; 3],
    pub placed: &'a [RoomBox],
}

/// Penalty of one room-tier constraint for a candidate room.
pub fn eval_room_penalty(
    spec: &ConstraintSpec,
    subject: &RoomBox,
    ctx: &RoomContext<'_>,
    weights: &WeightConfig,
) -> Result<f64, ConstraintError> {
    use ConstraintKind::*;
    if !spec.kind.allowed_in(Tier::Room) {
        return Err(ConstraintError::UnknownKind { kind: spec.kind.name(), tier: Tier::Room });
    }
    let fh = ctx.floor_height;
    let min_gap = |target: &str| {
        ctx.placed
            .iter()
            .filter(|r| r.template == target && *r != subject)
            .map(|r| subject.gap(r, fh))
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
    };
    let value = match &spec.kind {
        AxisFunction { function } => {
            let w = weights.room_axis_weight(spec);
            let delta = match function {
                crate::constraints::AxisFunction::CenteredXy => dist2(
                    subject.rect.center(),
                    [ctx.level_width * 0.5, ctx.level_length * 0.5],
                ),
                crate::constraints::AxisFunction::OnFloor => subject.floor as f64 * fh,
                crate::constraints::AxisFunction::NearLevelEntrance => {
                    dist3(subject.center3(fh), ctx.entrance)
                }
            };
            w * delta * delta
        }
        AdjacentTo { target } => {
            let w = spec.effective_weight(weights);
            let satisfied = ctx
                .placed
                .iter()
                .any(|r| r.template == *target && r != subject && subject.shares_wall(r));
            if satisfied {
                0.0
            } else {
                min_gap(target).map_or(0.0, |d| w * d)
            }
        }
        SeparateFrom { target } => {
            let w = spec.effective_weight(weights);
            min_gap(target).map_or(0.0, |d| w / (d + weights.epsilon))
        }
        MaxInstances { .. } | SetType { .. } => 0.0,
        _ => unreachable!("tier checked above"),
    };
    Ok(value)
}
