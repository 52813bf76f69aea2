//! Mechanic components: room assignment by annealing over topological
//! fitness, greedy placement inside the chosen room, and the key set-ups of
//! the database-driven experiment groups.
//!
//! Fitness of an assignment `r`:
//!
//! ```text
//! F = w1 * sum_precedes max(0, tau_i - tau_j)^2
//!   + w2 * sum_i C_std(m_i, r_i)
//!   + w3 * sum_near   max(0, |tau_i - tau_j| - d_max)^2
//!   + w4 * sum_far    max(0, d_min - |tau_i - tau_j|)^2
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{anneal, SaParams};
use crate::constraints::{
    eval_bounds_penalty, eval_overlap_penalty, total_constraint_penalty, ConstraintSpec,
    PlacedFacility, RoomGeometry, WeightConfig,
};
use crate::database::{Database, MechanicDef, TopoKind};
use crate::geometry::{footprint_half_extents, Dimensions, Pose, Rect, QUARTER_YAWS};
use crate::level::{LevelSkeleton, RoomId};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, stream, StageRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanicsError {
    #[error("level has no rooms")]
    NoRooms,
    #[error("mechanic {0} has no room assigned")]
    UnboundMechanic(String),
    #[error("no free space for mechanic {0}")]
    NoFreeSpace(String),
}

/// What the other end of a topological rule refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TopoTarget {
    /// Another mechanic of the same problem, by index.
    Mechanic(usize),
    /// A virtual anchor at a fixed topological order.
    Tau(f64),
    /// The topological order of a given room.
    Room(RoomId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopoRule {
    pub kind: TopoKind,
    pub target: TopoTarget,
    /// `d_max` for near rules, `d_min` for far rules.
    pub threshold: Option<u32>,
    /// Multiplier on the rule's term.
    pub scale: f64,
}

impl TopoRule {
    pub fn new(kind: TopoKind, target: TopoTarget, threshold: Option<u32>) -> Self {
        Self { kind, target, threshold, scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanicInstance {
    pub id: String,
    pub mechanic: String,
    pub dims: Dimensions,
    pub standard_constraints: Vec<ConstraintSpec>,
    pub rules: Vec<TopoRule>,
    /// Rooms the mechanic may be assigned to.
    pub candidates: Vec<RoomId>,
    /// Hard assignment that the annealer leaves alone.
    pub pinned: Option<RoomId>,
}

impl MechanicInstance {
    pub fn from_def(id: String, def: &MechanicDef, candidates: Vec<RoomId>) -> Self {
        Self {
            id,
            mechanic: def.name.clone(),
            dims: def.dimensions,
            standard_constraints: def.standard_constraints.clone(),
            rules: Vec::new(),
            candidates,
            pinned: None,
        }
    }
}

/// Geometry and settled facilities of one room, in its local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomContents {
    pub geometry: RoomGeometry,
    pub facilities: Vec<(String, Pose)>,
    pub keep_out: Vec<Rect>,
}

impl RoomContents {
    fn placed(&self) -> Vec<PlacedFacility<'_>> {
        self.facilities.iter().map(|(n, p)| PlacedFacility { name: n, pose: *p }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub term4: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanicAssignment {
    pub rooms: Vec<RoomId>,
    pub fitness: FitnessBreakdown,
}

/// Everything the assignment annealer needs, with `C_std` precomputed.
#[derive(Debug, Clone)]
pub struct AssignmentProblem {
    pub room_tau: Vec<u32>,
    pub mechanics: Vec<MechanicInstance>,
    /// `c_std[i][r]`: best sampled standard penalty of mechanic `i` in room `r`.
    pub c_std: Vec<Vec<f64>>,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub d_max: u32,
    pub d_min: u32,
}

/// Poses sampled per (mechanic, room) when estimating `C_std`.
pub const C_STD_SAMPLES: usize = 32;

fn random_pose_in(dims: Dimensions, room: &RoomGeometry, rng: &mut StageRng) -> Pose {
    let fitting: Vec<f64> = QUARTER_YAWS
        .iter()
        .copied()
        .filter(|&y| {
            let (hx, hy) = footprint_half_extents(dims, y);
            2.0 * hx <= room.width && 2.0 * hy <= room.length
        })
        .collect();
    let yaw = if fitting.is_empty() { 0.0 } else { fitting[rng.random_range(0..fitting.len())] };
    let (hx, hy) = footprint_half_extents(dims, yaw);
    let pick = |rng: &mut StageRng, lo: f64, hi: f64| if hi > lo { rng.random_range(lo..=hi) } else { (lo + hi) * 0.5 };
    let x = pick(rng, hx, room.width - hx);
    let y = pick(rng, hy, room.length - hy);
    Pose::on_floor(x, y, yaw, dims)
}

impl AssignmentProblem {
    pub fn new(
        room_tau: Vec<u32>,
        contents: &[RoomContents],
        mechanics: Vec<MechanicInstance>,
        weights: &WeightConfig,
        seed: u64,
    ) -> Self {
        let c_std = mechanics
            .iter()
            .enumerate()
            .map(|(i, m)| {
                (0..room_tau.len())
                    .map(|r| {
                        let relevant = m.pinned == Some(r) || m.candidates.contains(&r);
                        if m.standard_constraints.is_empty() || !relevant {
                            return 0.0;
                        }
                        let mut rng = stream(seed, "c-std", derive_seed(i as u64, &[r as u64]));
                        let others = contents[r].placed();
                        (0..C_STD_SAMPLES)
                            .map(|_| {
                                let pose = random_pose_in(m.dims, &contents[r].geometry, &mut rng);
                                total_constraint_penalty(
                                    &m.standard_constraints,
                                    &pose,
                                    &contents[r].geometry,
                                    &others,
                                    weights,
                                )
                                .unwrap_or(0.0)
                            })
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect()
            })
            .collect();
        Self {
            room_tau,
            mechanics,
            c_std,
            w1: weights.w1,
            w2: weights.w2,
            w3: weights.w3,
            w4: weights.w4,
            d_max: weights.topo_d_max,
            d_min: weights.topo_d_min,
        }
    }

    fn target_tau(&self, target: TopoTarget, assignment: &[RoomId]) -> f64 {
        match target {
            TopoTarget::Mechanic(j) => f64::from(self.room_tau[assignment[j]]),
            TopoTarget::Tau(t) => t,
            TopoTarget::Room(r) => f64::from(self.room_tau[r]),
        }
    }

    pub fn fitness(&self, assignment: &[RoomId]) -> Result<FitnessBreakdown, MechanicsError> {
        if assignment.len() != self.mechanics.len() {
            let missing = self.mechanics.get(assignment.len()).map_or("?", |m| m.id.as_str());
            return Err(MechanicsError::UnboundMechanic(missing.to_owned()));
        }
        if let Some(i) = assignment.iter().position(|&r| r >= self.room_tau.len()) {
            return Err(MechanicsError::UnboundMechanic(self.mechanics[i].id.clone()));
        }
        Ok(self.fitness_unchecked(assignment))
    }

    fn fitness_unchecked(&self, assignment: &[RoomId]) -> FitnessBreakdown {
        let mut b = FitnessBreakdown::default();
        for (i, m) in self.mechanics.iter().enumerate() {
            let ti = f64::from(self.room_tau[assignment[i]]);
            b.term2 += self.c_std[i][assignment[i]];
            for rule in &m.rules {
                let tj = self.target_tau(rule.target, assignment);
                match rule.kind {
                    TopoKind::Precedes => {
                        let v = (ti - tj).max(0.0);
                        b.term1 += rule.scale * v * v;
                    }
                    TopoKind::TopologicalNear => {
                        let d_max = f64::from(rule.threshold.unwrap_or(self.d_max));
                        let v = ((ti - tj).abs() - d_max).max(0.0);
                        b.term3 += rule.scale * v * v;
                    }
                    TopoKind::TopologicalFar => {
                        let d_min = f64::from(rule.threshold.unwrap_or(self.d_min));
                        let v = (d_min - (ti - tj).abs()).max(0.0);
                        b.term4 += rule.scale * v * v;
                    }
                }
            }
        }
        b.total = self.w1 * b.term1 + self.w2 * b.term2 + self.w3 * b.term3 + self.w4 * b.term4;
        b
    }

    fn movable(&self) -> Vec<usize> {
        self.mechanics
            .iter()
            .enumerate()
            .filter(|(_, m)| m.pinned.is_none() && !m.candidates.is_empty())
            .map(|(i, _)| i)
            .collect()
    }

    fn check(&self) -> Result<(), MechanicsError> {
        if self.room_tau.is_empty() {
            return Err(MechanicsError::NoRooms);
        }
        for m in &self.mechanics {
            if m.pinned.is_none() && m.candidates.is_empty() {
                return Err(MechanicsError::UnboundMechanic(m.id.clone()));
            }
        }
        Ok(())
    }

    pub fn random_assignment(&self, rng: &mut StageRng) -> Vec<RoomId> {
        self.mechanics
            .iter()
            .map(|m| m.pinned.unwrap_or_else(|| m.candidates[rng.random_range(0..m.candidates.len())]))
            .collect()
    }
}

/// Annealing over discrete assignments: each move sends one unpinned
/// mechanic to a uniformly chosen candidate room.
pub fn assign_mechanics(
    problem: &AssignmentProblem,
    sa: &SaParams,
    rng: &mut StageRng,
) -> Result<MechanicAssignment, MechanicsError> {
    problem.check()?;
    let init = problem.random_assignment(rng);
    let movable = problem.movable();
    if movable.is_empty() {
        let fitness = problem.fitness_unchecked(&init);
        return Ok(MechanicAssignment { rooms: init, fitness });
    }
    let out = anneal(
        init,
        sa,
        rng,
        false,
        |a| problem.fitness_unchecked(a).total,
        |a, r| {
            let mut next = a.clone();
            let i = movable[r.random_range(0..movable.len())];
            let c = &problem.mechanics[i].candidates;
            next[i] = c[r.random_range(0..c.len())];
            next
        },
    );
    let fitness = problem.fitness_unchecked(&out.best);
    Ok(MechanicAssignment { rooms: out.best, fitness })
}

/// Best of `restarts` annealing runs with independent streams.
pub fn assign_with_restarts(
    problem: &AssignmentProblem,
    sa: &SaParams,
    restarts: usize,
    seed: u64,
    exec: Execution,
) -> Result<MechanicAssignment, MechanicsError> {
    problem.check()?;
    let runs: Vec<u64> = (0..restarts.max(1) as u64).collect();
    let results = par::map(exec, &runs, |&k| assign_mechanics(problem, sa, &mut stream(seed, "assign-restart", k)));
    let mut best: Option<MechanicAssignment> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.fitness.total < b.fitness.total) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Candidate poses tried by greedy placement.
pub const PLACEMENT_POSITIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPose {
    pub pose: Pose,
    pub score: f64,
    pub overlaps: bool,
}

/// Scores `PLACEMENT_POSITIONS x 4` candidate poses by standard penalty plus
/// overlap with existing content and returns the best. Existing facilities
/// are not moved. Fails with `NoFreeSpace` when every candidate overlaps;
/// the best overlapping candidate is still reported in that case.
pub fn place_mechanic_in_room(
    mechanic: &MechanicInstance,
    room: &RoomContents,
    obstacles: &[Pose],
    weights: &WeightConfig,
    rng: &mut StageRng,
) -> (ScoredPose, Result<(), MechanicsError>) {
    let others = room.placed();
    let geo = &room.geometry;
    let mut best: Option<ScoredPose> = None;
    let mut any_free = false;
    for _ in 0..PLACEMENT_POSITIONS {
        let x = rng.random_range(0.0..=geo.width);
        let y = rng.random_range(0.0..=geo.length);
        for &yaw in &QUARTER_YAWS {
            let mut pose = Pose::on_floor(x, y, yaw, mechanic.dims);
            let (hx, hy) = pose.half_extents();
            pose.center[0] = pose.center[0].clamp(hx.min(geo.width - hx), hx.max(geo.width - hx));
            pose.center[1] = pose.center[1].clamp(hy.min(geo.length - hy), hy.max(geo.length - hy));
            let cons = total_constraint_penalty(&mechanic.standard_constraints, &pose, geo, &others, weights)
                .unwrap_or(0.0);
            let fp = pose.footprint();
            let mut overlap = eval_bounds_penalty(&pose, geo, weights.w_bounds);
            let mut overlaps = false;
            for o in others.iter().map(|o| &o.pose).chain(obstacles) {
                let p = eval_overlap_penalty(&pose, o, weights.w_overlap);
                overlaps |= fp.overlaps(&o.footprint());
                overlap += p;
            }
            for k in &room.keep_out {
                let d = fp.penetration_depth(k);
                overlaps |= fp.overlaps(k);
                overlap += weights.w_overlap * d * d;
            }
            any_free |= !overlaps;
            let cand = ScoredPose { pose, score: cons + overlap, overlaps };
            let better = match &best {
                None => true,
                Some(b) => (cand.overlaps, cand.score) < (b.overlaps, b.score),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let best = best.expect("candidates sampled");
    let status = if any_free { Ok(()) } else { Err(MechanicsError::NoFreeSpace(mechanic.id.clone())) };
    (best, status)
}

/// Parameterization of the database-driven key set-ups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DbGroup {
    Baseline,
    Exploration,
    Speedrun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupParams {
    pub baseline_d_max: u32,
    pub speedrun_d_max: u32,
    pub exploration_keys: usize,
    pub exploration_d_min: u32,
}

impl Default for GroupParams {
    fn default() -> Self {
        Self { baseline_d_max: 4, speedrun_d_max: 0, exploration_keys: 3, exploration_d_min: 3 }
    }
}

pub const FLOOR_KEY: &str = "FloorKey";
pub const KEY_FRAGMENT: &str = "KeyFragment";

fn key_def(db: &Database, name: &str) -> MechanicDef {
    db.mechanic(name).cloned().unwrap_or_else(|| MechanicDef {
        name: name.to_owned(),
        dimensions: Dimensions::new(0.3, 0.3, 0.3),
        standard_constraints: Vec::new(),
        topo_constraints: Vec::new(),
        tags: vec!["key".into()],
    })
}

/// Keys for one floor. `offset` is the index the first returned mechanic will
/// have in the assignment problem, so rules between keys can refer to each
/// other.
pub fn db_group_mechanics(
    group: DbGroup,
    skeleton: &LevelSkeleton,
    floor: usize,
    db: &Database,
    params: &GroupParams,
    weights: &WeightConfig,
    offset: usize,
) -> Vec<MechanicInstance> {
    let rooms: Vec<_> = skeleton.rooms_on_floor(floor).collect();
    let Some(first) = rooms.iter().min_by_key(|r| r.tau) else { return Vec::new() };
    let last = rooms.iter().max_by_key(|r| r.tau).expect("non-empty");
    let candidates: Vec<RoomId> = rooms.iter().map(|r| r.id).collect();
    match group {
        DbGroup::Baseline | DbGroup::Speedrun => {
            let def = key_def(db, FLOOR_KEY);
            let mut m = MechanicInstance::from_def(format!("f{floor}:{FLOOR_KEY}#0"), &def, candidates);
            let rule = if group == DbGroup::Baseline {
                let mid = f64::from(first.tau + last.tau) * 0.5;
                TopoRule::new(TopoKind::TopologicalNear, TopoTarget::Tau(mid), Some(params.baseline_d_max))
            } else {
                TopoRule::new(TopoKind::TopologicalNear, TopoTarget::Room(first.id), Some(params.speedrun_d_max))
            };
            m.rules.push(rule);
            vec![m]
        }
        DbGroup::Exploration => {
            let def = key_def(db, KEY_FRAGMENT);
            let n = params.exploration_keys;
            (0..n)
                .map(|k| {
                    let mut m = MechanicInstance::from_def(
                        format!("f{floor}:{KEY_FRAGMENT}#{k}"),
                        &def,
                        candidates.clone(),
                    );
                    m.rules.push(TopoRule::new(TopoKind::Precedes, TopoTarget::Room(last.id), None));
                    for j in k + 1..n {
                        m.rules.push(TopoRule {
                            kind: TopoKind::TopologicalFar,
                            target: TopoTarget::Mechanic(offset + j),
                            threshold: Some(params.exploration_d_min),
                            scale: weights.strong_far_scale,
                        });
                    }
                    m
                })
                .collect()
        }
    }
}

/// Instances of database mechanics with their own topological rules. Every
/// rule targets the first instance of the named mechanic.
pub fn db_mechanic_instances(
    db: &Database,
    selected: &[(String, u32)],
    candidates: &[RoomId],
    weights: &WeightConfig,
    offset: usize,
) -> Vec<MechanicInstance> {
    let mut out: Vec<MechanicInstance> = Vec::new();
    let mut first_index = std::collections::BTreeMap::new();
    for (name, count) in selected {
        let Some(def) = db.mechanic(name) else { continue };
        for k in 0..*count {
            first_index.entry(name.clone()).or_insert(offset + out.len());
            out.push(MechanicInstance::from_def(format!("{name}#{k}"), def, candidates.to_vec()));
        }
    }
    for m in &mut out {
        let def = db.mechanic(&m.mechanic).expect("selected above");
        for t in &def.topo_constraints {
            let Some(&j) = first_index.get(&t.other) else { continue };
            let default_w = match t.kind {
                TopoKind::Precedes => weights.w1,
                TopoKind::TopologicalNear => weights.w3,
                TopoKind::TopologicalFar => weights.w4,
            };
            let scale = match t.weight {
                Some(w) if default_w > 0.0 => w / default_w,
                _ => 1.0,
            };
            m.rules.push(TopoRule { kind: t.kind, target: TopoTarget::Mechanic(j), threshold: t.threshold, scale });
        }
    }
    out
}
