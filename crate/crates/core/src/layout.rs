//! Per-room facility layout by simulated annealing.
//!
//! The objective is `alpha * P_local + beta * C + gamma * S`: constraint and
//! collision penalties, a pairwise crowding term and the worst-case distance
//! from a unit grid of test points to the nearest facility.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{anneal, SaParams, TraceRow};
use crate::constraints::{
    eval_overlap_penalty, eval_bounds_penalty, total_constraint_penalty, ConstraintSpec,
    PlacedFacility, RoomGeometry, WeightConfig,
};
use crate::database::{Database, Positioning, RoomTemplate};
use crate::geometry::{dist2, footprint_half_extents, normalize_yaw, Dimensions, Pose, Rect, QUARTER_YAWS};
use crate::level::{FacilityInstance, RoomId, RoomInstance};
use crate::par::{self, Execution};
use crate::rng::{stream, StageRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("facility {0} does not fit inside its room")]
    InfeasibleRoom(String),
    #[error("room has no adaptable facilities")]
    NoAdaptableFacilities,
    #[error("unknown facility {0:?}")]
    UnknownFacility(String),
}

/// One facility instance to be laid out.
#[derive(Debug, Clone, PartialEq)]
pub struct FacilitySlot {
    pub id: String,
    pub def: String,
    pub dims: Dimensions,
    pub positioning: Positioning,
    pub constraints: Vec<ConstraintSpec>,
    /// Template pose of a fixed facility.
    pub fixed_pose: Option<Pose>,
}

impl FacilitySlot {
    pub fn is_adaptable(&self) -> bool {
        self.positioning == Positioning::Adaptable
    }
}

/// A room and the facilities that go in it.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutProblem {
    pub room: RoomId,
    pub geometry: RoomGeometry,
    pub slots: Vec<FacilitySlot>,
    /// Local areas that must stay clear, such as stair cells.
    pub keep_out: Vec<Rect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub p_local: f64,
    pub c: f64,
    pub s: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomLayout {
    pub room: RoomId,
    /// Poses in slot order.
    pub poses: Vec<Pose>,
    pub breakdown: ObjectiveBreakdown,
    pub initial: ObjectiveBreakdown,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Translate,
    Rotate,
}

impl LayoutProblem {
    /// Instantiates the template's characteristic facilities for `room`.
    pub fn from_template(
        room: &RoomInstance,
        template: &RoomTemplate,
        db: &Database,
        keep_out: Vec<Rect>,
        entrances: Vec<[f64; 2]>,
    ) -> Result<Self, LayoutError> {
        let mut slots = Vec::new();
        for cf in &template.characteristic_facilities {
            let def = db
                .facility(&cf.facility)
                .ok_or_else(|| LayoutError::UnknownFacility(cf.facility.clone()))?;
            for k in 0..cf.count as usize {
                let fixed_pose = match def.positioning {
                    Positioning::Fixed => cf
                        .positions
                        .get(k)
                        .map(|p| Pose::on_floor(p.x, p.y, p.yaw_deg.to_radians(), def.dimensions)),
                    Positioning::Adaptable => None,
                };
                slots.push(FacilitySlot {
                    id: format!("{}:{}#{k}", room.id, def.name),
                    def: def.name.clone(),
                    dims: def.dimensions,
                    positioning: if fixed_pose.is_some() { Positioning::Fixed } else { Positioning::Adaptable },
                    constraints: def.constraints.clone(),
                    fixed_pose,
                });
            }
        }
        Ok(Self {
            room: room.id,
            geometry: RoomGeometry {
                width: room.dims.width,
                length: room.dims.length,
                height: room.dims.height,
                entrances,
            },
            slots,
            keep_out,
        })
    }

    pub fn adaptable(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().enumerate().filter(|(_, s)| s.is_adaptable()).map(|(i, _)| i)
    }

    /// Quarter yaws at which the slot's footprint fits inside the room.
    fn feasible_yaws(&self, slot: usize) -> Vec<f64> {
        QUARTER_YAWS
            .iter()
            .copied()
            .filter(|&y| fits_at(self.slots[slot].dims, y, &self.geometry))
            .collect()
    }

    pub fn check_feasible(&self) -> Result<(), LayoutError> {
        for (i, s) in self.slots.iter().enumerate() {
            if s.is_adaptable() && self.feasible_yaws(i).is_empty() {
                return Err(LayoutError::InfeasibleRoom(s.id.clone()));
            }
        }
        Ok(())
    }

    /// Uniform random in-bounds pose for every adaptable slot.
    pub fn random_layout(&self, rng: &mut StageRng) -> Result<Vec<Pose>, LayoutError> {
        self.check_feasible()?;
        Ok(self
            .slots
            .iter()
            .enumerate()
            .map(|(i, s)| match s.fixed_pose {
                Some(p) => p,
                None => {
                    let yaws = self.feasible_yaws(i);
                    let yaw = yaws[rng.random_range(0..yaws.len())];
                    let (hx, hy) = footprint_half_extents(s.dims, yaw);
                    let x = sample_between(rng, hx, self.geometry.width - hx);
                    let y = sample_between(rng, hy, self.geometry.length - hy);
                    Pose::on_floor(x, y, yaw, s.dims)
                }
            })
            .collect())
    }

    pub fn to_instances(&self, poses: &[Pose]) -> Vec<FacilityInstance> {
        self.slots
            .iter()
            .zip(poses)
            .map(|(s, p)| FacilityInstance {
                id: s.id.clone(),
                def: s.def.clone(),
                room: self.room,
                pose: *p,
                positioning: s.positioning,
            })
            .collect()
    }
}

fn sample_between(rng: &mut StageRng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        (lo + hi) * 0.5
    }
}

fn fits_at(dims: Dimensions, yaw: f64, room: &RoomGeometry) -> bool {
    let (hx, hy) = footprint_half_extents(dims, yaw);
    2.0 * hx <= room.width + 1e-9 && 2.0 * hy <= room.length + 1e-9
}

/// Test points of the sparsity term: integer offsets strictly inside the room.
pub fn sparsity_grid(room: &RoomGeometry) -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    let mut x = 1.0;
    while x < room.width - 1e-9 {
        let mut y = 1.0;
        while y < room.length - 1e-9 {
            pts.push([x, y]);
            y += 1.0;
        }
        x += 1.0;
    }
    pts
}

/// Evaluates the layout objective for `poses`, given in slot order.
pub fn objective(problem: &LayoutProblem, poses: &[Pose], weights: &WeightConfig) -> ObjectiveBreakdown {
    objective_with_grid(problem, poses, weights, &sparsity_grid(&problem.geometry))
}

fn objective_with_grid(
    problem: &LayoutProblem,
    poses: &[Pose],
    weights: &WeightConfig,
    grid: &[[f64; 2]],
) -> ObjectiveBreakdown {
    let n = poses.len();
    let mut p_local = 0.0;
    let mut others: Vec<PlacedFacility<'_>> = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        let mut overlap = eval_bounds_penalty(&poses[i], &problem.geometry, weights.w_bounds);
        for j in 0..n {
            if i != j {
                overlap += eval_overlap_penalty(&poses[i], &poses[j], weights.w_overlap);
            }
        }
        let fp = poses[i].footprint();
        for k in &problem.keep_out {
            let d = fp.penetration_depth(k);
            overlap += weights.w_overlap * d * d;
        }
        others.clear();
        others.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| PlacedFacility { name: &problem.slots[j].def, pose: poses[j] }),
        );
        let cons = total_constraint_penalty(
            &problem.slots[i].constraints,
            &poses[i],
            &problem.geometry,
            &others,
            weights,
        )
        .unwrap_or(0.0);
        p_local += overlap + cons;
    }
    let mut c = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            c += 1.0 / (poses[i].distance(&poses[j]) + weights.epsilon);
        }
    }
    let s = if n == 0 {
        0.0
    } else {
        grid.iter()
            .map(|g| poses.iter().map(|p| dist2(*g, p.planar())).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let total = weights.alpha * p_local + weights.beta * c + weights.gamma * s;
    ObjectiveBreakdown { p_local, c, s, total }
}

/// Moves the center so the footprint lies inside the room.
fn clamp_into(pose: &mut Pose, room: &RoomGeometry) {
    let (hx, hy) = pose.half_extents();
    pose.center[0] = pose.center[0].clamp(hx.min(room.width - hx), hx.max(room.width - hx));
    pose.center[1] = pose.center[1].clamp(hy.min(room.length - hy), hy.max(room.length - hy));
}

/// Modifies exactly one adaptable facility: a Gaussian translation or a
/// quarter turn. Turns that would not fit become translations.
pub fn perturb(
    problem: &LayoutProblem,
    poses: &[Pose],
    sa: &SaParams,
    rng: &mut StageRng,
) -> Result<(Vec<Pose>, MoveKind), LayoutError> {
    let movable: Vec<usize> = problem.adaptable().collect();
    if movable.is_empty() {
        return Err(LayoutError::NoAdaptableFacilities);
    }
    let i = movable[rng.random_range(0..movable.len())];
    let mut out = poses.to_vec();
    let room = &problem.geometry;
    let translate = rng.random::<f64>() < sa.translate_probability;
    let mut kind = MoveKind::Translate;
    if !translate {
        let q = (out[i].yaw / FRAC_PI_2).round();
        let yaw = normalize_yaw((q + 1.0) * FRAC_PI_2);
        if fits_at(out[i].dims, yaw, room) {
            out[i].yaw = yaw;
            kind = MoveKind::Rotate;
        }
    }
    if kind == MoveKind::Translate {
        let sigma = sa.step_fraction * room.width.hypot(room.length);
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("finite deviation");
            out[i].center[0] += normal.sample(rng);
            out[i].center[1] += normal.sample(rng);
        }
    }
    clamp_into(&mut out[i], room);
    Ok((out, kind))
}

/// Anneals from `initial`. Without adaptable facilities the layout is
/// returned as is.
pub fn anneal_layout(
    problem: &LayoutProblem,
    initial: Vec<Pose>,
    weights: &WeightConfig,
    sa: &SaParams,
    rng: &mut StageRng,
    record_trace: bool,
) -> RoomLayout {
    let grid = sparsity_grid(&problem.geometry);
    let eval = |p: &Vec<Pose>| objective_with_grid(problem, p, weights, &grid);
    let init_b = eval(&initial);
    if problem.adaptable().next().is_none() {
        return RoomLayout { room: problem.room, poses: initial, breakdown: init_b, initial: init_b, trace: Vec::new() };
    }
    let out = anneal(
        initial,
        sa,
        rng,
        record_trace,
        |p| eval(p).total,
        |p, r| perturb(problem, p, sa, r).expect("movable facility exists").0,
    );
    let breakdown = eval(&out.best);
    RoomLayout { room: problem.room, poses: out.best, breakdown, initial: init_b, trace: out.trace }
}

/// Random initial layout followed by annealing.
pub fn optimize_room_layout(
    problem: &LayoutProblem,
    weights: &WeightConfig,
    sa: &SaParams,
    rng: &mut StageRng,
) -> Result<RoomLayout, LayoutError> {
    let initial = problem.random_layout(rng)?;
    Ok(anneal_layout(problem, initial, weights, sa, rng, false))
}

/// Best of `restarts` independent runs; run `k` draws from stream `(seed, k)`.
pub fn optimize_with_restarts(
    problem: &LayoutProblem,
    weights: &WeightConfig,
    sa: &SaParams,
    restarts: usize,
    seed: u64,
    exec: Execution,
) -> Result<RoomLayout, LayoutError> {
    problem.check_feasible()?;
    let runs: Vec<usize> = (0..restarts.max(1)).collect();
    let results = par::map(exec, &runs, |&k| {
        let mut rng = stream(seed, "layout-restart", k as u64);
        optimize_room_layout(problem, weights, sa, &mut rng)
    });
    let mut best: Option<RoomLayout> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.breakdown.total < b.breakdown.total) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one run"))
}

/// Annealing trace as CSV with columns `iteration,temperature,objective,best`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "temperature", "objective", "best"]).expect("in-memory write");
    for row in trace {
        w.write_record([
            row.iteration.to_string(),
            row.temperature.to_string(),
            row.current.to_string(),
            row.best.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
