//! Simulated agent traversal: timing, rerun validation and key collection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::astar::{astar_path, reachable, Passability};
use super::grid::{CellId, CellKind, NavGrid};
use crate::level::{Level, RoomId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    /// Units per second.
    pub speed: f64,
    /// Degrees per second.
    pub angular_speed: f64,
    pub radius: f64,
    pub room_timeout: f64,
    pub total_budget: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self { speed: 10.0, angular_speed: 100.0, radius: 1.0, room_timeout: 10.0, total_budget: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("room {0} cannot be reached")]
    UnreachableRoom(RoomId),
    #[error("key {0} cannot be reached")]
    UnreachableKey(String),
}

/// Travel distance and turning of a cell path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathStats {
    pub length: f64,
    pub turn_degrees: f64,
}

pub fn path_stats(g: &NavGrid, path: &[CellId]) -> PathStats {
    let mut s = PathStats::default();
    let mut heading: Option<(i64, i64)> = None;
    for w in path.windows(2) {
        let (ai, aj, af) = g.coords(w[0]);
        let (bi, bj, bf) = g.coords(w[1]);
        if af != bf {
            s.length += g.floor_height * af.abs_diff(bf) as f64;
            continue;
        }
        s.length += 1.0;
        let d = (bi as i64 - ai as i64, bj as i64 - aj as i64);
        if let Some(h) = heading {
            if h != d {
                s.turn_degrees += if h.0 == -d.0 && h.1 == -d.1 { 180.0 } else { 90.0 };
            }
        }
        heading = Some(d);
    }
    s
}

/// `length / speed + turning / angular_speed`.
pub fn traversal_time(stats: PathStats, agent: &AgentParams) -> f64 {
    stats.length / agent.speed + stats.turn_degrees / agent.angular_speed
}

pub fn path_time(g: &NavGrid, path: &[CellId], agent: &AgentParams) -> f64 {
    traversal_time(path_stats(g, path), agent)
}

/// Unique cells within one cell of any path cell on the same floor,
/// excluding void.
pub fn swept_cells(g: &NavGrid, paths: &[Vec<CellId>]) -> BTreeSet<CellId> {
    let mut out = BTreeSet::new();
    for p in paths {
        for &c in p {
            let (i, j, f) = g.coords(c);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni as usize >= g.width || nj as usize >= g.length {
                        continue;
                    }
                    let n = g.id(ni as usize, nj as usize, f);
                    if g.kind[n] != CellKind::Void {
                        out.insert(n);
                    }
                }
            }
        }
    }
    out
}

fn rooms_by_tau(level: &Level) -> Vec<RoomId> {
    let mut ids: Vec<RoomId> = level.skeleton.rooms.iter().map(|r| r.id).collect();
    ids.sort_by_key(|&r| level.skeleton.rooms[r].tau);
    ids
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerunResult {
    pub rerun_time: f64,
    pub grid_cells: usize,
    pub abnormal: bool,
    pub legs: Vec<Vec<CellId>>,
}

/// Walks room anchors in `tau` order.
pub fn rerun_validation(level: &Level, g: &NavGrid, agent: &AgentParams) -> Result<RerunResult, SimError> {
    let order = rooms_by_tau(level);
    let mut legs = Vec::new();
    let mut time = 0.0;
    let Some(&first) = order.first() else {
        return Ok(RerunResult { rerun_time: 0.0, grid_cells: 0, abnormal: false, legs });
    };
    let mut at = g.anchors[first].ok_or(SimError::UnreachableRoom(first))?;
    if !g.passable(at) {
        return Err(SimError::UnreachableRoom(first));
    }
    legs.push(vec![at]);
    for &r in &order[1..] {
        let to = g.anchors[r].ok_or(SimError::UnreachableRoom(r))?;
        let path = astar_path(g, at, to, Passability::Strict).ok_or(SimError::UnreachableRoom(r))?;
        time += path_time(g, &path, agent);
        legs.push(path);
        at = to;
    }
    let grid_cells = swept_cells(g, &legs).len();
    Ok(RerunResult { rerun_time: time, grid_cells, abnormal: time > agent.total_budget, legs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveRun {
    pub simulation_time: f64,
    pub sim_grid_cells: usize,
    pub legs: Vec<Vec<CellId>>,
}

/// Start room, then every key in ascending `tau` of its room, then the last
/// room. Each key is approached at the reachable cell nearest to it.
pub fn simulate_objectives(
    level: &Level,
    g: &NavGrid,
    keys: &[usize],
    agent: &AgentParams,
) -> Result<ObjectiveRun, SimError> {
    let order = rooms_by_tau(level);
    let (Some(&first), Some(&last)) = (order.first(), order.last()) else {
        return Ok(ObjectiveRun { simulation_time: 0.0, sim_grid_cells: 0, legs: Vec::new() });
    };
    let start = g.anchors[first].filter(|&c| g.passable(c)).ok_or(SimError::UnreachableRoom(first))?;
    let reach = reachable(g, start);
    let mut ordered: Vec<usize> = keys.to_vec();
    ordered.sort_by_key(|&k| (level.skeleton.rooms[level.mechanics[k].room].tau, k));
    let mut targets = Vec::new();
    for k in ordered {
        let m = &level.mechanics[k];
        let room = &level.skeleton.rooms[m.room];
        let world = room.to_world(m.pose.planar());
        let cell = g
            .room_cells(m.room)
            .filter(|&c| reach[c])
            .min_by(|&a, &b| {
                let da = crate::geometry::dist2(g.center(a), world);
                let db = crate::geometry::dist2(g.center(b), world);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .ok_or_else(|| SimError::UnreachableKey(m.id.clone()))?;
        targets.push(cell);
    }
    let end = g.anchors[last].filter(|&c| reach[c]).ok_or(SimError::UnreachableRoom(last))?;
    targets.push(end);
    let mut legs = vec![vec![start]];
    let mut time = 0.0;
    let mut at = start;
    for t in targets {
        let path = astar_path(g, at, t, Passability::Strict).expect("target is reachable");
        time += path_time(g, &path, agent);
        legs.push(path);
        at = t;
    }
    let sim_grid_cells = swept_cells(g, &legs).len();
    Ok(ObjectiveRun { simulation_time: time, sim_grid_cells, legs })
}

/// JSON-lines dump of walked legs, one record per step with cumulative time.
pub fn path_trace_jsonl(g: &NavGrid, legs: &[Vec<CellId>], agent: &AgentParams) -> String {
    let mut out = String::new();
    let mut base = 0.0;
    for (leg, path) in legs.iter().enumerate() {
        let mut stats = PathStats::default();
        for (k, &c) in path.iter().enumerate() {
            if k > 0 {
                stats = path_stats(g, &path[..=k]);
            }
            let t = base + traversal_time(stats, agent);
            let (i, j, f) = g.coords(c);
            let rec = serde_json::json!({ "leg": leg, "i": i, "j": j, "floor": f, "time": t });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        base += traversal_time(stats, agent);
    }
    out
}
