//! Two-phase navigability repair.
//!
//! Phase one flood-fills every room from its doorways and moves adaptable
//! facilities that cut doorways off from each other. Phase two walks the
//! rooms in `tau` order; a blocker on the way is first repositioned and
//! removed if it obstructs again.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::agent::{path_time, AgentParams};
use super::astar::{astar_path, Passability};
use super::grid::{CellId, NavGrid, NEIGHBORS};
use crate::geometry::{normalize_yaw, Pose, Rect};
use crate::level::{Level, RoomId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepairStatus {
    Repaired,
    Unrepairable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub phase1_moves: u32,
    pub phase2_moves: u32,
    pub facilities_removed: u32,
    pub removed_ids: Vec<String>,
    pub repair_time: f64,
    pub status: RepairStatus,
}

impl Default for RepairReport {
    fn default() -> Self {
        Self {
            phase1_moves: 0,
            phase2_moves: 0,
            facilities_removed: 0,
            removed_ids: Vec::new(),
            repair_time: 0.0,
            status: RepairStatus::Repaired,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloodReport {
    /// Cells reached from each doorway of the room.
    pub regions: Vec<BTreeSet<CellId>>,
    /// Doorways whose region misses some other doorway.
    pub blocked: Vec<usize>,
}

/// 4-connected flood fill inside one room from each of its doorways.
pub fn flood_fill_room(room: RoomId, g: &NavGrid) -> FloodReport {
    let doorways = &g.doorways[room];
    let mut label = std::collections::HashMap::new();
    let mut components: Vec<BTreeSet<CellId>> = Vec::new();
    for w in doorways {
        for &start in &w.cells {
            if !g.passable(start) || label.contains_key(&start) {
                continue;
            }
            let id = components.len();
            let mut comp = BTreeSet::from([start]);
            label.insert(start, id);
            let mut stack = vec![start];
            while let Some(c) = stack.pop() {
                for (n, dir) in g.neighbors(c) {
                    if dir.is_none() || g.room[n] != Some(room) || !g.passable(n) || label.contains_key(&n) {
                        continue;
                    }
                    label.insert(n, id);
                    comp.insert(n);
                    stack.push(n);
                }
            }
            components.push(comp);
        }
    }
    let touched: Vec<BTreeSet<usize>> = doorways
        .iter()
        .map(|w| w.cells.iter().filter_map(|c| label.get(c).copied()).collect())
        .collect();
    let regions = touched
        .iter()
        .map(|t| t.iter().flat_map(|&i| components[i].iter().copied()).collect())
        .collect();
    let blocked = (0..doorways.len())
        .filter(|&d| (0..doorways.len()).any(|e| e != d && touched[d].is_disjoint(&touched[e])))
        .collect();
    FloodReport { regions, blocked }
}

/// Working state shared by both phases.
struct Session<'a> {
    level: &'a mut Level,
    grid: &'a mut NavGrid,
    removed: Vec<bool>,
}

/// Integer offsets ordered by distance from the origin, origin excluded.
fn spiral(radius: i64) -> Vec<(i64, i64)> {
    let mut v: Vec<(i64, i64)> = (-radius..=radius)
        .flat_map(|dx| (-radius..=radius).map(move |dy| (dx, dy)))
        .filter(|&o| o != (0, 0))
        .collect();
    v.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    v
}

pub const REPOSITION_RADIUS: i64 = 6;

impl Session<'_> {
    fn doorway_cells(&self, room: RoomId) -> BTreeSet<CellId> {
        self.grid.doorways[room].iter().flat_map(|w| w.cells.iter().copied()).collect()
    }

    fn pose_is_clear(&self, f: usize, pose: &Pose) -> bool {
        let fac = &self.level.facilities[f];
        let room = &self.level.skeleton.rooms[fac.room];
        // Inside the wall ring, where cells are walkable.
        let bounds = Rect::new(1.0, 1.0, room.dims.width - 1.0, room.dims.length - 1.0);
        let fp = pose.footprint();
        if !fp.within(&bounds) {
            return false;
        }
        self.level.facilities.iter().enumerate().all(|(o, other)| {
            o == f || self.removed[o] || other.room != fac.room || !fp.overlaps(&other.pose.footprint())
        })
    }

    /// Moves facility `f` to the nearest clear pose accepted by `accept`.
    fn reposition(&mut self, f: usize, accept: &dyn Fn(&NavGrid) -> bool) -> bool {
        let original = self.level.facilities[f].pose;
        let room_id = self.level.facilities[f].room;
        let (origin, floor) = {
            let r = &self.level.skeleton.rooms[room_id];
            (r.origin, r.floor)
        };
        let reserved = self.doorway_cells(room_id);
        let offsets = spiral(REPOSITION_RADIUS);
        let yaws = [original.yaw, normalize_yaw(original.yaw + std::f64::consts::FRAC_PI_2)];
        for (k, &yaw) in yaws.iter().enumerate() {
            let shifts = if k == 0 { offsets.clone() } else { [vec![(0, 0)], offsets.clone()].concat() };
            for (dx, dy) in shifts {
                let mut pose = original;
                pose.yaw = yaw;
                pose.center[0] += dx as f64;
                pose.center[1] += dy as f64;
                if !self.pose_is_clear(f, &pose) {
                    continue;
                }
                self.grid.occupy(f, &pose, origin, floor);
                let ok = self.grid.facility_cells[f].iter().all(|c| !reserved.contains(c)) && accept(self.grid);
                if ok {
                    self.level.facilities[f].pose = pose;
                    return true;
                }
            }
        }
        self.grid.occupy(f, &original, origin, floor);
        false
    }

    fn remove(&mut self, f: usize) {
        self.grid.vacate(f);
        self.removed[f] = true;
    }

    fn finish(self, report: &mut RepairReport) {
        let removed = self.removed;
        let mut idx = 0;
        report.removed_ids = self
            .level
            .facilities
            .iter()
            .zip(&removed)
            .filter(|(_, r)| **r)
            .map(|(f, _)| f.id.clone())
            .collect();
        self.level.facilities.retain(|_| {
            let keep = !removed[idx];
            idx += 1;
            keep
        });
    }
}

/// Adaptable facilities of `room` touching a blocked doorway's region or
/// standing on a doorway cell, smallest footprint first.
fn blocking_candidates(s: &Session<'_>, room: RoomId, report: &FloodReport) -> Vec<usize> {
    let g = &*s.grid;
    let mut zone: BTreeSet<CellId> = BTreeSet::new();
    for &d in &report.blocked {
        zone.extend(report.regions[d].iter().copied());
        zone.extend(g.doorways[room][d].cells.iter().copied());
    }
    let near = |c: CellId| {
        if zone.contains(&c) {
            return true;
        }
        let (i, j, f) = g.coords(c);
        NEIGHBORS.iter().any(|(dx, dy)| {
            let (ni, nj) = (i as i64 + dx, j as i64 + dy);
            ni >= 0
                && nj >= 0
                && (ni as usize) < g.width
                && (nj as usize) < g.length
                && zone.contains(&g.id(ni as usize, nj as usize, f))
        })
    };
    let mut out: Vec<usize> = (0..s.level.facilities.len())
        .filter(|&f| {
            !s.removed[f]
                && g.facility_adaptable[f]
                && s.level.facilities[f].room == room
                && g.facility_cells[f].iter().any(|&c| near(c))
        })
        .collect();
    out.sort_by(|&a, &b| {
        let aa = s.level.facilities[a].pose.dims.footprint_area();
        let ab = s.level.facilities[b].pose.dims.footprint_area();
        aa.total_cmp(&ab).then(a.cmp(&b))
    });
    out
}

/// Phase one. Modifies facility poses in `level` and `grid` in place.
pub fn geometric_repair(level: &mut Level, grid: &mut NavGrid) -> RepairReport {
    let n = level.facilities.len();
    let mut s = Session { level, grid, removed: vec![false; n] };
    let mut report = RepairReport::default();
    for room in 0..s.level.skeleton.rooms.len() {
        let budget = 4 * (1 + s.level.facilities_in(room).count());
        for _ in 0..budget {
            let before = flood_fill_room(room, s.grid);
            if before.blocked.is_empty() {
                break;
            }
            let old: BTreeSet<usize> = before.blocked.iter().copied().collect();
            let mut moved = false;
            for f in blocking_candidates(&s, room, &before) {
                let accept = |g: &NavGrid| {
                    let after = flood_fill_room(room, g);
                    after.blocked.len() < old.len() && after.blocked.iter().all(|d| old.contains(d))
                };
                if s.reposition(f, &accept) {
                    report.phase1_moves += 1;
                    moved = true;
                    break;
                }
            }
            if !moved {
                break;
            }
        }
    }
    s.finish(&mut report);
    report
}

/// Phase two: agent walks from each room to the next in `tau` order.
/// Removed facilities are dropped from `level`; the grid stays consistent.
pub fn agent_repair(level: &mut Level, grid: &mut NavGrid, agent: &AgentParams) -> RepairReport {
    let n = level.facilities.len();
    let mut order: Vec<RoomId> = level.skeleton.rooms.iter().map(|r| r.id).collect();
    order.sort_by_key(|&r| level.skeleton.rooms[r].tau);
    let mut s = Session { level, grid, removed: vec![false; n] };
    let mut report = RepairReport::default();
    let mut repositioned = vec![false; n];
    let mut elapsed = 0.0;
    let mut failed = false;
    'legs: for w in order.windows(2) {
        let (Some(from), Some(to)) = (s.grid.anchors[w[0]], s.grid.anchors[w[1]]) else {
            failed = true;
            break;
        };
        loop {
            let strict = astar_path(s.grid, from, to, Passability::Strict);
            let relaxed = astar_path(s.grid, from, to, Passability::IgnoreAdaptable);
            let Some(relaxed) = relaxed else {
                failed = true;
                break 'legs;
            };
            let relaxed_time = path_time(s.grid, &relaxed, agent);
            if let Some(p) = &strict {
                let t = path_time(s.grid, p, agent);
                let detour = t > agent.room_timeout && relaxed_time <= agent.room_timeout && relaxed_time < t;
                if !detour {
                    elapsed += t;
                    break;
                }
            }
            elapsed += agent.room_timeout;
            if elapsed > agent.total_budget {
                failed = true;
                break 'legs;
            }
            let Some(f) = relaxed.iter().find_map(|&c| s.grid.occupants[c].first().copied()) else {
                failed = true;
                break 'legs;
            };
            let path_cells: BTreeSet<CellId> = relaxed.iter().copied().collect();
            let room = s.level.facilities[f].room;
            let old: BTreeSet<usize> = flood_fill_room(room, s.grid).blocked.into_iter().collect();
            let accept = |g: &NavGrid| {
                g.facility_cells[f].iter().all(|c| !path_cells.contains(c))
                    && flood_fill_room(room, g).blocked.iter().all(|d| old.contains(d))
            };
            if !repositioned[f] && s.reposition(f, &accept) {
                repositioned[f] = true;
                report.phase2_moves += 1;
            } else {
                s.remove(f);
                report.facilities_removed += 1;
            }
        }
    }
    report.repair_time = elapsed;
    if failed || elapsed > agent.total_budget {
        report.status = RepairStatus::Unrepairable;
    }
    s.finish(&mut report);
    report
}
