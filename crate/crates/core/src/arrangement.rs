//! Multi-floor room arrangement by greedy depth-first expansion.
//!
//! Each floor grows from a seed room: rooms are popped from a stack and a
//! candidate is generated flush against each of their four walls. The room
//! created last on a floor receives the stair, and the next floor's seed room
//! is aligned on it.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::SaParams;
use crate::constraints::{eval_room_penalty, ArchType, RoomBox, RoomContext, Tier, WeightConfig};
use crate::database::{Database, Positioning, RoomTemplate};
use crate::geometry::{footprint_half_extents, Dimensions, Rect, SharedEdge, WallAxis, EPS, MIN_SHARED_WALL};
use crate::level::{Door, LevelSkeleton, OpenEdge, RoomId, RoomInstance, Stair};
use crate::rng::StageRng;

/// Global level parameters. Every stochastic choice derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelConfig {
    pub width: f64,
    pub length: f64,
    pub height: f64,
    pub floors: usize,
    /// Templates to use with an optional instance cap override. Empty means
    /// every template in the database.
    pub selected_templates: Vec<(String, Option<u32>)>,
    pub selected_mechanics: Vec<(String, u32)>,
    pub seed: u64,
    pub weights: WeightConfig,
    pub sa: SaParams,
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self {
            width: 50.0,
            length: 50.0,
            height: 30.0,
            floors: 3,
            selected_templates: Vec::new(),
            selected_mechanics: Vec::new(),
            seed: 0,
            weights: WeightConfig::default(),
            sa: SaParams::default(),
        }
    }
}

impl LevelConfig {
    pub fn is_valid(&self) -> bool {
        [self.width, self.length, self.height].iter().all(|v| v.is_finite() && *v > 0.0)
            && self.floors >= 1
            && self.weights.all_non_negative()
            && self.sa.is_valid()
    }

    pub fn floor_height(&self) -> f64 {
        self.height / self.floors as f64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArrangementError {
    #[error("invalid level configuration")]
    InvalidConfig,
    #[error("unknown room template {0:?}")]
    UnknownTemplate(String),
    #[error("arrangement failed: {0}")]
    ArrangementFailed(String),
    #[error("rooms on floor {0} cannot be connected through shared walls")]
    DisconnectedFloor(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
    Front,
    Back,
}

pub const DIRECTIONS: [Direction; 4] =
    [Direction::Left, Direction::Right, Direction::Front, Direction::Back];

/// A scored room proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub template: usize,
    pub origin: [f64; 2],
    pub penalty: f64,
}

/// Rooms placed so far plus per-template usage.
pub struct ArrangeState<'a> {
    pub config: &'a LevelConfig,
    pub db: &'a Database,
    pub templates: Vec<(&'a RoomTemplate, u32)>,
    pub usage: Vec<u32>,
    pub rooms: Vec<RoomInstance>,
    boxes: Vec<RoomBox>,
    entrance: [f64; 3],
}

impl<'a> ArrangeState<'a> {
    pub fn new(config: &'a LevelConfig, db: &'a Database) -> Result<Self, ArrangementError> {
        if !config.is_valid() {
            return Err(ArrangementError::InvalidConfig);
        }
        let templates = if config.selected_templates.is_empty() {
            db.rooms.iter().map(|t| (t, t.instance_cap())).collect()
        } else {
            config
                .selected_templates
                .iter()
                .map(|(name, cap)| {
                    let t = db
                        .room(name)
                        .ok_or_else(|| ArrangementError::UnknownTemplate(name.clone()))?;
                    Ok((t, cap.map_or(t.instance_cap(), |c| c.min(t.instance_cap()))))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let usage = vec![0; templates.len()];
        Ok(Self { config, db, templates, usage, rooms: Vec::new(), boxes: Vec::new(), entrance: [0.0; 3] })
    }

    fn bounds(&self) -> Rect {
        Rect::new(0.0, 0.0, self.config.width, self.config.length)
    }

    fn available(&self, t: usize) -> bool {
        self.usage[t] < self.templates[t].1
    }

    fn fits(&self, floor: usize, rect: &Rect) -> bool {
        rect.within(&self.bounds())
            && self.boxes.iter().all(|b| b.floor != floor || !b.rect.overlaps(rect))
    }

    /// Sum of the template's room-tier penalties at a candidate location.
    pub fn score(&self, t: usize, floor: usize, origin: [f64; 2]) -> f64 {
        let template = self.templates[t].0;
        let subject = RoomBox {
            template: template.name.clone(),
            floor,
            rect: Rect::from_origin(origin, template.dimensions.width, template.dimensions.length),
        };
        let ctx = RoomContext {
            level_width: self.config.width,
            level_length: self.config.length,
            floor_height: self.config.floor_height(),
            entrance: self.entrance,
            placed: &self.boxes,
        };
        template
            .room_constraints
            .iter()
            .filter(|c| c.kind.allowed_in(Tier::Room))
            .map(|c| eval_room_penalty(c, &subject, &ctx, &self.config.weights).unwrap_or(0.0))
            .sum()
    }

    /// Records a room; `tau` follows creation order starting at 1.
    pub fn place(&mut self, t: usize, floor: usize, origin: [f64; 2]) -> RoomId {
        let template = self.templates[t].0;
        let id = self.rooms.len();
        let room = RoomInstance {
            id,
            template: template.name.clone(),
            floor,
            origin,
            dims: Dimensions::new(
                template.dimensions.width,
                template.dimensions.length,
                self.config.floor_height(),
            ),
            tau: id as u32 + 1,
            arch_type: template.arch_type,
        };
        if id == 0 {
            self.entrance = room.as_box().center3(self.config.floor_height());
        }
        self.boxes.push(room.as_box());
        self.rooms.push(room);
        self.usage[t] += 1;
        id
    }

    /// Picks the lowest-penalty candidate. Ties go to the lexicographically
    /// smallest template name, then to a random offset of that template.
    fn choose(&self, cands: Vec<Candidate>, rng: &mut StageRng) -> Option<Candidate> {
        let best = cands.iter().map(|c| c.penalty).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return None;
        }
        let tol = 1e-9 * best.abs().max(1.0);
        let tied: Vec<&Candidate> = cands.iter().filter(|c| c.penalty <= best + tol).collect();
        let name = tied.iter().map(|c| self.templates[c.template].0.name.as_str()).min()?;
        let pool: Vec<&Candidate> = tied
            .into_iter()
            .filter(|c| self.templates[c.template].0.name == name)
            .collect();
        pool.choose(rng).map(|c| (*c).clone())
    }
}

/// Integer offsets along a wall of span `[lo, hi]` at which a room of extent
/// `size` shares at least the minimum wall length, clipped to `[0, limit]`.
fn flush_offsets(lo: f64, hi: f64, size: f64, limit: f64) -> Vec<f64> {
    let first = (lo - size + MIN_SHARED_WALL).max(0.0).ceil();
    let last = (hi - MIN_SHARED_WALL).min(limit - size).floor();
    let mut out = Vec::new();
    let mut v = first;
    while v <= last + EPS {
        out.push(v);
        v += 1.0;
    }
    out
}

/// Candidate room flush against `current` on side `direction`.
pub fn gen_candidate_room(
    state: &ArrangeState<'_>,
    current: &RoomInstance,
    direction: Direction,
    rng: &mut StageRng,
) -> Option<Candidate> {
    let cur = current.rect();
    let cur_fixed = state.db.room(&current.template).map(|t| fixed_footprints(t, state.db)).unwrap_or_default();
    let mut cands = Vec::new();
    for (t, (template, _)) in state.templates.iter().enumerate() {
        if !state.available(t) {
            continue;
        }
        let (w, l) = (template.dimensions.width, template.dimensions.length);
        let fixed = fixed_footprints(template, state.db);
        let both_open = current.arch_type == ArchType::Open && template.arch_type == ArchType::Open;
        let origins: Vec<[f64; 2]> = match direction {
            Direction::Left | Direction::Right => {
                let x = if direction == Direction::Left { cur.x0 - w } else { cur.x1 };
                flush_offsets(cur.y0, cur.y1, l, state.config.length)
                    .into_iter()
                    .map(|y| [x, y])
                    .collect()
            }
            Direction::Front | Direction::Back => {
                let y = if direction == Direction::Back { cur.y0 - l } else { cur.y1 };
                flush_offsets(cur.x0, cur.x1, w, state.config.width)
                    .into_iter()
                    .map(|x| [x, y])
                    .collect()
            }
        };
        for origin in origins {
            let rect = Rect::from_origin(origin, w, l);
            // The shared wall must be able to hold a door.
            let doorable = both_open
                || cur.shared_edge(&rect).is_some_and(|e| {
                    door_cell(&e, &|p| {
                        !cell_free_of(&cur_fixed, current.to_local(p))
                            || !cell_free_of(&fixed, [p[0] - origin[0], p[1] - origin[1]])
                    })
                    .is_some()
                });
            if doorable && state.fits(current.floor, &rect) {
                let penalty = state.score(t, current.floor, origin);
                cands.push(Candidate { template: t, origin, penalty });
            }
        }
    }
    state.choose(cands, rng)
}

/// Center of the door cell along `edge` nearest its middle such that no
/// door cell or cell just inside it is `blocked`. Corner cells never qualify.
fn door_cell(edge: &SharedEdge, blocked: &dyn Fn([f64; 2]) -> bool) -> Option<f64> {
    let mid = ((edge.from + edge.to) * 0.5).floor() + 0.5;
    let point = |along: f64, offset: f64| match edge.axis {
        WallAxis::X => [edge.coord + offset, along],
        WallAxis::Y => [along, edge.coord + offset],
    };
    let mut cells: Vec<f64> = ((edge.from + 1.0).ceil() as i64..=((edge.to - 2.0).floor() as i64))
        .map(|k| k as f64 + 0.5)
        .collect();
    cells.sort_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()).then(x.total_cmp(y)));
    cells.into_iter().find(|&c| [-1.5, -0.5, 0.5, 1.5].iter().all(|&o| !blocked(point(c, o))))
}

/// Local footprints of a template's fixed facilities.
fn fixed_footprints(template: &RoomTemplate, db: &Database) -> Vec<Rect> {
    let mut out = Vec::new();
    for cf in &template.characteristic_facilities {
        let Some(def) = db.facility(&cf.facility) else { continue };
        if def.positioning != Positioning::Fixed {
            continue;
        }
        for p in &cf.positions {
            let (hx, hy) = footprint_half_extents(def.dimensions, p.yaw_deg.to_radians());
            out.push(Rect::new(p.x - hx, p.y - hy, p.x + hx, p.y + hy));
        }
    }
    out
}

fn cell_free_of(rects: &[Rect], centre: [f64; 2]) -> bool {
    rects.iter().all(|r| !r.strictly_contains(centre))
}

/// Interior cell for the stair: the one nearest the room center that no fixed
/// facility covers.
fn stair_cell(room: &RoomInstance, template: &RoomTemplate, db: &Database) -> Option<[f64; 2]> {
    let fixed = fixed_footprints(template, db);
    let c = room.center();
    let (w, l) = (room.dims.width as i64, room.dims.length as i64);
    let mut best: Option<(f64, [f64; 2])> = None;
    for i in 1..w - 1 {
        for j in 1..l - 1 {
            let local = [i as f64 + 0.5, j as f64 + 0.5];
            if !cell_free_of(&fixed, local) {
                continue;
            }
            let world = room.to_world(local);
            let d = (world[0] - c[0]).hypot(world[1] - c[1]);
            if best.is_none_or(|(bd, _)| d < bd - EPS) {
                best = Some((d, world));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Seed room on `floor` whose interior holds the stair cell at `stair`.
fn seed_candidate(
    state: &ArrangeState<'_>,
    floor: usize,
    stair: [f64; 2],
    rng: &mut StageRng,
) -> Option<Candidate> {
    let cx = stair[0].floor();
    let cy = stair[1].floor();
    let mut cands = Vec::new();
    for (t, (template, _)) in state.templates.iter().enumerate() {
        if !state.available(t) {
            continue;
        }
        let (w, l) = (template.dimensions.width, template.dimensions.length);
        if w < 3.0 || l < 3.0 {
            continue;
        }
        let fixed = fixed_footprints(template, state.db);
        let xs = ((cx - w + 2.0).max(0.0) as i64)..=((cx - 1.0).min(state.config.width - w) as i64);
        let ys = ((cy - l + 2.0).max(0.0) as i64)..=((cy - 1.0).min(state.config.length - l) as i64);
        for ox in xs {
            for oy in ys.clone() {
                let origin = [ox as f64, oy as f64];
                let local = [stair[0] - origin[0], stair[1] - origin[1]];
                if !cell_free_of(&fixed, local) {
                    continue;
                }
                let rect = Rect::from_origin(origin, w, l);
                if state.fits(floor, &rect) {
                    cands.push(Candidate { template: t, origin, penalty: state.score(t, floor, origin) });
                }
            }
        }
    }
    state.choose(cands, rng)
}

/// Depth-first fill of one floor from `seed`; returns the rooms created.
fn expand_floor(state: &mut ArrangeState<'_>, seed: RoomId, rng: &mut StageRng) -> Vec<RoomId> {
    let mut created = vec![seed];
    let mut stack = vec![seed];
    while let Some(curr) = stack.pop() {
        for d in DIRECTIONS {
            let current = state.rooms[curr].clone();
            if let Some(c) = gen_candidate_room(state, &current, d, rng) {
                let id = state.place(c.template, current.floor, c.origin);
                created.push(id);
                stack.push(id);
            }
        }
    }
    created
}

/// Builds the room skeleton: rooms, stairs, doors and adjacency.
pub fn arrange_rooms(
    config: &LevelConfig,
    db: &Database,
    rng: &mut StageRng,
) -> Result<LevelSkeleton, ArrangementError> {
    let mut state = ArrangeState::new(config, db)?;
    let initial = db
        .initial_template()
        .and_then(|t| state.templates.iter().position(|(x, _)| x.name == t.name))
        .ok_or_else(|| ArrangementError::ArrangementFailed("no initial template".into()))?;
    let t0 = state.templates[initial].0;
    let origin = [0.0, 0.0];
    if !state.available(initial)
        || !state.fits(0, &Rect::from_origin(origin, t0.dimensions.width, t0.dimensions.length))
    {
        return Err(ArrangementError::ArrangementFailed("initial room does not fit".into()));
    }
    let mut seed = state.place(initial, 0, origin);
    let mut stairs = Vec::new();
    for floor in 0..config.floors {
        let created = expand_floor(&mut state, seed, rng);
        if floor + 1 == config.floors {
            break;
        }
        let last = *created.iter().max_by_key(|&&id| state.rooms[id].tau).expect("seed exists");
        let room = state.rooms[last].clone();
        let template = state.templates.iter().find(|(t, _)| t.name == room.template).expect("template").0;
        let Some(cell) = stair_cell(&room, template, db) else { break };
        let Some(c) = seed_candidate(&state, floor + 1, cell, rng) else { break };
        let upper = state.place(c.template, floor + 1, c.origin);
        stairs.push(Stair { floor, room: last, upper_room: upper, position: cell });
        seed = upper;
    }
    let skeleton = LevelSkeleton {
        width: config.width,
        length: config.length,
        height: config.height,
        floors: config.floors,
        rooms: state.rooms,
        stairs,
        doors: Vec::new(),
        open_edges: Vec::new(),
        adjacency: Vec::new(),
    };
    let fixed: Vec<Vec<Rect>> = skeleton
        .rooms
        .iter()
        .map(|r| {
            let t = db.room(&r.template).expect("placed from the database");
            fixed_footprints(t, db)
        })
        .collect();
    let rooms = skeleton.rooms.clone();
    let blocked = |room: RoomId, p: [f64; 2]| !cell_free_of(&fixed[room], rooms[room].to_local(p));
    place_doors_avoiding(skeleton, &blocked).map_err(|e| ArrangementError::ArrangementFailed(e.to_string()))
}

/// Connects every pair of rooms sharing enough wall. Two open rooms get an
/// open edge along the whole shared wall; any other pair gets one door cell
/// at the middle of the shared wall.
pub fn place_doors(skeleton: LevelSkeleton) -> Result<LevelSkeleton, ArrangementError> {
    place_doors_avoiding(skeleton, &|_, _| false)
}

/// Like [`place_doors`], but the door cell moves along the shared wall, as
/// close to the middle as possible, until neither room has `blocked` true
/// for the door cells or the cells just inside them. Walls without such a
/// cell get no door and no adjacency.
pub fn place_doors_avoiding(
    mut skeleton: LevelSkeleton,
    blocked: &dyn Fn(RoomId, [f64; 2]) -> bool,
) -> Result<LevelSkeleton, ArrangementError> {
    let mut doors = Vec::new();
    let mut open_edges = Vec::new();
    let mut adjacency = Vec::new();
    let rooms = &skeleton.rooms;
    for a in 0..rooms.len() {
        for b in a + 1..rooms.len() {
            if rooms[a].floor != rooms[b].floor {
                continue;
            }
            let Some(edge) = rooms[a].rect().shared_edge(&rooms[b].rect()) else { continue };
            if edge.len() < MIN_SHARED_WALL - EPS {
                continue;
            }
            if rooms[a].arch_type == ArchType::Open && rooms[b].arch_type == ArchType::Open {
                adjacency.push((a, b));
                open_edges.push(OpenEdge {
                    room_a: a,
                    room_b: b,
                    axis: edge.axis,
                    coord: edge.coord,
                    from: edge.from,
                    to: edge.to,
                });
            } else {
                let blocked_ab = |p: [f64; 2]| blocked(a, p) || blocked(b, p);
                // A wall whose every door cell is blocked stays closed.
                let Some(cell) = door_cell(&edge, &blocked_ab) else { continue };
                let position = match edge.axis {
                    WallAxis::X => [edge.coord, cell],
                    WallAxis::Y => [cell, edge.coord],
                };
                adjacency.push((a, b));
                doors.push(Door { room_a: a, room_b: b, position, axis: edge.axis });
            }
        }
    }
    for floor in 0..skeleton.floors {
        let members: Vec<RoomId> = rooms.iter().filter(|r| r.floor == floor).map(|r| r.id).collect();
        if members.len() > 1 && !connected(&members, &adjacency) {
            return Err(ArrangementError::DisconnectedFloor(floor));
        }
    }
    skeleton.doors = doors;
    skeleton.open_edges = open_edges;
    skeleton.adjacency = adjacency;
    Ok(skeleton)
}

fn connected(members: &[RoomId], edges: &[(RoomId, RoomId)]) -> bool {
    let mut adj: BTreeMap<RoomId, Vec<RoomId>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen = vec![members[0]];
    let mut queue = VecDeque::from([members[0]]);
    while let Some(n) = queue.pop_front() {
        for &m in adj.get(&n).into_iter().flatten() {
            if !seen.contains(&m) {
                seen.push(m);
                queue.push_back(m);
            }
        }
    }
    members.iter().all(|m| seen.contains(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ConstraintKind, ConstraintSpec};
    use crate::database::samples;
    use crate::rng::stream;

    fn template(name: &str, w: f64, l: f64, arch: ArchType, cap: u32) -> RoomTemplate {
        RoomTemplate {
            name: name.into(),
            dimensions: Dimensions::new(w, l, 3.0),
            characteristic_facilities: Vec::new(),
            max_instances: cap,
            arch_type: arch,
            room_constraints: Vec::new(),
            initial: false,
        }
    }

    fn config(w: f64, l: f64, floors: usize) -> LevelConfig {
        LevelConfig { width: w, length: l, height: 3.0 * floors as f64, floors, ..LevelConfig::default() }
    }

    #[test]
    fn single_room_level() {
        let mut t = template("Only", 10.0, 10.0, ArchType::Enclosed, 5);
        t.initial = true;
        let db = Database { rooms: vec![t], ..Database::default() };
        let sk = arrange_rooms(&config(10.0, 10.0, 1), &db, &mut stream(1, "arr", 0)).unwrap();
        assert_eq!(sk.rooms.len(), 1);
        assert_eq!(sk.rooms[0].tau, 1);
        assert!(sk.stairs.is_empty());
        assert!(sk.doors.is_empty());
    }

    #[test]
    fn two_floors_align_seed_on_stair() {
        // Small floors so the first one cannot use up every template.
        let db = samples::minimal();
        let sk = arrange_rooms(&config(20.0, 20.0, 2), &db, &mut stream(9, "arr", 0)).unwrap();
        assert_eq!(sk.stairs.len(), 1);
        let st = &sk.stairs[0];
        let max_tau = sk.rooms_on_floor(0).max_by_key(|r| r.tau).unwrap();
        assert_eq!(st.room, max_tau.id);
        assert!(sk.rooms[st.room].rect().strictly_contains(st.position));
        let upper = &sk.rooms[st.upper_room];
        assert_eq!(upper.floor, 1);
        assert!(upper.rect().strictly_contains(st.position));
        assert_eq!(upper.tau, max_tau.tau + 1);
    }

    #[test]
    fn boundary_blocks_expansion() {
        let mut t = template("Only", 10.0, 10.0, ArchType::Enclosed, 5);
        t.initial = true;
        let db = Database { rooms: vec![t], ..Database::default() };
        let cfg = config(10.0, 20.0, 1);
        let mut state = ArrangeState::new(&cfg, &db).unwrap();
        state.place(0, 0, [0.0, 0.0]);
        let cur = state.rooms[0].clone();
        let mut rng = stream(1, "arr", 0);
        assert!(gen_candidate_room(&state, &cur, Direction::Right, &mut rng).is_none());
        assert!(gen_candidate_room(&state, &cur, Direction::Left, &mut rng).is_none());
        let c = gen_candidate_room(&state, &cur, Direction::Front, &mut rng).unwrap();
        assert_eq!(c.origin, [0.0, 10.0]);
    }

    #[test]
    fn lowest_penalty_template_wins() {
        // "Alpha" would win the name tie-break, but it is 70 units of
        // AdjacentTo penalty away from its target; "Beta" is unconstrained.
        let mut start = template("Start", 10.0, 10.0, ArchType::Enclosed, 1);
        start.initial = true;
        let mut anchor = template("Anchor", 4.0, 4.0, ArchType::Enclosed, 1);
        anchor.max_instances = 1;
        let mut alpha = template("Alpha", 10.0, 10.0, ArchType::Enclosed, 1);
        alpha.room_constraints = vec![ConstraintSpec::weighted(
            ConstraintKind::AdjacentTo { target: "Anchor".into() },
            10.0,
        )];
        let beta = template("Beta", 10.0, 10.0, ArchType::Enclosed, 1);
        let db = Database { rooms: vec![start, anchor, alpha, beta], ..Database::default() };
        let cfg = config(100.0, 100.0, 1);
        let mut state = ArrangeState::new(&cfg, &db).unwrap();
        state.place(0, 0, [0.0, 0.0]);
        state.place(1, 0, [87.0, 0.0]);
        let cur = state.rooms[0].clone();
        // flush right of Start, Alpha ends at x = 20 and the gap is 67
        let p_alpha = state.score(2, 0, [10.0, 0.0]);
        assert!((p_alpha - 10.0 * 67.0).abs() < 1e-9);
        assert_eq!(state.score(3, 0, [10.0, 0.0]), 0.0);
        let c = gen_candidate_room(&state, &cur, Direction::Right, &mut stream(3, "arr", 0)).unwrap();
        assert_eq!(state.templates[c.template].0.name, "Beta");
    }

    #[test]
    fn caps_exhausted_give_none() {
        let mut t = template("Only", 5.0, 5.0, ArchType::Enclosed, 1);
        t.initial = true;
        let db = Database { rooms: vec![t], ..Database::default() };
        let cfg = config(50.0, 50.0, 1);
        let mut state = ArrangeState::new(&cfg, &db).unwrap();
        state.place(0, 0, [0.0, 0.0]);
        let cur = state.rooms[0].clone();
        assert!(gen_candidate_room(&state, &cur, Direction::Right, &mut stream(1, "a", 0)).is_none());
    }

    fn two_room_skeleton(a: ArchType, b: ArchType) -> LevelSkeleton {
        let room = |id: usize, x: f64, arch| RoomInstance {
            id,
            template: "T".into(),
            floor: 0,
            origin: [x, 0.0],
            dims: Dimensions::new(10.0, 10.0, 3.0),
            tau: id as u32 + 1,
            arch_type: arch,
        };
        LevelSkeleton {
            width: 20.0,
            length: 10.0,
            height: 3.0,
            floors: 1,
            rooms: vec![room(0, 0.0, a), room(1, 10.0, b)],
            stairs: vec![],
            doors: vec![],
            open_edges: vec![],
            adjacency: vec![],
        }
    }

    #[test]
    fn doors_at_shared_wall_midpoint() {
        let sk = place_doors(two_room_skeleton(ArchType::Enclosed, ArchType::Enclosed)).unwrap();
        assert_eq!(sk.doors.len(), 1);
        assert_eq!(sk.doors[0].position, [10.0, 5.5]);
        assert!(sk.open_edges.is_empty());
        assert_eq!(sk.adjacency, vec![(0, 1)]);
    }

    #[test]
    fn open_rooms_get_open_edge() {
        let sk = place_doors(two_room_skeleton(ArchType::Open, ArchType::Open)).unwrap();
        assert!(sk.doors.is_empty());
        assert_eq!(sk.open_edges.len(), 1);
        assert_eq!((sk.open_edges[0].from, sk.open_edges[0].to), (0.0, 10.0));
    }

    #[test]
    fn disconnected_floor_is_an_error() {
        let mut sk = two_room_skeleton(ArchType::Enclosed, ArchType::Enclosed);
        sk.rooms[1].origin = [12.0, 0.0];
        sk.width = 30.0;
        assert_eq!(place_doors(sk), Err(ArrangementError::DisconnectedFloor(0)));
    }

    #[test]
    fn hospital_skeleton_invariants() {
        let db = samples::hospital();
        let cfg = LevelConfig::default();
        for seed in 0..5 {
            let a = arrange_rooms(&cfg, &db, &mut stream(seed, "arr", 0)).unwrap();
            let b = arrange_rooms(&cfg, &db, &mut stream(seed, "arr", 0)).unwrap();
            assert_eq!(a, b);
            let taus: Vec<u32> = a.rooms.iter().map(|r| r.tau).collect();
            assert_eq!(taus, (1..=a.rooms.len() as u32).collect::<Vec<_>>());
            assert_eq!(a.stairs.len() + 1, a.used_floors());
            for (i, r) in a.rooms.iter().enumerate() {
                assert!(r.rect().within(&Rect::new(0.0, 0.0, 50.0, 50.0)));
                for s in &a.rooms[i + 1..] {
                    assert!(r.floor != s.floor || !r.rect().overlaps(&s.rect()));
                }
            }
            for (t, cap) in ArrangeState::new(&cfg, &db).unwrap().templates {
                assert!(a.rooms.iter().filter(|r| r.template == t.name).count() as u32 <= cap);
            }
        }
    }
}
