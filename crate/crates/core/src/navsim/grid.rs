//! Unit-cell occupancy lattice over every floor of a level.

use crate::database::Positioning;
use crate::geometry::{Pose, Rect, WallAxis};
use crate::level::{Level, RoomId};

pub type CellId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// Outside every room.
    Void,
    Wall,
    Free,
    Door,
    Stair,
}

impl CellKind {
    pub fn walkable(self) -> bool {
        matches!(self, CellKind::Free | CellKind::Door | CellKind::Stair)
    }
}

/// Entry point into a room used by the flood fill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DoorwayKind {
    Door(usize),
    OpenEdge(usize),
    Stair(usize),
    Anchor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Doorway {
    pub kind: DoorwayKind,
    /// The room's own cells of this doorway.
    pub cells: Vec<CellId>,
}

#[derive(Debug, Clone)]
pub struct NavGrid {
    pub width: usize,
    pub length: usize,
    pub floors: usize,
    pub floor_height: f64,
    pub kind: Vec<CellKind>,
    pub room: Vec<Option<RoomId>>,
    /// Facility indices (into `Level::facilities`) covering each cell.
    pub occupants: Vec<Vec<usize>>,
    /// Cells covered by each facility; empty once removed.
    pub facility_cells: Vec<Vec<CellId>>,
    pub facility_adaptable: Vec<bool>,
    pub doorways: Vec<Vec<Doorway>>,
    pub anchors: Vec<Option<CellId>>,
    /// Per room: `[x0, y0, width, length, floor]` in cells.
    pub room_bounds: Vec<[usize; 5]>,
}

pub const NEIGHBORS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

impl NavGrid {
    pub fn cell_count(&self) -> usize {
        self.width * self.length * self.floors
    }

    pub fn id(&self, i: usize, j: usize, f: usize) -> CellId {
        (f * self.length + j) * self.width + i
    }

    pub fn coords(&self, c: CellId) -> (usize, usize, usize) {
        let i = c % self.width;
        let j = (c / self.width) % self.length;
        let f = c / (self.width * self.length);
        (i, j, f)
    }

    pub fn center(&self, c: CellId) -> [f64; 2] {
        let (i, j, _) = self.coords(c);
        [i as f64 + 0.5, j as f64 + 0.5]
    }

    pub fn cell_at(&self, p: [f64; 2], floor: usize) -> Option<CellId> {
        let (i, j) = (p[0].floor(), p[1].floor());
        if i < 0.0 || j < 0.0 || i as usize >= self.width || j as usize >= self.length || floor >= self.floors {
            return None;
        }
        Some(self.id(i as usize, j as usize, floor))
    }

    /// Walkable with nothing standing on it.
    pub fn passable(&self, c: CellId) -> bool {
        self.kind[c].walkable() && self.occupants[c].is_empty()
    }

    /// Walkable once adaptable facilities are ignored.
    pub fn passable_relaxed(&self, c: CellId) -> bool {
        self.kind[c].walkable() && self.occupants[c].iter().all(|&f| self.facility_adaptable[f])
    }

    /// Same-floor 4-neighbours plus the vertical stair link.
    pub fn neighbors(&self, c: CellId) -> impl Iterator<Item = (CellId, Option<usize>)> + '_ {
        let (i, j, f) = self.coords(c);
        let planar = NEIGHBORS.iter().enumerate().filter_map(move |(d, (dx, dy))| {
            let (ni, nj) = (i as i64 + dx, j as i64 + dy);
            if ni < 0 || nj < 0 || ni as usize >= self.width || nj as usize >= self.length {
                return None;
            }
            Some((self.id(ni as usize, nj as usize, f), Some(d)))
        });
        let vertical = [f.checked_sub(1), Some(f + 1)]
            .into_iter()
            .flatten()
            .filter(move |&g| g < self.floors && self.kind[c] == CellKind::Stair)
            .map(move |g| self.id(i, j, g))
            .filter(move |&n| self.kind[n] == CellKind::Stair)
            .map(|n| (n, None));
        planar.chain(vertical)
    }

    /// Cells whose centers lie strictly inside a world-frame footprint.
    pub fn covered_cells(&self, fp: &Rect, floor: usize) -> Vec<CellId> {
        let mut out = Vec::new();
        let i0 = (fp.x0 - 0.5).ceil().max(0.0) as usize;
        let j0 = (fp.y0 - 0.5).ceil().max(0.0) as usize;
        let i1 = ((fp.x1 - 0.5).floor().max(-1.0) as i64).min(self.width as i64 - 1);
        let j1 = ((fp.y1 - 0.5).floor().max(-1.0) as i64).min(self.length as i64 - 1);
        for j in j0 as i64..=j1 {
            for i in i0 as i64..=i1 {
                let c = self.id(i as usize, j as usize, floor);
                if fp.strictly_contains(self.center(c)) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Occupies the cells under `pose` (room-local) for facility `f`.
    /// Wall and void cells are never marked.
    pub fn occupy(&mut self, f: usize, local: &Pose, origin: [f64; 2], floor: usize) {
        self.vacate(f);
        let fp = local.footprint();
        let world = Rect::new(fp.x0 + origin[0], fp.y0 + origin[1], fp.x1 + origin[0], fp.y1 + origin[1]);
        let cells: Vec<CellId> = self
            .covered_cells(&world, floor)
            .into_iter()
            .filter(|&c| self.kind[c].walkable())
            .collect();
        for &c in &cells {
            self.occupants[c].push(f);
        }
        self.facility_cells[f] = cells;
    }

    pub fn vacate(&mut self, f: usize) {
        for c in std::mem::take(&mut self.facility_cells[f]) {
            self.occupants[c].retain(|&o| o != f);
        }
    }

    /// Cells of the room, interior and ring.
    pub fn room_cells(&self, room: RoomId) -> impl Iterator<Item = CellId> + '_ {
        let [x0, y0, w, l, f] = self.room_bounds[room];
        (y0..y0 + l).flat_map(move |j| (x0..x0 + w).map(move |i| self.id(i, j, f)))
    }

    /// Cells strictly inside the room's wall ring.
    pub fn is_interior(&self, room: RoomId, c: CellId) -> bool {
        let [x0, y0, w, l, f] = self.room_bounds[room];
        let (i, j, cf) = self.coords(c);
        cf == f && i > x0 && j > y0 && i + 1 < x0 + w && j + 1 < y0 + l
    }
}

/// Builds the lattice: rings are wall, interiors free, doors and stairs
/// marked, open edges walkable, facility footprints occupied.
pub fn build_nav_grid(level: &Level) -> NavGrid {
    let sk = &level.skeleton;
    let width = sk.width.ceil() as usize;
    let length = sk.length.ceil() as usize;
    let floors = sk.floors.max(1);
    let n = width * length * floors;
    let mut g = NavGrid {
        width,
        length,
        floors,
        floor_height: sk.floor_height(),
        kind: vec![CellKind::Void; n],
        room: vec![None; n],
        occupants: vec![Vec::new(); n],
        facility_cells: vec![Vec::new(); level.facilities.len()],
        facility_adaptable: level.facilities.iter().map(|f| f.positioning == Positioning::Adaptable).collect(),
        doorways: vec![Vec::new(); sk.rooms.len()],
        anchors: vec![None; sk.rooms.len()],
        room_bounds: sk
            .rooms
            .iter()
            .map(|r| {
                let x0 = r.origin[0] as usize;
                let y0 = r.origin[1] as usize;
                [x0, y0, (r.dims.width as usize).min(width - x0), (r.dims.length as usize).min(length - y0), r.floor]
            })
            .collect(),
    };
    for r in &sk.rooms {
        let (x0, y0) = (r.origin[0] as usize, r.origin[1] as usize);
        let (w, l) = (r.dims.width as usize, r.dims.length as usize);
        for j in y0..(y0 + l).min(length) {
            for i in x0..(x0 + w).min(width) {
                let c = g.id(i, j, r.floor);
                let ring = i == x0 || j == y0 || i + 1 == x0 + w || j + 1 == y0 + l;
                g.kind[c] = if ring { CellKind::Wall } else { CellKind::Free };
                g.room[c] = Some(r.id);
            }
        }
    }
    let ring_pair = |g: &NavGrid, axis: WallAxis, coord: f64, along: usize, floor: usize| -> [CellId; 2] {
        let k = coord.round() as usize;
        match axis {
            WallAxis::X => [g.id(k - 1, along, floor), g.id(k, along, floor)],
            WallAxis::Y => [g.id(along, k - 1, floor), g.id(along, k, floor)],
        }
    };
    for (di, d) in sk.doors.iter().enumerate() {
        let floor = sk.rooms[d.room_a].floor;
        let along = match d.axis {
            WallAxis::X => d.position[1].floor() as usize,
            WallAxis::Y => d.position[0].floor() as usize,
        };
        let coord = match d.axis {
            WallAxis::X => d.position[0],
            WallAxis::Y => d.position[1],
        };
        for c in ring_pair(&g, d.axis, coord, along, floor) {
            g.kind[c] = CellKind::Door;
            let owner = g.room[c].expect("door cells lie in a room ring");
            g.doorways[owner].push(Doorway { kind: DoorwayKind::Door(di), cells: vec![c] });
        }
    }
    for (ei, e) in sk.open_edges.iter().enumerate() {
        let floor = sk.rooms[e.room_a].floor;
        let lo = e.from.round() as usize + 1;
        let hi = (e.to.round() as usize).saturating_sub(1);
        let mut per_room: Vec<(RoomId, Vec<CellId>)> = Vec::new();
        for along in lo..hi {
            for c in ring_pair(&g, e.axis, e.coord, along, floor) {
                g.kind[c] = CellKind::Free;
                let owner = g.room[c].expect("open edge cells lie in a room ring");
                match per_room.iter_mut().find(|(r, _)| *r == owner) {
                    Some((_, v)) => v.push(c),
                    None => per_room.push((owner, vec![c])),
                }
            }
        }
        for (owner, cells) in per_room {
            g.doorways[owner].push(Doorway { kind: DoorwayKind::OpenEdge(ei), cells });
        }
    }
    for (si, s) in sk.stairs.iter().enumerate() {
        for (room, floor) in [(s.room, s.floor), (s.upper_room, s.floor + 1)] {
            if let Some(c) = g.cell_at(s.position, floor) {
                g.kind[c] = CellKind::Stair;
                g.doorways[room].push(Doorway { kind: DoorwayKind::Stair(si), cells: vec![c] });
            }
        }
    }
    for (fi, f) in level.facilities.iter().enumerate() {
        let r = &sk.rooms[f.room];
        g.occupy(fi, &f.pose, r.origin, r.floor);
    }
    for r in &sk.rooms {
        let center = r.center();
        let fixed_free = |c: CellId| g.occupants[c].iter().all(|&o| g.facility_adaptable[o]);
        let anchor = g
            .room_cells(r.id)
            .filter(|&c| g.kind[c] == CellKind::Free || g.kind[c] == CellKind::Stair)
            .filter(|&c| g.is_interior(r.id, c))
            .filter(|&c| fixed_free(c))
            .min_by(|&a, &b| {
                let ka = (!g.occupants[a].is_empty(), crate::geometry::dist2(g.center(a), center));
                let kb = (!g.occupants[b].is_empty(), crate::geometry::dist2(g.center(b), center));
                ka.partial_cmp(&kb).expect("finite").then(a.cmp(&b))
            });
        g.anchors[r.id] = anchor;
        if let Some(a) = anchor {
            g.doorways[r.id].push(Doorway { kind: DoorwayKind::Anchor, cells: vec![a] });
        }
    }
    g
}
