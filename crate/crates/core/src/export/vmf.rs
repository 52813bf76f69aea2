//! Valve Map Format writer. Rooms become wall, floor and ceiling brushes;
//! facilities and mechanics become placeholder point entities.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::WallAxis;
use crate::level::{Level, RoomInstance};

/// Hammer units per meter.
pub const DEFAULT_SCALE: f64 = 64.0;
/// Thickness of floor and ceiling slabs, in meters.
pub const SLAB: f64 = 0.25;
/// Wall thickness, one navigation cell.
pub const WALL: f64 = 1.0;
pub const DOOR_HEIGHT: f64 = 2.5;
const MATERIAL: &str = "DEV/DEV_MEASUREGENERIC01B";

/// Definition name to entity classname, with a fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassnameMap {
    pub default: String,
    pub map: BTreeMap<String, String>,
}

impl Default for ClassnameMap {
    fn default() -> Self {
        Self { default: "prop_dynamic".into(), map: BTreeMap::new() }
    }
}

impl ClassnameMap {
    pub fn classname(&self, def: &str) -> &str {
        self.map.get(def).map_or(self.default.as_str(), String::as_str)
    }
}

/// Axis-aligned box in meters, `[min, max]`.
type Box3 = ([f64; 3], [f64; 3]);

/// Opening along a wall, `[from, to]` in the wall's running coordinate,
/// `height` above the wall base (`None` for full height).
struct Opening {
    from: f64,
    to: f64,
    height: Option<f64>,
}

fn num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v}")
}

struct Writer {
    out: String,
    next_id: u64,
    scale: f64,
}

impl Writer {
    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn point(&self, p: [f64; 3]) -> String {
        format!("({} {} {})", num(p[0] * self.scale), num(p[1] * self.scale), num(p[2] * self.scale))
    }

    fn solid(&mut self, (lo, hi): Box3) {
        let [x0, y0, z0] = lo;
        let [x1, y1, z1] = hi;
        let faces = [
            [[x0, y1, z1], [x1, y1, z1], [x1, y0, z1]],
            [[x0, y0, z0], [x1, y0, z0], [x1, y1, z0]],
            [[x0, y1, z1], [x0, y0, z1], [x0, y0, z0]],
            [[x1, y1, z0], [x1, y0, z0], [x1, y0, z1]],
            [[x1, y1, z1], [x0, y1, z1], [x0, y1, z0]],
            [[x1, y0, z0], [x0, y0, z0], [x0, y0, z1]],
        ];
        let axes = [
            ("[1 0 0 0]", "[0 -1 0 0]"),
            ("[1 0 0 0]", "[0 -1 0 0]"),
            ("[0 1 0 0]", "[0 0 -1 0]"),
            ("[0 1 0 0]", "[0 0 -1 0]"),
            ("[1 0 0 0]", "[0 0 -1 0]"),
            ("[1 0 0 0]", "[0 0 -1 0]"),
        ];
        let sid = self.id();
        let _ = writeln!(self.out, "\tsolid\n\t{{\n\t\t\"id\" \"{sid}\"");
        for (f, (u, v)) in faces.iter().zip(axes) {
            let id = self.id();
            let plane = format!("{} {} {}", self.point(f[0]), self.point(f[1]), self.point(f[2]));
            let _ = writeln!(
                self.out,
                "\t\tside\n\t\t{{\n\t\t\t\"id\" \"{id}\"\n\t\t\t\"plane\" \"{plane}\"\n\t\t\t\"material\" \"{MATERIAL}\"\n\t\t\t\"uaxis\" \"{u} 0.25\"\n\t\t\t\"vaxis\" \"{v} 0.25\"\n\t\t\t\"rotation\" \"0\"\n\t\t\t\"lightmapscale\" \"16\"\n\t\t\t\"smoothing_groups\" \"0\"\n\t\t}}"
            );
        }
        self.out.push_str("\t}\n");
    }

    fn entity(&mut self, classname: &str, targetname: &str, origin: [f64; 3], yaw_deg: f64) {
        let id = self.id();
        let _ = writeln!(
            self.out,
            "entity\n{{\n\t\"id\" \"{id}\"\n\t\"classname\" \"{classname}\"\n\t\"targetname\" \"{targetname}\"\n\t\"model\" \"models/props_junk/wood_crate001a.mdl\"\n\t\"origin\" \"{} {} {}\"\n\t\"angles\" \"0 {} 0\"\n}}",
            num(origin[0] * self.scale),
            num(origin[1] * self.scale),
            num(origin[2] * self.scale),
            num(yaw_deg),
        );
    }
}

/// Solid spans of `[lo, hi]` left after cutting the openings, plus lintels
/// above openings lower than the wall.
fn split_wall(lo: f64, hi: f64, openings: &mut [Opening], z0: f64, z1: f64) -> Vec<(f64, f64, f64, f64)> {
    openings.sort_by(|a, b| a.from.total_cmp(&b.from));
    let mut spans = Vec::new();
    let mut at = lo;
    for o in openings.iter() {
        let (from, to) = (o.from.max(lo), o.to.min(hi));
        if to <= from {
            continue;
        }
        if from > at {
            spans.push((at, from, z0, z1));
        }
        if let Some(h) = o.height {
            if z0 + h < z1 {
                spans.push((from, to, z0 + h, z1));
            }
        }
        at = at.max(to);
    }
    if at < hi {
        spans.push((at, hi, z0, z1));
    }
    spans
}

/// The room's four walls: axis of the running coordinate, the fixed
/// boundary coordinate and the running range.
fn walls(r: &RoomInstance) -> [(WallAxis, f64, f64, f64); 4] {
    let [x0, y0] = r.origin;
    let (x1, y1) = (x0 + r.dims.width, y0 + r.dims.length);
    [
        (WallAxis::Y, y0, x0, x1),
        (WallAxis::Y, y1, x0, x1),
        (WallAxis::X, x0, y0 + WALL, y1 - WALL),
        (WallAxis::X, x1, y0 + WALL, y1 - WALL),
    ]
}

fn room_brushes(level: &Level, room: &RoomInstance) -> Vec<Box3> {
    let sk = &level.skeleton;
    let base = room.floor as f64 * sk.floor_height();
    let top = base + room.dims.height;
    let [x0, y0] = room.origin;
    let (x1, y1) = (x0 + room.dims.width, y0 + room.dims.length);
    let mut out = vec![([x0, y0, base], [x1, y1, base + SLAB]), ([x0, y0, top - SLAB], [x1, y1, top])];
    let (z0, z1) = (base + SLAB, top - SLAB);
    for (axis, coord, lo, hi) in walls(room) {
        let on_wall = |a: usize, b: usize, w_axis: WallAxis, w_coord: f64| {
            (a == room.id || b == room.id) && w_axis == axis && (w_coord - coord).abs() < 1e-9
        };
        let mut openings: Vec<Opening> = Vec::new();
        for d in &sk.doors {
            let c = match d.axis {
                WallAxis::X => d.position[0],
                WallAxis::Y => d.position[1],
            };
            if on_wall(d.room_a, d.room_b, d.axis, c) {
                let along = match d.axis {
                    WallAxis::X => d.position[1],
                    WallAxis::Y => d.position[0],
                }
                .floor();
                openings.push(Opening { from: along, to: along + 1.0, height: Some(DOOR_HEIGHT) });
            }
        }
        for e in &sk.open_edges {
            if on_wall(e.room_a, e.room_b, e.axis, e.coord) {
                openings.push(Opening { from: e.from.round() + 1.0, to: e.to.round() - 1.0, height: None });
            }
        }
        // Shared walls: each room owns the ring cells on its own side.
        let (t0, t1) = if (coord - room.origin[if axis == WallAxis::X { 0 } else { 1 }]).abs() < 1e-9 {
            (coord, coord + WALL)
        } else {
            (coord - WALL, coord)
        };
        for (a, b, za, zb) in split_wall(lo, hi, &mut openings, z0, z1) {
            out.push(match axis {
                WallAxis::X => ([t0, a, za], [t1, b, zb]),
                WallAxis::Y => ([a, t0, za], [b, t1, zb]),
            });
        }
    }
    out
}

pub fn export_vmf(level: &Level, scale: f64) -> Vec<u8> {
    export_vmf_with(level, scale, &ClassnameMap::default())
}

/// VMF text. Rooms are emitted in `tau` order, then one entity per
/// facility and mechanic in the same room order.
pub fn export_vmf_with(level: &Level, scale: f64, classes: &ClassnameMap) -> Vec<u8> {
    let mut w = Writer { out: String::new(), next_id: 0, scale };
    w.out.push_str(
        "versioninfo\n{\n\t\"editorversion\" \"400\"\n\t\"editorbuild\" \"8000\"\n\t\"mapversion\" \"1\"\n\t\"formatversion\" \"100\"\n\t\"prefab\" \"0\"\n}\n",
    );
    let wid = w.id();
    let _ = writeln!(w.out, "world\n{{\n\t\"id\" \"{wid}\"\n\t\"mapversion\" \"1\"\n\t\"classname\" \"worldspawn\"\n\t\"skyname\" \"sky_day01_01\"");
    let rooms: Vec<&RoomInstance> = level.skeleton.room_by_tau();
    for r in &rooms {
        for b in room_brushes(level, r) {
            w.solid(b);
        }
    }
    w.out.push_str("}\n");
    let fh = level.skeleton.floor_height();
    for r in &rooms {
        let base = r.floor as f64 * fh;
        let placed = level
            .facilities
            .iter()
            .filter(|f| f.room == r.id)
            .map(|f| (classes.classname(&f.def), &f.id, &f.pose))
            .chain(level.mechanics.iter().filter(|m| m.room == r.id).map(|m| (classes.classname(&m.mechanic), &m.id, &m.pose)));
        for (class, id, pose) in placed {
            let [x, y] = r.to_world(pose.planar());
            w.entity(class, id, [x, y, base + pose.center[2]], pose.yaw.to_degrees());
        }
    }
    w.out.into_bytes()
}
