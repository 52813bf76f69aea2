//! The level model shared by every stage after arrangement.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::constraints::{ArchType, ConstraintSpec, RoomBox};
use crate::database::{Positioning, TopoKind};
use crate::geometry::{Dimensions, Pose, Rect, SharedEdge, WallAxis};

pub type RoomId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomInstance {
    pub id: RoomId,
    pub template: String,
    pub floor: usize,
    pub origin: [f64; 2],
    pub dims: Dimensions,
    pub tau: u32,
    pub arch_type: ArchType,
}

impl RoomInstance {
    pub fn rect(&self) -> Rect {
        Rect::from_origin(self.origin, self.dims.width, self.dims.length)
    }

    pub fn center(&self) -> [f64; 2] {
        self.rect().center()
    }

    pub fn as_box(&self) -> RoomBox {
        RoomBox { template: self.template.clone(), floor: self.floor, rect: self.rect() }
    }

    pub fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] - self.origin[0], p[1] - self.origin[1]]
    }

    pub fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] + self.origin[0], p[1] + self.origin[1]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Door {
    pub room_a: RoomId,
    pub room_b: RoomId,
    /// World position on the shared wall line.
    pub position: [f64; 2],
    pub axis: WallAxis,
}

/// Shared wall between two open rooms, walkable along its whole length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenEdge {
    pub room_a: RoomId,
    pub room_b: RoomId,
    pub axis: WallAxis,
    pub coord: f64,
    pub from: f64,
    pub to: f64,
}

impl OpenEdge {
    pub fn edge(&self) -> SharedEdge {
        SharedEdge { axis: self.axis, coord: self.coord, from: self.from, to: self.to }
    }
}

/// Vertical link from `room` on `floor` to `upper_room` on `floor + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stair {
    pub floor: usize,
    pub room: RoomId,
    pub upper_room: RoomId,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSkeleton {
    pub width: f64,
    pub length: f64,
    pub height: f64,
    pub floors: usize,
    pub rooms: Vec<RoomInstance>,
    pub stairs: Vec<Stair>,
    pub doors: Vec<Door>,
    pub open_edges: Vec<OpenEdge>,
    /// Undirected room graph, each edge stored once with `a < b`.
    pub adjacency: Vec<(RoomId, RoomId)>,
}

impl LevelSkeleton {
    pub fn floor_height(&self) -> f64 {
        self.height / self.floors as f64
    }

    pub fn rooms_on_floor(&self, floor: usize) -> impl Iterator<Item = &RoomInstance> {
        self.rooms.iter().filter(move |r| r.floor == floor)
    }

    /// Floors that actually hold rooms.
    pub fn used_floors(&self) -> usize {
        self.rooms.iter().map(|r| r.floor + 1).max().unwrap_or(0)
    }

    pub fn room_by_tau(&self) -> Vec<&RoomInstance> {
        let mut v: Vec<&RoomInstance> = self.rooms.iter().collect();
        v.sort_by_key(|r| r.tau);
        v
    }

    pub fn neighbors(&self, room: RoomId) -> Vec<RoomId> {
        self.adjacency
            .iter()
            .filter_map(|&(a, b)| {
                if a == room {
                    Some(b)
                } else if b == room {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilityInstance {
    pub id: String,
    pub def: String,
    pub room: RoomId,
    /// Pose in the room-local frame.
    pub pose: Pose,
    pub positioning: Positioning,
}

/// Topological reference of a placed mechanic, kept for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopoEcho {
    pub kind: TopoKind,
    pub target: String,
    pub threshold: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicPlacement {
    pub id: String,
    pub mechanic: String,
    pub room: RoomId,
    /// Pose in the room-local frame.
    pub pose: Pose,
    #[serde(default)]
    pub standard_constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub topo: Vec<TopoEcho>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub seed: u64,
    #[serde(default)]
    pub group: Option<String>,
    pub skeleton: LevelSkeleton,
    pub facilities: Vec<FacilityInstance>,
    pub mechanics: Vec<MechanicPlacement>,
}

impl Level {
    pub fn room(&self, id: RoomId) -> &RoomInstance {
        &self.skeleton.rooms[id]
    }

    pub fn facilities_in(&self, room: RoomId) -> impl Iterator<Item = &FacilityInstance> {
        self.facilities.iter().filter(move |f| f.room == room)
    }

    /// Stable hash of the canonical JSON form.
    pub fn content_hash(&self) -> u64 {
        let bytes = crate::export::export_level_json(self);
        let mut h = std::collections::hash_map::DefaultHasher::new();
        bytes.hash(&mut h);
        h.finish()
    }
}
