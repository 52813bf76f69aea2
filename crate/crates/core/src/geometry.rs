//! Axis-aligned geometry shared by the optimizers, the nav grid and export.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

/// Bounding-box extents in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    pub width: f64,
    pub length: f64,
    pub height: f64,
}

impl Dimensions {
    pub const fn new(width: f64, length: f64, height: f64) -> Self {
        Self { width, length, height }
    }

    pub fn is_valid(&self) -> bool {
        [self.width, self.length, self.height]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }

    pub fn footprint_area(&self) -> f64 {
        self.width * self.length
    }
}

/// Planar rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn from_origin(origin: [f64; 2], width: f64, length: f64) -> Self {
        Self::new(origin[0], origin[1], origin[0] + width, origin[1] + length)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn length(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.x0 + self.x1) * 0.5, (self.y0 + self.y1) * 0.5]
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.length().max(0.0)
    }

    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn strictly_contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }

    /// Overlap lengths along x and y (negative when separated).
    pub fn overlap_extents(&self, other: &Rect) -> (f64, f64) {
        (
            self.x1.min(other.x1) - self.x0.max(other.x0),
            self.y1.min(other.y1) - self.y0.max(other.y0),
        )
    }

    /// Positive-area intersection; touching rectangles do not overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        let (ox, oy) = self.overlap_extents(other);
        ox > EPS && oy > EPS
    }

    /// Minimal axis-aligned translation separating the two rectangles.
    pub fn penetration_depth(&self, other: &Rect) -> f64 {
        let (ox, oy) = self.overlap_extents(other);
        if ox > 0.0 && oy > 0.0 {
            ox.min(oy)
        } else {
            0.0
        }
    }

    /// Euclidean gap between the closest points of the two rectangles.
    pub fn gap(&self, other: &Rect) -> f64 {
        let dx = (self.x0 - other.x1).max(other.x0 - self.x1).max(0.0);
        let dy = (self.y0 - other.y1).max(other.y0 - self.y1).max(0.0);
        dx.hypot(dy)
    }

    /// Boundary segment shared with `other`, if they touch along a wall of
    /// positive length.
    pub fn shared_edge(&self, other: &Rect) -> Option<SharedEdge> {
        let touch_x = (self.x1 - other.x0).abs() < EPS || (other.x1 - self.x0).abs() < EPS;
        let touch_y = (self.y1 - other.y0).abs() < EPS || (other.y1 - self.y0).abs() < EPS;
        if touch_x {
            let coord = if (self.x1 - other.x0).abs() < EPS { self.x1 } else { self.x0 };
            let e = SharedEdge {
                axis: WallAxis::X,
                coord,
                from: self.y0.max(other.y0),
                to: self.y1.min(other.y1),
            };
            if !e.is_empty() {
                return Some(e);
            }
        }
        if touch_y {
            let coord = if (self.y1 - other.y0).abs() < EPS { self.y1 } else { self.y0 };
            let e = SharedEdge {
                axis: WallAxis::Y,
                coord,
                from: self.x0.max(other.x0),
                to: self.x1.min(other.x1),
            };
            if !e.is_empty() {
                return Some(e);
            }
        }
        None
    }

    pub fn within(&self, outer: &Rect) -> bool {
        self.x0 >= outer.x0 - EPS
            && self.y0 >= outer.y0 - EPS
            && self.x1 <= outer.x1 + EPS
            && self.y1 <= outer.y1 + EPS
    }
}

pub const EPS: f64 = 1e-9;

/// Rooms must share at least this much wall to be connected: one door cell
/// plus a wall cell on either side of it.
pub const MIN_SHARED_WALL: f64 = 3.0;

/// Normal direction of a wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallAxis {
    /// Wall on a constant-x line, spanning y.
    X,
    /// Wall on a constant-y line, spanning x.
    Y,
}

/// Common boundary segment of two touching rectangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedEdge {
    pub axis: WallAxis,
    pub coord: f64,
    pub from: f64,
    pub to: f64,
}

impl SharedEdge {
    pub fn len(&self) -> f64 {
        self.to - self.from
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= EPS
    }

    pub fn midpoint(&self) -> [f64; 2] {
        let m = (self.from + self.to) * 0.5;
        match self.axis {
            WallAxis::X => [self.coord, m],
            WallAxis::Y => [m, self.coord],
        }
    }
}

/// Axis-aligned box in 3D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    /// Segment/box test by slab clipping. Only proper crossings of the open
    /// interior count; grazing a face does not.
    pub fn intersects_segment(&self, p0: [f64; 3], p1: [f64; 3]) -> bool {
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for axis in 0..3 {
            let d = p1[axis] - p0[axis];
            let (lo, hi) = (self.min[axis], self.max[axis]);
            if d.abs() < EPS {
                if p0[axis] <= lo + EPS || p0[axis] >= hi - EPS {
                    return false;
                }
            } else {
                let a = (lo - p0[axis]) / d;
                let b = (hi - p0[axis]) / d;
                let (near, far) = if a < b { (a, b) } else { (b, a) };
                t0 = t0.max(near);
                t1 = t1.min(far);
                if t1 - t0 <= EPS {
                    return false;
                }
            }
        }
        true
    }
}

/// Placement of a box: center in the room-local frame, yaw about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub center: [f64; 3],
    pub yaw: f64,
    pub dims: Dimensions,
}

impl Pose {
    /// Pose resting on the floor at `(x, y)`.
    pub fn on_floor(x: f64, y: f64, yaw: f64, dims: Dimensions) -> Self {
        Self { center: [x, y, dims.height * 0.5], yaw: normalize_yaw(yaw), dims }
    }

    /// Half extents of the yawed footprint along x and y.
    pub fn half_extents(&self) -> (f64, f64) {
        footprint_half_extents(self.dims, self.yaw)
    }

    pub fn footprint(&self) -> Rect {
        let (hx, hy) = self.half_extents();
        Rect::new(
            self.center[0] - hx,
            self.center[1] - hy,
            self.center[0] + hx,
            self.center[1] + hy,
        )
    }

    pub fn aabb(&self) -> Aabb {
        let r = self.footprint();
        let hz = self.dims.height * 0.5;
        Aabb {
            min: [r.x0, r.y0, self.center[2] - hz],
            max: [r.x1, r.y1, self.center[2] + hz],
        }
    }

    pub fn planar(&self) -> [f64; 2] {
        [self.center[0], self.center[1]]
    }

    /// Unit facing direction in the floor plane.
    pub fn facing(&self) -> [f64; 2] {
        [self.yaw.cos(), self.yaw.sin()]
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        dist3(self.center, other.center)
    }
}

pub fn footprint_half_extents(dims: Dimensions, yaw: f64) -> (f64, f64) {
    let q = (yaw / FRAC_PI_2).round();
    if (yaw - q * FRAC_PI_2).abs() < 1e-9 {
        if (q as i64).rem_euclid(2) == 0 {
            (dims.width * 0.5, dims.length * 0.5)
        } else {
            (dims.length * 0.5, dims.width * 0.5)
        }
    } else {
        let (s, c) = yaw.sin_cos();
        (
            (c.abs() * dims.width + s.abs() * dims.length) * 0.5,
            (s.abs() * dims.width + c.abs() * dims.length) * 0.5,
        )
    }
}

/// The four axis-aligned yaws, in radians.
pub const QUARTER_YAWS: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];

pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(TAU);
    if y >= TAU - 1e-12 {
        0.0
    } else {
        y
    }
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
