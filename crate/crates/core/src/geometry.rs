//! Planar primitives shared by the zone, detector and simulator.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Mirror about the lateral (y) axis.
    pub fn mirror_x(self) -> Self {
        Self::new(-self.x, self.y)
    }

    /// Mirror about the longitudinal (x) axis.
    pub fn mirror_y(self) -> Self {
        Self::new(self.x, -self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// LiDAR return in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f32; 3]", into = "[f32; 3]")]
pub struct Point3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Point3 {
    pub const fn new(x: f32, y: f32, z: f32) -> Self {
        Self { x, y, z }
    }

    pub fn planar(self) -> Point2 {
        Point2::new(f64::from(self.x), f64::from(self.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f32; 3]> for Point3 {
    fn from([x, y, z]: [f32; 3]) -> Self {
        Self { x, y, z }
    }
}

impl From<Point3> for [f32; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// World-frame pose; heading in radians, counter-clockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Map a world point into this pose's frame (x forward, y left).
    pub fn to_local(&self, p: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point2::new(c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn to_world(&self, p: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn expand(&self, d: f64) -> Rect {
        Rect { min_x: self.min_x - d, max_x: self.max_x + d, min_y: self.min_y - d, max_y: self.max_y + d }
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.min_x, self.min_y),
            Point2::new(self.max_x, self.min_y),
            Point2::new(self.max_x, self.max_y),
            Point2::new(self.min_x, self.max_y),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Turn {
    Left,
    Right,
}

impl Turn {
    fn sign(self) -> f64 {
        match self {
            Turn::Left => 1.0,
            Turn::Right => -1.0,
        }
    }
}

/// Ring segment swept around a turning center.
///
/// Angles are measured at the center, starting from the direction that points
/// back at the vehicle origin and growing in the direction of forward travel,
/// so one parametrisation serves both turn directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularSector {
    pub center: Point2,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub start_angle: f64,
    pub end_angle: f64,
    pub turn: Turn,
}

impl AnnularSector {
    pub fn angle_of(&self, p: Point2) -> f64 {
        let ux = p.x - self.center.x;
        let uy = p.y - self.center.y;
        ux.atan2(-self.turn.sign() * uy)
    }

    pub fn contains(&self, p: Point2) -> bool {
        let r = (p.x - self.center.x).hypot(p.y - self.center.y);
        if r < self.inner_radius || r > self.outer_radius {
            return false;
        }
        let phi = self.angle_of(p);
        phi >= self.start_angle && phi <= self.end_angle
    }

    pub fn point_at(&self, radius: f64, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(self.center.x + radius * s, self.center.y - self.turn.sign() * radius * c)
    }

    /// Closed outline approximating the sector with `segments` chords per arc.
    pub fn outline(&self, segments: usize) -> Vec<Point2> {
        let segments = segments.max(1);
        let span = self.end_angle - self.start_angle;
        let mut out = Vec::with_capacity(2 * segments + 2);
        for i in 0..=segments {
            let a = self.start_angle + span * i as f64 / segments as f64;
            out.push(self.point_at(self.outer_radius, a));
        }
        if self.inner_radius > 0.0 {
            for i in (0..=segments).rev() {
                let a = self.start_angle + span * i as f64 / segments as f64;
                out.push(self.point_at(self.inner_radius, a));
            }
        } else {
            out.push(self.center);
        }
        out
    }
}

pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len2 = abx * abx + aby * aby;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0);
    p.distance(Point2::new(a.x + t * abx, a.y + t * aby))
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

pub fn segment_segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Iterate the closed edges of a polygon ring.
pub fn edges(polygon: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = polygon.len();
    (0..n).map(move |i| (polygon[i], polygon[(i + 1) % n]))
}

/// Even-odd point-in-polygon test.
pub fn polygon_contains(polygon: &[Point2], p: Point2) -> bool {
    let mut inside = false;
    for (a, b) in edges(polygon) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Ray `origin + t * dir` against segment `a`-`b`; returns `t` of the hit.
pub fn ray_segment(origin: Point2, dir: Point2, a: Point2, b: Point2) -> Option<f64> {
    let ex = b.x - a.x;
    let ey = b.y - a.y;
    let denom = dir.x * ey - dir.y * ex;
    if denom.abs() < 1e-12 {
        return None;
    }
    let wx = a.x - origin.x;
    let wy = a.y - origin.y;
    let t = (wx * ey - wy * ex) / denom;
    let u = (wx * dir.y - wy * dir.x) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// True if two polygons share any area or touch.
pub fn polygons_overlap(a: &[Point2], b: &[Point2]) -> bool {
    for (p, q) in edges(a) {
        for (r, s) in edges(b) {
            if segments_intersect(p, q, r, s) {
                return true;
            }
        }
    }
    a.first().is_some_and(|&p| polygon_contains(b, p)) || b.first().is_some_and(|&p| polygon_contains(a, p))
}

/// A polygon is simple if no two non-adjacent edges intersect.
pub fn polygon_is_simple(polygon: &[Point2]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let e: Vec<_> = edges(polygon).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if !adjacent && segments_intersect(e[i].0, e[i].1, e[j].0, e[j].1) {
                return false;
            }
        }
    }
    true
}
