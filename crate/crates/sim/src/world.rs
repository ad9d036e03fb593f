//! Static and dynamic obstacles, routes and destinations in the world frame.

use cage_core::geometry::{self, Point2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    #[default]
    Wall,
    Block,
    Pedestrian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub kind: ObstacleKind,
    /// World frame, counter-clockwise or clockwise, not closed.
    pub polygon: Vec<Point2>,
    /// Top of the obstacle in meters; LiDAR layers above it miss.
    pub height: f64,
    /// m/s, world frame.
    pub velocity: Point2,
}

impl Obstacle {
    pub fn translate(&mut self, d: Point2) {
        for p in &mut self.polygon {
            p.x += d.x;
            p.y += d.y;
        }
    }

    pub fn is_moving(&self) -> bool {
        self.velocity.x != 0.0 || self.velocity.y != 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub waypoints: Vec<Point2>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationDef {
    pub id: String,
    pub name: String,
    pub position: Point2,
    /// Route the autonomy follows to get there.
    pub route: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldMap {
    pub obstacles: Vec<Obstacle>,
    pub routes: BTreeMap<String, Route>,
    pub destinations: Vec<DestinationDef>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WorldError {
    #[error("obstacle `{0}` is not a simple polygon with at least 3 finite vertices")]
    BadPolygon(String),
    #[error("duplicate obstacle id `{0}`")]
    DuplicateObstacle(String),
    #[error("route `{0}` needs at least 2 waypoints")]
    ShortRoute(String),
    #[error("destination `{dest}` references unknown route `{route}`")]
    UnknownRoute { dest: String, route: String },
    #[error("unknown obstacle `{0}`")]
    UnknownObstacle(String),
    #[error("unknown destination `{0}`")]
    UnknownDestination(String),
}

pub fn check_polygon(obstacle: &Obstacle) -> Result<(), WorldError> {
    let ok =
        obstacle.polygon.len() >= 3 && obstacle.polygon.iter().all(|p| p.is_finite()) && geometry::polygon_is_simple(&obstacle.polygon);
    if ok {
        Ok(())
    } else {
        Err(WorldError::BadPolygon(obstacle.id.clone()))
    }
}

impl WorldMap {
    pub fn validate(&self) -> Result<(), WorldError> {
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.obstacles {
            check_polygon(o)?;
            if !seen.insert(o.id.as_str()) {
                return Err(WorldError::DuplicateObstacle(o.id.clone()));
            }
        }
        for (name, r) in &self.routes {
            if r.waypoints.len() < 2 {
                return Err(WorldError::ShortRoute(name.clone()));
            }
        }
        for d in &self.destinations {
            if !self.routes.contains_key(&d.route) {
                return Err(WorldError::UnknownRoute { dest: d.id.clone(), route: d.route.clone() });
            }
        }
        Ok(())
    }

    pub fn obstacle_index(&self, id: &str) -> Option<usize> {
        self.obstacles.iter().position(|o| o.id == id)
    }

    pub fn destination(&self, id: &str) -> Option<&DestinationDef> {
        self.destinations.iter().find(|d| d.id == id)
    }

    /// Smallest distance from segment `a`-`b` to any obstacle; zero on overlap.
    pub fn segment_clearance(&self, a: Point2, b: Point2) -> f64 {
        self.obstacles
            .iter()
            .map(|o| {
                if geometry::polygon_contains(&o.polygon, a) {
                    return 0.0;
                }
                geometry::edges(&o.polygon).map(|(c, d)| geometry::segment_segment_distance(a, b, c, d)).fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn overlaps(&self, polygon: &[Point2]) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| geometry::polygons_overlap(&o.polygon, polygon))
    }

    pub fn advance(&mut self, dt: f64) {
        for o in self.obstacles.iter_mut().filter(|o| o.is_moving()) {
            let d = Point2::new(o.velocity.x * dt, o.velocity.y * dt);
            o.translate(d);
        }
    }
}

pub fn rect(center: Point2, size: [f64; 2], heading: f64) -> Vec<Point2> {
    let (s, c) = heading.sin_cos();
    let (hx, hy) = (size[0] / 2.0, size[1] / 2.0);
    [(hx, hy), (-hx, hy), (-hx, -hy), (hx, -hy)]
        .iter()
        .map(|&(x, y)| Point2::new(center.x + c * x - s * y, center.y + s * x + c * y))
        .collect()
}

/// Thick polyline split into one quad per segment.
pub fn wall(points: &[Point2], thickness: f64) -> Vec<Vec<Point2>> {
    points
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0], w[1]);
            let len = a.distance(b);
            if len <= 0.0 {
                return None;
            }
            let mid = Point2::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
            Some(rect(mid, [len, thickness], (b.y - a.y).atan2(b.x - a.x)))
        })
        .collect()
}

/// Closed stadium curve: two straights of `straight` along x joined by half
/// circles of `radius`, centered on `center`, counter-clockwise from the
/// start of the lower straight.
pub fn stadium(center: Point2, straight: f64, radius: f64, arc_segments: usize) -> Vec<Point2> {
    let h = straight / 2.0;
    let mut pts = Vec::new();
    let steps = (straight / 2.0).ceil().max(1.0) as usize;
    for i in 0..steps {
        pts.push(Point2::new(center.x - h + straight * i as f64 / steps as f64, center.y - radius));
    }
    for i in 0..arc_segments {
        let a = -PI / 2.0 + PI * i as f64 / arc_segments as f64;
        pts.push(Point2::new(center.x + h + radius * a.cos(), center.y + radius * a.sin()));
    }
    for i in 0..steps {
        pts.push(Point2::new(center.x + h - straight * i as f64 / steps as f64, center.y + radius));
    }
    for i in 0..arc_segments {
        let a = PI / 2.0 + PI * i as f64 / arc_segments as f64;
        pts.push(Point2::new(center.x - h + radius * a.cos(), center.y + radius * a.sin()));
    }
    pts
}
