//! LiDAR obstacle detector: height-band cutoff, grid clustering with noise
//! rejection, and occupancy assessment against the safe zone.

use crate::geometry::{Point2, Point3};
use crate::safe_zone::{SafeZone, ZoneClass};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub timestamp_ns: u64,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, timestamp_ns: u64) -> Self {
        Self { points, timestamp_ns }
    }

    pub fn is_valid(&self) -> bool {
        self.points.iter().all(|p| p.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Returns below this height are treated as ground or ghost points.
    pub z_cutoff: f32,
    pub z_max: f32,
    pub cluster_cell: f64,
    pub min_cluster_points: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { z_cutoff: 0.15, z_max: 2.5, cluster_cell: 0.2, min_cluster_points: 3 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("z_cutoff must be below z_max")]
    HeightBand,
    #[error("cluster_cell must be positive")]
    CellSize,
    #[error("min_cluster_points must be at least 1")]
    MinPoints,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(self.z_cutoff.is_finite() && self.z_max.is_finite() && self.z_cutoff < self.z_max) {
            return Err(DetectorError::HeightBand);
        }
        if !(self.cluster_cell.is_finite() && self.cluster_cell > 0.0) {
            return Err(DetectorError::CellSize);
        }
        if self.min_cluster_points == 0 {
            return Err(DetectorError::MinPoints);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub member_points: Vec<Point2>,
    pub centroid: Point2,
    pub point_count: usize,
}

impl Cluster {
    pub fn from_points(member_points: Vec<Point2>) -> Self {
        let n = member_points.len() as f64;
        let (sx, sy) = member_points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Self { centroid: Point2::new(sx / n, sy / n), point_count: member_points.len(), member_points }
    }
}

/// Cage state as shown to the safety driver; ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CageState {
    #[serde(rename = "Safe Zone Free")]
    SafeZoneFree,
    #[serde(rename = "Focus Zone Occupied")]
    FocusZoneOccupied,
    #[serde(rename = "Clear Zone Occupied")]
    ClearZoneOccupied,
}

impl CageState {
    pub fn label(self) -> &'static str {
        match self {
            CageState::SafeZoneFree => "Safe Zone Free",
            CageState::FocusZoneOccupied => "Focus Zone Occupied",
            CageState::ClearZoneOccupied => "Clear Zone Occupied",
        }
    }
}

/// Zone occupancy verdict. The offending cluster is present whenever the
/// zone is occupied, except for [`ZoneOccupancy::sensor_missing`], where the
/// fail-safe verdict has no cluster to blame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneOccupancy {
    pub value: CageState,
    pub offending_cluster: Option<Cluster>,
}

impl ZoneOccupancy {
    pub fn free() -> Self {
        Self { value: CageState::SafeZoneFree, offending_cluster: None }
    }

    pub fn sensor_missing() -> Self {
        Self { value: CageState::ClearZoneOccupied, offending_cluster: None }
    }
}

pub fn filter_ground(cloud: &PointCloud, cfg: &DetectorConfig) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().copied().filter(|p| p.z >= cfg.z_cutoff && p.z <= cfg.z_max).collect(),
        timestamp_ns: cloud.timestamp_ns,
    }
}

type Cell = (i64, i64);

fn cell_of(p: Point2, size: f64) -> Cell {
    ((p.x / size).floor() as i64, (p.y / size).floor() as i64)
}

/// Grid connected components over 8-connected occupied cells.
///
/// Clusters come out in order of their earliest member point, and members
/// keep input order, so the result depends only on the input sequence.
pub fn cluster(cloud: &PointCloud, cfg: &DetectorConfig) -> Vec<Cluster> {
    let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
    let mut cell_order: Vec<Cell> = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let key = cell_of(p.planar(), cfg.cluster_cell);
        cells
            .entry(key)
            .or_insert_with(|| {
                cell_order.push(key);
                Vec::new()
            })
            .push(i);
    }

    let mut group_of: HashMap<Cell, usize> = HashMap::with_capacity(cells.len());
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for &seed in &cell_order {
        if group_of.contains_key(&seed) {
            continue;
        }
        let id = groups.len();
        let mut members = Vec::new();
        group_of.insert(seed, id);
        stack.push(seed);
        while let Some((cx, cy)) = stack.pop() {
            members.extend_from_slice(&cells[&(cx, cy)]);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let n = (cx + dx, cy + dy);
                    if cells.contains_key(&n) && !group_of.contains_key(&n) {
                        group_of.insert(n, id);
                        stack.push(n);
                    }
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }

    groups
        .into_iter()
        .filter(|g| g.len() >= cfg.min_cluster_points)
        .map(|g| Cluster::from_points(g.into_iter().map(|i| cloud.points[i].planar()).collect()))
        .collect()
}

/// Clear-zone hits dominate focus-zone hits; the offending cluster is the one
/// holding the first point of the dominant class.
pub fn assess(clusters: &[Cluster], zone: &SafeZone) -> ZoneOccupancy {
    let mut focus_hit: Option<&Cluster> = None;
    for c in clusters {
        for &p in &c.member_points {
            match zone.contains(p) {
                ZoneClass::Clear => {
                    return ZoneOccupancy { value: CageState::ClearZoneOccupied, offending_cluster: Some(c.clone()) };
                }
                ZoneClass::FocusOnly if focus_hit.is_none() => focus_hit = Some(c),
                _ => {}
            }
        }
    }
    match focus_hit {
        Some(c) => ZoneOccupancy { value: CageState::FocusZoneOccupied, offending_cluster: Some(c.clone()) },
        None => ZoneOccupancy::free(),
    }
}

/// Result of running the whole detector on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub occupancy: ZoneOccupancy,
    pub filtered_points: usize,
    pub clusters: usize,
}

pub fn detect(cloud: &PointCloud, zone: &SafeZone, cfg: &DetectorConfig) -> Detection {
    let filtered = filter_ground(cloud, cfg);
    let clusters = cluster(&filtered, cfg);
    Detection { occupancy: assess(&clusters, zone), filtered_points: filtered.points.len(), clusters: clusters.len() }
}
