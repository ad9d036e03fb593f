//! Synthetic LiDAR and camera frames.

use crate::world::WorldMap;
use cage_core::camera::{CameraFrame, CameraId};
use cage_core::geometry::{self, normalize_angle, Point2, Point3, Pose};
use cage_core::lidar::PointCloud;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    pub rays: usize,
    pub max_range: f64,
    /// Heights at which every planar hit is emitted.
    pub layers: Vec<f32>,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self { rays: 720, max_range: 30.0, layers: vec![0.3, 0.9, 1.5] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePreset {
    None,
    #[default]
    Default,
    Ghost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Gaussian range jitter, meters.
    pub range_sigma: f64,
    /// Points per frame scattered below `ground_max_z`.
    pub ground_ghosts: usize,
    pub ground_max_z: f32,
    /// Mean number of airborne ghost groups per frame.
    pub air_groups: f64,
    pub air_group_size: usize,
    pub air_group_spread: f64,
    /// Minimum distance between two ghost groups of one frame.
    pub air_group_separation: f64,
    pub air_z: [f32; 2],
    /// Ghosts are scattered over a disk of this radius around the sensor.
    pub ghost_radius: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::preset(NoisePreset::Default)
    }
}

impl NoiseConfig {
    pub fn preset(preset: NoisePreset) -> Self {
        let base = Self {
            range_sigma: 0.0,
            ground_ghosts: 0,
            ground_max_z: 0.12,
            air_groups: 0.0,
            air_group_size: 2,
            air_group_spread: 0.05,
            air_group_separation: 1.5,
            air_z: [0.3, 2.0],
            ghost_radius: 15.0,
        };
        match preset {
            NoisePreset::None => base,
            NoisePreset::Default => Self { range_sigma: 0.01, ground_ghosts: 60, ..base },
            NoisePreset::Ghost => Self { range_sigma: 0.01, ground_ghosts: 150, air_groups: 4.0, ..base },
        }
    }
}

/// Sensor-frame ray cast: the sensor sits at the vehicle center, ray 0 points
/// forward and rays advance counter-clockwise.
pub fn sample_lidar(
    world: &WorldMap,
    pose: Pose,
    cfg: &LidarConfig,
    noise: &NoiseConfig,
    rng: &mut ChaCha8Rng,
    timestamp_ns: u64,
) -> PointCloud {
    let n = cfg.rays;
    let step = TAU / n as f64;
    let origin = Point2::default();
    let mut hits: Vec<(f64, f64)> = vec![(f64::INFINITY, 0.0); n];

    for o in &world.obstacles {
        let local: Vec<Point2> = o.polygon.iter().map(|&p| pose.to_local(p)).collect();
        for (a, b) in geometry::edges(&local) {
            if geometry::point_segment_distance(origin, a, b) > cfg.max_range {
                continue;
            }
            let (aa, ab) = (a.y.atan2(a.x), b.y.atan2(b.x));
            let d = normalize_angle(ab - aa);
            let start = if d >= 0.0 { aa } else { ab };
            let k0 = (start / step).ceil() as i64;
            let k1 = ((start + d.abs()) / step).floor() as i64;
            for k in k0..=k1 {
                let idx = k.rem_euclid(n as i64) as usize;
                let (s, c) = (idx as f64 * step).sin_cos();
                if let Some(t) = geometry::ray_segment(origin, Point2::new(c, s), a, b) {
                    if t < hits[idx].0 {
                        hits[idx] = (t, o.height);
                    }
                }
            }
        }
    }

    let jitter = Normal::new(0.0, noise.range_sigma.max(0.0)).expect("finite sigma");
    let mut points = Vec::with_capacity(n * cfg.layers.len());
    for (idx, &(t, height)) in hits.iter().enumerate() {
        if t > cfg.max_range {
            continue;
        }
        let (s, c) = (idx as f64 * step).sin_cos();
        for &z in cfg.layers.iter().filter(|&&z| f64::from(z) < height) {
            let r = if noise.range_sigma > 0.0 { t + jitter.sample(rng) } else { t };
            points.push(Point3::new((c * r) as f32, (s * r) as f32, z));
        }
    }

    for _ in 0..noise.ground_ghosts {
        let p = disk_point(rng, noise.ghost_radius);
        let z = rng.random_range(0.0..noise.ground_max_z.max(f32::EPSILON));
        points.push(Point3::new(p.x as f32, p.y as f32, z));
    }

    if noise.air_groups > 0.0 {
        let count = Poisson::new(noise.air_groups).expect("positive rate").sample(rng) as usize;
        let mut centers: Vec<Point2> = Vec::with_capacity(count);
        for _ in 0..count {
            let mut candidate = None;
            for _ in 0..32 {
                let c = disk_point(rng, noise.ghost_radius);
                if centers.iter().all(|o| o.distance(c) >= noise.air_group_separation) {
                    candidate = Some(c);
                    break;
                }
            }
            let Some(c) = candidate else { continue };
            centers.push(c);
            for _ in 0..noise.air_group_size {
                let dx = rng.random_range(-noise.air_group_spread..=noise.air_group_spread);
                let dy = rng.random_range(-noise.air_group_spread..=noise.air_group_spread);
                let z = rng.random_range(noise.air_z[0]..noise.air_z[1]);
                points.push(Point3::new((c.x + dx) as f32, (c.y + dy) as f32, z));
            }
        }
    }

    PointCloud::new(points, timestamp_ns)
}

fn disk_point(rng: &mut ChaCha8Rng, radius: f64) -> Point2 {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..TAU);
    Point2::new(r * a.cos(), r * a.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    /// Gray level and noise amplitude of the leaves overlay.
    pub occlusion_level: u8,
    pub occlusion_noise: u8,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { width: 48, height: 36, occlusion_level: 40, occlusion_noise: 2 }
    }
}

/// Textured street scene scrolling with the odometer, or a flat overlay when
/// the lens is covered.
pub fn render_camera(
    id: CameraId,
    cfg: &CameraConfig,
    odometer: f64,
    blocked: bool,
    rng: &mut ChaCha8Rng,
    timestamp_ns: u64,
) -> CameraFrame {
    let (w, h) = (cfg.width, cfg.height);
    let shift = (odometer * 8.0) as u32;
    let pixels = (0..w * h)
        .map(|i| {
            if blocked {
                let n = i32::from(cfg.occlusion_noise);
                return (i32::from(cfg.occlusion_level) + rng.random_range(-n..=n)).clamp(0, 255) as u8;
            }
            let (x, y) = (i % w + shift, i / w);
            let base: i32 = if ((x / 4) + (y / 4)) % 2 == 0 { 60 } else { 190 };
            (base + rng.random_range(-3..=3)) as u8
        })
        .collect();
    CameraFrame::new(id, w, h, pixels, timestamp_ns)
}
