//! Clear and focus danger zones around the ego-vehicle.
//!
//! The zone is expressed in the vehicle frame: origin at the vehicle center,
//! x forward, y to the left. Its reach along the travel direction is the
//! braking path `v * t_r + v^2 / (2 a)` scaled by the active driving mode.
//! Near-zero steering yields a rectangle; otherwise the footprint box is
//! joined by an annular sector that follows the kinematic turning circle.
//! Reverse gear mirrors everything behind the vehicle.

use crate::geometry::{AnnularSector, Point2, Pose, Rect, Turn};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Arc chords per sector side in the serialized outline (two arcs + box stay under 64 vertices).
const OUTLINE_ARC_SEGMENTS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Gear {
    #[default]
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    /// m/s, never negative; direction comes from `gear`.
    pub speed: f64,
    /// Radians, left positive.
    pub steering_angle: f64,
    pub pose: Pose,
    pub gear: Gear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafeZoneConfig {
    pub max_decel: f64,
    pub reaction_time: f64,
    pub vehicle_width: f64,
    pub vehicle_length: f64,
    pub wheelbase: f64,
    pub max_steering_angle: f64,
    pub lateral_margin: f64,
    pub focus_overhead: f64,
    pub straight_threshold: f64,
    pub limited_zone_scale: f64,
}

impl Default for SafeZoneConfig {
    fn default() -> Self {
        Self {
            max_decel: 3.0,
            reaction_time: 0.8,
            vehicle_width: 2.0,
            vehicle_length: 4.5,
            wheelbase: 2.9,
            max_steering_angle: 0.6,
            lateral_margin: 0.3,
            focus_overhead: 0.5,
            straight_threshold: 0.05,
            limited_zone_scale: 0.6,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ZoneError {
    #[error("vehicle state is not finite")]
    NonFinite,
    #[error("speed {0} is negative")]
    NegativeSpeed(f64),
    #[error("steering angle {angle} exceeds the limit {limit}")]
    SteeringOutOfRange { angle: f64, limit: f64 },
    #[error("mode scale {0} is outside (0, 1]")]
    ModeScale(f64),
    #[error("invalid zone configuration: {0}")]
    Config(&'static str),
}

impl SafeZoneConfig {
    pub fn validate(&self) -> Result<(), ZoneError> {
        let positive = [
            (self.max_decel, "max_decel must be positive"),
            (self.vehicle_width, "vehicle_width must be positive"),
            (self.vehicle_length, "vehicle_length must be positive"),
            (self.wheelbase, "wheelbase must be positive"),
            (self.max_steering_angle, "max_steering_angle must be positive"),
            (self.focus_overhead, "focus_overhead must be positive"),
        ];
        for (value, msg) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ZoneError::Config(msg));
            }
        }
        let non_negative = [
            (self.reaction_time, "reaction_time must be non-negative"),
            (self.lateral_margin, "lateral_margin must be non-negative"),
            (self.straight_threshold, "straight_threshold must be non-negative"),
        ];
        for (value, msg) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ZoneError::Config(msg));
            }
        }
        if !(self.limited_zone_scale > 0.0 && self.limited_zone_scale <= 1.0) {
            return Err(ZoneError::Config("limited_zone_scale must be in (0, 1]"));
        }
        if self.max_steering_angle >= PI / 2.0 {
            return Err(ZoneError::Config("max_steering_angle must be below pi/2"));
        }
        Ok(())
    }

    /// Braking path at `speed`, before mode scaling.
    pub fn braking_path(&self, speed: f64) -> f64 {
        speed * self.reaction_time + speed * speed / (2.0 * self.max_decel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeKind {
    Rectangle,
    CircleSegment,
}

/// Union of a rectangle and an optional swept sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub body: Rect,
    pub sweep: Option<AnnularSector>,
}

impl Region {
    pub fn contains(&self, p: Point2) -> bool {
        self.body.contains(p) || self.sweep.is_some_and(|s| s.contains(p))
    }

    fn outline(&self, gear: Gear) -> Vec<Vec<Point2>> {
        let mut rings = vec![self.body.corners().to_vec()];
        if let Some(sweep) = &self.sweep {
            rings.push(sweep.outline(OUTLINE_ARC_SEGMENTS));
        }
        if gear == Gear::Reverse {
            for ring in &mut rings {
                for p in ring.iter_mut() {
                    *p = p.mirror_x();
                }
                ring.reverse();
            }
        }
        rings
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ZoneClass {
    Outside,
    FocusOnly,
    Clear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeZone {
    /// Regions are stored for forward travel; `gear` mirrors queries.
    pub clear_region: Region,
    pub focus_region: Region,
    pub shape_kind: ShapeKind,
    pub lookahead_distance: f64,
    pub gear: Gear,
    /// Kinematic turning radius for circle segments.
    pub turning_radius: Option<f64>,
}

impl SafeZone {
    fn to_forward(&self, p: Point2) -> Point2 {
        match self.gear {
            Gear::Forward => p,
            Gear::Reverse => p.mirror_x(),
        }
    }

    pub fn contains(&self, p: Point2) -> ZoneClass {
        let q = self.to_forward(p);
        if self.clear_region.contains(q) {
            ZoneClass::Clear
        } else if self.focus_region.contains(q) {
            ZoneClass::FocusOnly
        } else {
            ZoneClass::Outside
        }
    }

    pub fn outline(&self) -> ZoneOutline {
        ZoneOutline { shape: self.shape_kind, clear: self.clear_region.outline(self.gear), focus: self.focus_region.outline(self.gear) }
    }
}

/// Polygonal approximation for the wire and UI. Each region is a list of
/// rings whose union is the region; at most 64 vertices per region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneOutline {
    pub shape: ShapeKind,
    pub clear: Vec<Vec<Point2>>,
    pub focus: Vec<Vec<Point2>>,
}

impl ZoneOutline {
    pub fn vertex_counts(&self) -> (usize, usize) {
        let count = |rings: &Vec<Vec<Point2>>| rings.iter().map(Vec::len).sum();
        (count(&self.clear), count(&self.focus))
    }
}

/// Compute the zone for `state`. `mode_scale` is 1 in fully autonomous
/// driving and `cfg.limited_zone_scale` in limited autonomous driving; it
/// shrinks both the braking reach and the lateral margin.
pub fn compute_zone(state: &VehicleState, cfg: &SafeZoneConfig, mode_scale: f64) -> Result<SafeZone, ZoneError> {
    if !(state.speed.is_finite() && state.steering_angle.is_finite()) {
        return Err(ZoneError::NonFinite);
    }
    if state.speed < 0.0 {
        return Err(ZoneError::NegativeSpeed(state.speed));
    }
    if state.steering_angle.abs() > cfg.max_steering_angle {
        return Err(ZoneError::SteeringOutOfRange { angle: state.steering_angle, limit: cfg.max_steering_angle });
    }
    if !(mode_scale > 0.0 && mode_scale <= 1.0) {
        return Err(ZoneError::ModeScale(mode_scale));
    }

    let lookahead = mode_scale * cfg.braking_path(state.speed);
    let margin = cfg.lateral_margin * mode_scale;
    let half_width = cfg.vehicle_width / 2.0 + margin;
    let half_length = cfg.vehicle_length / 2.0 + margin;
    let overhead = cfg.focus_overhead;
    let body = Rect { min_x: -half_length, max_x: half_length, min_y: -half_width, max_y: half_width };

    let steering = state.steering_angle;
    if steering.abs() <= cfg.straight_threshold {
        let clear = Rect { max_x: half_length + lookahead, ..body };
        return Ok(SafeZone {
            clear_region: Region { body: clear, sweep: None },
            focus_region: Region { body: clear.expand(overhead), sweep: None },
            shape_kind: ShapeKind::Rectangle,
            lookahead_distance: lookahead,
            gear: state.gear,
            turning_radius: None,
        });
    }

    let radius = cfg.wheelbase / steering.abs().tan();
    let turn = if steering > 0.0 { Turn::Left } else { Turn::Right };
    let center = match turn {
        Turn::Left => Point2::new(0.0, radius),
        Turn::Right => Point2::new(0.0, -radius),
    };
    let clear_sweep = (lookahead > 0.0).then(|| AnnularSector {
        center,
        inner_radius: (radius - half_width).max(0.0),
        outer_radius: radius + half_width,
        start_angle: 0.0,
        end_angle: ((half_length / radius).atan() + lookahead / radius).min(PI),
        turn,
    });
    let focus_sweep = clear_sweep.map(|s| AnnularSector {
        inner_radius: (s.inner_radius - overhead).max(0.0),
        outer_radius: s.outer_radius + overhead,
        start_angle: (s.start_angle - overhead / radius).max(-PI),
        end_angle: (s.end_angle + overhead / radius).min(PI),
        ..s
    });
    Ok(SafeZone {
        clear_region: Region { body, sweep: clear_sweep },
        focus_region: Region { body: body.expand(overhead), sweep: focus_sweep },
        shape_kind: ShapeKind::CircleSegment,
        lookahead_distance: lookahead,
        gear: state.gear,
        turning_radius: Some(radius),
    })
}
