//! Reference models used to cross-check the cage. They are written from the
//! rule descriptions, not from the implementation, and favour plainness over
//! speed.

use cage_core::camera::SensorValidity;
use cage_core::geometry::Point2;
use cage_core::lidar::CageState;
use cage_core::mode::{CageMode, DrivingMode};
use cage_core::safe_zone::{Gear, SafeZoneConfig, VehicleState, ZoneClass};

use DrivingMode::*;

/// Driving mode after one tick, for a state and a single optional request.
pub fn expected_driving(
    driving: DrivingMode,
    cage: CageMode,
    occupancy: CageState,
    camera: SensorValidity,
    request: Option<DrivingMode>,
    has_control: bool,
) -> DrivingMode {
    let violation = cage == CageMode::On && (occupancy == CageState::ClearZoneOccupied || camera == SensorValidity::Invalid);
    // an in-vehicle driver is never braked by the monitor
    let braked_by_violation = |m: DrivingMode| violation && m != InPlaceManualDriving && m != EmergencyStop;
    if driving == EmergencyStop {
        return match request {
            Some(r) if has_control && r != EmergencyStop && !braked_by_violation(r) => r,
            _ => EmergencyStop,
        };
    }
    if braked_by_violation(driving) {
        return EmergencyStop;
    }
    let Some(r) = request.filter(|_| has_control) else { return driving };
    if r == EmergencyStop {
        return EmergencyStop;
    }
    if r != LimitedAutonomousDriving && violation {
        return driving;
    }
    if braked_by_violation(r) {
        EmergencyStop
    } else {
        r
    }
}

/// Membership of `p` (vehicle frame) in the clear and focus zones.
pub fn zone_class(state: &VehicleState, cfg: &SafeZoneConfig, mode_scale: f64, p: Point2) -> ZoneClass {
    let mut x = p.x;
    let mut y = p.y;
    if state.gear == Gear::Reverse {
        x = -x;
    }
    let v = state.speed;
    let reach = mode_scale * (v * cfg.reaction_time + v * v / (2.0 * cfg.max_decel));
    let half_w = 0.5 * cfg.vehicle_width + mode_scale * cfg.lateral_margin;
    let half_l = 0.5 * cfg.vehicle_length + mode_scale * cfg.lateral_margin;
    let ov = cfg.focus_overhead;

    let in_box = |x: f64, y: f64, grow: f64, front: f64| x >= -half_l - grow && x <= front + grow && y.abs() <= half_w + grow;

    let delta = state.steering_angle;
    if delta.abs() <= cfg.straight_threshold {
        return if in_box(x, y, 0.0, half_l + reach) {
            ZoneClass::Clear
        } else if in_box(x, y, ov, half_l + reach) {
            ZoneClass::FocusOnly
        } else {
            ZoneClass::Outside
        };
    }

    // fold right turns onto left turns
    if delta < 0.0 {
        y = -y;
    }
    let radius = cfg.wheelbase / delta.abs().tan();
    let rho = (x * x + (radius - y) * (radius - y)).sqrt();
    // angle travelled around the turning center, zero at the rear axle line
    let theta = x.atan2(radius - y);
    let sweep_end = ((half_l / radius).atan() + reach / radius).min(std::f64::consts::PI);
    let r_in = (radius - half_w).max(0.0);
    let r_out = radius + half_w;

    let in_clear_sweep = reach > 0.0 && rho >= r_in && rho <= r_out && theta >= 0.0 && theta <= sweep_end;
    if in_box(x, y, 0.0, half_l) || in_clear_sweep {
        return ZoneClass::Clear;
    }
    let pi = std::f64::consts::PI;
    let in_focus_sweep = reach > 0.0
        && rho >= (r_in - ov).max(0.0)
        && rho <= r_out + ov
        && theta >= (-ov / radius).max(-pi)
        && theta <= (sweep_end + ov / radius).min(pi);
    if in_box(x, y, ov, half_l) || in_focus_sweep {
        ZoneClass::FocusOnly
    } else {
        ZoneClass::Outside
    }
}

/// Zone classes on a square grid of `cell`-sized cells over `[min, max]`,
/// sampled at cell centers; row-major from `min`.
pub struct Raster {
    pub min: Point2,
    pub cell: f64,
    pub cols: usize,
    pub rows: usize,
    pub cells: Vec<ZoneClass>,
}

impl Raster {
    pub fn build(state: &VehicleState, cfg: &SafeZoneConfig, mode_scale: f64, min: Point2, max: Point2, cell: f64) -> Self {
        let cols = ((max.x - min.x) / cell).ceil() as usize;
        let rows = ((max.y - min.y) / cell).ceil() as usize;
        let mut cells = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(zone_class(state, cfg, mode_scale, Self::center_of(min, cell, c, r)));
            }
        }
        Self { min, cell, cols, rows, cells }
    }

    fn center_of(min: Point2, cell: f64, c: usize, r: usize) -> Point2 {
        Point2::new(min.x + (c as f64 + 0.5) * cell, min.y + (r as f64 + 0.5) * cell)
    }

    pub fn center(&self, c: usize, r: usize) -> Point2 {
        Self::center_of(self.min, self.cell, c, r)
    }

    pub fn get(&self, c: usize, r: usize) -> ZoneClass {
        self.cells[r * self.cols + c]
    }
}

/// Square around the vehicle that holds the whole focus zone, with slack.
pub fn zone_bounds(state: &VehicleState, cfg: &SafeZoneConfig, mode_scale: f64) -> (Point2, Point2) {
    let v = state.speed;
    let reach = mode_scale * (v * cfg.reaction_time + v * v / (2.0 * cfg.max_decel));
    let half_l = 0.5 * cfg.vehicle_length + cfg.lateral_margin + cfg.focus_overhead;
    let half_w = 0.5 * cfg.vehicle_width + cfg.lateral_margin + cfg.focus_overhead;
    let mut r = half_l.hypot(half_w) + reach;
    if state.steering_angle.abs() > cfg.straight_threshold {
        // every swept point lies within the outer circle, which passes near the vehicle
        let radius = cfg.wheelbase / state.steering_angle.abs().tan();
        let arc = (radius + half_w) * ((half_l / radius).atan() + reach / radius + cfg.focus_overhead / radius);
        r = r.max((2.0 * radius + half_w).min(arc + half_w));
    }
    let r = r + 0.5;
    (Point2::new(-r, -r), Point2::new(r, r))
}
