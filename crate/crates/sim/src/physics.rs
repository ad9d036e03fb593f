//! Kinematic bicycle model referenced to the vehicle center.

use cage_core::geometry::{normalize_angle, Point2, Pose};
use cage_core::safe_zone::{Gear, VehicleState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub length: f64,
    pub width: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    /// Emergency brake deceleration.
    pub max_decel: f64,
    pub max_steer: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { wheelbase: 2.9, length: 4.5, width: 2.0, max_speed: 8.0, max_accel: 1.5, max_decel: 3.0, max_steer: 0.6 }
    }
}

/// Commanded acceleration (negative brakes) and steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Controls {
    pub accel: f64,
    pub steer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimVehicle {
    pub state: VehicleState,
    pub params: VehicleParams,
    pub controls: Controls,
    /// Path length driven so far.
    pub odometer: f64,
}

impl SimVehicle {
    pub fn new(pose: Pose, speed: f64, params: VehicleParams) -> Self {
        let state = VehicleState { speed: speed.clamp(0.0, params.max_speed), steering_angle: 0.0, pose, gear: Gear::Forward };
        Self { state, params, controls: Controls::default(), odometer: 0.0 }
    }

    /// World-frame body corners, counter-clockwise from front left.
    pub fn footprint(&self) -> Vec<Point2> {
        let (hl, hw) = (self.params.length / 2.0, self.params.width / 2.0);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].iter().map(|&(x, y)| self.state.pose.to_world(Point2::new(x, y))).collect()
    }

    /// Front bumper in the direction of travel.
    pub fn bumper(&self) -> (Point2, Point2) {
        let hl = match self.state.gear {
            Gear::Forward => self.params.length / 2.0,
            Gear::Reverse => -self.params.length / 2.0,
        };
        let hw = self.params.width / 2.0;
        (self.state.pose.to_world(Point2::new(hl, hw)), self.state.pose.to_world(Point2::new(hl, -hw)))
    }
}

/// Advance by `dt` seconds. Speed follows the clamped commanded acceleration
/// and stops exactly at zero; the pose moves along the exact arc.
pub fn step_physics(v: &SimVehicle, dt: f64) -> SimVehicle {
    assert!(dt > 0.0 && dt <= 0.1, "dt must be in (0, 0.1]");
    let p = v.params;
    let mut next = *v;
    let steer = v.controls.steer.clamp(-p.max_steer, p.max_steer);
    let accel = v.controls.accel.clamp(-p.max_decel, p.max_accel);
    let v0 = v.state.speed;

    let (v1, s) = if accel < 0.0 && v0 + accel * dt <= 0.0 {
        (0.0, v0 * v0 / (-2.0 * accel))
    } else {
        let v1 = (v0 + accel * dt).min(p.max_speed);
        // time spent accelerating before the speed limit is hit
        let t_acc = if accel > 0.0 { ((p.max_speed - v0) / accel).clamp(0.0, dt) } else { dt };
        let s = v0 * t_acc + 0.5 * accel * t_acc * t_acc + v1 * (dt - t_acc);
        (v1, s)
    };

    let dir = match v.state.gear {
        Gear::Forward => 1.0,
        Gear::Reverse => -1.0,
    };
    let ds = dir * s;
    let kappa = steer.tan() / p.wheelbase;
    let pose = v.state.pose;
    let dtheta = kappa * ds;
    let (x, y) = if dtheta.abs() < 1e-12 {
        (pose.x + ds * pose.heading.cos(), pose.y + ds * pose.heading.sin())
    } else {
        let r = 1.0 / kappa;
        let h1 = pose.heading + dtheta;
        (pose.x + r * (h1.sin() - pose.heading.sin()), pose.y - r * (h1.cos() - pose.heading.cos()))
    };
    next.state.pose = Pose::new(x, y, normalize_angle(pose.heading + dtheta));
    next.state.speed = v1;
    next.state.steering_angle = steer;
    next.odometer += s;
    next
}
