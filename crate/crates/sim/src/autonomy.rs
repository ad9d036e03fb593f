//! Pure-pursuit route follower with a speed setpoint.

use crate::physics::{Controls, SimVehicle};
use crate::world::Route;
use cage_core::geometry::Point2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutonomyConfig {
    pub cruise_speed: f64,
    pub lookahead: f64,
    pub comfort_decel: f64,
    pub speed_gain: f64,
    /// Distance to the goal at which the follower aims to be stopped.
    pub stop_margin: f64,
}

impl Default for AutonomyConfig {
    fn default() -> Self {
        Self { cruise_speed: 3.5, lookahead: 4.0, comfort_decel: 1.0, speed_gain: 2.0, stop_margin: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurePursuit {
    cfg: AutonomyConfig,
    route: Route,
    /// Index of the route segment the vehicle was last projected onto.
    segment: usize,
}

impl PurePursuit {
    pub fn new(route: Route, cfg: AutonomyConfig) -> Self {
        Self { cfg, route, segment: 0 }
    }

    pub fn config(&self) -> &AutonomyConfig {
        &self.cfg
    }

    fn seg_count(&self) -> usize {
        let n = self.route.waypoints.len();
        if self.route.closed {
            n
        } else {
            n - 1
        }
    }

    fn seg(&self, i: usize) -> (Point2, Point2) {
        let n = self.route.waypoints.len();
        (self.route.waypoints[i % n], self.route.waypoints[(i + 1) % n])
    }

    fn project(&mut self, p: Point2) -> (usize, f64) {
        let count = self.seg_count();
        let window = if self.route.closed { 8.min(count) } else { count - self.segment };
        let mut best = (self.segment, 0.0, f64::INFINITY);
        for k in 0..window {
            let i = if self.route.closed { (self.segment + k) % count } else { self.segment + k };
            let (a, b) = self.seg(i);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let q = Point2::new(a.x + t * dx, a.y + t * dy);
            let d = q.distance(p);
            if d < best.2 - 1e-9 {
                best = (i, t, d);
            }
        }
        self.segment = best.0;
        (best.0, best.1)
    }

    /// Point `dist` meters along the route from segment `i` at fraction `t`,
    /// and the route length left from there to the end (infinite when closed).
    fn walk(&self, i: usize, t: f64, dist: f64) -> (Point2, f64) {
        let count = self.seg_count();
        let (a, b) = self.seg(i);
        let mut left_in_seg = a.distance(b) * (1.0 - t);
        let mut cur = Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        let mut remaining = dist;
        let mut j = i;
        let mut target = None;
        let mut to_end = 0.0;
        loop {
            let (_, b) = self.seg(j);
            if target.is_none() {
                if remaining <= left_in_seg {
                    let len = cur.distance(b);
                    let f = if len > 0.0 { remaining / len } else { 0.0 };
                    target = Some(Point2::new(cur.x + f * (b.x - cur.x), cur.y + f * (b.y - cur.y)));
                    if self.route.closed {
                        return (target.unwrap(), f64::INFINITY);
                    }
                } else {
                    remaining -= left_in_seg;
                }
            }
            to_end += left_in_seg;
            j += 1;
            if !self.route.closed && j >= count {
                return (target.unwrap_or(b), to_end);
            }
            cur = b;
            let (a2, b2) = self.seg(j % count);
            left_in_seg = a2.distance(b2);
        }
    }

    /// Distance to the end of an open route; infinite on a loop.
    pub fn remaining(&mut self, p: Point2) -> f64 {
        let (i, t) = self.project(p);
        self.walk(i, t, 0.0).1
    }

    pub fn controls(&mut self, v: &SimVehicle, speed_cap: Option<f64>) -> Controls {
        let pose = v.state.pose;
        let (i, t) = self.project(pose.position());
        let (target, to_end) = self.walk(i, t, self.cfg.lookahead);
        let local = pose.to_local(target);
        let ld2 = local.x * local.x + local.y * local.y;
        let steer = if ld2 > 1e-9 { (2.0 * v.params.wheelbase * local.y / ld2).atan() } else { 0.0 };

        let mut speed = self.cfg.cruise_speed.min(v.params.max_speed);
        if let Some(cap) = speed_cap {
            speed = speed.min(cap);
        }
        let stopping = (to_end - self.cfg.stop_margin).max(0.0);
        speed = speed.min((2.0 * self.cfg.comfort_decel * stopping).sqrt());
        let mut accel = (self.cfg.speed_gain * (speed - v.state.speed)).clamp(-v.params.max_decel, v.params.max_accel);
        if stopping == 0.0 {
            accel = -self.cfg.comfort_decel;
        }
        Controls { accel, steer }
    }
}
