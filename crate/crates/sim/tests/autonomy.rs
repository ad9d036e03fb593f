use cage_core::geometry::Point2;
use cage_core::geometry::Pose;
use cage_sim::autonomy::*;
use cage_sim::physics::SimVehicle;
use cage_sim::physics::{step_physics, VehicleParams};
use cage_sim::world::stadium;
use cage_sim::world::Route;

#[test]
fn stops_at_end_of_open_route() {
    let route = Route { waypoints: vec![Point2::new(0.0, 0.0), Point2::new(20.0, 0.0), Point2::new(30.0, 5.0)], closed: false };
    let mut pp = PurePursuit::new(route, AutonomyConfig::default());
    let mut v = SimVehicle::new(Pose::default(), 0.0, VehicleParams::default());
    for _ in 0..4000 {
        v.controls = pp.controls(&v, None);
        v = step_physics(&v, 0.01);
    }
    assert!(v.state.speed < 1e-6);
    assert!(v.state.pose.position().distance(Point2::new(30.0, 5.0)) < 1.0, "{:?}", v.state.pose);
}

#[test]
fn tracks_stadium_loop() {
    let route = Route { waypoints: stadium(Point2::new(0.0, 12.0), 24.0, 12.0, 32), closed: true };
    let mut pp = PurePursuit::new(route.clone(), AutonomyConfig::default());
    let mut v = SimVehicle::new(Pose::new(-12.0, 0.0, 0.0), 3.5, VehicleParams::default());
    let mut worst: f64 = 0.0;
    for _ in 0..8000 {
        v.controls = pp.controls(&v, None);
        v = step_physics(&v, 0.01);
        let p = v.state.pose.position();
        let off = route.waypoints.iter().map(|w| w.distance(p)).fold(f64::INFINITY, f64::min);
        worst = worst.max(off);
    }
    assert!(v.odometer > 250.0);
    assert!(worst < 1.5, "worst offset {worst}");
}
