use cage_core::geometry::{Point2, Rect};
use cage_core::safe_zone::*;
use proptest::prelude::*;

fn state(speed: f64, steering_angle: f64) -> VehicleState {
    VehicleState { speed, steering_angle, ..Default::default() }
}

#[test]
fn zero_speed_zone_is_expanded_footprint() {
    let cfg = SafeZoneConfig::default();
    for steer in [0.0, 0.3, -0.5] {
        let zone = compute_zone(&state(0.0, steer), &cfg, 1.0).unwrap();
        assert_eq!(zone.lookahead_distance, 0.0);
        let expected = Rect { min_x: -2.55, max_x: 2.55, min_y: -1.3, max_y: 1.3 };
        assert_eq!(zone.clear_region, Region { body: expected, sweep: None });
        assert_eq!(zone.focus_region, Region { body: expected.expand(0.5), sweep: None });
    }
}

#[test]
fn lookahead_at_twenty_kmh() {
    // Frozen from an independent evaluation of v*t_r + v^2/(2a).
    let cfg = SafeZoneConfig { reaction_time: 0.5, ..Default::default() };
    let zone = compute_zone(&state(5.56, 0.0), &cfg, 1.0).unwrap();
    assert!((zone.lookahead_distance - 7.932266666666665).abs() < 1e-12);
    assert_eq!(zone.shape_kind, ShapeKind::Rectangle);
    let exact = compute_zone(&state(20.0 / 3.6, 0.0), &cfg, 1.0).unwrap();
    assert!((exact.lookahead_distance - 7.921810699588477).abs() < 1e-12);
}

#[test]
fn turning_zone_uses_bicycle_radius() {
    let cfg = SafeZoneConfig::default();
    let zone = compute_zone(&state(3.0, 0.3), &cfg, 1.0).unwrap();
    assert_eq!(zone.shape_kind, ShapeKind::CircleSegment);
    // wheelbase 2.9 / tan(0.3), frozen from the oracle script.
    let radius = zone.turning_radius.unwrap();
    assert!((radius - 9.3749116169209).abs() < 1e-9);
    let sweep = zone.clear_region.sweep.unwrap();
    assert_eq!(sweep.center, Point2::new(0.0, radius));
}

#[test]
fn vehicle_center_is_clear_and_far_point_outside() {
    let cfg = SafeZoneConfig::default();
    let zone = compute_zone(&state(0.0, 0.0), &cfg, 1.0).unwrap();
    assert_eq!(zone.contains(Point2::new(0.0, 0.0)), ZoneClass::Clear);
    assert_eq!(zone.contains(Point2::new(50.0, 0.0)), ZoneClass::Outside);
    assert_eq!(zone.contains(Point2::new(2.8, 0.0)), ZoneClass::FocusOnly);
}

#[test]
fn reverse_gear_mirrors_behind() {
    let cfg = SafeZoneConfig::default();
    let fwd = compute_zone(&state(4.0, 0.0), &cfg, 1.0).unwrap();
    let rev = compute_zone(&VehicleState { gear: Gear::Reverse, ..state(4.0, 0.0) }, &cfg, 1.0).unwrap();
    let ahead = Point2::new(6.0, 0.0);
    assert_eq!(fwd.contains(ahead), ZoneClass::Clear);
    assert_eq!(rev.contains(ahead), ZoneClass::Outside);
    assert_eq!(rev.contains(ahead.mirror_x()), ZoneClass::Clear);
}

#[test]
fn rejects_bad_inputs() {
    let cfg = SafeZoneConfig::default();
    assert_eq!(compute_zone(&state(f64::NAN, 0.0), &cfg, 1.0), Err(ZoneError::NonFinite));
    assert_eq!(compute_zone(&state(1.0, f64::INFINITY), &cfg, 1.0), Err(ZoneError::NonFinite));
    assert_eq!(compute_zone(&state(-1.0, 0.0), &cfg, 1.0), Err(ZoneError::NegativeSpeed(-1.0)));
    assert!(matches!(compute_zone(&state(1.0, 0.9), &cfg, 1.0), Err(ZoneError::SteeringOutOfRange { .. })));
    assert_eq!(compute_zone(&state(1.0, 0.0), &cfg, 0.0), Err(ZoneError::ModeScale(0.0)));
    let bad = SafeZoneConfig { focus_overhead: 0.0, ..Default::default() };
    assert!(bad.validate().is_err());
    assert!(SafeZoneConfig::default().validate().is_ok());
}

#[test]
fn outline_stays_within_vertex_budget() {
    let cfg = SafeZoneConfig::default();
    for (speed, steer) in [(0.0, 0.0), (5.0, 0.0), (5.0, 0.4), (2.0, -0.6)] {
        let (clear, focus) = compute_zone(&state(speed, steer), &cfg, 1.0).unwrap().outline().vertex_counts();
        assert!(clear <= 64 && focus <= 64, "{clear} {focus}");
    }
}

proptest! {
    #[test]
    fn clear_implies_focus(speed in 0.0..10.0f64, steer in -0.6..0.6f64, x in -30.0..30.0f64, y in -30.0..30.0f64, rev in any::<bool>()) {
        let cfg = SafeZoneConfig::default();
        let gear = if rev { Gear::Reverse } else { Gear::Forward };
        let zone = compute_zone(&VehicleState { speed, steering_angle: steer, gear, ..Default::default() }, &cfg, 1.0).unwrap();
        let p = Point2::new(x, y);
        if zone.contains(p) == ZoneClass::Clear {
            let q = if rev { p.mirror_x() } else { p };
            prop_assert!(zone.focus_region.contains(q));
        }
    }

    #[test]
    fn limited_scale_shrinks_zone(speed in 0.0..10.0f64, steer in -0.6..0.6f64, x in -20.0..20.0f64, y in -20.0..20.0f64) {
        let cfg = SafeZoneConfig::default();
        let s = state(speed, steer);
        let full = compute_zone(&s, &cfg, 1.0).unwrap();
        let limited = compute_zone(&s, &cfg, cfg.limited_zone_scale).unwrap();
        let p = Point2::new(x, y);
        if limited.contains(p) == ZoneClass::Clear {
            prop_assert_eq!(full.contains(p), ZoneClass::Clear);
        }
    }
}
