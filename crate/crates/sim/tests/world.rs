use cage_core::geometry::{self, Point2};
use cage_sim::world::*;
use std::f64::consts::PI;

fn square(id: &str, c: Point2) -> Obstacle {
    Obstacle { id: id.into(), kind: ObstacleKind::Block, polygon: rect(c, [1.0, 1.0], 0.0), height: 1.0, velocity: Point2::default() }
}

#[test]
fn clearance_to_square() {
    let world = WorldMap { obstacles: vec![square("a", Point2::new(5.0, 0.0))], ..Default::default() };
    let d = world.segment_clearance(Point2::new(2.0, -1.0), Point2::new(2.0, 1.0));
    assert!((d - 2.5).abs() < 1e-12);
    assert_eq!(world.segment_clearance(Point2::new(5.0, -1.0), Point2::new(5.0, 1.0)), 0.0);
}

#[test]
fn validation_catches_bad_maps() {
    let mut world = WorldMap { obstacles: vec![square("a", Point2::default()), square("a", Point2::new(3.0, 0.0))], ..Default::default() };
    assert_eq!(world.validate(), Err(WorldError::DuplicateObstacle("a".into())));
    world.obstacles[1].id = "b".into();
    world.obstacles[1].polygon.swap(0, 1);
    assert_eq!(world.validate(), Err(WorldError::BadPolygon("b".into())));
}

#[test]
fn stadium_is_simple_and_sized() {
    let s = stadium(Point2::default(), 24.0, 12.0, 32);
    assert!(geometry::polygon_is_simple(&s));
    let perimeter: f64 = geometry::edges(&s).map(|(a, b)| a.distance(b)).sum();
    assert!((perimeter - (48.0 + 2.0 * PI * 12.0)).abs() < 0.2);
}

#[test]
fn moving_obstacles_advance() {
    let mut o = square("p", Point2::default());
    o.velocity = Point2::new(0.0, 0.8);
    let mut world = WorldMap { obstacles: vec![o], ..Default::default() };
    world.advance(0.5);
    assert!((world.obstacles[0].polygon[0].y - 0.9).abs() < 1e-12);
}
