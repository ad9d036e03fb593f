use cage_core::geometry::*;

#[test]
fn pose_round_trip() {
    let pose = Pose::new(3.0, -2.0, 0.7);
    let p = Point2::new(1.5, 4.0);
    let back = pose.to_world(pose.to_local(p));
    assert!(back.distance(p) < 1e-12);
}

#[test]
fn ray_hits_segment_ahead() {
    let t = ray_segment(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(5.0, -1.0), Point2::new(5.0, 1.0));
    assert_eq!(t, Some(5.0));
    let miss = ray_segment(Point2::new(0.0, 0.0), Point2::new(-1.0, 0.0), Point2::new(5.0, -1.0), Point2::new(5.0, 1.0));
    assert_eq!(miss, None);
}

#[test]
fn square_is_simple_bowtie_is_not() {
    let square = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
    let bowtie = [Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
    assert!(polygon_is_simple(&square));
    assert!(!polygon_is_simple(&bowtie));
    assert!(polygon_contains(&square, Point2::new(0.5, 0.5)));
    assert!(!polygon_contains(&square, Point2::new(1.5, 0.5)));
}

#[test]
fn sector_angles_follow_travel_direction() {
    let left = AnnularSector {
        center: Point2::new(0.0, 5.0),
        inner_radius: 4.0,
        outer_radius: 6.0,
        start_angle: 0.0,
        end_angle: 1.0,
        turn: Turn::Left,
    };
    // Origin sits at angle zero, a point ahead on the circle at positive angle.
    assert_eq!(left.angle_of(Point2::new(0.0, 0.0)), 0.0);
    assert!(left.angle_of(left.point_at(5.0, 0.5)) > 0.49);
    assert!(left.contains(left.point_at(5.0, 0.5)));
    assert!(!left.contains(left.point_at(5.0, -0.1)));
}
