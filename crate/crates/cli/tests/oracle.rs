use cage_cli::oracle::*;
use cage_core::camera::SensorValidity;
use cage_core::geometry::Point2;
use cage_core::lidar::CageState;
use cage_core::mode::{CageMode, DrivingMode};
use cage_core::safe_zone::{SafeZoneConfig, VehicleState, ZoneClass};
use DrivingMode::*;

#[test]
fn oracle_spot_values() {
    let cfg = SafeZoneConfig { reaction_time: 0.5, ..Default::default() };
    let s = VehicleState { speed: 5.56, ..Default::default() };
    // 2.25 + 0.3 + 7.93227 = 10.48227 m ahead of center
    assert_eq!(zone_class(&s, &cfg, 1.0, Point2::new(10.48, 0.0)), ZoneClass::Clear);
    assert_eq!(zone_class(&s, &cfg, 1.0, Point2::new(10.49, 0.0)), ZoneClass::FocusOnly);
    assert_eq!(zone_class(&s, &cfg, 1.0, Point2::new(10.99, 0.0)), ZoneClass::Outside);
    assert_eq!(
        expected_driving(
            FullyAutonomousDriving,
            CageMode::On,
            CageState::ClearZoneOccupied,
            SensorValidity::Valid,
            Some(InPlaceManualDriving),
            true
        ),
        EmergencyStop
    );
}
