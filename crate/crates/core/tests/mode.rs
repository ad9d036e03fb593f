use cage_core::camera::SensorValidity;
use cage_core::lidar::CageState;
use cage_core::mode::*;
use DrivingMode::*;

fn state(cage: CageMode, driving: DrivingMode) -> ModeState {
    ModeState { cage, driving, mission: MissionState::Active }
}

fn input(occupancy: CageState) -> ModeInput {
    ModeInput { destination_active: true, ..ModeInput::monitor(occupancy, SensorValidity::Valid) }
}

fn request(occupancy: CageState, mode: DrivingMode, has_control: bool) -> ModeInput {
    ModeInput { mode_request: Some(mode), requester_has_control: has_control, ..input(occupancy) }
}

#[test]
fn clear_zone_hit_latches_emergency_stop() {
    let next = step(state(CageMode::On, FullyAutonomousDriving), &input(CageState::ClearZoneOccupied));
    assert_eq!(next.driving, EmergencyStop);
    assert_eq!(next.mission, MissionState::Blocked);
}

#[test]
fn emergency_stop_holds_without_request() {
    let next = step(state(CageMode::On, EmergencyStop), &input(CageState::SafeZoneFree));
    assert_eq!(next.driving, EmergencyStop);
}

#[test]
fn driver_releases_into_limited_autonomy() {
    let next = step(state(CageMode::On, EmergencyStop), &request(CageState::SafeZoneFree, LimitedAutonomousDriving, true));
    assert_eq!(next.driving, LimitedAutonomousDriving);
}

#[test]
fn cage_off_never_latches() {
    let next = step(state(CageMode::Off, FullyAutonomousDriving), &input(CageState::ClearZoneOccupied));
    assert_eq!(next.driving, FullyAutonomousDriving);
}

#[test]
fn release_refused_while_violation_persists() {
    let next = step(state(CageMode::On, EmergencyStop), &request(CageState::ClearZoneOccupied, FullyAutonomousDriving, true));
    assert_eq!(next.driving, EmergencyStop);
    // An in-vehicle driver can still take over.
    let next = step(state(CageMode::On, EmergencyStop), &request(CageState::ClearZoneOccupied, InPlaceManualDriving, true));
    assert_eq!(next.driving, InPlaceManualDriving);
}

#[test]
fn fresh_latch_ignores_same_tick_request() {
    let next = step(state(CageMode::On, FullyAutonomousDriving), &request(CageState::ClearZoneOccupied, InPlaceManualDriving, true));
    assert_eq!(next.driving, EmergencyStop);
}

#[test]
fn in_place_driving_is_not_latched() {
    let next = step(state(CageMode::On, InPlaceManualDriving), &input(CageState::ClearZoneOccupied));
    assert_eq!(next.driving, InPlaceManualDriving);
}

#[test]
fn camera_invalid_latches() {
    let i = ModeInput { camera_valid: SensorValidity::Invalid, ..input(CageState::SafeZoneFree) };
    assert_eq!(step(state(CageMode::On, RemoteManualDriving), &i).driving, EmergencyStop);
}

#[test]
fn cage_off_request_loses_to_same_tick_violation() {
    let i = ModeInput { cage_request: Some(CageMode::Off), requester_has_control: true, ..input(CageState::ClearZoneOccupied) };
    let next = step(state(CageMode::On, FullyAutonomousDriving), &i);
    assert_eq!(next.driving, EmergencyStop);
    assert_eq!(next.cage, CageMode::Off);
}

#[test]
fn unauthorised_requests_ignored() {
    let i = ModeInput { cage_request: Some(CageMode::Off), ..request(CageState::SafeZoneFree, RemoteManualDriving, false) };
    let current = state(CageMode::On, FullyAutonomousDriving);
    assert_eq!(step(current, &i), current);
}

#[test]
fn onboard_emergency_bypasses_rights() {
    let i = ModeInput { onboard_emergency: true, ..input(CageState::SafeZoneFree) };
    assert_eq!(step(state(CageMode::Off, FullyAutonomousDriving), &i).driving, EmergencyStop);
    // and cannot be overridden on the same tick
    let i = ModeInput { onboard_emergency: true, ..request(CageState::SafeZoneFree, FullyAutonomousDriving, true) };
    assert_eq!(step(state(CageMode::On, RemoteManualDriving), &i).driving, EmergencyStop);
}

#[test]
fn mission_lifecycle() {
    let mut s = ModeState { cage: CageMode::On, driving: FullyAutonomousDriving, mission: MissionState::Inactive };
    let idle = ModeInput::monitor(CageState::SafeZoneFree, SensorValidity::Valid);
    assert_eq!(step(s, &idle).mission, MissionState::Inactive);
    s = step(s, &input(CageState::SafeZoneFree));
    assert_eq!(s.mission, MissionState::Active);
    s = step(s, &input(CageState::ClearZoneOccupied));
    assert_eq!(s.mission, MissionState::Blocked);
    s = step(s, &request(CageState::SafeZoneFree, FullyAutonomousDriving, true));
    assert_eq!((s.driving, s.mission), (FullyAutonomousDriving, MissionState::Active));
    s = step(s, &ModeInput { at_destination: true, ..input(CageState::SafeZoneFree) });
    assert_eq!(s.mission, MissionState::Completed);
    // a new destination restarts the mission
    s = step(s, &input(CageState::SafeZoneFree));
    assert_eq!(s.mission, MissionState::Active);
}

#[test]
fn activation_during_emergency_stop_is_blocked_immediately() {
    let s = ModeState { cage: CageMode::On, driving: EmergencyStop, mission: MissionState::Inactive };
    assert_eq!(step(s, &input(CageState::SafeZoneFree)).mission, MissionState::Blocked);
}

#[test]
fn focus_zone_is_neutral() {
    for current in DrivingMode::ALL {
        let s = state(CageMode::On, current);
        assert_eq!(step(s, &input(CageState::FocusZoneOccupied)), step(s, &input(CageState::SafeZoneFree)));
    }
}
