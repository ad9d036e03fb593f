//! The acceptance checks. Each one runs headless and returns a verdict with
//! the measurements behind it.

use crate::oracle::{self, Raster};
use cage_ccc::agent::{run_vehicle, AgentConfig};
use cage_ccc::hub::audit_is_exclusive;
use cage_ccc::{CccClient, FleetConfig, HubConfig, ServiceConfig};
use cage_core::camera::{CameraId, SensorValidity};
use cage_core::geometry::Point2;
use cage_core::lidar::{CageState, PointCloud};
use cage_core::mode::{self, CageMode, DrivingMode, MissionState, ModeInput, ModeState};
use cage_core::runtime::{CageRuntime, MissionInputs, RuntimeConfig, TickInputs};
use cage_core::safe_zone::{compute_zone, Gear, SafeZone, SafeZoneConfig, VehicleState, ZoneClass};
use cage_core::wire::{Action, Message};
use cage_sim::log::{contains_subsequence, label};
use cage_sim::sensors::{render_camera, CameraConfig, NoiseConfig, NoisePreset};
use cage_sim::{run_scenario, Event, LogRecord, Scenario, SimOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

pub const MIN_STOP_GAP: f64 = 1.0;
pub const MAX_STOP_RUN_SECS: f64 = 5.0;
pub const STOP_SPEEDS_KMH: [f64; 4] = [5.0, 10.0, 15.0, 20.0];
pub const LAPS: f64 = 3.0;
pub const SEEDS: u64 = 10;
pub const RANDOM_SEQUENCES: usize = 100_000;
pub const ZONE_CONFIGS: usize = 10_000;
/// Grid pitch of the rasterization cross-check, meters.
pub const RASTER_CELL: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_owned(), passed, detail }
    }

    fn error(name: &str, err: impl std::fmt::Display) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

pub type CheckFn = fn() -> Check;

/// Every acceptance check, in report order.
pub const ALL: [(&str, CheckFn); 7] = [
    ("stop-distance", stop_distance),
    ("no-spurious-stops", no_spurious_stops),
    ("emergency-stop-latch", emergency_stop_latch),
    ("zone-properties", zone_properties),
    ("camera-occlusion", camera_occlusion),
    ("scenario-sequences", scenario_sequences),
    ("protocol", protocol),
];

pub fn run_all() -> Vec<Check> {
    ALL.iter().map(|(_, f)| f()).collect()
}

/// Straight approach to a wall at each speed; the cage alone must stop the
/// vehicle with at least the minimum gap, each run well inside the time budget.
pub fn stop_distance() -> Check {
    const NAME: &str = "stop-distance";
    let base = match Scenario::builtin("stop-distance") {
        Ok(s) => s,
        Err(e) => return Check::error(NAME, e),
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for kmh in STOP_SPEEDS_KMH {
        let scenario = base.clone().with_speed_kmh(kmh);
        let started = Instant::now();
        let out = match run_scenario(&scenario, &SimOptions::default(), None) {
            Ok(o) => o,
            Err(e) => return Check::error(NAME, e),
        };
        let secs = started.elapsed().as_secs_f64();
        let s = &out.summary;
        let cage_stop = out.log.iter().any(|r| matches!(&r.event, Event::EmergencyStop { cause, .. } if cause == "clear zone occupied"));
        let gap = s.stop_gaps.first().copied();
        let ok = cage_stop && s.collisions == 0 && gap.is_some_and(|g| g >= MIN_STOP_GAP) && secs < MAX_STOP_RUN_SECS;
        passed &= ok;
        let gap = gap.map_or("none".to_owned(), |g| format!("{g:.3} m"));
        parts.push(format!("{kmh} km/h gap {gap} in {secs:.2} s{}", if ok { "" } else { " FAIL" }));
    }
    Check::new(NAME, passed, format!("{} (need >= {MIN_STOP_GAP} m, < {MAX_STOP_RUN_SECS} s)", parts.join(", ")))
}

fn route_length(scenario: &Scenario) -> Option<f64> {
    let route = scenario.world.routes.get(scenario.file.vehicle.route.as_ref()?)?;
    let w = &route.waypoints;
    let mut len: f64 = w.windows(2).map(|p| p[0].distance(p[1])).sum();
    if route.closed && w.len() > 1 {
        len += w[w.len() - 1].distance(w[0]);
    }
    Some(len)
}

/// Laps of the test track with ghost returns injected; no emergency stop may fire.
pub fn no_spurious_stops() -> Check {
    const NAME: &str = "no-spurious-stops";
    let scenario = match Scenario::builtin("nominal-lap") {
        Ok(s) => s,
        Err(e) => return Check::error(NAME, e),
    };
    let Some(lap) = route_length(&scenario) else { return Check::error(NAME, "nominal lap has no closed route") };
    let ghosts = NoiseConfig::preset(NoisePreset::Ghost);
    let min_points = scenario.file.config.detector.min_cluster_points;
    if ghosts.air_group_size >= min_points {
        return Check::new(NAME, false, format!("ghost groups of {} reach the cluster minimum {min_points}", ghosts.air_group_size));
    }
    let mut passed = true;
    let mut stops = 0;
    let mut min_laps = f64::INFINITY;
    for seed in 0..SEEDS {
        let opts = SimOptions { seed, noise: Some(NoisePreset::Ghost), ..Default::default() };
        let out = match run_scenario(&scenario, &opts, None) {
            Ok(o) => o,
            Err(e) => return Check::error(NAME, e),
        };
        let laps = out.summary.distance / lap;
        stops += out.summary.emergency_stops;
        min_laps = min_laps.min(laps);
        passed &= out.summary.emergency_stops == 0 && out.summary.collisions == 0 && laps >= LAPS;
    }
    Check::new(
        NAME,
        passed,
        format!("{SEEDS} seeds, ghost groups of {} below minimum {min_points}: {stops} emergency stops, fewest laps {min_laps:.2} (need {LAPS})", ghosts.air_group_size),
    )
}

fn random_mode(rng: &mut ChaCha8Rng) -> DrivingMode {
    DrivingMode::ALL[rng.random_range(0..5)]
}

/// Exhaustive transition table against the reference model, then random
/// input sequences searching for an exit from emergency stop that no
/// rights-holding request asked for.
pub fn emergency_stop_latch() -> Check {
    const NAME: &str = "emergency-stop-latch";
    let occupancies = [CageState::SafeZoneFree, CageState::FocusZoneOccupied, CageState::ClearZoneOccupied];
    let cameras = [SensorValidity::Valid, SensorValidity::Invalid];
    let requests: Vec<Option<DrivingMode>> = std::iter::once(None).chain(DrivingMode::ALL.map(Some)).collect();
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for driving in DrivingMode::ALL {
        for cage in [CageMode::On, CageMode::Off] {
            for occupancy in occupancies {
                for camera in cameras {
                    for &request in &requests {
                        for has_control in [false, true] {
                            cases += 1;
                            let mission = if driving == DrivingMode::EmergencyStop { MissionState::Blocked } else { MissionState::Active };
                            let input = ModeInput {
                                mode_request: request,
                                requester_has_control: has_control,
                                destination_active: true,
                                ..ModeInput::monitor(occupancy, camera)
                            };
                            let got = mode::step(ModeState { cage, driving, mission }, &input);
                            let want = oracle::expected_driving(driving, cage, occupancy, camera, request, has_control);
                            let want_mission =
                                if want == DrivingMode::EmergencyStop { MissionState::Blocked } else { MissionState::Active };
                            if got.driving != want || got.cage != cage || got.mission != want_mission {
                                mismatches.push(format!("{driving:?}/{cage:?}/{occupancy:?}/{camera:?}/{request:?}/{has_control}"));
                            }
                        }
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x1a7c);
    let mut steps = 0u64;
    let mut releases = 0u64;
    let mut violations = Vec::new();
    for _ in 0..RANDOM_SEQUENCES {
        let mut state = ModeState {
            cage: if rng.random_bool(0.5) { CageMode::On } else { CageMode::Off },
            driving: random_mode(&mut rng),
            mission: [MissionState::Inactive, MissionState::Active, MissionState::Blocked, MissionState::Completed][rng.random_range(0..4)],
        };
        for _ in 0..rng.random_range(1..=20) {
            let input = ModeInput {
                occupancy: occupancies[rng.random_range(0..3)],
                camera_valid: cameras[rng.random_range(0..2)],
                cage_request: rng.random_bool(0.2).then(|| if rng.random_bool(0.5) { CageMode::On } else { CageMode::Off }),
                mode_request: rng.random_bool(0.5).then(|| random_mode(&mut rng)),
                requester_has_control: rng.random_bool(0.5),
                at_destination: rng.random_bool(0.1),
                destination_active: rng.random_bool(0.7),
                onboard_emergency: rng.random_bool(0.05),
            };
            let next = mode::step(state, &input);
            steps += 1;
            if state.driving == DrivingMode::EmergencyStop && next.driving != DrivingMode::EmergencyStop {
                releases += 1;
                let asked = input.mode_request == Some(next.driving) && input.requester_has_control && !input.onboard_emergency;
                if !asked && violations.len() < 5 {
                    violations.push(format!("{state:?} + {input:?} -> {:?}", next.driving));
                }
            }
            state = next;
        }
    }

    let passed = cases == 720 && mismatches.is_empty() && violations.is_empty();
    let mut detail = format!(
        "{cases} table cases, {} mismatches; {RANDOM_SEQUENCES} random sequences ({steps} steps, {releases} authorised releases), {} unrequested exits",
        mismatches.len(),
        violations.len()
    );
    if let Some(first) = mismatches.first().or(violations.first()) {
        detail.push_str(&format!("; first: {first}"));
    }
    Check::new(NAME, passed, detail)
}

fn random_zone_input(rng: &mut ChaCha8Rng) -> (VehicleState, SafeZoneConfig, f64) {
    let length = rng.random_range(2.5..6.0);
    let cfg = SafeZoneConfig {
        max_decel: rng.random_range(1.0..6.0),
        reaction_time: rng.random_range(0.0..1.5),
        vehicle_width: rng.random_range(1.0..2.6),
        vehicle_length: length,
        wheelbase: rng.random_range(0.5..0.8) * length,
        max_steering_angle: 0.6,
        lateral_margin: rng.random_range(0.0..0.6),
        focus_overhead: rng.random_range(0.1..1.5),
        straight_threshold: rng.random_range(0.0..0.1),
        limited_zone_scale: rng.random_range(0.3..1.0),
    };
    let speed = if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..9.0) };
    let steering_angle = if rng.random_bool(0.2) { rng.random_range(-0.1..0.1) } else { rng.random_range(-0.6..=0.6) };
    let gear = if rng.random_bool(0.2) { Gear::Reverse } else { Gear::Forward };
    let scale = if rng.random_bool(0.5) { 1.0 } else { cfg.limited_zone_scale };
    (VehicleState { speed, steering_angle, gear, ..Default::default() }, cfg, scale)
}

/// A point of the clear region, in vehicle frame.
fn sample_clear(zone: &SafeZone, rng: &mut ChaCha8Rng) -> Point2 {
    let r = &zone.clear_region;
    let p = match r.sweep {
        Some(s) if rng.random_bool(0.6) => {
            s.point_at(rng.random_range(s.inner_radius..=s.outer_radius), rng.random_range(s.start_angle..=s.end_angle))
        }
        _ => Point2::new(rng.random_range(r.body.min_x..=r.body.max_x), rng.random_range(r.body.min_y..=r.body.max_y)),
    };
    if zone.gear == Gear::Reverse {
        p.mirror_x()
    } else {
        p
    }
}

/// Nearest cell center of the raster lattice anchored at the origin.
fn snap(p: Point2) -> Point2 {
    let s = |v: f64| ((v / RASTER_CELL).floor() + 0.5) * RASTER_CELL;
    Point2::new(s(p.x), s(p.y))
}

/// Speed and mode-scale monotonicity, clear-in-focus containment and steering
/// symmetry over random configurations, plus agreement with the reference
/// model rasterized on a 1 cm grid.
pub fn zone_properties() -> Check {
    const NAME: &str = "zone-properties";
    const POINTS: usize = 40;
    const RASTER_POINTS: usize = 100;
    const FULL_RASTERS: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(0x20e5);
    let mut failures: Vec<String> = Vec::new();
    let (mut monotone, mut contained, mut mirrored, mut compared, mut disagreements) = (0u64, 0u64, 0u64, 0u64, 0u64);

    let mut configs = 0;
    while configs < ZONE_CONFIGS {
        let (state, cfg, scale) = random_zone_input(&mut rng);
        let zone = match compute_zone(&state, &cfg, scale) {
            Ok(z) => z,
            Err(e) => {
                failures.push(format!("compute_zone rejected a valid input: {e}"));
                break;
            }
        };
        configs += 1;
        let faster = compute_zone(&VehicleState { speed: state.speed + rng.random_range(0.01..3.0), ..state }, &cfg, scale).expect("valid");
        let smaller_scale = scale * rng.random_range(0.1..1.0);
        let smaller = compute_zone(&state, &cfg, smaller_scale).expect("valid");
        let mirror = compute_zone(&VehicleState { steering_angle: -state.steering_angle, ..state }, &cfg, scale).expect("valid");

        for _ in 0..POINTS {
            let p = sample_clear(&zone, &mut rng);
            if zone.contains(p) == ZoneClass::Clear {
                monotone += 1;
                contained += 1;
                if faster.contains(p) != ZoneClass::Clear {
                    failures.push(format!("speed monotonicity at {p:?} for {state:?}"));
                }
                let forward = if zone.gear == Gear::Reverse { p.mirror_x() } else { p };
                if !zone.focus_region.contains(forward) {
                    failures.push(format!("clear point {p:?} outside focus for {state:?}"));
                }
            }
            let q = sample_clear(&smaller, &mut rng);
            if smaller.contains(q) == ZoneClass::Clear && zone.contains(q) != ZoneClass::Clear {
                failures.push(format!("mode-scale monotonicity at {q:?} for {state:?}"));
            }
        }

        let (min, max) = oracle::zone_bounds(&state, &cfg, scale);
        for _ in 0..RASTER_POINTS {
            let p = Point2::new(rng.random_range(min.x..max.x), rng.random_range(min.y..max.y));
            mirrored += 1;
            if zone.contains(p) != mirror.contains(p.mirror_y()) {
                failures.push(format!("steering symmetry at {p:?} for {state:?}"));
            }
            // cell centers of the 1 cm lattice; half of them near the clear region
            let c = snap(if rng.random_bool(0.5) { sample_clear(&zone, &mut rng) } else { p });
            compared += 1;
            if zone.contains(c) != oracle::zone_class(&state, &cfg, scale, c) {
                disagreements += 1;
                if failures.len() < 5 {
                    failures.push(format!("grid disagreement at {c:?} for {state:?} scale {scale}"));
                }
            }
        }
        if failures.len() >= 5 {
            break;
        }
    }

    // a few zones compared on every cell of the grid
    let mut cells = 0u64;
    for _ in 0..FULL_RASTERS {
        let (mut state, cfg, scale) = random_zone_input(&mut rng);
        state.speed = state.speed.min(4.0);
        let zone = compute_zone(&state, &cfg, scale).expect("valid");
        let (min, max) = oracle::zone_bounds(&state, &cfg, scale);
        let raster = Raster::build(&state, &cfg, scale, snap(min), max, RASTER_CELL);
        for r in 0..raster.rows {
            for c in 0..raster.cols {
                let edge = r == 0 || c == 0 || r + 1 == raster.rows || c + 1 == raster.cols;
                let want = raster.get(c, r);
                if edge && want != ZoneClass::Outside {
                    failures.push(format!("raster window too small for {state:?}"));
                }
                cells += 1;
                if zone.contains(raster.center(c, r)) != want {
                    disagreements += 1;
                }
            }
        }
    }
    if disagreements > 0 && failures.iter().all(|f| !f.contains("disagreement")) {
        failures.push(format!("{disagreements} full-raster disagreements"));
    }

    let passed = configs >= ZONE_CONFIGS && failures.is_empty() && disagreements == 0;
    let mut detail = format!(
        "{configs} configs: {monotone} monotonicity and {contained} containment samples, {mirrored} mirror pairs; \
         {compared} sampled + {cells} full-raster cells at {} cm, {disagreements} disagreements",
        RASTER_CELL * 100.0
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first failure: {f}"));
    }
    Check::new(NAME, passed, detail)
}

fn ticks_of(log: &[LogRecord], wanted: &str) -> Vec<u64> {
    log.iter().filter(|r| label(&r.event).as_deref() == Some(wanted)).map(|r| r.tick).collect()
}

/// Occlusion must flip validity and brake on the very tick it appears, and
/// clearing it must not resume driving by itself.
pub fn camera_occlusion() -> Check {
    const NAME: &str = "camera-occlusion";
    let mut notes = Vec::new();
    let mut passed = true;

    // direct: the runtime alone, frames rendered the way the simulator does
    let cfg = RuntimeConfig::default();
    let tick_ns = cfg.tick_period_ns();
    let start = ModeState { cage: CageMode::On, driving: DrivingMode::FullyAutonomousDriving, mission: MissionState::Active };
    let mut runtime = match CageRuntime::with_state(cfg, start) {
        Ok(r) => r,
        Err(e) => return Check::error(NAME, e),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cam = CameraConfig::default();
    let mut tick = |k: u64, blocked: bool| {
        let t = k * tick_ns;
        let cameras = CameraId::ALL
            .iter()
            .map(|&id| render_camera(id, &cam, k as f64 * 0.1, blocked && id == CameraId::Front, &mut rng, t))
            .collect();
        runtime.tick(&TickInputs {
            now_ns: t,
            lidar: Some(PointCloud::new(Vec::new(), t)),
            cameras,
            vehicle: VehicleState { speed: 2.0, ..Default::default() },
            commands: Vec::new(),
            mission: MissionInputs { destination_active: true, at_destination: false },
            link_activity: true,
        })
    };
    let clean: Vec<_> = (0..10).map(|k| tick(k, false)).collect();
    let before_ok =
        clean.iter().all(|r| r.sensor_validity == SensorValidity::Valid && r.mode_state.driving == DrivingMode::FullyAutonomousDriving);
    let hit = tick(10, true);
    let same_tick = hit.sensor_validity == SensorValidity::Invalid && hit.mode_state.driving == DrivingMode::EmergencyStop;
    let after: Vec<_> = (11..60).map(|k| tick(k, false)).collect();
    let held = after.iter().all(|r| r.mode_state.driving == DrivingMode::EmergencyStop)
        && after.last().is_some_and(|r| r.sensor_validity == SensorValidity::Valid);
    passed &= before_ok && same_tick && held;
    notes.push(format!(
        "runtime: validity {:?} and mode {:?} on the occluded tick, still stopped {} ticks after clearing",
        hit.sensor_validity,
        hit.mode_state.driving,
        after.len()
    ));

    // scenario: the scripted occlusion and clearing
    let scenario = match Scenario::builtin("8") {
        Ok(s) => s,
        Err(e) => return Check::error(NAME, e),
    };
    let mut worst = 0;
    for seed in 0..3 {
        let out = match run_scenario(&scenario, &SimOptions { seed, ..Default::default() }, None) {
            Ok(o) => o,
            Err(e) => return Check::error(NAME, e),
        };
        let (block, invalid, stop) =
            (ticks_of(&out.log, "script:block"), ticks_of(&out.log, "sensor:Invalid"), ticks_of(&out.log, "mode:ES"));
        let (unblock, request) = (ticks_of(&out.log, "script:unblock"), ticks_of(&out.log, "script:request"));
        let (Some(&b), Some(&u), Some(&q)) = (block.first(), unblock.first(), request.first()) else {
            passed = false;
            notes.push(format!("seed {seed}: scripted events missing"));
            continue;
        };
        let first_after = |ticks: &[u64]| ticks.iter().copied().find(|&t| t >= b);
        let delay = first_after(&invalid).zip(first_after(&stop)).map(|(i, s)| i.max(s) - b);
        worst = worst.max(delay.unwrap_or(u64::MAX));
        // no mode change between clearing the camera and the driver's request
        let resumed_early = out.log.iter().any(|r| r.tick >= u && r.tick < q && matches!(r.event, Event::DrivingMode { .. }));
        passed &= delay.is_some_and(|d| d <= 1) && !resumed_early;
    }
    notes.push(format!("scenario 8, 3 seeds: stop at most {worst} tick(s) after occlusion, no resume before the driver request"));
    Check::new(NAME, passed, notes.join("; "))
}

/// Expected event order of the scripted legs with a qualitative story.
pub fn expected_sequence(id: &str) -> Option<&'static [&'static str]> {
    Some(match id {
        "1" => &["script:request", "mode:FA", "script:activate", "mission:Active", "mission:Completed", "reached:depot"],
        "5" => &[
            "mode:ES",
            "estop:clear zone occupied",
            "mission:Blocked",
            "standstill",
            "script:request",
            "mode:LA",
            "mission:Active",
            "mission:Completed",
            "reached:meeting-1",
        ],
        "7" => &[
            "script:spawn",
            "mode:ES",
            "estop:clear zone occupied",
            "mission:Blocked",
            "standstill",
            "script:request",
            "mode:FA",
            "mission:Active",
            "mission:Completed",
            "reached:meeting-2",
        ],
        "8" => &[
            "script:block",
            "sensor:Invalid",
            "mode:ES",
            "estop:sensor invalid",
            "mission:Blocked",
            "script:unblock",
            "sensor:Valid",
            "script:request",
            "mode:FA",
            "mission:Active",
            "mission:Completed",
            "reached:depot-return",
        ],
        _ => return None,
    })
}

pub fn labels(log: &[LogRecord]) -> Vec<String> {
    log.iter().filter_map(|r| label(&r.event)).collect()
}

/// Scripted legs 1, 5, 7 and 8 over several seeds: the expected order must
/// appear, no collisions, and the labelled sequence must not depend on the seed.
pub fn scenario_sequences() -> Check {
    const NAME: &str = "scenario-sequences";
    let mut passed = true;
    let mut parts = Vec::new();
    for id in ["1", "5", "7", "8"] {
        let scenario = match Scenario::builtin(id) {
            Ok(s) => s,
            Err(e) => return Check::error(NAME, e),
        };
        let expected = expected_sequence(id).expect("listed");
        let mut reference: Option<Vec<String>> = None;
        let (mut matched, mut same) = (0, true);
        for seed in 0..SEEDS {
            let out = match run_scenario(&scenario, &SimOptions { seed, ..Default::default() }, None) {
                Ok(o) => o,
                Err(e) => return Check::error(NAME, e),
            };
            if contains_subsequence(&out.log, expected) && out.summary.collisions == 0 {
                matched += 1;
            }
            let l = labels(&out.log);
            match &reference {
                None => reference = Some(l),
                Some(r) => same &= *r == l,
            }
        }
        passed &= matched == SEEDS && same;
        parts.push(format!("leg {id} {matched}/{SEEDS}{}", if same { "" } else { " (seed-dependent)" }));
    }
    Check::new(NAME, passed, parts.join(", "))
}

/// Control-rights exclusion, ordered telemetry and relay filtering against a
/// live in-process service.
pub fn protocol() -> Check {
    const NAME: &str = "protocol";
    let rt = match tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build() {
        Ok(rt) => rt,
        Err(e) => return Check::error(NAME, e),
    };
    match rt.block_on(protocol_async()) {
        Ok((passed, detail)) => Check::new(NAME, passed, detail),
        Err(e) => Check::error(NAME, e),
    }
}

const WAIT: Duration = Duration::from_secs(30);

async fn protocol_async() -> anyhow::Result<(bool, String)> {
    let local = SocketAddr::from(([127, 0, 0, 1], 0));
    let cfg =
        ServiceConfig { listen: local, http: None, fleet: FleetConfig::single("pluto"), hub: HubConfig::default(), ..Default::default() };
    let svc = cage_ccc::start(cfg).await?;
    let addr = svc.tcp_addr;

    // 100 concurrent acquire attempts from 10 sessions
    let mut tasks = Vec::new();
    for c in 0..10 {
        tasks.push(tokio::spawn(async move {
            let mut client = CccClient::connect(addr, &format!("ccc-{c}")).await?;
            let mut seqs = Vec::new();
            for _ in 0..10 {
                seqs.push(client.request("pluto", Action::AcquireControl).await?);
            }
            let mut grants = 0u32;
            for s in seqs {
                if let Message::ControlGrant(_) = client.reply_to(s, WAIT).await? {
                    grants += 1;
                }
            }
            anyhow::Ok((format!("ccc-{c}"), grants, client))
        }));
    }
    let mut grants = 0;
    let mut holder_client = None;
    let mut others = Vec::new();
    for t in tasks {
        let (name, g, client) = t.await??;
        grants += g;
        if g > 0 {
            holder_client = Some(client);
        } else {
            others.push((name, client));
        }
    }
    let exclusive = grants == 1 && audit_is_exclusive(&svc.hub.audit_log());

    // a vehicle streaming 10 s at 20 Hz to a subscriber, while a non-holder
    // tries to command it
    let mut ui = CccClient::connect(addr, "ui").await?;
    ui.request("pluto", Action::Subscribe).await?;
    ui.recv_until(WAIT, |_, m| matches!(m, Message::DestinationList(_)).then_some(())).await?;
    let mut agent = AgentConfig::new("pluto", addr, Scenario::builtin("2")?);
    agent.sim.duration = Some(10.0);
    agent.pace = Some(5.0);
    agent.reconnect_every = Duration::from_millis(50);
    let vehicle = tokio::spawn(run_vehicle(agent));

    let (intruder_name, mut intruder) = others.pop().ok_or_else(|| anyhow::anyhow!("no non-holder session"))?;
    let mut holder = holder_client.ok_or_else(|| anyhow::anyhow!("no holder session"))?;
    let stream = tokio::spawn(async move {
        let mut last: Option<(u64, u64)> = None;
        let mut ordered = true;
        let mut count = 0u32;
        while count < 200 {
            let Ok(next) = ui
                .recv_until(WAIT, |env, m| match m {
                    Message::StateUpdate(u) => Some((env.sequence, u.tick)),
                    _ => None,
                })
                .await
            else {
                break;
            };
            if let Some((s, t)) = last {
                ordered &= next.0 > s && next.1 > t;
            }
            last = Some(next);
            count += 1;
        }
        (ordered, count)
    });

    let mut intruder_rejected = 0;
    for mode in [DrivingMode::EmergencyStop, DrivingMode::RemoteManualDriving, DrivingMode::FullyAutonomousDriving] {
        let s = intruder.request("pluto", Action::SetDrivingMode { driving_mode: mode }).await?;
        if let Message::CommandAck(a) = intruder.reply_to(s, WAIT).await? {
            intruder_rejected += u32::from(!a.accepted);
        }
    }
    let s = intruder.request("pluto", Action::SetCageMode { cage_mode: CageMode::Off }).await?;
    if let Message::CommandAck(a) = intruder.reply_to(s, WAIT).await? {
        intruder_rejected += u32::from(!a.accepted);
    }
    // one legitimate command, retried until the vehicle has registered
    let mut holder_acked = false;
    for _ in 0..200 {
        let s = holder.request("pluto", Action::SetDrivingMode { driving_mode: DrivingMode::LimitedAutonomousDriving }).await?;
        if let Message::CommandAck(a) = holder.reply_to(s, WAIT).await? {
            if a.accepted {
                holder_acked = true;
                break;
            }
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }

    let report = vehicle.await??;
    let (ordered, count) = stream.await?;
    let holder_name = holder.sender().to_owned();
    let foreign = report.received.iter().filter(|r| r.request.requester.as_deref() != Some(holder_name.as_str())).count();
    let intruder_seen = report.received.iter().any(|r| r.request.requester.as_deref() == Some(intruder_name.as_str()));
    svc.shutdown().await;

    let passed = exclusive && ordered && count == 200 && intruder_rejected == 4 && holder_acked && foreign == 0 && !intruder_seen;
    Ok((
        passed,
        format!(
            "{grants} grant(s) for 100 concurrent acquires; {count} state updates, {}; {intruder_rejected}/4 non-holder commands rejected, \
             {foreign} foreign commands seen by the vehicle, holder command {}",
            if ordered { "strictly ordered" } else { "OUT OF ORDER" },
            if holder_acked { "acknowledged" } else { "not acknowledged" }
        ),
    ))
}
