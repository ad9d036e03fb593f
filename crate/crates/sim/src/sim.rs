//! The simulation loop: script events, sensors, cage tick, actuation, physics.

use crate::autonomy::PurePursuit;
use crate::log::{Event, LogRecord};
use crate::physics::{step_physics, Controls, SimVehicle};
use crate::scenario::{Action, EventDef, Scenario, Trigger};
use crate::sensors::{self, NoiseConfig, NoisePreset};
use crate::world::WorldMap;
use cage_core::camera::{CameraFrame, CameraId, SensorValidity};
use cage_core::geometry::Point2;
use cage_core::lidar::{CageState, PointCloud};
use cage_core::mode::{DrivingMode, MissionState, ModeState};
use cage_core::runtime::{ActuatorCommand, CageRuntime, CageTickReport, CommandFragment, MissionInputs, RuntimeConfig, TickInputs};
use cage_core::wire::{Destination, DestinationStatus, StateUpdate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, VecDeque};

pub const PHYSICS_DT: f64 = 0.01;
const ARRIVAL_RADIUS: f64 = 1.0;
const STANDSTILL: f64 = 1e-3;
const POSITION_LOG_PERIOD_TICKS: u64 = 20;

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub seed: u64,
    pub duration: Option<f64>,
    pub noise: Option<NoisePreset>,
    /// Replaces the scenario's runtime configuration.
    pub config: Option<RuntimeConfig>,
    /// When set, script driver requests are not injected; an external CCC drives.
    pub external_control: bool,
}

/// Everything the cage consumed and produced on one tick.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub inputs: TickInputs,
    pub report: CageTickReport,
}

pub struct Simulation {
    scenario: Scenario,
    world: WorldMap,
    vehicle: SimVehicle,
    runtime: CageRuntime,
    noise: NoiseConfig,
    lidar_rng: ChaCha8Rng,
    camera_rng: ChaCha8Rng,
    events: VecDeque<EventDef>,
    blocked: BTreeSet<CameraId>,
    pending: Vec<CommandFragment>,
    manual: Controls,
    link_up: bool,
    external_control: bool,
    follower: Option<PurePursuit>,
    active_destination: Option<String>,
    destinations: Vec<Destination>,
    tick: u64,
    tick_ns: u64,
    end_tick: u64,
    standstill_end: Option<u64>,
    prev: Option<CageTickReport>,
    moving_in_stop: bool,
    in_collision: BTreeSet<String>,
    log: Vec<LogRecord>,
    last_cloud: PointCloud,
    last_frames: Vec<CameraFrame>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, opts: &SimOptions) -> Result<Self, cage_core::runtime::ConfigError> {
        let file = &scenario.file;
        let cfg = opts.config.clone().unwrap_or_else(|| file.config.clone());
        let runtime = CageRuntime::with_state(cfg, scenario.initial_state)?;
        let tick_ns = runtime.config().tick_period_ns();
        let duration = opts.duration.unwrap_or(file.duration);
        let noise_preset = opts.noise.unwrap_or(file.noise);
        let mut camera_rng = ChaCha8Rng::seed_from_u64(opts.seed);
        camera_rng.set_stream(1);
        let vehicle = SimVehicle::new(file.vehicle.pose(), file.vehicle.speed, file.vehicle.params);
        let destinations = scenario
            .world
            .destinations
            .iter()
            .map(|d| Destination { id: d.id.clone(), name: d.name.clone(), position: d.position, status: DestinationStatus::Pending })
            .collect();
        let mut sim = Self {
            scenario: scenario.clone(),
            world: scenario.world.clone(),
            vehicle,
            runtime,
            noise: NoiseConfig::preset(noise_preset),
            lidar_rng: ChaCha8Rng::seed_from_u64(opts.seed),
            camera_rng,
            events: file.events.iter().cloned().collect(),
            blocked: BTreeSet::new(),
            pending: Vec::new(),
            manual: Controls::default(),
            link_up: true,
            external_control: opts.external_control,
            follower: None,
            active_destination: None,
            destinations,
            tick: 0,
            tick_ns,
            end_tick: (duration * 1e9 / tick_ns as f64).round() as u64,
            standstill_end: None,
            prev: None,
            moving_in_stop: false,
            in_collision: BTreeSet::new(),
            log: Vec::new(),
            last_cloud: PointCloud::default(),
            last_frames: Vec::new(),
        };
        if let Some(route) = &file.vehicle.route {
            sim.follower = Some(PurePursuit::new(sim.world.routes[route].clone(), file.autonomy));
        }
        if let Some(dest) = file.initial_mode.as_ref().and_then(|m| m.destination.clone()) {
            sim.set_destination(&dest);
        }
        let (id, seed) = (file.id.clone(), opts.seed);
        sim.push(Event::Start { scenario: id, seed, noise: noise_preset });
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.tick_ns as f64 / 1e9
    }

    pub fn now_ns(&self) -> u64 {
        self.tick * self.tick_ns
    }

    pub fn finished(&self) -> bool {
        self.tick >= self.end_tick || self.standstill_end.is_some_and(|t| self.tick >= t)
    }

    pub fn vehicle(&self) -> &SimVehicle {
        &self.vehicle
    }

    pub fn world(&self) -> &WorldMap {
        &self.world
    }

    pub fn runtime(&self) -> &CageRuntime {
        &self.runtime
    }

    pub fn mode_state(&self) -> ModeState {
        self.runtime.mode_state()
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<LogRecord> {
        std::mem::take(&mut self.log)
    }

    pub fn destinations(&self) -> &[Destination] {
        &self.destinations
    }

    fn push(&mut self, event: Event) {
        self.log.push(LogRecord { t: self.time(), tick: self.tick, event });
    }

    /// Queue a mode request relayed by the CCC; applied on the next tick.
    pub fn submit(&mut self, fragment: CommandFragment) {
        self.pending.push(fragment);
    }

    pub fn set_manual(&mut self, steering: f64, throttle: f64) {
        let p = self.vehicle.params;
        let t = throttle.clamp(-1.0, 1.0);
        self.manual = Controls { steer: steering, accel: if t >= 0.0 { t * p.max_accel } else { t * p.max_decel } };
    }

    /// Make `id` the active target; any previous target goes back to pending.
    pub fn set_destination(&mut self, id: &str) -> bool {
        let Some(def) = self.world.destination(id).cloned() else { return false };
        for d in &mut self.destinations {
            d.status = if d.id == id {
                DestinationStatus::ActiveTarget
            } else if d.status == DestinationStatus::ActiveTarget {
                DestinationStatus::Pending
            } else {
                d.status
            };
        }
        self.follower = Some(PurePursuit::new(self.world.routes[&def.route].clone(), self.scenario.file.autonomy));
        self.active_destination = Some(id.to_owned());
        true
    }

    fn trigger_holds(&self, trigger: Option<Trigger>) -> bool {
        match trigger {
            None => true,
            Some(Trigger::Standstill) => self.vehicle.state.speed < STANDSTILL,
        }
    }

    fn apply_script(&mut self) {
        while let Some(e) = self.events.front() {
            if self.time() + 1e-9 < e.at || !self.trigger_holds(e.when) {
                break;
            }
            let e = self.events.pop_front().expect("front exists");
            self.push(Event::Script { action: e.action.clone() });
            match e.action {
                Action::SpawnObstacle { obstacle } => self.world.obstacles.extend(obstacle.build()),
                Action::RemoveObstacle { id } => self.world.obstacles.retain(|o| o.id != id && !o.id.starts_with(&format!("{id}-"))),
                Action::SetVelocity { id, velocity } => {
                    if let Some(i) = self.world.obstacle_index(&id) {
                        self.world.obstacles[i].velocity = velocity;
                    }
                }
                Action::BlockCamera { camera } => {
                    self.blocked.insert(camera);
                }
                Action::UnblockCamera { camera } => {
                    self.blocked.remove(&camera);
                }
                Action::DriverRequest { cage, mode, has_control, onboard } => {
                    if !self.external_control || onboard {
                        self.pending.push(CommandFragment {
                            command_id: None,
                            cage_request: cage,
                            mode_request: mode,
                            requester_has_control: has_control,
                            onboard,
                        });
                    }
                }
                Action::ActivateDestination { destination } => {
                    if !self.external_control {
                        self.set_destination(&destination);
                    }
                }
                Action::ManualInput { steering, throttle } => self.set_manual(steering, throttle),
                Action::LinkDown => self.link_up = false,
                Action::LinkUp => self.link_up = true,
            }
        }
    }

    fn at_destination(&self) -> bool {
        let Some(id) = &self.active_destination else { return false };
        let def = self.world.destination(id).expect("validated destination");
        self.vehicle.state.speed < 0.05 && self.vehicle.state.pose.position().distance(def.position) <= ARRIVAL_RADIUS
    }

    /// One cage tick. `link_activity` reports CCC traffic since the last tick
    /// when an external service is attached; otherwise the scripted link state is used.
    pub fn step(&mut self, link_activity: Option<bool>) -> TickOutput {
        self.apply_script();
        let now = self.now_ns();
        let pose = self.vehicle.state.pose;
        let lidar = sensors::sample_lidar(&self.world, pose, &self.scenario.file.lidar, &self.noise, &mut self.lidar_rng, now);
        let cam_cfg = &self.scenario.file.camera;
        let cameras: Vec<CameraFrame> = self
            .runtime
            .config()
            .cameras
            .iter()
            .map(|&id| sensors::render_camera(id, cam_cfg, self.vehicle.odometer, self.blocked.contains(&id), &mut self.camera_rng, now))
            .collect();

        let inputs = TickInputs {
            now_ns: now,
            lidar: Some(lidar),
            cameras,
            vehicle: self.vehicle.state,
            commands: std::mem::take(&mut self.pending),
            mission: MissionInputs { destination_active: self.active_destination.is_some(), at_destination: self.at_destination() },
            link_activity: link_activity.unwrap_or(self.link_up),
        };
        let report = self.runtime.tick(&inputs);
        self.record_changes(&report);

        self.vehicle.controls = self.actuate(&report);
        for _ in 0..(self.tick_ns as f64 / 1e9 / PHYSICS_DT).round() as usize {
            self.vehicle = step_physics(&self.vehicle, PHYSICS_DT);
            self.world.advance(PHYSICS_DT);
        }
        self.tick += 1;
        self.after_physics();

        self.last_cloud = inputs.lidar.clone().unwrap_or_default();
        self.last_frames = inputs.cameras.clone();
        TickOutput { inputs, report }
    }

    fn actuate(&mut self, report: &CageTickReport) -> Controls {
        let steer = self.vehicle.state.steering_angle;
        let coast = Controls { accel: -self.scenario.file.autonomy.comfort_decel, steer };
        match (report.actuator_command, report.mode_state.driving) {
            (ActuatorCommand::Brake(decel), _) => Controls { accel: -decel, steer },
            (_, DrivingMode::RemoteManualDriving | DrivingMode::InPlaceManualDriving) => self.manual,
            (cmd, _) => {
                let cap = match cmd {
                    ActuatorCommand::VelocityCap(c) => Some(c),
                    _ => None,
                };
                let driving = report.mode_state.mission == MissionState::Active || self.active_destination.is_none();
                match (&mut self.follower, driving) {
                    (Some(f), true) => f.controls(&self.vehicle, cap),
                    _ => coast,
                }
            }
        }
    }

    fn record_changes(&mut self, r: &CageTickReport) {
        let prev = self.prev.take();
        let prev_mode = prev.as_ref().map(|p| p.mode_state).unwrap_or(self.scenario.initial_state);
        let m = r.mode_state;
        let prev_cage = prev.as_ref().map(|p| p.occupancy.value);
        if prev_cage != Some(r.occupancy.value) {
            self.push(Event::CageState { state: r.occupancy.value });
        }
        let prev_valid = prev.as_ref().map(|p| p.sensor_validity);
        if prev_valid != Some(r.sensor_validity) {
            let invalid: Vec<CameraId> = r.camera_valid.iter().filter(|(_, v)| !v.is_valid()).map(|(k, _)| *k).collect();
            self.push(Event::SensorValidity { validity: r.sensor_validity, invalid });
        }
        if m.cage != prev_mode.cage {
            self.push(Event::CageMode { from: prev_mode.cage, to: m.cage });
        }
        if m.driving != prev_mode.driving {
            self.push(Event::DrivingMode { from: prev_mode.driving, to: m.driving });
            if m.driving == DrivingMode::EmergencyStop {
                let cause = if r.link_lost {
                    "link lost"
                } else if r.occupancy.value == CageState::ClearZoneOccupied && prev_mode.cage == cage_core::CageMode::On {
                    "clear zone occupied"
                } else if r.sensor_validity == SensorValidity::Invalid && prev_mode.cage == cage_core::CageMode::On {
                    "sensor invalid"
                } else {
                    "request"
                };
                self.push(Event::EmergencyStop { speed: self.vehicle.state.speed, cause: cause.to_owned() });
                self.moving_in_stop = self.vehicle.state.speed >= STANDSTILL;
            }
        }
        if m.mission != prev_mode.mission {
            self.push(Event::Mission { from: prev_mode.mission, to: m.mission });
        }
        if m.mission == MissionState::Completed && prev_mode.mission != MissionState::Completed {
            if let Some(id) = self.active_destination.take() {
                for d in self.destinations.iter_mut().filter(|d| d.id == id) {
                    d.status = DestinationStatus::Reached;
                }
                self.push(Event::DestinationReached { id });
            }
        }
        if r.tick_index.is_multiple_of(POSITION_LOG_PERIOD_TICKS) {
            let s = self.vehicle.state;
            self.push(Event::Position { x: s.pose.x, y: s.pose.y, heading: s.pose.heading, speed: s.speed });
        }
        self.prev = Some(r.clone());
    }

    fn after_physics(&mut self) {
        let stopped = self.vehicle.state.speed < STANDSTILL;
        let in_stop = self.runtime.mode_state().driving == DrivingMode::EmergencyStop;
        if in_stop && self.moving_in_stop && stopped {
            self.moving_in_stop = false;
            let (a, b) = self.vehicle.bumper();
            let gap = Some(self.world.segment_clearance(a, b)).filter(|g| g.is_finite());
            let (x, y) = (self.vehicle.state.pose.x, self.vehicle.state.pose.y);
            self.push(Event::Standstill { gap, x, y });
            if let (Some(after), None) = (self.scenario.file.end_after_standstill, self.standstill_end) {
                self.standstill_end = Some(self.tick + (after * 1e9 / self.tick_ns as f64).round() as u64);
            }
        }
        let footprint = self.vehicle.footprint();
        let hits: BTreeSet<String> = self
            .world
            .obstacles
            .iter()
            .filter(|o| cage_core::geometry::polygons_overlap(&o.polygon, &footprint))
            .map(|o| o.id.clone())
            .collect();
        for id in hits.difference(&self.in_collision).cloned().collect::<Vec<_>>() {
            self.push(Event::Collision { obstacle: id });
        }
        self.in_collision = hits;
    }

    /// Close the log with a summary record.
    pub fn finish(&mut self) {
        let s = self.vehicle.state;
        let m = self.runtime.mode_state();
        self.push(Event::End { driving: m.driving, mission: m.mission, distance: self.vehicle.odometer, x: s.pose.x, y: s.pose.y });
    }

    /// Wire snapshot of the latest tick.
    pub fn state_update(&self, report: &CageTickReport) -> StateUpdate {
        let p = self.vehicle.params;
        let points: Vec<Point2> =
            self.last_cloud.points.iter().filter(|q| q.z >= self.runtime.config().detector.z_cutoff).map(|q| q.planar()).collect();
        let shown: Vec<CameraFrame> =
            self.last_frames.iter().filter(|f| matches!(f.camera_id, CameraId::Front | CameraId::Back)).cloned().collect();
        let s = self.vehicle.state;
        StateUpdate::from_report(report, s.pose, s.speed, s.steering_angle, [p.length, p.width], &points, &shown)
    }
}
