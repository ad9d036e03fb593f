//! Cage tick: zone, detector, camera validator and mode control in a fixed
//! order, producing one actuator command and one report per tick.

use crate::camera::{self, CameraFrame, CameraId, SensorValidity, ValidatorConfig};
use crate::lidar::{self, CageState, DetectorConfig, PointCloud, ZoneOccupancy};
use crate::mode::{CageMode, DrivingMode, ModeControl, ModeInput, ModeState};
use crate::safe_zone::{self, Gear, SafeZoneConfig, VehicleState, ZoneOutline};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    pub zone: SafeZoneConfig,
    pub detector: DetectorConfig,
    pub validator: ValidatorConfig,
    pub tick_rate_hz: f64,
    /// Seconds without CCC traffic before remote manual driving is stopped.
    pub link_timeout: f64,
    /// Speed cap in limited autonomous driving, m/s.
    pub limited_speed: f64,
    /// Frames older than this many ticks count as missing.
    pub stale_ticks: u32,
    /// If false only the camera facing the travel direction gates SR2.
    pub require_all_cameras: bool,
    pub cameras: Vec<CameraId>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            zone: SafeZoneConfig::default(),
            detector: DetectorConfig::default(),
            validator: ValidatorConfig::default(),
            tick_rate_hz: 20.0,
            link_timeout: 2.0,
            limited_speed: 1.5,
            stale_ticks: 2,
            require_all_cameras: true,
            cameras: CameraId::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Zone(#[from] safe_zone::ZoneError),
    #[error(transparent)]
    Detector(#[from] lidar::DetectorError),
    #[error("{0}")]
    Runtime(&'static str),
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.zone.validate()?;
        self.detector.validate()?;
        if !(self.tick_rate_hz.is_finite() && self.tick_rate_hz > 0.0) {
            return Err(ConfigError::Runtime("tick_rate_hz must be positive"));
        }
        if !(self.link_timeout.is_finite() && self.link_timeout > 0.0) {
            return Err(ConfigError::Runtime("link_timeout must be positive"));
        }
        if !(self.limited_speed.is_finite() && self.limited_speed > 0.0) {
            return Err(ConfigError::Runtime("limited_speed must be positive"));
        }
        Ok(())
    }

    pub fn tick_period_ns(&self) -> u64 {
        (1e9 / self.tick_rate_hz).round() as u64
    }
}

/// A driver or CCC request addressed to the mode control, as relayed to the vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CommandFragment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cage_request: Option<CageMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_request: Option<DrivingMode>,
    #[serde(default)]
    pub requester_has_control: bool,
    #[serde(default)]
    pub onboard: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MissionInputs {
    pub destination_active: bool,
    pub at_destination: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickInputs {
    pub now_ns: u64,
    pub lidar: Option<PointCloud>,
    pub cameras: Vec<CameraFrame>,
    pub vehicle: VehicleState,
    pub commands: Vec<CommandFragment>,
    pub mission: MissionInputs,
    /// Set when any CCC traffic arrived since the previous tick.
    #[serde(default)]
    pub link_activity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActuatorCommand {
    Proceed,
    /// Deceleration in m/s².
    Brake(f64),
    /// Speed cap in m/s.
    VelocityCap(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CageTickReport {
    pub tick_index: u64,
    pub time_ns: u64,
    pub occupancy: ZoneOccupancy,
    pub camera_valid: BTreeMap<CameraId, SensorValidity>,
    pub sensor_validity: SensorValidity,
    pub mode_state: ModeState,
    pub zone_outline: ZoneOutline,
    pub actuator_command: ActuatorCommand,
    /// Age of the oldest sensor frame used this tick, in simulated time.
    pub latency_us: u64,
    pub filtered_points: usize,
    pub clusters: usize,
    pub applied_commands: Vec<u64>,
    pub link_lost: bool,
}

impl CageTickReport {
    pub fn focus_warning(&self) -> bool {
        self.occupancy.value == CageState::FocusZoneOccupied
    }
}

/// Onboard cage instance. Owns the mode control; one per vehicle.
#[derive(Debug, Clone)]
pub struct CageRuntime {
    cfg: RuntimeConfig,
    control: ModeControl,
    tick_index: u64,
    last_link_ns: Option<u64>,
}

impl CageRuntime {
    pub fn new(cfg: RuntimeConfig) -> Result<Self, ConfigError> {
        Self::with_state(cfg, ModeState::default())
    }

    pub fn with_state(cfg: RuntimeConfig, state: ModeState) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Self { cfg, control: ModeControl::new(state), tick_index: 0, last_link_ns: None })
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.cfg
    }

    pub fn mode_state(&self) -> ModeState {
        self.control.state()
    }

    pub fn tick_index(&self) -> u64 {
        self.tick_index
    }

    fn mode_scale(&self) -> f64 {
        if self.control.state().driving == DrivingMode::LimitedAutonomousDriving {
            self.cfg.zone.limited_zone_scale
        } else {
            1.0
        }
    }

    fn is_fresh(&self, frame_ns: u64, now_ns: u64) -> bool {
        frame_ns <= now_ns && now_ns - frame_ns <= u64::from(self.cfg.stale_ticks) * self.cfg.tick_period_ns()
    }

    pub fn tick(&mut self, inputs: &TickInputs) -> CageTickReport {
        let now = inputs.now_ns;
        if inputs.link_activity {
            self.last_link_ns = Some(now);
        }
        let mut oldest = now;

        // An out-of-range vehicle state is clamped into the zone's domain; a
        // non-finite one falls back to a standing vehicle and an occupied zone.
        let mut vehicle = inputs.vehicle;
        let limit = self.cfg.zone.max_steering_angle;
        vehicle.steering_angle = vehicle.steering_angle.clamp(-limit, limit);
        vehicle.speed = vehicle.speed.max(0.0);
        let zone = safe_zone::compute_zone(&vehicle, &self.cfg.zone, self.mode_scale());
        let zone_ok = zone.is_ok();
        let zone = zone
            .unwrap_or_else(|_| safe_zone::compute_zone(&VehicleState::default(), &self.cfg.zone, 1.0).expect("default state is valid"));

        let fresh_lidar = inputs.lidar.as_ref().filter(|c| self.is_fresh(c.timestamp_ns, now) && c.is_valid());
        let (occupancy, filtered_points, clusters) = match fresh_lidar {
            Some(cloud) if zone_ok => {
                oldest = oldest.min(cloud.timestamp_ns);
                let d = lidar::detect(cloud, &zone, &self.cfg.detector);
                (d.occupancy, d.filtered_points, d.clusters)
            }
            _ => (ZoneOccupancy::sensor_missing(), 0, 0),
        };

        let mut camera_valid = BTreeMap::new();
        for &id in &self.cfg.cameras {
            let frame = inputs.cameras.iter().find(|f| f.camera_id == id && self.is_fresh(f.timestamp_ns, now));
            let validity = match frame {
                Some(f) => {
                    oldest = oldest.min(f.timestamp_ns);
                    camera::validate(f, &self.cfg.validator).unwrap_or(SensorValidity::Invalid)
                }
                None => SensorValidity::Invalid,
            };
            camera_valid.insert(id, validity);
        }
        let facing = match vehicle.gear {
            Gear::Forward => CameraId::Front,
            Gear::Reverse => CameraId::Back,
        };
        let sensor_validity = if self.cfg.require_all_cameras {
            if camera_valid.values().all(|v| v.is_valid()) {
                SensorValidity::Valid
            } else {
                SensorValidity::Invalid
            }
        } else {
            camera_valid.get(&facing).copied().unwrap_or(SensorValidity::Invalid)
        };

        let link_lost = self.control.state().driving == DrivingMode::RemoteManualDriving
            && self.last_link_ns.is_none_or(|t| now.saturating_sub(t) as f64 > self.cfg.link_timeout * 1e9);
        if link_lost {
            tracing::warn!(tick = self.tick_index, "CCC link lost during remote manual driving");
        }

        let (input, applied_commands) = self.merge_commands(&inputs.commands, occupancy.value, sensor_validity, inputs, link_lost);
        let mode_state = self.control.advance(&input);

        let actuator_command = match mode_state.driving {
            DrivingMode::EmergencyStop => ActuatorCommand::Brake(self.cfg.zone.max_decel),
            DrivingMode::LimitedAutonomousDriving => ActuatorCommand::VelocityCap(self.cfg.limited_speed),
            _ => ActuatorCommand::Proceed,
        };

        let report = CageTickReport {
            tick_index: self.tick_index,
            time_ns: now,
            occupancy,
            camera_valid,
            sensor_validity,
            mode_state,
            zone_outline: zone.outline(),
            actuator_command,
            latency_us: (now - oldest) / 1_000,
            filtered_points,
            clusters,
            applied_commands,
            link_lost,
        };
        self.tick_index += 1;
        report
    }

    /// Fold this tick's fragments into one mode-control input. Unauthorised
    /// CCC fragments are dropped; among the rest the last request wins, except
    /// that an emergency-stop request is never overridden by a later one.
    fn merge_commands(
        &self,
        commands: &[CommandFragment],
        occupancy: CageState,
        camera_valid: SensorValidity,
        inputs: &TickInputs,
        link_lost: bool,
    ) -> (ModeInput, Vec<u64>) {
        let mut input = ModeInput {
            occupancy,
            camera_valid,
            cage_request: None,
            mode_request: None,
            requester_has_control: false,
            at_destination: inputs.mission.at_destination,
            destination_active: inputs.mission.destination_active,
            onboard_emergency: link_lost,
        };
        let mut applied = Vec::new();
        for c in commands {
            if c.onboard && c.mode_request == Some(DrivingMode::EmergencyStop) {
                input.onboard_emergency = true;
            } else if c.requester_has_control || c.onboard {
                input.requester_has_control = true;
                if c.cage_request.is_some() {
                    input.cage_request = c.cage_request;
                }
                if c.mode_request.is_some() && input.mode_request != Some(DrivingMode::EmergencyStop) {
                    input.mode_request = c.mode_request;
                }
            }
            applied.extend(c.command_id);
        }
        (input, applied)
    }
}
