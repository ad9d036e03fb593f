//! Scenario scripts: a world, a starting state and timed events, stored as TOML.
//!
//! ```toml
//! schema_version = 1
//! id = "8"
//! duration = 30.0
//!
//! [vehicle]
//! pose = [0.0, 0.0, 0.0]
//!
//! [[obstacles]]
//! id = "wall"
//! shape = "rect"
//! center = [40.0, 0.0]
//! size = [0.4, 10.0]
//!
//! [[events]]
//! at = 5.0
//! action = "block_camera"
//! camera = "Front"
//! ```

use crate::autonomy::AutonomyConfig;
use crate::physics::VehicleParams;
use crate::sensors::{CameraConfig, LidarConfig, NoisePreset};
use crate::world::{self, DestinationDef, Obstacle, ObstacleKind, Route, WorldError, WorldMap};
use cage_core::camera::CameraId;
use cage_core::geometry::{Point2, Pose};
use cage_core::mode::{CageMode, DrivingMode, ModeState};
use cage_core::runtime::RuntimeConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

const BUILTIN: &[(&str, &str)] = &[
    ("1", include_str!("../scenarios/1-depot.toml")),
    ("2", include_str!("../scenarios/2-loading.toml")),
    ("3", include_str!("../scenarios/3-delivery.toml")),
    ("4", include_str!("../scenarios/4-handover.toml")),
    ("5", include_str!("../scenarios/5-narrowing.toml")),
    ("6", include_str!("../scenarios/6-meeting-point.toml")),
    ("7", include_str!("../scenarios/7-pedestrians.toml")),
    ("8", include_str!("../scenarios/8-camera-blocked.toml")),
    ("nominal-lap", include_str!("../scenarios/nominal-lap.toml")),
    ("stop-distance", include_str!("../scenarios/stop-distance.toml")),
];

pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(id, _)| *id)
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    Version(u32),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("event {index}: {reason}")]
    Event { index: usize, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Rect {
        center: Point2,
        size: [f64; 2],
        #[serde(default)]
        heading: f64,
    },
    Polygon {
        points: Vec<Point2>,
    },
    /// Thick polyline; becomes one obstacle per segment.
    Wall {
        points: Vec<Point2>,
        thickness: f64,
        #[serde(default)]
        closed: bool,
    },
    /// Solid stadium island.
    Stadium {
        center: Point2,
        straight: f64,
        radius: f64,
        #[serde(default = "default_segments")]
        segments: usize,
    },
    /// Stadium-shaped ring wall.
    StadiumWall {
        center: Point2,
        straight: f64,
        radius: f64,
        thickness: f64,
        #[serde(default = "default_segments")]
        segments: usize,
    },
}

fn default_segments() -> usize {
    32
}

fn default_height() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleDef {
    pub id: String,
    #[serde(default)]
    pub kind: ObstacleKind,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default)]
    pub velocity: Point2,
    #[serde(flatten)]
    pub shape: Shape,
}

impl ObstacleDef {
    pub fn build(&self) -> Vec<Obstacle> {
        let make =
            |id: String, polygon: Vec<Point2>| Obstacle { id, kind: self.kind, polygon, height: self.height, velocity: self.velocity };
        let pieces = |polys: Vec<Vec<Point2>>| polys.into_iter().enumerate().map(|(k, p)| make(format!("{}-{k}", self.id), p)).collect();
        match &self.shape {
            Shape::Rect { center, size, heading } => vec![make(self.id.clone(), world::rect(*center, *size, *heading))],
            Shape::Polygon { points } => vec![make(self.id.clone(), points.clone())],
            Shape::Wall { points, thickness, closed } => {
                let mut pts = points.clone();
                if *closed && !pts.is_empty() {
                    pts.push(pts[0]);
                }
                pieces(world::wall(&pts, *thickness))
            }
            Shape::Stadium { center, straight, radius, segments } => {
                vec![make(self.id.clone(), world::stadium(*center, *straight, *radius, *segments))]
            }
            Shape::StadiumWall { center, straight, radius, thickness, segments } => {
                let mut pts = world::stadium(*center, *straight, *radius + thickness / 2.0, *segments);
                pts.push(pts[0]);
                pieces(world::wall(&pts, *thickness))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StadiumPath {
    pub center: Point2,
    pub straight: f64,
    pub radius: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteDef {
    pub name: String,
    #[serde(default)]
    pub closed: bool,
    #[serde(default)]
    pub waypoints: Vec<Point2>,
    #[serde(default)]
    pub stadium: Option<StadiumPath>,
}

impl RouteDef {
    fn build(&self) -> Route {
        match &self.stadium {
            Some(s) => Route { waypoints: world::stadium(s.center, s.straight, s.radius, s.segments), closed: true },
            None => Route { waypoints: self.waypoints.clone(), closed: self.closed },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleDef {
    /// x, y, heading.
    pub pose: [f64; 3],
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub params: VehicleParams,
    /// Route driven when no destination is active.
    #[serde(default)]
    pub route: Option<String>,
}

impl VehicleDef {
    pub fn pose(&self) -> Pose {
        Pose::new(self.pose[0], self.pose[1], self.pose[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Vehicle speed below 1 mm/s.
    Standstill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    SpawnObstacle {
        obstacle: ObstacleDef,
    },
    RemoveObstacle {
        id: String,
    },
    SetVelocity {
        id: String,
        velocity: Point2,
    },
    BlockCamera {
        camera: CameraId,
    },
    UnblockCamera {
        camera: CameraId,
    },
    /// Safety-driver request through the CCC panel, or onboard when `onboard`.
    DriverRequest {
        #[serde(default)]
        cage: Option<CageMode>,
        #[serde(default)]
        mode: Option<DrivingMode>,
        #[serde(default = "yes")]
        has_control: bool,
        #[serde(default)]
        onboard: bool,
    },
    ActivateDestination {
        destination: String,
    },
    /// Manual steering (rad) and throttle in [-1, 1].
    ManualInput {
        steering: f64,
        throttle: f64,
    },
    LinkDown,
    LinkUp,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDef {
    pub at: f64,
    #[serde(default)]
    pub when: Option<Trigger>,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialMode {
    pub cage: CageMode,
    pub driving: DrivingMode,
    #[serde(default)]
    pub destination: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration: f64,
    #[serde(default)]
    pub noise: NoisePreset,
    /// End the run this many seconds after the first emergency standstill.
    #[serde(default)]
    pub end_after_standstill: Option<f64>,
    pub vehicle: VehicleDef,
    #[serde(default)]
    pub initial_mode: Option<InitialMode>,
    #[serde(default)]
    pub config: RuntimeConfig,
    #[serde(default)]
    pub autonomy: AutonomyConfig,
    #[serde(default)]
    pub lidar: LidarConfig,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub obstacles: Vec<ObstacleDef>,
    #[serde(default)]
    pub routes: Vec<RouteDef>,
    #[serde(default)]
    pub destinations: Vec<DestinationDef>,
    #[serde(default)]
    pub events: Vec<EventDef>,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub world: WorldMap,
    pub initial_state: ModeState,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: u32,
        }
        let v: Version = toml::from_str(text)?;
        if v.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version(v.schema_version));
        }
        Self::from_file(toml::from_str(text)?)
    }

    pub fn builtin(id: &str) -> Result<Self, ScenarioError> {
        let (_, text) = BUILTIN.iter().find(|(k, _)| *k == id).ok_or_else(|| ScenarioError::Unknown(id.to_owned()))?;
        Self::from_toml(text)
    }

    /// Built-in id, or a path to a TOML file.
    pub fn load(id_or_path: &str) -> Result<Self, ScenarioError> {
        if BUILTIN.iter().any(|(k, _)| *k == id_or_path) {
            return Self::builtin(id_or_path);
        }
        let path = Path::new(id_or_path);
        if !path.exists() {
            return Err(ScenarioError::Unknown(id_or_path.to_owned()));
        }
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: id_or_path.to_owned(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Version(file.schema_version));
        }
        if !(file.duration.is_finite() && file.duration > 0.0) {
            return Err(ScenarioError::Invalid("duration must be positive".into()));
        }
        file.config.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let world = WorldMap {
            obstacles: file.obstacles.iter().flat_map(ObstacleDef::build).collect(),
            routes: file.routes.iter().map(|r| (r.name.clone(), r.build())).collect(),
            destinations: file.destinations.clone(),
        };
        world.validate()?;
        if let Some(route) = &file.vehicle.route {
            if !world.routes.contains_key(route) {
                return Err(ScenarioError::Invalid(format!("vehicle route `{route}` is not defined")));
            }
        }

        let initial_state = match &file.initial_mode {
            Some(m) => {
                if let Some(d) = &m.destination {
                    if world.destination(d).is_none() {
                        return Err(WorldError::UnknownDestination(d.clone()).into());
                    }
                }
                let mission = if m.destination.is_some() { cage_core::MissionState::Active } else { cage_core::MissionState::Inactive };
                ModeState { cage: m.cage, driving: m.driving, mission }
            }
            None => ModeState::default(),
        };

        let mut live: BTreeSet<String> = world.obstacles.iter().map(|o| o.id.clone()).collect();
        let mut last = 0.0;
        for (index, e) in file.events.iter().enumerate() {
            let fail = |reason: String| ScenarioError::Event { index, reason };
            if !(e.at.is_finite() && e.at >= last) {
                return Err(fail(format!("time {} is not ordered after {}", e.at, last)));
            }
            last = e.at;
            match &e.action {
                Action::SpawnObstacle { obstacle } => {
                    for o in obstacle.build() {
                        world::check_polygon(&o)?;
                        if !live.insert(o.id.clone()) {
                            return Err(fail(format!("obstacle `{}` already exists", o.id)));
                        }
                    }
                }
                Action::RemoveObstacle { id } => {
                    if !live.remove(id) {
                        return Err(WorldError::UnknownObstacle(id.clone()).into());
                    }
                }
                Action::SetVelocity { id, .. } => {
                    if !live.contains(id) {
                        return Err(WorldError::UnknownObstacle(id.clone()).into());
                    }
                }
                Action::ActivateDestination { destination } => {
                    if world.destination(destination).is_none() {
                        return Err(WorldError::UnknownDestination(destination.clone()).into());
                    }
                }
                Action::BlockCamera { camera } | Action::UnblockCamera { camera } => {
                    if !file.config.cameras.contains(camera) {
                        return Err(fail(format!("camera {camera:?} is not fitted")));
                    }
                }
                Action::DriverRequest { .. } | Action::ManualInput { .. } | Action::LinkDown | Action::LinkUp => {}
            }
        }
        Ok(Self { file, world, initial_state })
    }

    pub fn id(&self) -> &str {
        &self.file.id
    }

    /// Start at and cruise at `kmh`; used by the stop-distance sweep.
    pub fn with_speed_kmh(mut self, kmh: f64) -> Self {
        let v = kmh / 3.6;
        self.file.vehicle.speed = v;
        self.file.autonomy.cruise_speed = v;
        self.file.vehicle.params.max_speed = self.file.vehicle.params.max_speed.max(v);
        self
    }
}
