//! Onboard half of the connected dependability cage.
//!
//! The qualitative monitor is split into three stateless stages
//! ([`safe_zone`], [`lidar`], [`camera`]) whose verdicts feed the
//! [`mode`] state machine. [`runtime`] wires them into one fixed-order tick
//! and [`wire`] defines the envelopes exchanged with the command control
//! center.

pub mod camera;
pub mod geometry;
pub mod lidar;
pub mod mode;
pub mod runtime;
pub mod safe_zone;
pub mod wire;

mod b64;

pub use camera::{CameraFrame, CameraId, SensorValidity, ValidatorConfig};
pub use geometry::{Point2, Point3, Pose};
pub use lidar::{CageState, Cluster, DetectorConfig, PointCloud, ZoneOccupancy};
pub use mode::{CageMode, DrivingMode, MissionState, ModeInput, ModeState};
pub use runtime::{ActuatorCommand, CageRuntime, CageTickReport, CommandFragment, RuntimeConfig, TickInputs};
pub use safe_zone::{Gear, SafeZone, SafeZoneConfig, VehicleState, ZoneClass};
