//! Desk-scale simulator for the dependability cage.
//!
//! A 2D world with polygon obstacles, a kinematic vehicle, synthetic LiDAR
//! and camera frames and scripted scenario events, all on one deterministic
//! clock: 10 ms physics steps, one cage tick every 50 ms.

pub mod autonomy;
pub mod log;
pub mod physics;
pub mod record;
pub mod run;
pub mod scenario;
pub mod sensors;
pub mod sim;
pub mod world;

pub use log::{Event, LogRecord};
pub use run::{run_scenario, run_scenario_with, RunOutcome, RunSummary, TickObserver};
pub use scenario::{Scenario, ScenarioError};
pub use sensors::NoisePreset;
pub use sim::{SimOptions, Simulation, TickOutput};
