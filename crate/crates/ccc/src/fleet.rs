//! Fleet configuration: which vehicles the service accepts and their destinations.

use cage_core::geometry::Point2;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    #[serde(default)]
    pub vehicles: Vec<VehicleConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub id: String,
    /// Scenario a simulated vehicle agent runs; informational for the service.
    #[serde(default)]
    pub scenario: Option<String>,
    /// When empty, the list the vehicle reports on registration is used.
    #[serde(default)]
    pub destinations: Vec<DestinationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DestinationConfig {
    pub id: String,
    pub name: String,
    pub position: Point2,
}

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("reading fleet config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing fleet config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("vehicle `{0}` listed twice")]
    Duplicate(String),
}

impl FleetConfig {
    pub fn single(id: &str) -> Self {
        Self { vehicles: vec![VehicleConfig { id: id.to_owned(), scenario: None, destinations: Vec::new() }] }
    }

    pub fn from_toml(text: &str) -> Result<Self, FleetError> {
        let cfg: FleetConfig = toml::from_str(text)?;
        let mut seen = std::collections::BTreeSet::new();
        for v in &cfg.vehicles {
            if !seen.insert(v.id.as_str()) {
                return Err(FleetError::Duplicate(v.id.clone()));
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, FleetError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
