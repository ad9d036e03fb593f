//! Event log: one JSON object per line, in simulation order.

use crate::scenario::Action;
use crate::sensors::NoisePreset;
use cage_core::camera::{CameraId, SensorValidity};
use cage_core::lidar::CageState;
use cage_core::mode::{CageMode, DrivingMode, MissionState};
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Start {
        scenario: String,
        seed: u64,
        noise: NoisePreset,
    },
    Script {
        action: Action,
    },
    CageMode {
        from: CageMode,
        to: CageMode,
    },
    DrivingMode {
        from: DrivingMode,
        to: DrivingMode,
    },
    Mission {
        from: MissionState,
        to: MissionState,
    },
    CageState {
        state: CageState,
    },
    SensorValidity {
        validity: SensorValidity,
        invalid: Vec<CameraId>,
    },
    EmergencyStop {
        speed: f64,
        cause: String,
    },
    /// Vehicle came to rest after an emergency stop; `gap` is bumper-to-obstacle,
    /// absent when there is nothing in the world to measure against.
    Standstill {
        gap: Option<f64>,
        x: f64,
        y: f64,
    },
    DestinationReached {
        id: String,
    },
    Collision {
        obstacle: String,
    },
    Position {
        x: f64,
        y: f64,
        heading: f64,
        speed: f64,
    },
    End {
        driving: DrivingMode,
        mission: MissionState,
        distance: f64,
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub tick: u64,
    #[serde(flatten)]
    pub event: Event,
}

pub fn write_ndjson<W: Write>(w: &mut W, records: &[LogRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ndjson<R: BufRead>(r: R) -> io::Result<Vec<LogRecord>> {
    r.lines()
        .filter(|l| !l.as_ref().is_ok_and(|l| l.trim().is_empty()))
        .map(|l| l.and_then(|l| serde_json::from_str(&l).map_err(io::Error::other)))
        .collect()
}

/// Short human label used when matching qualitative event sequences.
pub fn label(event: &Event) -> Option<String> {
    Some(match event {
        Event::DrivingMode { to, .. } => format!("mode:{}", mode_tag(*to)),
        Event::Mission { to, .. } => format!("mission:{to:?}"),
        Event::SensorValidity { validity, .. } => format!("sensor:{validity:?}"),
        Event::EmergencyStop { cause, .. } => format!("estop:{cause}"),
        Event::DestinationReached { id } => format!("reached:{id}"),
        Event::Collision { .. } => "collision".to_owned(),
        Event::Standstill { .. } => "standstill".to_owned(),
        Event::Script { action } => format!("script:{}", action_tag(action)),
        _ => return None,
    })
}

fn mode_tag(m: DrivingMode) -> &'static str {
    match m {
        DrivingMode::FullyAutonomousDriving => "FA",
        DrivingMode::LimitedAutonomousDriving => "LA",
        DrivingMode::RemoteManualDriving => "RM",
        DrivingMode::InPlaceManualDriving => "IP",
        DrivingMode::EmergencyStop => "ES",
    }
}

fn action_tag(a: &Action) -> &'static str {
    match a {
        Action::SpawnObstacle { .. } => "spawn",
        Action::RemoveObstacle { .. } => "remove",
        Action::SetVelocity { .. } => "velocity",
        Action::BlockCamera { .. } => "block",
        Action::UnblockCamera { .. } => "unblock",
        Action::DriverRequest { .. } => "request",
        Action::ActivateDestination { .. } => "activate",
        Action::ManualInput { .. } => "manual",
        Action::LinkDown => "link_down",
        Action::LinkUp => "link_up",
    }
}

/// True if `expected` occurs in order (not necessarily adjacent) in `log`.
pub fn contains_subsequence(log: &[LogRecord], expected: &[&str]) -> bool {
    let mut want = expected.iter().peekable();
    for l in log.iter().filter_map(|r| label(&r.event)) {
        if want.peek().is_some_and(|w| **w == l) {
            want.next();
        }
    }
    want.peek().is_none()
}
