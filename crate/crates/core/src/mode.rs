//! Mode control: the fail-operational state machine.
//!
//! One call to [`step`] per cage tick. Rules, in order:
//!
//! 1. With the cage on, a clear-zone hit or an invalid camera latches
//!    `EmergencyStop`, unless an in-vehicle driver holds the DDT.
//! 2. `EmergencyStop` is left only through an authorised request for one of
//!    the other four modes, and only while no violation would latch again.
//! 3. Other authorised requests are honoured; limited autonomy and emergency
//!    stop are always accepted, the rest need a violation-free tick. The latch
//!    is re-applied to the result.
//! 4. An authorised cage request replaces the cage mode. The violation check
//!    above used the cage mode from before the request.
//! 5. Mission progress follows the destination inputs and the driving mode.

use crate::camera::SensorValidity;
use crate::lidar::CageState;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DrivingMode {
    #[serde(rename = "Fully Autonomous Driving")]
    FullyAutonomousDriving,
    #[serde(rename = "Limited Autonomous Driving")]
    LimitedAutonomousDriving,
    #[serde(rename = "Remote Manual Driving")]
    RemoteManualDriving,
    #[serde(rename = "In-Place Manual Driving")]
    InPlaceManualDriving,
    #[serde(rename = "Emergency Stop")]
    EmergencyStop,
}

impl DrivingMode {
    pub const ALL: [DrivingMode; 5] = [
        DrivingMode::FullyAutonomousDriving,
        DrivingMode::LimitedAutonomousDriving,
        DrivingMode::RemoteManualDriving,
        DrivingMode::InPlaceManualDriving,
        DrivingMode::EmergencyStop,
    ];

    /// Modes in which a monitor violation latches the emergency stop.
    pub fn latches_on_violation(self) -> bool {
        matches!(self, DrivingMode::FullyAutonomousDriving | DrivingMode::LimitedAutonomousDriving | DrivingMode::RemoteManualDriving)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CageMode {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissionState {
    Inactive,
    Active,
    Blocked,
    Completed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeState {
    pub cage: CageMode,
    pub driving: DrivingMode,
    pub mission: MissionState,
}

impl Default for ModeState {
    /// Power-up state: cage off, vehicle held, no mission.
    fn default() -> Self {
        Self { cage: CageMode::Off, driving: DrivingMode::EmergencyStop, mission: MissionState::Inactive }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeInput {
    pub occupancy: CageState,
    pub camera_valid: SensorValidity,
    pub cage_request: Option<CageMode>,
    pub mode_request: Option<DrivingMode>,
    pub requester_has_control: bool,
    pub at_destination: bool,
    pub destination_active: bool,
    /// In-vehicle emergency request; needs no control rights.
    pub onboard_emergency: bool,
}

impl ModeInput {
    pub fn monitor(occupancy: CageState, camera_valid: SensorValidity) -> Self {
        Self {
            occupancy,
            camera_valid,
            cage_request: None,
            mode_request: None,
            requester_has_control: false,
            at_destination: false,
            destination_active: false,
            onboard_emergency: false,
        }
    }
}

pub fn violation(cage: CageMode, input: &ModeInput) -> bool {
    cage == CageMode::On && (input.occupancy == CageState::ClearZoneOccupied || input.camera_valid == SensorValidity::Invalid)
}

pub fn step(current: ModeState, input: &ModeInput) -> ModeState {
    let violating = violation(current.cage, input);
    let latch = |mode: DrivingMode| if violating && mode.latches_on_violation() { DrivingMode::EmergencyStop } else { mode };

    let mut driving = latch(current.driving);
    if input.onboard_emergency {
        driving = DrivingMode::EmergencyStop;
    }

    let authorised = input.requester_has_control;
    if let (Some(request), true) = (input.mode_request, authorised) {
        if driving == DrivingMode::EmergencyStop {
            // a stop raised on this very tick is not undone by a same-tick request
            let releases = current.driving == DrivingMode::EmergencyStop
                && request != DrivingMode::EmergencyStop
                && !input.onboard_emergency
                && latch(request) == request;
            if releases {
                driving = request;
            }
        } else {
            let always = matches!(request, DrivingMode::LimitedAutonomousDriving | DrivingMode::EmergencyStop);
            if always || !violating {
                driving = latch(request);
            }
        }
    }

    let cage = match (input.cage_request, authorised) {
        (Some(requested), true) => requested,
        _ => current.cage,
    };

    let mut mission = match current.mission {
        MissionState::Inactive | MissionState::Completed if input.destination_active && !input.at_destination => MissionState::Active,
        MissionState::Blocked if driving != DrivingMode::EmergencyStop && input.destination_active => MissionState::Active,
        m => m,
    };
    if mission == MissionState::Active {
        if input.at_destination {
            mission = MissionState::Completed;
        } else if driving == DrivingMode::EmergencyStop {
            mission = MissionState::Blocked;
        }
    }

    ModeState { cage, driving, mission }
}

/// Owner of the machine state; the single writer per vehicle.
#[derive(Debug, Clone, Default)]
pub struct ModeControl {
    state: ModeState,
}

impl ModeControl {
    pub fn new(state: ModeState) -> Self {
        Self { state }
    }

    pub fn state(&self) -> ModeState {
        self.state
    }

    pub fn advance(&mut self, input: &ModeInput) -> ModeState {
        let next = step(self.state, input);
        if next != self.state {
            tracing::debug!(from = ?self.state, to = ?next, "mode transition");
        }
        self.state = next;
        next
    }
}
