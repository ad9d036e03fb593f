//! Message envelopes shared by the vehicle, the CCC service and operator UIs.
//!
//! A frame on the socket is a 4-byte big-endian length followed by one UTF-8
//! JSON object, the [`Envelope`]. The payload shape depends on `kind`;
//! [`Envelope::decode`] maps it to a typed [`Message`], and kinds this
//! version does not know are reported as `None` so callers can skip them.

use crate::camera::{CameraFrame, SensorValidity};
use crate::geometry::{Point2, Pose};
use crate::lidar::CageState;
use crate::mode::{CageMode, DrivingMode, MissionState, ModeState};
use crate::runtime::{CageTickReport, CommandFragment};
use crate::safe_zone::ZoneOutline;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;
/// Upper bound on LiDAR points carried by one state update.
pub const MAX_WIRE_POINTS: usize = 1500;
pub const THUMBNAIL_MAX: (u32, u32) = (160, 120);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub version: u32,
    pub kind: String,
    pub vehicle_id: String,
    pub sender: String,
    pub sequence: u64,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    StateUpdate(Box<StateUpdate>),
    CommandRequest(CommandRequest),
    CommandAck(CommandAck),
    ControlGrant(ControlGrant),
    ControlDeny(ControlDeny),
    DestinationList(DestinationList),
    Teleop(Teleop),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::StateUpdate(_) => "StateUpdate",
            Message::CommandRequest(_) => "CommandRequest",
            Message::CommandAck(_) => "CommandAck",
            Message::ControlGrant(_) => "ControlGrant",
            Message::ControlDeny(_) => "ControlDeny",
            Message::DestinationList(_) => "DestinationList",
            Message::Teleop(_) => "Teleop",
        }
    }

    fn payload(&self) -> serde_json::Result<serde_json::Value> {
        match self {
            Message::StateUpdate(p) => serde_json::to_value(p),
            Message::CommandRequest(p) => serde_json::to_value(p),
            Message::CommandAck(p) => serde_json::to_value(p),
            Message::ControlGrant(p) => serde_json::to_value(p),
            Message::ControlDeny(p) => serde_json::to_value(p),
            Message::DestinationList(p) => serde_json::to_value(p),
            Message::Teleop(p) => serde_json::to_value(p),
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("malformed message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("frame of {0} bytes exceeds limit")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Envelope {
    pub fn new(message: &Message, vehicle_id: &str, sender: &str, sequence: u64) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            kind: message.kind().to_owned(),
            vehicle_id: vehicle_id.to_owned(),
            sender: sender.to_owned(),
            sequence,
            payload: message.payload().expect("payload types serialize infallibly"),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("envelope serializes infallibly")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let env: Envelope = serde_json::from_slice(bytes)?;
        if env.version != PROTOCOL_VERSION {
            return Err(WireError::Version(env.version));
        }
        Ok(env)
    }

    /// Typed payload, or `None` for a kind this version does not define.
    pub fn decode(&self) -> Result<Option<Message>, WireError> {
        fn p<T: DeserializeOwned>(v: &serde_json::Value) -> Result<T, WireError> {
            Ok(T::deserialize(v)?)
        }
        let v = &self.payload;
        Ok(Some(match self.kind.as_str() {
            "StateUpdate" => Message::StateUpdate(Box::new(p(v)?)),
            "CommandRequest" => Message::CommandRequest(p(v)?),
            "CommandAck" => Message::CommandAck(p(v)?),
            "ControlGrant" => Message::ControlGrant(p(v)?),
            "ControlDeny" => Message::ControlDeny(p(v)?),
            "DestinationList" => Message::DestinationList(p(v)?),
            "Teleop" => Message::Teleop(p(v)?),
            other => {
                tracing::warn!(kind = other, sender = %self.sender, "ignoring message of unknown kind");
                return Ok(None);
            }
        }))
    }
}

/// Stamps outgoing envelopes with a strictly increasing sequence.
#[derive(Debug, Clone)]
pub struct Sequencer {
    sender: String,
    next: u64,
}

impl Sequencer {
    pub fn new(sender: impl Into<String>) -> Self {
        Self { sender: sender.into(), next: 1 }
    }

    pub fn sender(&self) -> &str {
        &self.sender
    }

    pub fn stamp(&mut self, message: &Message, vehicle_id: &str) -> Envelope {
        let env = Envelope::new(message, vehicle_id, &self.sender, self.next);
        self.next += 1;
        env
    }
}

pub fn write_frame<W: Write>(w: &mut W, env: &Envelope) -> Result<(), WireError> {
    let body = env.to_bytes();
    if body.len() > MAX_FRAME_LEN {
        return Err(WireError::TooLarge(body.len()));
    }
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    Ok(())
}

/// Reads one frame; `Ok(None)` on a clean end of stream before the header.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Envelope>, WireError> {
    let mut header = [0u8; 4];
    match r.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(WireError::TooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Envelope::from_bytes(&body).map(Some)
}

/// The four status attributes plus everything the operator panels draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateUpdate {
    #[serde(rename = "Sensor Validity")]
    pub sensor_validity: SensorValidity,
    #[serde(rename = "Mission State")]
    pub mission_state: MissionState,
    #[serde(rename = "Driving Mode")]
    pub driving_mode: DrivingMode,
    #[serde(rename = "Cage State")]
    pub cage_state: CageState,
    #[serde(rename = "Cage Mode")]
    pub cage_mode: CageMode,
    pub tick: u64,
    pub time_ns: u64,
    pub pose: Pose,
    pub speed: f64,
    pub steering_angle: f64,
    pub focus_warning: bool,
    /// Vehicle frame; body size in meters for the blue rectangle.
    pub vehicle_size: [f64; 2],
    pub zone: ZoneOutline,
    /// Vehicle frame, height dropped.
    pub lidar_points: Vec<Point2>,
    pub cameras: Vec<CameraFrame>,
    /// Command ids applied on this tick.
    pub applied_commands: Vec<u64>,
}

impl StateUpdate {
    pub fn from_report(
        report: &CageTickReport,
        pose: Pose,
        speed: f64,
        steering_angle: f64,
        vehicle_size: [f64; 2],
        points: &[Point2],
        cameras: &[CameraFrame],
    ) -> Self {
        let stride = points.len().div_ceil(MAX_WIRE_POINTS).max(1);
        let round = |v: f64| (v * 100.0).round() / 100.0;
        Self {
            sensor_validity: report.sensor_validity,
            mission_state: report.mode_state.mission,
            driving_mode: report.mode_state.driving,
            cage_state: report.occupancy.value,
            cage_mode: report.mode_state.cage,
            tick: report.tick_index,
            time_ns: report.time_ns,
            pose,
            speed,
            steering_angle,
            focus_warning: report.focus_warning(),
            vehicle_size,
            zone: report.zone_outline.clone(),
            lidar_points: points.iter().step_by(stride).map(|p| Point2::new(round(p.x), round(p.y))).collect(),
            cameras: cameras.iter().map(|f| f.thumbnail(THUMBNAIL_MAX.0, THUMBNAIL_MAX.1)).collect(),
            applied_commands: report.applied_commands.clone(),
        }
    }

    pub fn mode_state(&self) -> ModeState {
        ModeState { cage: self.cage_mode, driving: self.driving_mode, mission: self.mission_state }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum Action {
    /// Start receiving this vehicle's state updates.
    Subscribe,
    Unsubscribe,
    AcquireControl,
    ReleaseControl,
    SetCageMode {
        #[serde(rename = "Cage Mode")]
        cage_mode: CageMode,
    },
    SetDrivingMode {
        #[serde(rename = "Driving Mode")]
        driving_mode: DrivingMode,
    },
    ActivateDestination {
        destination_id: String,
        /// Filled in by the service before relaying to the vehicle.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<Point2>,
    },
    /// Sent by a vehicle as its first message.
    RegisterVehicle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRequest {
    #[serde(flatten)]
    pub action: Action,
    /// Set by the service from the rights table; ignored when sent by a client.
    #[serde(default)]
    pub requester_has_control: bool,
    /// Service-assigned correlation id on relayed commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_id: Option<u64>,
    /// CCC that issued a relayed command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requester: Option<String>,
}

impl CommandRequest {
    pub fn new(action: Action) -> Self {
        Self { action, requester_has_control: false, command_id: None, requester: None }
    }

    /// Mode-control fragment for a relayed request, if it carries one.
    pub fn fragment(&self) -> Option<CommandFragment> {
        let base = CommandFragment { command_id: self.command_id, requester_has_control: self.requester_has_control, ..Default::default() };
        match self.action {
            Action::SetCageMode { cage_mode } => Some(CommandFragment { cage_request: Some(cage_mode), ..base }),
            Action::SetDrivingMode { driving_mode } => Some(CommandFragment { mode_request: Some(driving_mode), ..base }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandAck {
    /// Sequence of the request being answered.
    pub request_sequence: u64,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resulting_state: Option<ModeSnapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSnapshot {
    #[serde(rename = "Cage Mode")]
    pub cage_mode: CageMode,
    #[serde(rename = "Driving Mode")]
    pub driving_mode: DrivingMode,
    #[serde(rename = "Mission State")]
    pub mission_state: MissionState,
}

impl From<ModeState> for ModeSnapshot {
    fn from(s: ModeState) -> Self {
        Self { cage_mode: s.cage, driving_mode: s.driving, mission_state: s.mission }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlGrant {
    pub request_sequence: u64,
    pub holder: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlDeny {
    pub request_sequence: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DestinationStatus {
    Pending,
    ActiveTarget,
    Reached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Destination {
    pub id: String,
    pub name: String,
    pub position: Point2,
    pub status: DestinationStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationList {
    pub destinations: Vec<Destination>,
}

/// Remote manual input; steering in radians, throttle in [-1, 1] with
/// negative values braking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Teleop {
    pub steering: f64,
    pub throttle: f64,
}
