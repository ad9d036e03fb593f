//! The serialized decision point: fleet registry, control rights, command
//! relay and telemetry fan-out. Every decision is made under one lock, so
//! acquire, release and forward are totally ordered and traced in the audit log.

use crate::fleet::FleetConfig;
use cage_core::mode::MissionState;
use cage_core::wire::{
    Action, CommandAck, CommandRequest, ControlDeny, ControlGrant, Destination, DestinationList, DestinationStatus, Envelope, Message,
    ModeSnapshot, Sequencer, StateUpdate,
};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};
use tokio::sync::mpsc;

pub const SERVICE_ID: &str = "ccc-service";
pub const SESSION_QUEUE: usize = 256;

pub type SessionId = u64;

#[derive(Debug, Clone)]
pub struct HubConfig {
    /// Rights of a CCC with no live session are released after this long.
    pub holder_timeout: Duration,
    /// Accept vehicles that are not listed in the fleet config.
    pub allow_unlisted: bool,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self { holder_timeout: Duration::from_secs(5), allow_unlisted: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "what", rename_all = "snake_case")]
pub enum AuditAction {
    Granted,
    Denied { holder: Option<String>, reason: String },
    Released,
    Expired,
    Relayed { command_id: u64 },
    Rejected { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    /// Position in the total order of decisions.
    pub index: u64,
    pub ccc: String,
    pub vehicle: String,
    #[serde(flatten)]
    pub action: AuditAction,
}

struct Session {
    tx: mpsc::Sender<Envelope>,
    /// Sender id seen on this session's messages.
    sender: Option<String>,
    vehicle: Option<String>,
    subscriptions: BTreeSet<String>,
}

struct PendingAck {
    session: SessionId,
    request_sequence: u64,
}

#[derive(Default)]
struct VehicleEntry {
    session: Option<SessionId>,
    holder: Option<String>,
    /// Set while the holder has no live session.
    holder_orphaned_at: Option<Instant>,
    last_sequence: Option<u64>,
    latest: Option<StateUpdate>,
    destinations: Vec<Destination>,
    pending: BTreeMap<u64, PendingAck>,
}

struct State {
    sessions: HashMap<SessionId, Session>,
    vehicles: BTreeMap<String, VehicleEntry>,
    next_session: SessionId,
    next_command: u64,
    seq: Sequencer,
    audit: Vec<AuditEntry>,
    audit_sink: Option<Box<dyn Write + Send>>,
}

pub struct Hub {
    cfg: HubConfig,
    state: Mutex<State>,
}

impl State {
    fn audit(&mut self, ccc: &str, vehicle: &str, action: AuditAction) {
        let entry = AuditEntry { index: self.audit.len() as u64, ccc: ccc.to_owned(), vehicle: vehicle.to_owned(), action };
        if let Some(sink) = self.audit_sink.as_mut() {
            let ok = serde_json::to_writer(&mut *sink, &entry).is_ok() && sink.write_all(b"\n").is_ok() && sink.flush().is_ok();
            if !ok {
                tracing::warn!("audit log write failed");
            }
        }
        self.audit.push(entry);
    }

    /// Queue `env` for a session; a full queue disconnects the session.
    fn deliver(&mut self, session: SessionId, env: Envelope) {
        let Some(s) = self.sessions.get(&session) else { return };
        match s.tx.try_send(env) {
            Ok(()) => {}
            Err(mpsc::error::TrySendError::Full(_)) => {
                tracing::warn!(session, "session queue overflow, disconnecting slow consumer");
                self.drop_session(session);
            }
            Err(mpsc::error::TrySendError::Closed(_)) => self.drop_session(session),
        }
    }

    fn send(&mut self, session: SessionId, vehicle: &str, message: Message) {
        let env = self.seq.stamp(&message, vehicle);
        self.deliver(session, env);
    }

    fn drop_session(&mut self, session: SessionId) {
        let Some(s) = self.sessions.remove(&session) else { return };
        if let Some(v) = s.vehicle.as_ref().and_then(|v| self.vehicles.get_mut(v)) {
            if v.session == Some(session) {
                v.session = None;
            }
        }
        if let Some(ccc) = s.sender {
            let still_connected = self.sessions.values().any(|o| o.sender.as_deref() == Some(ccc.as_str()));
            if !still_connected {
                let now = Instant::now();
                for v in self.vehicles.values_mut().filter(|v| v.holder.as_deref() == Some(ccc.as_str())) {
                    v.holder_orphaned_at.get_or_insert(now);
                }
            }
        }
    }

    fn destination_list(&self, vehicle: &str) -> Message {
        let destinations = self.vehicles.get(vehicle).map(|v| v.destinations.clone()).unwrap_or_default();
        Message::DestinationList(DestinationList { destinations })
    }

    fn broadcast_destinations(&mut self, vehicle: &str) {
        let msg = self.destination_list(vehicle);
        let subs: Vec<SessionId> = self.sessions.iter().filter(|(_, s)| s.subscriptions.contains(vehicle)).map(|(id, _)| *id).collect();
        for id in subs {
            self.send(id, vehicle, msg.clone());
        }
    }
}

impl Hub {
    pub fn new(cfg: HubConfig, fleet: &FleetConfig) -> Self {
        let vehicles = fleet
            .vehicles
            .iter()
            .map(|v| {
                let destinations = v
                    .destinations
                    .iter()
                    .map(|d| Destination {
                        id: d.id.clone(),
                        name: d.name.clone(),
                        position: d.position,
                        status: DestinationStatus::Pending,
                    })
                    .collect();
                (v.id.clone(), VehicleEntry { destinations, ..Default::default() })
            })
            .collect();
        let state = State {
            sessions: HashMap::new(),
            vehicles,
            next_session: 1,
            next_command: 1,
            seq: Sequencer::new(SERVICE_ID),
            audit: Vec::new(),
            audit_sink: None,
        };
        Self { cfg, state: Mutex::new(state) }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Append every audit entry to `sink` as NDJSON from now on.
    pub fn set_audit_sink(&self, sink: Box<dyn Write + Send>) {
        self.lock().audit_sink = Some(sink);
    }

    pub fn connect(&self) -> (SessionId, mpsc::Receiver<Envelope>) {
        let (tx, rx) = mpsc::channel(SESSION_QUEUE);
        let mut st = self.lock();
        let id = st.next_session;
        st.next_session += 1;
        st.sessions.insert(id, Session { tx, sender: None, vehicle: None, subscriptions: BTreeSet::new() });
        (id, rx)
    }

    pub fn disconnect(&self, session: SessionId) {
        self.lock().drop_session(session);
    }

    pub fn is_connected(&self, session: SessionId) -> bool {
        self.lock().sessions.contains_key(&session)
    }

    pub fn holder(&self, vehicle: &str) -> Option<String> {
        self.lock().vehicles.get(vehicle).and_then(|v| v.holder.clone())
    }

    pub fn vehicles(&self) -> Vec<String> {
        self.lock().vehicles.keys().cloned().collect()
    }

    pub fn latest(&self, vehicle: &str) -> Option<StateUpdate> {
        self.lock().vehicles.get(vehicle).and_then(|v| v.latest.clone())
    }

    pub fn audit_log(&self) -> Vec<AuditEntry> {
        self.lock().audit.clone()
    }

    /// Release rights whose holder has been gone longer than the timeout.
    pub fn sweep(&self, now: Instant) {
        let mut st = self.lock();
        let timeout = self.cfg.holder_timeout;
        let expired: Vec<(String, String)> = st
            .vehicles
            .iter()
            .filter_map(|(id, v)| match (&v.holder, v.holder_orphaned_at) {
                (Some(h), Some(t)) if now.duration_since(t) >= timeout => Some((id.clone(), h.clone())),
                _ => None,
            })
            .collect();
        for (vehicle, holder) in expired {
            let v = st.vehicles.get_mut(&vehicle).expect("listed above");
            v.holder = None;
            v.holder_orphaned_at = None;
            tracing::info!(%vehicle, %holder, "control rights expired");
            st.audit(&holder, &vehicle, AuditAction::Expired);
        }
    }

    pub fn handle(&self, session: SessionId, env: Envelope) {
        let message = match env.decode() {
            Ok(Some(m)) => m,
            Ok(None) => return,
            Err(e) => {
                tracing::warn!(session, error = %e, "dropping malformed message");
                return;
            }
        };
        let mut st = self.lock();
        let Some(s) = st.sessions.get_mut(&session) else { return };
        if s.sender.is_none() {
            s.sender = Some(env.sender.clone());
        }
        let sender = env.sender.clone();
        // a returning holder reclaims orphaned rights
        for v in st.vehicles.values_mut().filter(|v| v.holder.as_deref() == Some(sender.as_str())) {
            v.holder_orphaned_at = None;
        }
        match message {
            Message::StateUpdate(update) => self.on_state_update(&mut st, session, &env, *update),
            Message::CommandRequest(req) => self.on_request(&mut st, session, &env, req),
            Message::Teleop(t) => {
                let vehicle = &env.vehicle_id;
                let Some(v) = st.vehicles.get(vehicle) else { return };
                if v.holder.as_deref() != Some(sender.as_str()) {
                    tracing::warn!(%sender, %vehicle, "teleop from non-holder dropped");
                    return;
                }
                if let Some(vs) = v.session {
                    st.send(vs, vehicle, Message::Teleop(t));
                }
            }
            Message::DestinationList(list) => {
                // a registered vehicle reports its own targets; configured ones take precedence
                let vehicle = env.vehicle_id.clone();
                let Some(v) = st.vehicles.get_mut(&vehicle).filter(|v| v.session == Some(session)) else { return };
                if v.destinations.is_empty() {
                    v.destinations = list.destinations;
                    st.broadcast_destinations(&vehicle);
                }
            }
            other => tracing::warn!(kind = other.kind(), %sender, "unexpected message kind from client"),
        }
    }

    fn on_state_update(&self, st: &mut State, session: SessionId, env: &Envelope, update: StateUpdate) {
        let vehicle = env.vehicle_id.clone();
        let Some(v) = st.vehicles.get_mut(&vehicle) else {
            tracing::warn!(%vehicle, "state update from unregistered vehicle");
            return;
        };
        if v.session != Some(session) {
            tracing::warn!(%vehicle, session, "state update from a session that is not the vehicle's");
            return;
        }
        if v.last_sequence.is_some_and(|last| env.sequence <= last) {
            tracing::debug!(%vehicle, sequence = env.sequence, "stale state update dropped");
            return;
        }
        v.last_sequence = Some(env.sequence);

        let mut acks = Vec::new();
        for id in &update.applied_commands {
            if let Some(p) = v.pending.remove(id) {
                acks.push(p);
            }
        }
        let completed =
            update.mission_state == MissionState::Completed && v.latest.as_ref().is_none_or(|l| l.mission_state != MissionState::Completed);
        let mut destinations_changed = false;
        if completed {
            for d in v.destinations.iter_mut().filter(|d| d.status == DestinationStatus::ActiveTarget) {
                d.status = DestinationStatus::Reached;
                destinations_changed = true;
            }
        }
        let snapshot = ModeSnapshot::from(update.mode_state());
        v.latest = Some(update);

        for p in acks {
            let ack = CommandAck { request_sequence: p.request_sequence, accepted: true, reason: None, resulting_state: Some(snapshot) };
            st.send(p.session, &vehicle, Message::CommandAck(ack));
        }
        let subs: Vec<SessionId> = st.sessions.iter().filter(|(_, s)| s.subscriptions.contains(&vehicle)).map(|(id, _)| *id).collect();
        for id in subs {
            st.deliver(id, env.clone());
        }
        if destinations_changed {
            st.broadcast_destinations(&vehicle);
        }
    }

    fn on_request(&self, st: &mut State, session: SessionId, env: &Envelope, req: CommandRequest) {
        let vehicle = env.vehicle_id.clone();
        let ccc = env.sender.clone();
        let seq = env.sequence;
        let reject = |st: &mut State, reason: &str| {
            st.audit(&ccc, &vehicle, AuditAction::Rejected { reason: reason.to_owned() });
            let ack = CommandAck { request_sequence: seq, accepted: false, reason: Some(reason.to_owned()), resulting_state: None };
            st.send(session, &vehicle, Message::CommandAck(ack));
        };

        if let Action::RegisterVehicle = req.action {
            if !st.vehicles.contains_key(&vehicle) {
                if !self.cfg.allow_unlisted {
                    return reject(st, "vehicle not in fleet");
                }
                st.vehicles.insert(vehicle.clone(), VehicleEntry::default());
            }
            let old = st.vehicles.get_mut(&vehicle).expect("inserted").session.replace(session);
            if let Some(old) = old.filter(|&o| o != session) {
                st.drop_session(old);
            }
            let s = st.sessions.get_mut(&session).expect("live session");
            s.vehicle = Some(vehicle.clone());
            tracing::info!(%vehicle, session, "vehicle registered");
            let ack = CommandAck { request_sequence: seq, accepted: true, reason: None, resulting_state: None };
            st.send(session, &vehicle, Message::CommandAck(ack));
            return;
        }

        if !st.vehicles.contains_key(&vehicle) {
            if matches!(req.action, Action::AcquireControl) {
                st.audit(&ccc, &vehicle, AuditAction::Denied { holder: None, reason: "unknown vehicle".into() });
                let deny = ControlDeny { request_sequence: seq, holder: None, reason: "unknown vehicle".into() };
                return st.send(session, &vehicle, Message::ControlDeny(deny));
            }
            return reject(st, "unknown vehicle");
        }

        match req.action {
            Action::Subscribe => {
                st.sessions.get_mut(&session).expect("live session").subscriptions.insert(vehicle.clone());
                let list = st.destination_list(&vehicle);
                st.send(session, &vehicle, list);
            }
            Action::Unsubscribe => {
                st.sessions.get_mut(&session).expect("live session").subscriptions.remove(&vehicle);
            }
            Action::AcquireControl => {
                let v = st.vehicles.get_mut(&vehicle).expect("checked");
                match v.holder.clone() {
                    None => {
                        v.holder = Some(ccc.clone());
                        v.holder_orphaned_at = None;
                        st.audit(&ccc, &vehicle, AuditAction::Granted);
                        st.send(session, &vehicle, Message::ControlGrant(ControlGrant { request_sequence: seq, holder: ccc.clone() }));
                    }
                    Some(holder) => {
                        let reason = if holder == ccc { "already holding" } else { "held by another CCC" };
                        st.audit(&ccc, &vehicle, AuditAction::Denied { holder: Some(holder.clone()), reason: reason.into() });
                        let deny = ControlDeny { request_sequence: seq, holder: Some(holder), reason: reason.into() };
                        st.send(session, &vehicle, Message::ControlDeny(deny));
                    }
                }
            }
            Action::ReleaseControl => {
                let v = st.vehicles.get_mut(&vehicle).expect("checked");
                if v.holder.as_deref() != Some(ccc.as_str()) {
                    return reject(st, "not holding control rights");
                }
                v.holder = None;
                v.holder_orphaned_at = None;
                st.audit(&ccc, &vehicle, AuditAction::Released);
                let ack = CommandAck { request_sequence: seq, accepted: true, reason: None, resulting_state: None };
                st.send(session, &vehicle, Message::CommandAck(ack));
            }
            Action::SetCageMode { .. } | Action::SetDrivingMode { .. } | Action::ActivateDestination { .. } => {
                let v = st.vehicles.get(&vehicle).expect("checked");
                if v.holder.as_deref() != Some(ccc.as_str()) {
                    return reject(st, "not holding control rights");
                }
                let Some(vs) = v.session else { return reject(st, "vehicle not connected") };
                let mut relayed = req.clone();
                if let Action::ActivateDestination { destination_id, position } = &mut relayed.action {
                    let v = st.vehicles.get_mut(&vehicle).expect("checked");
                    let Some(target) = v.destinations.iter().find(|d| d.id == *destination_id) else {
                        return reject(st, "unknown destination");
                    };
                    *position = Some(target.position);
                    let id = destination_id.clone();
                    for d in &mut v.destinations {
                        if d.id == id {
                            d.status = DestinationStatus::ActiveTarget;
                        } else if d.status == DestinationStatus::ActiveTarget {
                            d.status = DestinationStatus::Pending;
                        }
                    }
                }
                let command_id = st.next_command;
                st.next_command += 1;
                relayed.requester_has_control = true;
                relayed.command_id = Some(command_id);
                relayed.requester = Some(ccc.clone());
                st.vehicles.get_mut(&vehicle).expect("checked").pending.insert(command_id, PendingAck { session, request_sequence: seq });
                st.audit(&ccc, &vehicle, AuditAction::Relayed { command_id });
                st.send(vs, &vehicle, Message::CommandRequest(relayed.clone()));
                if matches!(relayed.action, Action::ActivateDestination { .. }) {
                    st.broadcast_destinations(&vehicle);
                }
            }
            Action::RegisterVehicle => unreachable!("handled above"),
        }
    }
}

/// Replays the audit log and checks that no vehicle ever had two holders.
pub fn audit_is_exclusive(audit: &[AuditEntry]) -> bool {
    let mut holders: BTreeMap<&str, &str> = BTreeMap::new();
    for e in audit {
        match e.action {
            AuditAction::Granted => {
                if holders.insert(&e.vehicle, &e.ccc).is_some() {
                    return false;
                }
            }
            AuditAction::Released | AuditAction::Expired => {
                if holders.remove(e.vehicle.as_str()) != Some(e.ccc.as_str()) {
                    return false;
                }
            }
            AuditAction::Relayed { .. } if holders.get(e.vehicle.as_str()) != Some(&e.ccc.as_str()) => return false,
            _ => {}
        }
    }
    true
}
