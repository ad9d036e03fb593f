//! A simulated vehicle attached to the service: it registers, applies relayed
//! commands at tick boundaries and streams a state update every tick. The
//! cage keeps running while the service is unreachable, and the agent keeps
//! trying to reconnect.

use crate::frame_codec;
use cage_core::wire::{Action, CommandRequest, DestinationList, Envelope, Message, Sequencer};
use cage_sim::{LogRecord, Scenario, SimOptions, Simulation};
use futures::{SinkExt, StreamExt};
use serde::Serialize;
use std::io;
use std::net::SocketAddr;
use std::time::Duration;
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::time::Instant;
use tokio_util::codec::{Framed, LengthDelimitedCodec};

const CONNECT_TIMEOUT: Duration = Duration::from_millis(500);

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub vehicle_id: String,
    pub service: SocketAddr,
    pub scenario: Scenario,
    pub sim: SimOptions,
    /// Simulated seconds per wall second; `None` runs as fast as possible.
    pub pace: Option<f64>,
    pub max_ticks: Option<u64>,
    pub reconnect_every: Duration,
}

impl AgentConfig {
    pub fn new(vehicle_id: &str, service: SocketAddr, scenario: Scenario) -> Self {
        Self {
            vehicle_id: vehicle_id.to_owned(),
            service,
            scenario,
            sim: SimOptions { external_control: true, ..Default::default() },
            pace: Some(1.0),
            max_ticks: None,
            reconnect_every: Duration::from_secs(1),
        }
    }
}

/// A relayed request as seen by the vehicle.
#[derive(Debug, Clone, Serialize)]
pub struct ReceivedCommand {
    pub tick: u64,
    pub request: CommandRequest,
}

#[derive(Debug, Clone)]
pub struct AgentReport {
    pub log: Vec<LogRecord>,
    pub received: Vec<ReceivedCommand>,
    pub ticks: u64,
    pub updates_sent: u64,
    pub connects: u64,
}

struct Link {
    sink: futures::stream::SplitSink<Framed<TcpStream, LengthDelimitedCodec>, bytes::Bytes>,
    inbound: mpsc::UnboundedReceiver<Envelope>,
}

async fn connect(cfg: &AgentConfig, sim: &Simulation, seq: &mut Sequencer) -> io::Result<Link> {
    let stream = tokio::time::timeout(CONNECT_TIMEOUT, TcpStream::connect(cfg.service))
        .await
        .map_err(|_| io::Error::new(io::ErrorKind::TimedOut, "connect timed out"))??;
    stream.set_nodelay(true)?;
    let (mut sink, mut stream) = Framed::new(stream, frame_codec()).split();
    let hello = [
        Message::CommandRequest(CommandRequest::new(Action::RegisterVehicle)),
        Message::DestinationList(DestinationList { destinations: sim.destinations().to_vec() }),
    ];
    for m in &hello {
        sink.send(bytes::Bytes::from(seq.stamp(m, &cfg.vehicle_id).to_bytes())).await?;
    }
    let (tx, inbound) = mpsc::unbounded_channel();
    tokio::spawn(async move {
        while let Some(Ok(frame)) = stream.next().await {
            match Envelope::from_bytes(&frame) {
                Ok(env) => {
                    if tx.send(env).is_err() {
                        break;
                    }
                }
                Err(e) => tracing::warn!(error = %e, "vehicle dropping undecodable envelope"),
            }
        }
    });
    Ok(Link { sink, inbound })
}

pub async fn run_vehicle(cfg: AgentConfig) -> io::Result<AgentReport> {
    let mut sim = Simulation::new(&cfg.scenario, &cfg.sim).map_err(io::Error::other)?;
    let mut seq = Sequencer::new(cfg.vehicle_id.clone());
    let mut link: Option<Link> = None;
    let mut next_attempt = Instant::now();
    let mut report = AgentReport { log: Vec::new(), received: Vec::new(), ticks: 0, updates_sent: 0, connects: 0 };
    let start = Instant::now();
    let tick_s = sim.runtime().config().tick_period_ns() as f64 / 1e9;

    while !sim.finished() && cfg.max_ticks.is_none_or(|m| report.ticks < m) {
        if link.is_none() && Instant::now() >= next_attempt {
            match connect(&cfg, &sim, &mut seq).await {
                Ok(l) => {
                    report.connects += 1;
                    tracing::info!(vehicle = %cfg.vehicle_id, "connected to ccc service");
                    link = Some(l);
                }
                Err(e) => {
                    tracing::debug!(error = %e, "ccc service unreachable");
                    next_attempt = Instant::now() + cfg.reconnect_every;
                }
            }
        }

        let mut activity = false;
        let mut extra_applied = Vec::new();
        if let Some(l) = link.as_mut() {
            loop {
                match l.inbound.try_recv() {
                    Ok(env) => {
                        activity = true;
                        apply(&mut sim, env, &mut report, &mut extra_applied);
                    }
                    Err(mpsc::error::TryRecvError::Empty) => break,
                    Err(mpsc::error::TryRecvError::Disconnected) => {
                        tracing::warn!(vehicle = %cfg.vehicle_id, "lost connection to ccc service");
                        link = None;
                        next_attempt = Instant::now() + cfg.reconnect_every;
                        break;
                    }
                }
            }
        }

        let out = sim.step(Some(activity));
        report.ticks += 1;
        if let Some(l) = link.as_mut() {
            let mut update = sim.state_update(&out.report);
            update.applied_commands.extend(extra_applied);
            let env = seq.stamp(&Message::StateUpdate(Box::new(update)), &cfg.vehicle_id);
            if l.sink.send(bytes::Bytes::from(env.to_bytes())).await.is_ok() {
                report.updates_sent += 1;
            } else {
                link = None;
                next_attempt = Instant::now() + cfg.reconnect_every;
            }
        }

        match cfg.pace {
            Some(rate) if rate > 0.0 => {
                tokio::time::sleep_until(start + Duration::from_secs_f64(report.ticks as f64 * tick_s / rate)).await
            }
            _ => tokio::task::yield_now().await,
        }
    }
    sim.finish();
    report.log = sim.take_log();
    Ok(report)
}

fn apply(sim: &mut Simulation, env: Envelope, report: &mut AgentReport, extra_applied: &mut Vec<u64>) {
    let msg = match env.decode() {
        Ok(Some(m)) => m,
        Ok(None) => return,
        Err(e) => {
            tracing::warn!(error = %e, "vehicle dropping malformed message");
            return;
        }
    };
    match msg {
        Message::CommandRequest(req) => {
            // only the service relays, and it marks what it relays
            if env.sender != crate::hub::SERVICE_ID || req.command_id.is_none() {
                return;
            }
            report.received.push(ReceivedCommand { tick: report.ticks, request: req.clone() });
            if let Some(fragment) = req.fragment() {
                sim.submit(fragment);
            } else if let Action::ActivateDestination { destination_id, .. } = &req.action {
                if sim.set_destination(destination_id) {
                    extra_applied.extend(req.command_id);
                } else {
                    tracing::warn!(%destination_id, "vehicle does not know this destination");
                }
            }
        }
        Message::Teleop(t) => sim.set_manual(t.steering, t.throttle),
        _ => {}
    }
}
