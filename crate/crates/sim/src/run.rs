//! Headless scenario runs.

use crate::log::{Event, LogRecord};
use crate::record::{RecordHeader, Recorder, RECORD_FORMAT, RECORD_VERSION};
use crate::scenario::Scenario;
use crate::sim::{SimOptions, Simulation, TickOutput};
use cage_core::mode::{DrivingMode, MissionState};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub emergency_stops: usize,
    /// Bumper-to-obstacle gap at each emergency standstill, meters.
    pub stop_gaps: Vec<f64>,
    pub collisions: usize,
    pub reached: Vec<String>,
    pub final_driving: DrivingMode,
    pub final_mission: MissionState,
    pub distance: f64,
}

/// Called after every tick of a run.
pub type TickObserver<'a> = &'a mut dyn FnMut(&Simulation, &TickOutput);

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: Vec<LogRecord>,
    pub summary: RunSummary,
}

pub fn summarize(scenario: &str, seed: u64, log: &[LogRecord]) -> RunSummary {
    let mut s = RunSummary {
        scenario: scenario.to_owned(),
        seed,
        ticks: log.last().map_or(0, |r| r.tick),
        emergency_stops: 0,
        stop_gaps: Vec::new(),
        collisions: 0,
        reached: Vec::new(),
        final_driving: DrivingMode::EmergencyStop,
        final_mission: MissionState::Inactive,
        distance: 0.0,
    };
    for r in log {
        match &r.event {
            Event::EmergencyStop { .. } => s.emergency_stops += 1,
            Event::Standstill { gap: Some(gap), .. } => s.stop_gaps.push(*gap),
            Event::Collision { .. } => s.collisions += 1,
            Event::DestinationReached { id } => s.reached.push(id.clone()),
            Event::End { driving, mission, distance, .. } => {
                s.final_driving = *driving;
                s.final_mission = *mission;
                s.distance = *distance;
            }
            _ => {}
        }
    }
    s
}

/// Run to completion; with `record` set, every tick's inputs and report are
/// written for later replay.
pub fn run_scenario(scenario: &Scenario, opts: &SimOptions, record: Option<&mut dyn Write>) -> io::Result<RunOutcome> {
    run_scenario_with(scenario, opts, record, None)
}

/// Like [`run_scenario`], calling `observe` after every tick.
pub fn run_scenario_with(
    scenario: &Scenario,
    opts: &SimOptions,
    record: Option<&mut dyn Write>,
    mut observe: Option<TickObserver<'_>>,
) -> io::Result<RunOutcome> {
    let mut sim = Simulation::new(scenario, opts).map_err(io::Error::other)?;
    let mut recorder = match record {
        Some(w) => {
            let header = RecordHeader {
                format: RECORD_FORMAT.to_owned(),
                schema_version: RECORD_VERSION,
                scenario: scenario.id().to_owned(),
                seed: opts.seed,
                config: sim.runtime().config().clone(),
                initial_state: scenario.initial_state,
            };
            Some(Recorder::new(w, &header)?)
        }
        None => None,
    };
    while !sim.finished() {
        let out = sim.step(None);
        if let Some(r) = recorder.as_mut() {
            r.tick(&out.inputs, &out.report)?;
        }
        if let Some(f) = observe.as_mut() {
            f(&sim, &out);
        }
    }
    if let Some(r) = recorder {
        r.finish()?;
    }
    sim.finish();
    let log = sim.take_log();
    let summary = summarize(scenario.id(), opts.seed, &log);
    Ok(RunOutcome { log, summary })
}
