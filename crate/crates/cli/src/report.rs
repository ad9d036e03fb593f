//! Run reports: verdicts re-derived from the event log alone.

use crate::checks::{expected_sequence, Check, MIN_STOP_GAP};
use cage_sim::log::{contains_subsequence, label};
use cage_sim::{LogRecord, RunSummary};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TimelineEntry {
    pub t: f64,
    pub tick: u64,
    pub event: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub summary: RunSummary,
    pub timeline: Vec<TimelineEntry>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn from_log(summary: RunSummary, log: &[LogRecord]) -> Self {
        let timeline = log.iter().filter_map(|r| label(&r.event).map(|event| TimelineEntry { t: r.t, tick: r.tick, event })).collect();
        let checks = checks_for(&summary, log);
        Self { scenario: summary.scenario.clone(), seed: summary.seed, summary, timeline, checks }
    }

    pub fn to_text(&self) -> String {
        let s = &self.summary;
        let mut out = format!("scenario {} seed {}: {} ticks, {:.1} m driven\n", self.scenario, self.seed, s.ticks, s.distance);
        for e in &self.timeline {
            out.push_str(&format!("  {:>7.2}s  {}\n", e.t, e.event));
        }
        out.push_str(&format!("emergency stops: {}\n", s.emergency_stops));
        for g in &s.stop_gaps {
            out.push_str(&format!("stop gap: {g:.3} m\n"));
        }
        for c in &self.checks {
            out.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        out
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_owned(), passed, detail }
}

/// Checks that apply to a scenario, judged from its log.
pub fn checks_for(summary: &RunSummary, log: &[LogRecord]) -> Vec<Check> {
    let mut out = vec![check("no-collision", summary.collisions == 0, format!("{} collision(s)", summary.collisions))];
    match summary.scenario.as_str() {
        "stop-distance" => {
            let gap = summary.stop_gaps.first().copied();
            let ok = summary.emergency_stops >= 1 && gap.is_some_and(|g| g >= MIN_STOP_GAP);
            out.push(check(
                "stop-gap",
                ok,
                gap.map_or("vehicle never stopped".into(), |g| format!("gap {g:.3} m, need >= {MIN_STOP_GAP} m")),
            ));
        }
        "nominal-lap" => {
            out.push(check("no-spurious-stops", summary.emergency_stops == 0, format!("{} emergency stop(s)", summary.emergency_stops)));
        }
        id => {
            if let Some(expected) = expected_sequence(id) {
                out.push(check("event-sequence", contains_subsequence(log, expected), expected.join(" > ")));
            } else if ["2", "3", "4", "6"].contains(&id) {
                let ok = summary.emergency_stops == 0 && !summary.reached.is_empty();
                out.push(check(
                    "leg-completed",
                    ok,
                    format!("reached {:?}, {} emergency stop(s)", summary.reached, summary.emergency_stops),
                ));
            }
        }
    }
    out
}
