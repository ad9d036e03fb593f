//! Sensor/command recordings and their replay through a fresh cage runtime.
//!
//! Line 1 is a [`RecordHeader`]; every later line is a [`RecordedTick`] with
//! the exact tick inputs and the report the cage produced for them.

use cage_core::mode::ModeState;
use cage_core::runtime::{CageRuntime, CageTickReport, ConfigError, RuntimeConfig, TickInputs};
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};

pub const RECORD_FORMAT: &str = "cage-record";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format: String,
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub config: RuntimeConfig,
    pub initial_state: ModeState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedTick {
    pub inputs: TickInputs,
    pub report: CageTickReport,
}

pub struct Recorder<W: Write> {
    out: W,
}

impl<W: Write> Recorder<W> {
    pub fn new(mut out: W, header: &RecordHeader) -> io::Result<Self> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(Self { out })
    }

    pub fn tick(&mut self, inputs: &TickInputs, report: &CageTickReport) -> io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            inputs: &'a TickInputs,
            report: &'a CageTickReport,
        }
        serde_json::to_writer(&mut self.out, &Line { inputs, report })?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("empty recording")]
    Empty,
    #[error("not a cage recording (format `{0}`)")]
    Format(String),
    #[error("recording schema_version {found} is not supported (expected {RECORD_VERSION})")]
    Version { found: u32 },
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub tick: u64,
    /// Top-level report fields that differ.
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub scenario: String,
    pub ticks: u64,
    pub first_divergence: Option<Divergence>,
}

impl ReplayOutcome {
    pub fn matches(&self) -> bool {
        self.first_divergence.is_none()
    }
}

/// Re-run every recorded tick and compare reports. `config` replaces the
/// recorded configuration, for what-if checks.
pub fn replay<R: BufRead>(input: R, config: Option<RuntimeConfig>) -> Result<ReplayOutcome, ReplayError> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines.next().ok_or(ReplayError::Empty)?;
    let first = first?;
    let raw: serde_json::Value = serde_json::from_str(&first).map_err(|source| ReplayError::Parse { line: 1, source })?;
    let format = raw.get("format").and_then(|v| v.as_str()).unwrap_or_default();
    if format != RECORD_FORMAT {
        return Err(ReplayError::Format(format.to_owned()));
    }
    let found = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != RECORD_VERSION {
        return Err(ReplayError::Version { found });
    }
    let header: RecordHeader = serde_json::from_value(raw).map_err(|source| ReplayError::Parse { line: 1, source })?;
    let mut runtime = CageRuntime::with_state(config.unwrap_or(header.config), header.initial_state)?;

    let mut ticks = 0;
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordedTick = serde_json::from_str(&line).map_err(|source| ReplayError::Parse { line: i + 1, source })?;
        let fresh = runtime.tick(&rec.inputs);
        ticks += 1;
        let fields = differing_fields(&rec.report, &fresh);
        if !fields.is_empty() {
            return Ok(ReplayOutcome {
                scenario: header.scenario,
                ticks,
                first_divergence: Some(Divergence { tick: rec.report.tick_index, fields }),
            });
        }
    }
    Ok(ReplayOutcome { scenario: header.scenario, ticks, first_divergence: None })
}

fn differing_fields(a: &CageTickReport, b: &CageTickReport) -> Vec<String> {
    let (serde_json::Value::Object(a), serde_json::Value::Object(b)) =
        (serde_json::to_value(a).expect("report serializes"), serde_json::to_value(b).expect("report serializes"))
    else {
        unreachable!("reports serialize as objects")
    };
    a.iter().filter(|(k, v)| b.get(*k) != Some(v)).map(|(k, _)| k.clone()).collect()
}
