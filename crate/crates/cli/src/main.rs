use anyhow::Context;
use cage_ccc::agent::{run_vehicle, AgentConfig};
use cage_ccc::{FleetConfig, HubConfig, ServiceConfig};
use cage_cli::checks;
use cage_cli::report::RunReport;
use cage_sim::log::write_ndjson;
use cage_sim::record::{replay, RecordHeader};
use cage_sim::{run_scenario_with, NoisePreset, Scenario, SimOptions, TickObserver};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Checks failed or a replay diverged.
const EXIT_FAIL: u8 = 1;
/// Bad arguments or unreadable input.
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "cage", version, about = "Dependability cage: scenarios, replays, CCC service and acceptance checks")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    /// One JSON document on stdout.
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    None,
    Default,
    Ghost,
}

impl From<Noise> for NoisePreset {
    fn from(n: Noise) -> Self {
        match n {
            Noise::None => NoisePreset::None,
            Noise::Default => NoisePreset::Default,
            Noise::Ghost => NoisePreset::Ghost,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario with the cage attached and report the checks that apply to it.
    Run(RunArgs),
    /// Re-derive every verdict of a recording and compare.
    Replay(ReplayArgs),
    /// Start the CCC service with a simulated fleet.
    Serve(ServeArgs),
    /// Run the full acceptance suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario id or path to a scenario file.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulated seconds; overrides the scenario's duration.
    #[arg(long)]
    duration: Option<f64>,
    /// Run as fast as possible without progress output.
    #[arg(long)]
    headless: bool,
    /// Write a replayable recording of every tick.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Replay this recording instead of running.
    #[arg(long, conflicts_with_all = ["scenario", "record"])]
    replay: Option<PathBuf>,
    /// Start and cruise speed in km/h.
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long, value_enum)]
    noise: Option<Noise>,
    /// Event log destination (newline-delimited JSON).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Recording to replay.
    #[arg(long, required_unless_present = "path")]
    replay: Option<PathBuf>,
    #[arg(conflicts_with = "replay")]
    path: Option<PathBuf>,
    /// Replay with a different height cutoff than recorded.
    #[arg(long)]
    z_cutoff: Option<f32>,
}

#[derive(Args)]
struct ServeArgs {
    /// Vehicle and CCC channel.
    #[arg(long, default_value = "127.0.0.1:7400")]
    listen: SocketAddr,
    /// WebSocket bridge and operator UI files.
    #[arg(long, default_value = "127.0.0.1:7401")]
    http: SocketAddr,
    /// Vehicles, their destinations and the scenario each simulated vehicle runs (TOML)
    #[arg(long)]
    fleet_config: Option<PathBuf>,
    /// Control-rights audit log.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Directory served as the operator UI
    #[arg(long)]
    ui_dir: Option<PathBuf>,
    /// Only run the service; vehicles connect on their own.
    #[arg(long)]
    no_fleet: bool,
    /// Simulated seconds per wall-clock second for fleet vehicles
    #[arg(long, default_value_t = 1.0)]
    pace: f64,
    /// Seconds a disconnected holder keeps control rights
    #[arg(long, default_value_t = 5.0)]
    holder_timeout: f64,
}

#[derive(Args)]
struct CheckArgs {
    /// Run only the named checks.
    #[arg(long = "only", value_name = "NAME")]
    only: Vec<String>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, cli.format),
        Command::Replay(args) => match args.replay.or(args.path) {
            Some(path) => cmd_replay(&path, args.z_cutoff, cli.format),
            None => Err(usage("no recording given")),
        },
        Command::Serve(args) => cmd_serve(args),
        Command::Check(args) => cmd_check(&args.only, cli.format),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn usage(msg: &str) -> anyhow::Error {
    anyhow::anyhow!("{msg}")
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_run(args: RunArgs, format: Format) -> anyhow::Result<bool> {
    if let Some(path) = &args.replay {
        return cmd_replay(path, None, format);
    }
    let id = args.scenario.as_deref().ok_or_else(|| usage("--scenario is required"))?;
    let mut scenario = Scenario::load(id).with_context(|| format!("scenario `{id}`"))?;
    if let Some(kmh) = args.speed {
        if !(kmh.is_finite() && kmh > 0.0) {
            return Err(usage("--speed must be a positive km/h value"));
        }
        scenario = scenario.with_speed_kmh(kmh);
    }
    if args.duration.is_some_and(|d| !(d.is_finite() && d > 0.0)) {
        return Err(usage("--duration must be positive"));
    }
    let opts = SimOptions { seed: args.seed, duration: args.duration, noise: args.noise.map(Into::into), ..Default::default() };

    let mut record = match &args.record {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => None,
    };
    let started = Instant::now();
    let mut progress = |sim: &cage_sim::Simulation, out: &cage_sim::TickOutput| {
        // paced at wall-clock speed with a status line per simulated second
        let target = Duration::from_secs_f64(sim.time());
        if let Some(wait) = target.checked_sub(started.elapsed()) {
            std::thread::sleep(wait);
        }
        if out.report.tick_index.is_multiple_of(20) {
            let s = sim.vehicle().state;
            let m = out.report.mode_state;
            eprintln!(
                "{:>7.2}s  x {:>7.2} y {:>7.2} v {:>5.2}  {:?} / {:?}",
                sim.time(),
                s.pose.x,
                s.pose.y,
                s.speed,
                m.driving,
                m.mission
            );
        }
    };
    let observer: Option<TickObserver<'_>> = if args.headless { None } else { Some(&mut progress) };
    let outcome = run_scenario_with(&scenario, &opts, record.as_mut().map(|w| w as &mut dyn Write), observer)?;
    if let Some(mut w) = record {
        w.flush()?;
    }
    if let Some(p) = &args.log {
        let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        write_ndjson(&mut w, &outcome.log)?;
        w.flush()?;
    }
    let report = RunReport::from_log(outcome.summary, &outcome.log);
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Machine => print_json(&report)?,
    }
    Ok(report.passed())
}

fn cmd_replay(path: &PathBuf, z_cutoff: Option<f32>, format: Format) -> anyhow::Result<bool> {
    let open = || File::open(path).with_context(|| format!("opening {}", path.display()));
    let config = match z_cutoff {
        Some(z) => {
            let mut first = String::new();
            BufReader::new(open()?).read_line(&mut first)?;
            let header: RecordHeader = serde_json::from_str(&first).context("reading recording header")?;
            let mut cfg = header.config;
            cfg.detector.z_cutoff = z;
            Some(cfg)
        }
        None => None,
    };
    let outcome = replay(BufReader::new(open()?), config)?;
    match format {
        Format::Text => match &outcome.first_divergence {
            None => println!("replay of {}: all {} ticks match", outcome.scenario, outcome.ticks),
            Some(d) => println!("replay of {}: diverged at tick {} in {}", outcome.scenario, d.tick, d.fields.join(", ")),
        },
        Format::Machine => print_json(&outcome)?,
    }
    Ok(outcome.matches())
}

fn cmd_check(only: &[String], format: Format) -> anyhow::Result<bool> {
    for name in only {
        if !checks::ALL.iter().any(|(n, _)| n == name) {
            let names: Vec<&str> = checks::ALL.iter().map(|(n, _)| *n).collect();
            return Err(usage(&format!("unknown check `{name}`; known: {}", names.join(", "))));
        }
    }
    let mut results = Vec::new();
    for (name, run) in checks::ALL {
        if !only.is_empty() && !only.iter().any(|n| n == name) {
            continue;
        }
        let c = run();
        if format == Format::Text {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        results.push(c);
    }
    let passed = results.iter().all(|c| c.passed);
    if format == Format::Machine {
        print_json(&serde_json::json!({ "passed": passed, "checks": results }))?;
    }
    Ok(passed)
}

fn cmd_serve(args: ServeArgs) -> anyhow::Result<bool> {
    let fleet = match &args.fleet_config {
        Some(p) => FleetConfig::from_file(p)?,
        None => FleetConfig::default(),
    };
    if !(args.holder_timeout.is_finite() && args.holder_timeout > 0.0) {
        return Err(usage("--holder-timeout must be positive"));
    }
    let cfg = ServiceConfig {
        listen: args.listen,
        http: Some(args.http),
        fleet: fleet.clone(),
        hub: HubConfig { holder_timeout: Duration::from_secs_f64(args.holder_timeout), allow_unlisted: args.fleet_config.is_none() },
        audit_log: args.log,
        ui_dir: args.ui_dir.unwrap_or_else(|| cage_ccc::server::DEFAULT_UI_DIR.into()),
    };
    let mut agents = Vec::new();
    if !args.no_fleet {
        for v in &fleet.vehicles {
            let Some(id) = &v.scenario else { continue };
            let scenario = Scenario::load(id).with_context(|| format!("scenario `{id}` for vehicle {}", v.id))?;
            let mut agent = AgentConfig::new(&v.id, args.listen, scenario);
            agent.pace = Some(args.pace);
            agents.push(agent);
        }
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let service = cage_ccc::start(cfg).await?;
        for mut agent in agents {
            agent.service = service.tcp_addr;
            tokio::spawn(async move {
                let id = agent.vehicle_id.clone();
                match run_vehicle(agent).await {
                    Ok(r) => tracing::info!(vehicle = %id, ticks = r.ticks, "vehicle run finished"),
                    Err(e) => tracing::error!(vehicle = %id, error = %e, "vehicle agent failed"),
                }
            });
        }
        eprintln!("ccc service on {} (ui and /ws on {})", service.tcp_addr, service.http_addr.map_or("-".to_owned(), |a| a.to_string()));
        tokio::signal::ctrl_c().await?;
        service.shutdown().await;
        anyhow::Ok(true)
    })
}
