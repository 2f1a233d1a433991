use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tiermem::controller::ControllerMode;
use tiermem::platform::PlatformSpec;
use tiermem::runner::{calibrate, run_scenario, sweep, write_json, RunOptions, RunReport};
use tiermem::scenario::{PlatformRef, Scenario};
use tiermem::{Error, Result};

#[derive(Parser)]
#[command(name = "tiermem", version, about = "Tiered DDR + CXL memory uncore simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    On,
    Off,
    Mba,
}

impl From<Mode> for ControllerMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::On => ControllerMode::On,
            Mode::Off => ControllerMode::Off,
            Mode::Mba => ControllerMode::Mba,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario (file path or preset name).
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write events.csv with one row per request.
        #[arg(long)]
        event_log: bool,
        #[arg(long, value_enum)]
        controller: Option<Mode>,
    },
    /// Measure the controller's reference latencies for a platform
    /// (preset name, platform JSON or scenario JSON).
    Calibrate {
        #[arg(default_value = "platform_a")]
        platform: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write calibration.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled scenarios.
    List,
    /// Run several scenarios in parallel, each into `<out>/<name>/`.
    Sweep {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        controller: Option<Mode>,
    },
}

macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

// Write errors (a closed pipe) are ignored: the run's files are already written.
fn print_report(r: &RunReport) {
    let s = &r.summary;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{}: {} windows, DDR {:.3} GB/s, CXL {:.3} GB/s, {} requests (controller {})",
        s.scenario,
        s.windows,
        s.totals.ddr_bandwidth_gbps,
        s.totals.cxl_bandwidth_gbps,
        s.totals.requests_completed,
        s.controller
    );
    for w in &s.workloads {
        let _ = write!(out, "  {:<16} {:>10} req {:>9.3} GB/s", w.name, w.requests, w.bandwidth_gbps);
        if let (Some(m), Some(p99)) = (w.latency_mean, w.latency_p99) {
            let _ = write!(out, "  latency mean {m:.1} p99 {p99}");
        }
        let _ = writeln!(out);
    }
    for v in &r.violations {
        eprintln!("invariant violation: {v}");
    }
}

fn load_platform(arg: &str) -> Result<PlatformSpec> {
    if let Some(p) = PlatformSpec::preset(arg) {
        return Ok(p);
    }
    let path = std::path::Path::new(arg);
    if !path.is_file() {
        // Fall back to a scenario preset's platform.
        return Scenario::resolve(arg)?.platform_spec();
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    match serde_json::from_str::<PlatformSpec>(&text) {
        Ok(p) => Ok(p),
        Err(_) => {
            let sc = Scenario::load(path)?;
            match sc.platform {
                PlatformRef::Inline(p) => Ok(*p),
                PlatformRef::Preset(_) => sc.platform_spec(),
            }
        }
    }
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run { scenario, seed, out, event_log, controller } => {
            let sc = Scenario::resolve(&scenario)?;
            let r = run_scenario(
                &sc,
                RunOptions {
                    out_dir: Some(out.clone()),
                    event_log,
                    controller: controller.map(Into::into),
                    seed,
                    ..Default::default()
                },
            )?;
            print_report(&r);
            say!("outputs in {}", out.display());
        }
        Cmd::Calibrate { platform, seed, out } => {
            let p = load_platform(&platform)?;
            let report = calibrate(&p, seed)?;
            say!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                write_json(&report, &dir.join("calibration.json"))?;
            }
        }
        Cmd::List => {
            for name in Scenario::preset_names() {
                let sc = Scenario::preset(name)?;
                say!("{name:<20} {}", sc.description);
            }
        }
        Cmd::Sweep { scenarios, out, jobs, seed, controller } => {
            let mut runs = Vec::new();
            for s in &scenarios {
                let sc = Scenario::resolve(s)?;
                let dir = out.join(&sc.name);
                runs.push((
                    sc,
                    RunOptions {
                        out_dir: Some(dir),
                        controller: controller.map(Into::into),
                        seed,
                        ..Default::default()
                    },
                ));
            }
            let mut first_err = None;
            for r in sweep(runs, jobs) {
                match r {
                    Ok(r) => print_report(&r),
                    Err(e) => {
                        eprintln!("error: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
