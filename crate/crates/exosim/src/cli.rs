//! Command-line entry point: scenario runs, the driver-model and
//! battery-model sub-simulators, and parse-only checking.
//!
//! Exit codes: 0 clean end, 2 scenario/usage errors, 3 watchdog halt,
//! 4 hibernate stop, 1 I/O failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::driver::{
    peak_dissipation, transient_simulate, GateDrive, LoadParams, MosfetParams,
};
use crate::scenario::{parse_scenario, Scenario};
use crate::sim::{run_simulation, FaultSuspend, RunOutcome, SimConfig};
use crate::trace::{CsvSink, NullSink, RunSummary, TraceMode};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_WATCHDOG: i32 = 3;
pub const EXIT_HIBERNATE: i32 = 4;

/// Default-seed override with the lowest precedence.
pub const SEED_ENV_VAR: &str = "EXOSIM_SEED";

#[derive(Parser)]
#[command(
    name = "exosim",
    about = "Deterministic hand-exoskeleton firmware simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario through the kernel, firmware, and plant.
    Run {
        scenario: PathBuf,
        /// Detector RNG seed (overrides the scenario header and environment).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the trace CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SummaryFormat::Text)]
        summary: SummaryFormat,
        #[arg(long, value_enum, default_value_t = TraceArg::Events)]
        trace: TraceArg,
        /// Detector frame rate (10 for the deployed model, 15.4 for the
        /// faster-but-unshippable one).
        #[arg(long, default_value_t = 10.0)]
        fps: f64,
        /// Detector inference latency in milliseconds.
        #[arg(long, default_value_t = 51)]
        latency_ms: u64,
        /// Fault injection: suspend a task mid-run, as `TaskName@tick_ms`.
        #[arg(long, value_parser = parse_fault)]
        suspend: Option<FaultSuspend>,
    },
    /// Simulate the MOSFET driver turn-on transient.
    Driver {
        #[arg(long, value_enum)]
        load: LoadArg,
        #[arg(long, value_enum)]
        soft_start: OnOff,
        /// Integration step in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Simulated duration in seconds.
        #[arg(long)]
        t_end: Option<f64>,
        /// Write the sample series CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the battery model at a constant draw.
    Battery {
        #[arg(long)]
        current_ma: f64,
        #[arg(long)]
        hours: f64,
        /// Starting terminal voltage.
        #[arg(long, default_value_t = 12.89)]
        v0: f64,
    },
    /// Parse a scenario and report diagnostics without running it.
    Check { scenario: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SummaryFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceArg {
    Full,
    Events,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LoadArg {
    Motor,
    Solenoid,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

fn parse_fault(text: &str) -> Result<FaultSuspend, String> {
    let (task, tick) = text
        .split_once('@')
        .ok_or_else(|| "expected TaskName@tick_ms".to_string())?;
    let at_tick = tick
        .parse::<u64>()
        .map_err(|_| format!("invalid tick {tick:?}"))?;
    Ok(FaultSuspend {
        task: task.to_string(),
        at_tick,
    })
}

fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV_VAR).ok().and_then(|v| v.parse().ok())
}

fn effective_seed(cli_seed: Option<u64>, scenario: &Scenario) -> u64 {
    cli_seed
        .or(scenario.seed)
        .or_else(env_seed)
        .unwrap_or(0)
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, i32> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("error: cannot read {}: {err}", path.display());
            return Err(EXIT_IO);
        }
    };
    match parse_scenario(&text) {
        Ok(scenario) => Ok(scenario),
        Err(errors) => {
            for e in &errors {
                eprintln!("{}: {e}", path.display());
            }
            Err(EXIT_USAGE)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_command(
    scenario_path: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    summary_format: SummaryFormat,
    trace: TraceArg,
    fps: f64,
    latency_ms: u64,
    suspend: Option<FaultSuspend>,
) -> i32 {
    let scenario = match load_scenario(&scenario_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let config = SimConfig {
        seed: effective_seed(seed, &scenario),
        fps,
        latency_ms,
        trace_mode: match trace {
            TraceArg::Full => TraceMode::Full,
            TraceArg::Events => TraceMode::Events,
        },
        fault_suspend: suspend,
        ..SimConfig::default()
    };

    let result = match &out {
        Some(path) => {
            let file = match fs::File::create(path) {
                Ok(f) => f,
                Err(err) => {
                    eprintln!("error: cannot create {}: {err}", path.display());
                    return EXIT_IO;
                }
            };
            let mut sink = CsvSink::new(std::io::BufWriter::new(file));
            let result = run_simulation(&scenario, &config, &mut sink);
            if let Err(err) = sink.finish() {
                eprintln!("error: writing trace: {err}");
                return EXIT_IO;
            }
            result
        }
        None => {
            let mut sink = NullSink;
            run_simulation(&scenario, &config, &mut sink)
        }
    };

    print_summary(&result.summary, summary_format);
    match result.outcome {
        RunOutcome::Clean => EXIT_CLEAN,
        RunOutcome::WatchdogHalt => EXIT_WATCHDOG,
        RunOutcome::HibernateStop => EXIT_HIBERNATE,
    }
}

fn print_summary(summary: &RunSummary, format: SummaryFormat) {
    match format {
        SummaryFormat::Json => println!("{}", summary.to_json()),
        SummaryFormat::Text => print!("{}", summary.to_text()),
    }
}

fn driver_command(
    load: LoadArg,
    soft_start: OnOff,
    dt: Option<f64>,
    t_end: Option<f64>,
    out: Option<PathBuf>,
) -> i32 {
    let load_params = match load {
        LoadArg::Motor => LoadParams::motor_open(),
        LoadArg::Solenoid => LoadParams::solenoid(),
    };
    let drive = match soft_start {
        OnOff::On => GateDrive::soft(),
        OnOff::Off => GateDrive::hard(),
    };
    let mosfet = MosfetParams::irlml6244();
    let dt = dt.unwrap_or(5e-6);
    let t_end = t_end.unwrap_or(if drive.soft_start { 0.6 } else { 0.05 });
    let series = match transient_simulate(&load_params, &mosfet, &drive, t_end, dt) {
        Ok(series) => series,
        Err(err) => {
            eprintln!("error: {err}");
            return EXIT_USAGE;
        }
    };
    let peak = peak_dissipation(&series).expect("series is nonempty");
    println!("peak_w {peak:.6}");
    println!("steady_i_a {:.6}", series.last().expect("nonempty").i_d);
    if let Some(path) = out {
        if let Err(err) = write_series_csv(&path, &series) {
            eprintln!("error: cannot write {}: {err}", path.display());
            return EXIT_IO;
        }
    }
    EXIT_CLEAN
}

fn write_series_csv(path: &PathBuf, series: &[crate::driver::TransientSample]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,v_gs,v_ds,i_d,p_fet")?;
    for s in series {
        writeln!(
            w,
            "{:.9},{:.6},{:.6},{:.6},{:.9}",
            s.t, s.v_gs, s.v_ds, s.i_d, s.p_fet
        )?;
    }
    w.flush()
}

fn battery_command(current_ma: f64, hours: f64, v0: f64) -> i32 {
    if current_ma < 0.0 || hours < 0.0 {
        eprintln!("error: current and duration must be non-negative");
        return EXIT_USAGE;
    }
    let mut battery = crate::peripherals::BatteryState::starting_at(v0);
    battery.step_hours(current_ma, hours);
    println!("{:.2}", battery.voltage());
    EXIT_CLEAN
}

fn check_command(scenario_path: PathBuf) -> i32 {
    match load_scenario(&scenario_path) {
        Ok(scenario) => {
            println!(
                "ok: {} events, duration {} s",
                scenario.events.len(),
                scenario.duration_s
            );
            EXIT_CLEAN
        }
        Err(code) => code,
    }
}

/// Parse `argv` (starting with the program name) and run one subcommand.
pub fn cli_main<I>(argv: I) -> i32
where
    I: IntoIterator,
    I::Item: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.exit_code() == 0 {
                EXIT_CLEAN
            } else {
                EXIT_USAGE
            };
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            summary,
            trace,
            fps,
            latency_ms,
            suspend,
        } => run_command(scenario, seed, out, summary, trace, fps, latency_ms, suspend),
        Command::Driver {
            load,
            soft_start,
            dt,
            t_end,
            out,
        } => driver_command(load, soft_start, dt, t_end, out),
        Command::Battery {
            current_ma,
            hours,
            v0,
        } => battery_command(current_ma, hours, v0),
        Command::Check { scenario } => check_command(scenario),
    }
}
