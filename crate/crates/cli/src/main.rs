use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use colscan::serve::{serve, ServeConfig};
use colscan_core::report::{read_report, replay, write_report};
use colscan_core::{load_pilot_script, load_scenario, run_headless, RunLimit, RunReport};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "colscan",
    version,
    about = "Column inspection mission simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and write the run report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Pilot script applied while under manual control.
        #[arg(long)]
        pilot: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Integration step in seconds.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parameter override, repeatable: --set key=value
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-run a report's recorded inputs and compare.
    Replay {
        #[arg(long)]
        report: PathBuf,
        /// Exit non-zero unless the replay matches byte for byte.
        #[arg(long)]
        verify: bool,
    },
    /// Live session over WebSocket telemetry.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        /// Real-time multiplier.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the report when a session ends.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn print_summary(report: &RunReport) {
    println!(
        "scenario {} ({} ticks, termination {:?})",
        report.scenario.name, report.ticks, report.termination
    );
    println!(
        "captures: {}  collisions: {}  min clearance: {:.3} m",
        report.capture_log.len(),
        report.collisions,
        report.min_clearance
    );
    for a in &report.assessments {
        println!(
            "  column {}: {} (coverage {:.1}%{}, {} images)",
            a.column_id,
            a.fused_state.label(),
            100.0 * a.coverage_fraction,
            if a.coverage_incomplete {
                ", incomplete"
            } else {
                ""
            },
            a.reports.len()
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            pilot,
            seed,
            dt,
            out,
            set,
        } => {
            let scenario = load_scenario(&scenario)?;
            let mut params = scenario.params();
            for s in &set {
                params.apply_assignment(s)?;
            }
            if let Some(dt) = dt {
                params.apply("dt", dt)?;
            }
            params.validate()?;
            let script = match pilot {
                Some(p) => load_pilot_script(p)?,
                None => Vec::new(),
            };
            let started = Instant::now();
            let report = run_headless(&scenario, &script, seed, params, RunLimit::UntilDone);
            let elapsed = started.elapsed();
            print_summary(&report);
            println!("wall time: {:.3} s", elapsed.as_secs_f64());
            if let Some(out) = out {
                write_report(&report, &out)
                    .with_context(|| format!("writing {}", out.display()))?;
                println!("report written to {}", out.display());
            }
        }
        Command::Replay { report, verify } => {
            let original = read_report(&report)?;
            let verdict = replay(&original, Some(&report))?;
            println!(
                "capture log: {}  report bytes: {}",
                if verdict.capture_log_matches {
                    "match"
                } else {
                    "MISMATCH"
                },
                if verdict.bytes_match {
                    "match"
                } else {
                    "MISMATCH"
                },
            );
            if let Some((line, a, b)) = &verdict.first_difference {
                println!("first difference at line {line}:\n  recorded: {a}\n  replayed: {b}");
            }
            if verify && !verdict.is_match() {
                bail!("replay does not reproduce {}", report.display());
            }
        }
        Command::Serve {
            scenario,
            port,
            rate,
            seed,
            out,
            set,
        } => {
            let scenario = load_scenario(&scenario)?;
            let mut params = scenario.params();
            for s in &set {
                params.apply_assignment(s)?;
            }
            params.validate()?;
            let handle = serve(ServeConfig {
                scenario,
                params,
                seed,
                port,
                rate,
                report_path: out,
            })?;
            println!("serving on ws://{}", handle.local_addr());
            handle.join();
        }
    }
    Ok(())
}
