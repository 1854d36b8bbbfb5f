//! Command-line front end: single runs, sweeps and preset listing.

use clap::{Args, Parser, Subcommand};
use csim_core::harness::{emit_csv, preset, preset_description, preset_names, run_experiment, SweepSpec};
use csim_core::runner::{run_scenario, RunOptions};
use csim_core::{Error, ScenarioConfig};
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "csim",
    about = "WBAN/IoT coexistence simulator: CSIM channel selection vs SSA baseline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and emit its trace and metrics.
    Run(RunArgs),
    /// Run a sweep preset or a custom sweep file and emit CSV.
    Sweep(SweepArgs),
    /// List the shipped experiment presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file (defaults apply when omitted).
    #[arg(long)]
    config: Option<String>,
    /// Scheme override: csim or ssa.
    #[arg(long)]
    scheme: Option<String>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Superframe-count override.
    #[arg(long)]
    superframes: Option<u64>,
    /// BLE transceiver on/off override (energy accounting).
    #[arg(long)]
    ble: Option<bool>,
    /// Dotted-key config overrides, e.g. --set n_wbans=12 --set energy.scan_mj=1e-5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Write the event trace as JSON lines to this path.
    #[arg(long)]
    trace: Option<String>,
    /// Write the run summary JSON to this path (stdout otherwise).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Preset name (see `csim presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Custom sweep TOML file.
    #[arg(long)]
    config: Option<String>,
    /// Replication-count override.
    #[arg(long)]
    reps: Option<u32>,
    /// Base-seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-key overrides applied to the sweep's base scenario.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV output path (stdout otherwise).
    #[arg(long)]
    out: Option<String>,
}

fn load_scenario(args: &RunArgs) -> Result<ScenarioConfig, Error> {
    let mut overrides = args.set.clone();
    if let Some(scheme) = &args.scheme {
        overrides.push(format!("scheme={scheme}"));
    }
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(sf) = args.superframes {
        overrides.push(format!("superframes={sf}"));
    }
    if let Some(ble) = args.ble {
        overrides.push(format!("ble_enabled={ble}"));
    }
    let base = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    base.with_overrides(&overrides)
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let cfg = load_scenario(&args)?;
    let out = run_scenario(
        &cfg,
        &RunOptions {
            collect_trace: args.trace.is_some(),
        },
    );
    if let Some(path) = &args.trace {
        let mut text = String::new();
        for rec in &out.trace {
            text.push_str(&rec.to_jsonl());
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    if !out.violations.is_empty() {
        eprintln!("invariant violations detected:");
        for v in &out.violations {
            eprintln!("  {v}");
        }
    }
    let summary = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    match &args.out {
        Some(path) => std::fs::write(path, summary + "\n").map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?,
        None => println!("{summary}"),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let mut spec: SweepSpec = match (&args.preset, &args.config) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => SweepSpec::load(path)?,
        (None, None) => {
            return Err(Error::InvalidConfig(
                "sweep needs --preset NAME or --config FILE".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap forbids both"),
    };
    if let Some(reps) = args.reps {
        spec.replications = reps;
    }
    if let Some(seed) = args.seed {
        spec.base.seed = seed;
    }
    if !args.set.is_empty() {
        spec.base = spec.base.with_overrides(&args.set)?;
    }
    let table = run_experiment(&spec)?;
    match &args.out {
        Some(path) => emit_csv(&table, path)?,
        None => {
            print!("{}", table.to_csv());
            std::io::stdout().flush().ok();
        }
    }
    Ok(())
}

fn cmd_presets() {
    for name in preset_names() {
        println!("{name}: {}", preset_description(name));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Presets => {
            cmd_presets();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
