//! Batch front end for the converter toolkit: scenario simulation,
//! compensator design, certificate evaluation and the model-fidelity
//! sweep. All heavy lifting lives in the library; this binary parses
//! arguments, loads configs and prints reports.
//!
//! Exit status: 0 success, 2 configuration error, 3 run error,
//! 4 certificate failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fivess::cli::{
    cmd_certify, cmd_design, cmd_simulate, cmd_sweep, emit_config, load_config, parse_config,
    resolve_out_dir, ScenarioConfig,
};
use fivess::error::Error;
use fivess::presets;

#[derive(Parser)]
#[command(name = "fivess", version, about = "Cycle-exact current-mode dc-dc converter toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Circuit preset used when no config file is given.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (default: $FIVESS_OUT_DIR, then the current one).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed for randomized certificate suites.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, default_value_t = 4)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and write trace, cycle and summary files.
    Simulate(ConfigArgs),
    /// Design the compensator for the configured scenario and print the
    /// pole map.
    Design(ConfigArgs),
    /// Evaluate every applicable stability and performance certificate.
    Certify(ConfigArgs),
    /// Model-fidelity sweep over reference step sizes.
    Sweep(ConfigArgs),
    /// List the built-in circuit presets.
    Presets {
        /// Show one preset's expanded parameters.
        name: Option<String>,
    },
}

fn load(args: &ConfigArgs, default_scenario: &str) -> Result<ScenarioConfig, Error> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(preset)) => parse_config(&format!(
            "[params]\npreset = \"{preset}\"\n\n{default_scenario}"
        ))?,
        (None, None) => {
            return Err(Error::Config(
                "pass --config <file> or --preset <name>".into(),
            ))
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn default_scenario_for(preset: Option<&str>) -> &'static str {
    match preset {
        Some("table1_buck") => {
            "[scenario]\nkind = \"reference-step\"\nv_from = 1.7\nv_to = 1.8\n"
        }
        _ => "[scenario]\nkind = \"reference-step\"\nv_from = 38.0\nv_to = 40.0\n",
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load(&args, default_scenario_for(args.preset.as_deref()))?;
            let out_dir = resolve_out_dir(args.out_dir.clone());
            let summary = cmd_simulate(&cfg, &out_dir)?;
            println!(
                "simulate: {} cycles, termination {:?}, outputs in {}",
                summary.cycles,
                summary.termination,
                out_dir.display()
            );
            for t in &summary.transitions {
                println!(
                    "  {:.3} V -> {:.3} V: rise {} overshoot {:.3}% settled {}",
                    t.v_from,
                    t.v_to,
                    t.metrics
                        .rise_time_10_90
                        .map(|r| format!("{:.2} us", r * 1e6))
                        .unwrap_or_else(|| "n/a".into()),
                    t.metrics.sigma_t_v * 100.0,
                    t.advanced.unwrap_or(t.metrics.settled)
                );
            }
            if let Some(ls) = &summary.load_step {
                println!(
                    "  load step at cycle {}: max deviation {:.4} V ({:.2}%), recovered {}",
                    ls.step_cycle,
                    ls.max_deviation_v,
                    ls.deviation_fraction * 100.0,
                    ls.recovered
                );
            }
            Ok(())
        }
        Command::Design(args) => {
            let cfg = load(&args, default_scenario_for(args.preset.as_deref()))?;
            let report = cmd_design(&cfg)?;
            println!(
                "plant at {:.3} V: a1 = {:.6}, b1 = {:.6}, g1 = {:.6e} ohm",
                report.v_design, report.plant.a1, report.plant.b1, report.plant.g1
            );
            println!(
                "compensator: gain {:.6} A/V, zero {:.6}, pole {:.6}",
                report.gain, report.zero, report.pole
            );
            for ((re, im), r) in report.closed_loop_poles.iter().zip(&report.pole_radii) {
                println!("  closed-loop pole {re:+.6} {im:+.6}j  |z| = {r:.6}");
            }
            Ok(())
        }
        Command::Certify(args) => {
            let cfg = load(&args, default_scenario_for(args.preset.as_deref()))?;
            let report = cmd_certify(&cfg)?;
            println!(
                "discrete stability: {} (pole radii {:?})",
                report.stability.stable, report.stability.pole_radii
            );
            println!(
                "large-signal certificate: stable {} (gains {:.4e} / {:.4e})",
                report.gas.stable, report.gas.gamma_v_to_i, report.gas.gamma_i_to_v
            );
            for (name, slack) in &report.gas.margins {
                println!("  {name}: slack {slack:+.6e}");
            }
            if let Some(s) = &report.sector {
                println!(
                    "sector bounds: lambda {:.4e} A/s, K in [{:.6}, {:.6}]",
                    s.lambda_ub, s.k_lb, s.k_ub
                );
            }
            if let Some((runs, sf, of)) = report.bound_suite {
                println!(
                    "bound suite: {runs} scenarios, settling failures {sf}, overshoot failures {of}"
                );
            }
            if report.pass {
                println!("certificates: PASS");
                Ok(())
            } else {
                println!("certificates: FAIL");
                Err(Error::InvalidParameter("certificate failure".into()))
            }
        }
        Command::Sweep(args) => {
            let cfg = load(&args, default_scenario_for(args.preset.as_deref()))?;
            let out_dir = resolve_out_dir(args.out_dir.clone());
            let points = cmd_sweep(&cfg, &out_dir, args.threads)?;
            println!("step_V  e_w_percent");
            for p in &points {
                println!("{:6.2}  {:.4}", p.step_v, p.e_w_percent);
            }
            println!("written to {}", out_dir.join("sweep.csv").display());
            Ok(())
        }
        Command::Presets { name } => {
            match name {
                Some(n) => {
                    if presets::by_name(&n).is_none() {
                        return Err(Error::Config(format!("unknown preset '{n}'")));
                    }
                    let cfg = format!(
                        "[params]\npreset = \"{n}\"\n\n[scenario]\nkind = \"open-loop\"\ncommand = 1.0\n"
                    );
                    println!("{}", emit_config(&parse_config(&cfg)?)?);
                }
                None => {
                    for n in presets::PRESET_NAMES {
                        println!("{n}");
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                Error::InvalidParameter(msg) if msg.contains("certificate failure") => {
                    ExitCode::from(4)
                }
                _ => ExitCode::from(3),
            }
        }
    }
}
