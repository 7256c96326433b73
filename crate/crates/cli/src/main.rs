//! `fourbar-synth` command-line interface.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 runtime
//! failure, 64 usage error.

use clap::{Args, Parser, Subcommand};
use fourbar_synth::constraints::DesignEvaluator;
use fourbar_synth::dynamics::torque_profile;
use fourbar_synth::io::{append_record, write_records, write_trace, write_trajectory};
use fourbar_synth::kinematics::{kinematic_transform, validate_baseline};
use fourbar_synth::optimizer::run_optimization;
use fourbar_synth::oracle::{best_feasible, feasibility_slice, grid_axes, grid_sweep_axes, MAX_GRID_RESOLUTION};
use fourbar_synth::{load_problem, DesignParams, Error, Pose, ProblemConfig};
use serde_json::json;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "fourbar-synth", version, about = "Four-bar linkage synthesis by constrained Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Read --delta-i and --delta-e in degrees instead of radians.
    #[arg(long)]
    degrees: bool,
    /// Override the effector angle at maximal compression.
    #[arg(long, allow_negative_numbers = true)]
    delta_i: Option<f64>,
    /// Override the effector angle at touch.
    #[arg(long, allow_negative_numbers = true)]
    delta_e: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration and the baseline design.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate one design and print its record as JSON.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Bar lengths l_oa,l_ab,l_bc in meters.
        #[arg(long, value_parser = parse_design, allow_hyphen_values = true)]
        design: DesignParams,
        /// Print the static-gap construction at one stroke end (i or e) instead.
        #[arg(long)]
        pose: Option<Pose>,
        /// Append the record as a CSV row to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the crank trajectory and motor torque of one design as CSV.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_design, allow_hyphen_values = true)]
        design: DesignParams,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every design of a regular grid over the optimizer bounds.
    Grid {
        #[command(flatten)]
        common: Common,
        /// Points per axis.
        #[arg(long, default_value_t = 21)]
        resolution: usize,
        /// Sweep only the l_oa x l_ab slice at this rocker length.
        #[arg(long)]
        fix_l_bc: Option<f64>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a text map of the slice (requires --fix-l-bc).
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Search the bounds for the feasible design with the lowest RMS torque.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Total number of evaluations; overrides the configured n_max.
        #[arg(long)]
        budget: Option<usize>,
        /// Trace CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the best design as JSON.
        #[arg(long)]
        best: Option<PathBuf>,
        /// Write the fitted surrogate hyperparameters of every iteration as JSON.
        #[arg(long)]
        dump_gp: Option<PathBuf>,
    },
}

fn parse_design(text: &str) -> Result<DesignParams, String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok(DesignParams::from_array([a, b, c])),
        _ => Err(format!("expected three comma-separated lengths, got {}", parts.len())),
    }
}

fn load(common: &Common) -> Result<ProblemConfig, Error> {
    let mut cfg = load_problem(&common.config)?;
    let angle = |v: f64| if common.degrees { v.to_radians() } else { v };
    if let Some(v) = common.delta_i {
        cfg.task.delta_i = angle(v);
    }
    if let Some(v) = common.delta_e {
        cfg.task.delta_e = angle(v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn checked(design: DesignParams) -> Result<DesignParams, Error> {
    DesignParams::new(design.l_oa, design.l_ab, design.l_bc)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Validate { common } => {
            let cfg = load(&common)?;
            let table = validate_baseline(&cfg.mechanism, &cfg.task)?;
            println!(
                "ok: baseline assembles over {} samples, crank from {:.6} to {:.6} rad",
                table.postures.len(),
                table.at_min().theta,
                table.at_max().theta
            );
        }
        Command::Evaluate { common, design, pose, csv } => {
            let cfg = load(&common)?;
            let design = checked(design)?;
            let evaluator = DesignEvaluator::new(&cfg.mechanism, &cfg.task)?;
            if let Some(pose) = pose {
                let gap = evaluator.static_gap(&design, pose);
                println!("{}", serde_json::to_string(&gap).expect("gap serializes"));
            } else {
                let record = evaluator.evaluate(&design);
                println!("{}", serde_json::to_string(&record).expect("record serializes"));
                if let Some(path) = csv {
                    append_record(path, &record)?;
                }
            }
        }
        Command::Trace { common, design, out } => {
            let cfg = load(&common)?;
            let design = checked(design)?;
            validate_baseline(&cfg.mechanism, &cfg.task)?;
            let trajectory = kinematic_transform(&design, &cfg.mechanism, &cfg.task)?;
            let torque: Vec<f64> = match torque_profile(&design, &cfg.mechanism, &cfg.task, &trajectory) {
                Ok(profile) => profile.samples.iter().take(trajectory.len()).map(|s| s.1).collect(),
                Err(Error::SingularState { t }) => {
                    eprintln!("warning: torque undefined at t = {t} s, column left empty");
                    Vec::new()
                }
                Err(e) => return Err(e),
            };
            write_trajectory(output(out.as_deref())?, &trajectory.samples, &torque)?;
        }
        Command::Grid { common, resolution, fix_l_bc, out, map } => {
            let cfg = load(&common)?;
            if resolution == 0 || resolution > MAX_GRID_RESOLUTION {
                return Err(Error::validation("resolution", format!("must be between 1 and {MAX_GRID_RESOLUTION}")));
            }
            let mut axes = grid_axes(&cfg.optimizer.bounds, resolution);
            if let Some(l_bc) = fix_l_bc {
                if !(l_bc.is_finite() && l_bc > 0.0) {
                    return Err(Error::validation("fix-l-bc", "must be a positive length"));
                }
                axes[2] = vec![l_bc];
            }
            let records = grid_sweep_axes(&cfg.mechanism, &cfg.task, &axes)?;
            write_records(output(out.as_deref())?, &records)?;
            let feasible = records.iter().filter(|r| r.constraints.feasible).count();
            eprintln!("{} designs, {} feasible", records.len(), feasible);
            if let Some(best) = best_feasible(&records) {
                eprintln!(
                    "best feasible: l_oa = {}, l_ab = {}, l_bc = {}, t_rms = {}",
                    best.design.l_oa,
                    best.design.l_ab,
                    best.design.l_bc,
                    best.objective.unwrap_or(f64::NAN)
                );
            }
            if let Some(path) = map {
                let l_bc = fix_l_bc
                    .ok_or_else(|| Error::validation("map", "a slice map needs --fix-l-bc"))?;
                let slice = feasibility_slice(&cfg.mechanism, &cfg.task, &axes[0], &axes[1], l_bc)?;
                std::fs::write(path, slice.render())?;
            }
        }
        Command::Optimize { common, seed, budget, out, best, dump_gp } => {
            let mut cfg = load(&common)?;
            if let Some(seed) = seed {
                cfg.optimizer.seed = seed;
            }
            if let Some(budget) = budget {
                cfg.optimizer.n_max = budget;
            }
            cfg.optimizer.validate()?;
            let trace = run_optimization(&cfg.mechanism, &cfg.task, &cfg.optimizer)?;
            write_trace(output(out.as_deref())?, &trace)?;
            let records = trace.records();
            let best_record = trace
                .best_feasible
                .as_ref()
                .and_then(|(x, _)| records.iter().find(|r| r.design.to_array()[..] == x[..]));
            match best_record {
                Some(r) => eprintln!(
                    "best feasible: l_oa = {}, l_ab = {}, l_bc = {}, t_rms = {}",
                    r.design.l_oa,
                    r.design.l_ab,
                    r.design.l_bc,
                    r.objective.unwrap_or(f64::NAN)
                ),
                None => eprintln!("no feasible design found within {} evaluations", trace.entries.len()),
            }
            if let Some(path) = best {
                let value = json!({
                    "seed": cfg.optimizer.seed,
                    "evaluations": trace.entries.len(),
                    "no_feasible_found": trace.no_feasible_found(),
                    "best": best_record,
                });
                write_json(&path, &value)?;
            }
            if let Some(path) = dump_gp {
                write_json(&path, &json!({ "iterations": trace.surrogates }))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}
