//! `tormpc`: bounds precomputation, single solves, closed-loop simulation,
//! region-of-attraction scans and Monte Carlo campaigns.
//!
//! Exit codes: 0 success, 1 initial problem infeasible, 2 configuration
//! error, 3 theorem violation, 4 numerical failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tormpc::controller::{audit_run, run_closed_loop, RunAudit, RunOptions, RunOutcome};
use tormpc::ocp::OcpModel;
use tormpc::sim::{
    baseline_model, baseline_run, default_grid, hcw_scenario, initial_solution, monte_carlo, random_grid_points,
    roa_scan, sample_plant, split_norms, write_json, write_roa_csv, write_run_csv, CampaignConfig, Plant, SampleMode,
};
use tormpc::{Error, RunLog, Scenario, Vector};

#[derive(Parser, Debug)]
#[command(name = "tormpc", about = "Time-optimal robust MPC under interval-matrix uncertainty")]
struct Cli {
    /// Scenario JSON; the built-in HCW rendezvous scenario when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Directory for CSV/JSON output and the bounds cache.
    #[arg(long, global = true, env = "TORMPC_OUTPUT_DIR", default_value = "tormpc-out")]
    output_dir: PathBuf,
    /// Override the scenario's maximum horizon.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Record solve times in CSV and JSON output (otherwise left blank so
    /// that output is reproducible).
    #[arg(long, global = true)]
    timing: bool,
    /// Repeat for more log output.
    #[arg(long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the active scenario (after `--nmax`) as JSON.
    Scenario,
    /// Compute (or load) the bounds table and print its largest entries.
    Precompute,
    /// Solve the initial minimum-time problem from one state.
    Solve {
        /// Comma-separated initial state.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
    },
    /// One closed-loop run on a sampled plant.
    Simulate {
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Sampling::Uniform)]
        sampling: Sampling,
        /// Use the nominal plant instead of a sampled one.
        #[arg(long)]
        nominal: bool,
    },
    /// Initial-problem feasibility over a grid of initial states.
    Roa {
        /// CSV of initial states, one per line; the 75-point cone grid when
        /// omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Monte Carlo closed-loop runs from random grid points.
    Campaign {
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Sampling::Uniform)]
        sampling: Sampling,
        /// Skip the per-step candidate-solution check.
        #[arg(long)]
        skip_candidate_check: bool,
    },
    /// Compare with the simplified additive-disturbance baseline.
    Baseline {
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Also run both controllers from this state on the same plant.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sampling {
    Uniform,
    Vertex,
}

impl From<Sampling> for SampleMode {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::Uniform => SampleMode::Uniform,
            Sampling::Vertex => SampleMode::Vertex,
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Infeasible(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Infeasible(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(Error::TheoremViolation { .. }) => 3,
            CliError::Core(Error::NumericFailure(_) | Error::Unbounded(_)) => 4,
            CliError::Core(_) => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_scenario(cli: &Cli) -> CliResult<Scenario> {
    let sc = match &cli.scenario {
        None => hcw_scenario(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Scenario::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    let sc = match cli.nmax {
        Some(0) => return Err(CliError::Config("--nmax must be positive".into())),
        Some(n) => sc.with_n_max(n),
        None => sc,
    };
    if let Err(e) = sc.spotcheck_gain(1000, 0) {
        log::warn!("gain spot-check failed: {e}");
    }
    Ok(sc)
}

fn output_dir(cli: &Cli) -> CliResult<PathBuf> {
    fs::create_dir_all(&cli.output_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cli.output_dir.display())))?;
    Ok(cli.output_dir.clone())
}

fn model_for(sc: &Scenario, out: &Path) -> CliResult<OcpModel> {
    let (table, _) = sc.bounds_table_cached(&out.join("cache"))?;
    Ok(sc.ocp_model_with(table)?)
}

fn parse_state(text: &str, n: usize) -> CliResult<Vector> {
    let vals = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("bad state {text:?}: {e}")))?;
    if vals.len() != n {
        return Err(CliError::Config(format!(
            "state {text:?} has {} entries, expected {n}",
            vals.len()
        )));
    }
    Ok(Vector::from_vec(vals))
}

fn load_grid(path: Option<&Path>, n: usize) -> CliResult<Vec<Vector>> {
    let Some(path) = path else {
        return Ok(default_grid());
    };
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            parse_state(l, n).map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn check_audit(audit: &RunAudit, what: &str) -> CliResult<()> {
    if audit.passes() {
        Ok(())
    } else {
        Err(CliError::Core(Error::TheoremViolation {
            step: 0,
            detail: format!("{what} failed its audit: {audit:?}"),
        }))
    }
}

fn summarize(log: &RunLog) -> String {
    let (p, v) = split_norms(log.final_state());
    format!(
        "T_c={}, N0*={}, T_l={}, final_pos_err={p:.6}, final_vel_err={v:.6}, fuel={:.6}",
        log.t_c,
        log.n0(),
        log.t_l,
        log.fuel()
    )
}

fn run(cli: &Cli) -> CliResult<()> {
    let sc = load_scenario(cli)?;
    let out = output_dir(cli)?;
    let n = sc.state_dim();
    match &cli.command {
        Command::Scenario => println!("{}", sc.to_json()?),
        Command::Precompute => {
            let (table, hit) = sc.bounds_table_cached(&out.join("cache"))?;
            println!(
                "bounds table n_max={} ({})",
                table.n_max(),
                if hit { "loaded from cache" } else { "computed" }
            );
            println!("j,max_entry");
            for (j, m) in table.max_entries().iter().enumerate() {
                println!("{j},{m:e}");
            }
        }
        Command::Solve { x0 } => {
            let x0 = parse_state(x0, n)?;
            let model = model_for(&sc, &out)?;
            let Some(sol) = initial_solution(&model, &x0)? else {
                return Err(CliError::Infeasible(format!(
                    "initial problem infeasible from {} up to horizon {}",
                    fmt_vec(&x0),
                    model.n_max
                )));
            };
            write_json(&sol, create(&out.join("solve.json"))?)?;
            println!("N0*={}, u0={}", sol.horizon, fmt_vec(&sol.v_seq[0]));
        }
        Command::Simulate {
            x0,
            seed,
            sampling,
            nominal,
        } => {
            let x0 = parse_state(x0, n)?;
            let model = model_for(&sc, &out)?;
            let plant = if *nominal {
                Plant::nominal(&sc)
            } else {
                sample_plant(&sc, *seed, (*sampling).into())
            };
            let opts = RunOptions { check_candidates: true };
            let log = match run_closed_loop(&model, &plant, &x0, *seed, opts)? {
                RunOutcome::Completed(log) => log,
                RunOutcome::OutOfRoa => {
                    return Err(CliError::Infeasible(format!(
                        "{} is outside the region of attraction",
                        fmt_vec(&x0)
                    )))
                }
            };
            let path = out.join(format!("simulate_seed{seed}.csv"));
            write_run_csv(&log, create(&path)?, cli.timing)?;
            println!("{}", summarize(&log));
            check_audit(&audit_run(&model, &log)?, "run")?;
        }
        Command::Roa { grid } => {
            let grid = load_grid(grid.as_deref(), n)?;
            let model = model_for(&sc, &out)?;
            let report = roa_scan(&model, &grid)?;
            write_roa_csv(&report, create(&out.join("roa.csv"))?)?;
            println!("feasible {}/{}", report.feasible_count(), report.points.len());
        }
        Command::Campaign {
            runs,
            seed,
            jobs,
            grid,
            sampling,
            skip_candidate_check,
        } => {
            let grid = load_grid(grid.as_deref(), n)?;
            if grid.is_empty() {
                return Err(CliError::Config("empty grid".into()));
            }
            let model = model_for(&sc, &out)?;
            let x0s = random_grid_points(&grid, *runs, *seed);
            let cfg = CampaignConfig {
                runs_per_x0: 1,
                master_seed: *seed,
                mode: (*sampling).into(),
                jobs: *jobs,
                check_candidates: !skip_candidate_check,
            };
            let mut report = monte_carlo(&sc, &model, &x0s, &cfg)?;
            let run_dir = out.join("runs");
            fs::create_dir_all(&run_dir).map_err(Error::from)?;
            for (summary, log) in report.runs.iter().zip(&report.logs) {
                if let Some(log) = log {
                    write_run_csv(
                        log,
                        create(&run_dir.join(format!("run_{:04}.csv", summary.index)))?,
                        cli.timing,
                    )?;
                }
            }
            if !cli.timing {
                report.clear_timing();
            }
            write_json(&report, create(&out.join("campaign.json"))?)?;
            println!(
                "runs={}, feasible_fraction={:.3}, mean_final_pos_err={:.6}, mean_final_vel_err={:.6}, mean_fuel={:.6}",
                report.runs.len(),
                report.feasible_fraction,
                report.mean_final_position_error,
                report.mean_final_velocity_error,
                report.mean_fuel
            );
            if !report.all_audits_pass {
                let bad: Vec<usize> = report
                    .runs
                    .iter()
                    .filter(|r| r.audit.as_ref().is_some_and(|a| !a.passes()))
                    .map(|r| r.index)
                    .collect();
                return Err(CliError::Core(Error::TheoremViolation {
                    step: 0,
                    detail: format!("audit failed in runs {bad:?}"),
                }));
            }
        }
        Command::Baseline { grid, x0, seed } => {
            let grid = load_grid(grid.as_deref(), n)?;
            let (table, _) = sc.bounds_table_cached(&out.join("cache"))?;
            let model = sc.ocp_model_with(table.clone())?;
            let base = baseline_model(&sc, table)?;
            let tor = roa_scan(&model, &grid)?;
            let add = roa_scan(&base, &grid)?;
            write_roa_csv(&add, create(&out.join("baseline_roa.csv"))?)?;
            println!(
                "feasible: tor-mpc {}/{}, simplified additive baseline {}/{}",
                tor.feasible_count(),
                grid.len(),
                add.feasible_count(),
                grid.len()
            );
            if let Some(x0) = x0 {
                let x0 = parse_state(x0, n)?;
                let plant = sample_plant(&sc, *seed, SampleMode::Uniform);
                let opts = RunOptions {
                    check_candidates: false,
                };
                for (name, outcome) in [
                    ("tor-mpc", run_closed_loop(&model, &plant, &x0, *seed, opts)?),
                    ("baseline", baseline_run(&base, &plant, &x0, *seed)?),
                ] {
                    match outcome {
                        RunOutcome::Completed(log) => {
                            let path = out.join(format!("{name}_seed{seed}.csv"));
                            write_run_csv(&log, create(&path)?, cli.timing)?;
                            println!("{name}: {}", summarize(&log));
                        }
                        RunOutcome::OutOfRoa => println!("{name}: outside region of attraction"),
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tormpc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
