//! Region-of-attraction scans, Monte Carlo campaigns and the simplified
//! additive-disturbance baseline.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_plant, Plant, SampleMode, Scenario};
use crate::bounds::BoundsTable;
use crate::controller::{audit_run, final_set, run_closed_loop, Branch, RunAudit, RunLog, RunOptions, RunOutcome};
use crate::error::{Error, Result};
use crate::nested;
use crate::ocp::{solve_min_time_auto, AdditiveTube, OcpModel, OcpSolution, Tube};
use crate::setalg::{Matrix, Polytope, Vector, Zonotope};

/// One grid point of a region-of-attraction scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoaPoint {
    #[serde(with = "nested::vector")]
    pub x0: Vector,
    pub feasible: bool,
    pub n0: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoaReport {
    pub points: Vec<RoaPoint>,
}

impl RoaReport {
    pub fn feasible_count(&self) -> usize {
        self.points.iter().filter(|p| p.feasible).count()
    }

    pub fn feasible_fraction(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.feasible_count() as f64 / self.points.len() as f64
    }
}

/// Initial optimal solution `ℙ₀(x0, {0})`, if any.
pub fn initial_solution(model: &OcpModel, x0: &Vector) -> Result<Option<OcpSolution>> {
    let spec = model.spec(x0.clone(), Zonotope::origin(model.state_dim()), 0)?;
    solve_min_time_auto(&spec)
}

/// Solves `ℙ₀(x0, {0})` at every grid point.
pub fn roa_scan(model: &OcpModel, grid: &[Vector]) -> Result<RoaReport> {
    let points = grid
        .iter()
        .map(|x0| {
            let n0 = initial_solution(model, x0)?.map(|s| s.horizon);
            Ok(RoaPoint {
                x0: x0.clone(),
                feasible: n0.is_some(),
                n0,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RoaReport { points })
}

/// Euclidean norms of the two halves of `v`: positions first, velocities
/// second. With an odd dimension the first half is the larger one.
pub fn split_norms(v: &Vector) -> (f64, f64) {
    let p = v.len().div_ceil(2);
    (v.rows(0, p).norm(), v.rows(p, v.len() - p).norm())
}

/// Metrics of one campaign run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub seed: u64,
    #[serde(with = "nested::vector")]
    pub x0: Vector,
    pub feasible: bool,
    pub n0: Option<usize>,
    pub t_c: Option<usize>,
    pub t_l: Option<usize>,
    pub enlargements: usize,
    pub max_terminal_generators: usize,
    pub max_state_violation: f64,
    pub max_input_violation: f64,
    pub final_position_error: f64,
    pub final_velocity_error: f64,
    pub fuel: f64,
    pub mean_solve_ms: f64,
    pub max_solve_ms: f64,
    /// Norms of the interval-hull radius of the final set, split into
    /// position and velocity halves.
    pub final_set_position_radius: f64,
    pub final_set_velocity_radius: f64,
    pub audit: Option<RunAudit>,
}

impl RunSummary {
    fn out_of_roa(index: usize, seed: u64, x0: &Vector) -> Self {
        RunSummary {
            index,
            seed,
            x0: x0.clone(),
            feasible: false,
            n0: None,
            t_c: None,
            t_l: None,
            enlargements: 0,
            max_terminal_generators: 0,
            max_state_violation: 0.0,
            max_input_violation: 0.0,
            final_position_error: f64::NAN,
            final_velocity_error: f64::NAN,
            fuel: 0.0,
            mean_solve_ms: 0.0,
            max_solve_ms: 0.0,
            final_set_position_radius: f64::NAN,
            final_set_velocity_radius: f64::NAN,
            audit: None,
        }
    }

    fn from_log(index: usize, x0: &Vector, model: &OcpModel, log: &RunLog) -> Result<Self> {
        let audit = audit_run(model, log)?;
        let t = final_set(log, model.bounds.ahat_k(), model.bounds.delta_s())?;
        let (tp, tv) = split_norms(&t.box_radius());
        let (fp, fv) = split_norms(log.final_state());
        Ok(RunSummary {
            index,
            seed: log.seed,
            x0: x0.clone(),
            feasible: true,
            n0: Some(log.n0()),
            t_c: Some(log.t_c),
            t_l: Some(log.t_l),
            enlargements: log.branch_hist.iter().filter(|b| **b == Branch::Enlarged).count(),
            max_terminal_generators: log.terminal_generators_hist.iter().copied().max().unwrap_or(0),
            max_state_violation: audit.max_state_violation,
            max_input_violation: audit.max_input_violation,
            final_position_error: fp,
            final_velocity_error: fv,
            fuel: log.fuel(),
            mean_solve_ms: log.mean_solve_ms(),
            max_solve_ms: log.solve_ms_hist.iter().fold(0.0, |a: f64, b| a.max(*b)),
            final_set_position_radius: tp,
            final_set_velocity_radius: tv,
            audit: Some(audit),
        })
    }
}

/// Aggregate over all runs of a campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub master_seed: u64,
    pub runs: Vec<RunSummary>,
    pub feasible_fraction: f64,
    pub mean_final_position_error: f64,
    pub mean_final_velocity_error: f64,
    pub mean_fuel: f64,
    /// Mean over every controller step of every run.
    pub mean_solve_ms: f64,
    pub max_solve_ms: f64,
    pub mean_final_set_position_radius: f64,
    pub mean_final_set_velocity_radius: f64,
    pub all_audits_pass: bool,
    /// Full logs, index-aligned with `runs`; `None` when out of the region
    /// of attraction.
    #[serde(skip)]
    pub logs: Vec<Option<RunLog>>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl CampaignReport {
    fn aggregate(master_seed: u64, runs: Vec<RunSummary>, logs: Vec<Option<RunLog>>) -> Self {
        let ok = || runs.iter().filter(|r| r.feasible);
        let feasible_fraction = if runs.is_empty() {
            0.0
        } else {
            ok().count() as f64 / runs.len() as f64
        };
        CampaignReport {
            master_seed,
            feasible_fraction,
            mean_final_position_error: mean(ok().map(|r| r.final_position_error)),
            mean_final_velocity_error: mean(ok().map(|r| r.final_velocity_error)),
            mean_fuel: mean(ok().map(|r| r.fuel)),
            mean_solve_ms: mean(logs.iter().flatten().flat_map(|l| l.solve_ms_hist.iter().copied())),
            max_solve_ms: ok().fold(0.0, |a, r| a.max(r.max_solve_ms)),
            mean_final_set_position_radius: mean(ok().map(|r| r.final_set_position_radius)),
            mean_final_set_velocity_radius: mean(ok().map(|r| r.final_set_velocity_radius)),
            all_audits_pass: ok().all(|r| r.audit.as_ref().is_some_and(RunAudit::passes)),
            runs,
            logs,
        }
    }
}

impl CampaignReport {
    /// Blanks every wall-clock field (serialized as `null`) so that reports
    /// of identical campaigns compare equal byte for byte.
    pub fn clear_timing(&mut self) {
        self.mean_solve_ms = f64::NAN;
        self.max_solve_ms = f64::NAN;
        for r in &mut self.runs {
            r.mean_solve_ms = f64::NAN;
            r.max_solve_ms = f64::NAN;
        }
    }
}

/// Settings for [`monte_carlo`].
#[derive(Clone, Copy, Debug)]
pub struct CampaignConfig {
    pub runs_per_x0: usize,
    pub master_seed: u64,
    pub mode: SampleMode,
    /// Worker threads; 0 or 1 runs sequentially.
    pub jobs: usize,
    pub check_candidates: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            runs_per_x0: 1,
            master_seed: 0,
            mode: SampleMode::Uniform,
            jobs: 1,
            check_candidates: true,
        }
    }
}

/// Per-run seeds drawn from the master seed.
pub fn run_seeds(master_seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..count).map(|_| rng.random()).collect()
}

/// `count` grid points drawn uniformly with replacement.
pub fn random_grid_points(grid: &[Vector], count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| grid[rng.random_range(0..grid.len())].clone())
        .collect()
}

/// Runs `f(i)` for `i in 0..count` on up to `jobs` threads, keeping order.
fn parallel_map<T: Send>(count: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let jobs = jobs.clamp(1, count.max(1));
    if jobs == 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<(usize, T)>> = Mutex::new(Vec::with_capacity(count));
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let r = f(i);
                out.lock().expect("worker panicked").push((i, r));
            });
        }
    });
    let mut out = out.into_inner().expect("worker panicked");
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

/// Closed-loop runs on sampled plants from every `x0`, `runs_per_x0` times
/// each. A theorem violation in any run aborts the campaign and names the
/// offending seed.
pub fn monte_carlo(sc: &Scenario, model: &OcpModel, x0_set: &[Vector], cfg: &CampaignConfig) -> Result<CampaignReport> {
    let total = x0_set.len() * cfg.runs_per_x0;
    let seeds = run_seeds(cfg.master_seed, total);
    let opts = RunOptions {
        check_candidates: cfg.check_candidates,
    };
    let results = parallel_map(total, cfg.jobs, |i| -> Result<(RunSummary, Option<RunLog>)> {
        let x0 = &x0_set[i / cfg.runs_per_x0];
        let seed = seeds[i];
        let plant = sample_plant(sc, seed, cfg.mode);
        match run_closed_loop(model, &plant, x0, seed, opts) {
            Ok(RunOutcome::Completed(log)) => Ok((RunSummary::from_log(i, x0, model, &log)?, Some(log))),
            Ok(RunOutcome::OutOfRoa) => Ok((RunSummary::out_of_roa(i, seed, x0), None)),
            Err(Error::TheoremViolation { step, detail }) => Err(Error::TheoremViolation {
                step,
                detail: format!("run {i} (seed {seed}): {detail}"),
            }),
            Err(e) => Err(e),
        }
    });
    let mut runs = Vec::with_capacity(total);
    let mut logs = Vec::with_capacity(total);
    for r in results {
        let (s, l) = r?;
        runs.push(s);
        logs.push(l);
    }
    Ok(CampaignReport::aggregate(cfg.master_seed, runs, logs))
}

/// Box radius `w = Δ_S ξ̄` covering `D_S [x; u]` for every admissible pair,
/// where `ξ̄` holds the largest magnitude of each coordinate over `𝒳 × 𝒰`.
pub fn additive_w_bound(delta_s: &Matrix, state_poly: &Polytope, input_poly: &Polytope) -> Result<Vector> {
    let (n, m) = (state_poly.dim(), input_poly.dim());
    if delta_s.ncols() != n + m {
        return Err(crate::error::dim_err("additive_w_bound", n + m, delta_s.ncols()));
    }
    let mut xi_bar = Vector::zeros(n + m);
    for i in 0..n {
        let (lo, hi) = state_poly.coordinate_range(i)?;
        xi_bar[i] = lo.abs().max(hi.abs());
    }
    for i in 0..m {
        let (lo, hi) = input_poly.coordinate_range(i)?;
        xi_bar[n + i] = lo.abs().max(hi.abs());
    }
    Ok(delta_s * xi_bar)
}

/// Simplified additive-disturbance baseline: the same controller with the
/// tube `Σ_{i<j} |Â_K^i| w` and enlargements by `Â_K^{N-1} □(w)`. This is a
/// stand-in built from the bound `w`, not a reproduction of any particular
/// published additive controller.
pub fn baseline_model(sc: &Scenario, bounds: BoundsTable) -> Result<OcpModel> {
    let w = additive_w_bound(&sc.delta_s(), &sc.state_poly, &sc.input_poly)?;
    let tube = AdditiveTube::new(&bounds, w)?;
    Ok(sc.ocp_model_with(bounds)?.with_tube(Tube::Additive(tube)))
}

/// One baseline run on `plant`; `model` comes from [`baseline_model`].
pub fn baseline_run(model: &OcpModel, plant: &Plant, x0: &Vector, seed: u64) -> Result<RunOutcome> {
    if !matches!(model.tube, Tube::Additive(_)) {
        return Err(Error::InvalidArgument("baseline runs need an additive tube".into()));
    }
    run_closed_loop(model, plant, x0, seed, RunOptions::default())
}

/// Per-step tube radii of both controllers along a nominal trajectory:
/// `(multiplicative, additive)` for `j = 0 … N-1`.
pub fn tube_comparison(bounds: &BoundsTable, tube: &AdditiveTube, sol: &OcpSolution) -> Vec<(Vector, Vector)> {
    let xi_abs: Vec<Vector> = (0..sol.horizon).map(|j| sol.xi(j).abs()).collect();
    (0..sol.horizon)
        .map(|j| {
            let mult = (0..j).fold(Vector::zeros(bounds.state_dim()), |acc, i| {
                acc + bounds.radius(j - i - 1) * &xi_abs[i]
            });
            (mult, tube.radius(j).clone())
        })
        .collect()
}
