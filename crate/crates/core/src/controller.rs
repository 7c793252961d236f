//! Closed-loop time-optimal robust MPC with an adaptive terminal set.
//!
//! Every step first tries the problem with terminal set `{0}` at horizon
//! `N*_{k-1} - 1`. If that fails, the terminal set of the previous step is
//! enlarged by `Â_K^{N*_{k-1}-1} 𝓘_Δ [x(k-1); u(k-1)]` and the problem is
//! solved again at the same horizon, which is guaranteed to be feasible.
//! Whenever a horizon is feasible, shorter ones are probed downward.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::nested;
use crate::ocp::{
    solve_fixed_horizon, solve_min_time_auto, stack, verify_solution, OcpModel, OcpSolution, Tube, Verification,
};
use crate::setalg::{Matrix, Vector, Zonotope};
use crate::sim::Plant;

/// Slack used when auditing a finished run.
pub const AUDIT_TOL: f64 = 1e-7;

/// Which branch produced the input at a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// The initial problem at `k = 0`.
    Initial,
    /// Feasible with terminal set `{0}`; the terminal set is reset.
    Reset,
    /// Solved against the enlarged terminal set.
    Enlarged,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Initial => "initial",
            Branch::Reset => "reset",
            Branch::Enlarged => "enlarged",
        }
    }
}

/// Everything the next step needs.
#[derive(Clone, Debug)]
pub struct ControllerState {
    pub k: usize,
    /// `N*_k` of the step just taken.
    pub n_prev: usize,
    /// Terminal set used at step `k`; always centered at the origin.
    pub terminal_set: Zonotope,
    pub t_l: usize,
    pub x_prev: Vector,
    pub u_prev: Vector,
    /// Optimal solution at step `k`.
    pub solution: OcpSolution,
}

/// Result of one controller step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub u: Vector,
    pub n_star: usize,
    pub branch: Branch,
    pub terminal_generators: usize,
    pub solve_ms: f64,
}

/// Box radius of the uncertainty term `δ` for the pair `ξ = [x; u]`:
/// `Δ_S |ξ|` for the multiplicative tube, `w` for the additive one.
pub fn uncertainty_radius(model: &OcpModel, xi: &Vector) -> Vector {
    match &model.tube {
        Tube::Multiplicative => model.bounds.delta_s() * xi.abs(),
        Tube::Additive(t) => t.w().clone(),
    }
}

/// `z_f ⊕ Â_K^{n_prev-1} □(radius)`.
fn add_increment(z_f: &Zonotope, ahat_k: &Matrix, n_prev: usize, radius: &Vector) -> Result<Zonotope> {
    if n_prev == 0 {
        return Err(Error::InvalidArgument("n_prev must be at least 1".into()));
    }
    if radius.len() != z_f.dim() || ahat_k.nrows() != z_f.dim() {
        return Err(dim_err("enlarge_terminal_set", z_f.dim(), radius.len()));
    }
    let power = ahat_k.clone().pow((n_prev - 1) as u32);
    let inc = Zonotope::from_box(radius)?.affine_image(&power)?;
    z_f.minkowski_sum(&inc)
}

/// Adds `Â_K^{n_prev-1} 𝓘_Δ [x_prev; u_prev]` to `z_f`, where the set
/// `𝓘_Δ ξ` is the box of radius `Δ_S |ξ|`.
pub fn enlarge_terminal_set(
    z_f: &Zonotope,
    ahat_k: &Matrix,
    delta_s: &Matrix,
    n_prev: usize,
    x_prev: &Vector,
    u_prev: &Vector,
) -> Result<Zonotope> {
    let xi = stack(x_prev, u_prev);
    if delta_s.ncols() != xi.len() || delta_s.nrows() != z_f.dim() {
        return Err(dim_err(
            "enlarge_terminal_set",
            format!("{}x{}", z_f.dim(), xi.len()),
            format!("{}x{}", delta_s.nrows(), delta_s.ncols()),
        ));
    }
    add_increment(z_f, ahat_k, n_prev, &(delta_s * xi.abs()))
}

/// Feasible solution at `start`, improved by probing shorter horizons until
/// one fails. `Ok(None)` if `start` itself is infeasible.
fn solve_probing_down(spec: &crate::ocp::OcpSpec<'_>, start: usize) -> Result<Option<OcpSolution>> {
    let Some(mut best) = solve_fixed_horizon(spec, start)? else {
        return Ok(None);
    };
    for h in (1..start).rev() {
        match solve_fixed_horizon(spec, h) {
            Ok(Some(sol)) => best = sol,
            Ok(None) => break,
            Err(Error::NumericFailure(msg)) => {
                log::warn!("downward probe at horizon {h} failed: {msg}");
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Some(best))
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Solves the initial problem `ℙ₀(x0, {0})`. `Ok(None)` when `x0` is outside
/// the region of attraction.
pub fn controller_init(model: &OcpModel, x0: &Vector) -> Result<Option<(StepRecord, ControllerState)>> {
    let n = model.state_dim();
    let t = Instant::now();
    let spec = model.spec(x0.clone(), Zonotope::origin(n), 0)?;
    let Some(sol) = solve_min_time_auto(&spec)? else {
        return Ok(None);
    };
    let u = sol.v_seq[0].clone();
    let record = StepRecord {
        u: u.clone(),
        n_star: sol.horizon,
        branch: Branch::Initial,
        terminal_generators: 0,
        solve_ms: ms_since(t),
    };
    let state = ControllerState {
        k: 0,
        n_prev: sol.horizon,
        terminal_set: Zonotope::origin(n),
        t_l: 0,
        x_prev: x0.clone(),
        u_prev: u,
        solution: sol,
    };
    Ok(Some((record, state)))
}

/// One pass of the loop body at time `state.k + 1` with measured state `x_k`.
pub fn controller_step(
    model: &OcpModel,
    state: &ControllerState,
    x_k: &Vector,
) -> Result<(StepRecord, ControllerState)> {
    if state.n_prev <= 1 {
        return Err(Error::InvalidArgument("controller already converged".into()));
    }
    let n = model.state_dim();
    let k = state.k + 1;
    let target = state.n_prev - 1;
    let t = Instant::now();

    let spec = model.spec(x_k.clone(), Zonotope::origin(n), k)?;
    let (sol, branch, terminal_set, t_l) = match solve_probing_down(&spec, target)? {
        Some(sol) => (sol, Branch::Reset, Zonotope::origin(n), k),
        None => {
            let radius = uncertainty_radius(model, &stack(&state.x_prev, &state.u_prev));
            let z_f = add_increment(&state.terminal_set, model.bounds.ahat_k(), state.n_prev, &radius)?;
            let spec = model.spec(x_k.clone(), z_f.clone(), k)?;
            match solve_probing_down(&spec, target)? {
                Some(sol) => (sol, Branch::Enlarged, z_f, state.t_l),
                None => {
                    return Err(Error::TheoremViolation {
                        step: k,
                        detail: format!("problem with enlarged terminal set infeasible at horizon {target}"),
                    })
                }
            }
        }
    };
    let u = sol.v_seq[0].clone();
    let record = StepRecord {
        u: u.clone(),
        n_star: sol.horizon,
        branch,
        terminal_generators: terminal_set.num_generators(),
        solve_ms: ms_since(t),
    };
    let next = ControllerState {
        k,
        n_prev: sol.horizon,
        terminal_set,
        t_l,
        x_prev: x_k.clone(),
        u_prev: u,
        solution: sol,
    };
    Ok((record, next))
}

/// Shifted previous solution corrected by the measured disturbance:
/// `v̂(j) = v*(j+1) + K Â_K^j δ`, `ẑ(j) = z*(j+1) + Â_K^j δ`.
pub fn candidate_solution(
    prev: &OcpSolution,
    delta: &Vector,
    k_gain: &Matrix,
    ahat_k: &Matrix,
) -> (Vec<Vector>, Vec<Vector>) {
    let len = prev.horizon.saturating_sub(1);
    let mut v = Vec::with_capacity(len);
    let mut z = Vec::with_capacity(len + 1);
    let mut p = delta.clone();
    for j in 0..=len {
        z.push(&prev.z_seq[j + 1] + &p);
        if j < len {
            v.push(&prev.v_seq[j + 1] + k_gain * &p);
        }
        p = ahat_k * p;
    }
    (v, z)
}

/// Options for [`run_closed_loop`].
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Verify the shifted candidate against the enlarged problem at every
    /// step (one extra membership LP per step).
    pub check_candidates: bool,
}

/// Trajectory and bookkeeping of one closed-loop run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    #[serde(with = "nested::matrix")]
    pub plant_a: Matrix,
    #[serde(with = "nested::matrix")]
    pub plant_b: Matrix,
    /// `x(0) … x(T_c)`.
    #[serde(with = "nested::vector_list")]
    pub x_hist: Vec<Vector>,
    /// `u(0) … u(T_c-1)`.
    #[serde(with = "nested::vector_list")]
    pub u_hist: Vec<Vector>,
    pub n_star_hist: Vec<usize>,
    pub branch_hist: Vec<Branch>,
    /// Generator count of the terminal set used at each step.
    pub terminal_generators_hist: Vec<usize>,
    /// `δ(k) = x(k+1) - Â x(k) - B̂ u(k)`.
    #[serde(with = "nested::vector_list")]
    pub delta_hist: Vec<Vector>,
    pub solve_ms_hist: Vec<f64>,
    /// Worst residual of the shifted candidate per step from `k = 1`, when
    /// checked.
    pub candidate_residual_hist: Vec<f64>,
    pub t_l: usize,
    pub t_c: usize,
}

impl RunLog {
    pub fn n0(&self) -> usize {
        self.n_star_hist[0]
    }

    pub fn final_state(&self) -> &Vector {
        self.x_hist.last().expect("nonempty run")
    }

    /// `Σ_k ‖u(k)‖₁`.
    pub fn fuel(&self) -> f64 {
        self.u_hist.iter().map(|u| u.lp_norm(1)).sum()
    }

    pub fn mean_solve_ms(&self) -> f64 {
        self.solve_ms_hist.iter().sum::<f64>() / self.solve_ms_hist.len().max(1) as f64
    }
}

/// How a closed-loop run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunOutcome {
    Completed(RunLog),
    /// `ℙ₀(x0, {0})` is infeasible.
    OutOfRoa,
}

/// Runs the controller on `plant` from `x0` until `N*_k = 1`, then applies
/// the last input.
pub fn run_closed_loop(
    model: &OcpModel,
    plant: &Plant,
    x0: &Vector,
    seed: u64,
    opts: RunOptions,
) -> Result<RunOutcome> {
    let Some((rec, mut state)) = controller_init(model, x0)? else {
        return Ok(RunOutcome::OutOfRoa);
    };
    let mut log = RunLog {
        seed,
        plant_a: plant.a.clone(),
        plant_b: plant.b.clone(),
        x_hist: vec![x0.clone()],
        u_hist: Vec::new(),
        n_star_hist: Vec::new(),
        branch_hist: Vec::new(),
        terminal_generators_hist: Vec::new(),
        delta_hist: Vec::new(),
        solve_ms_hist: Vec::new(),
        candidate_residual_hist: Vec::new(),
        t_l: 0,
        t_c: 0,
    };
    let mut rec = rec;
    loop {
        let x = log.x_hist.last().expect("nonempty").clone();
        let x_next = plant.step(&x, &rec.u);
        let delta = &x_next - &model.a_hat * &x - &model.b_hat * &rec.u;
        log.u_hist.push(rec.u.clone());
        log.n_star_hist.push(rec.n_star);
        log.branch_hist.push(rec.branch);
        log.terminal_generators_hist.push(rec.terminal_generators);
        log.solve_ms_hist.push(rec.solve_ms);
        log.delta_hist.push(delta.clone());
        log.x_hist.push(x_next.clone());
        if state.n_prev <= 1 {
            break;
        }
        if log.u_hist.len() > model.n_max + 1 {
            return Err(Error::TheoremViolation {
                step: state.k,
                detail: "horizon failed to shrink within n_max steps".into(),
            });
        }
        if opts.check_candidates {
            log.candidate_residual_hist
                .push(candidate_residual(model, &state, &x_next, &delta)?);
        }
        let (r, s) = controller_step(model, &state, &x_next)?;
        if r.n_star + 1 > state.n_prev {
            return Err(Error::TheoremViolation {
                step: s.k,
                detail: format!("horizon {} did not shrink from {}", r.n_star, state.n_prev),
            });
        }
        rec = r;
        state = s;
    }
    log.t_l = state.t_l;
    log.t_c = state.k + 1;
    Ok(RunOutcome::Completed(log))
}

/// Worst constraint residual of the shifted candidate for step `state.k + 1`
/// against the problem with the enlarged terminal set.
fn candidate_residual(model: &OcpModel, state: &ControllerState, x_next: &Vector, delta: &Vector) -> Result<f64> {
    let ahat_k = model.bounds.ahat_k();
    let radius = uncertainty_radius(model, &stack(&state.x_prev, &state.u_prev));
    let z_f = add_increment(&state.terminal_set, ahat_k, state.n_prev, &radius)?;
    let spec = model.spec(x_next.clone(), z_f, state.k + 1)?;
    let (v, z) = candidate_solution(&state.solution, delta, &model.k_gain, ahat_k);
    Ok(verify_solution(&spec, &v, &z, None)?.max())
}

/// `𝒯 = Σ_{k=T_l}^{T_c-1} Â_K^{N*_k-1} □(Δ_S |[x(k); u(k)]|)`.
pub fn final_set(log: &RunLog, ahat_k: &Matrix, delta_s: &Matrix) -> Result<Zonotope> {
    let n = ahat_k.nrows();
    let mut t = Zonotope::origin(n);
    for k in log.t_l..log.t_c {
        t = enlarge_terminal_set(&t, ahat_k, delta_s, log.n_star_hist[k], &log.x_hist[k], &log.u_hist[k])?;
    }
    Ok(t)
}

/// Invariants checked on a finished run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunAudit {
    /// `N*_k ≤ N*_{k-1} - 1` at every step.
    pub shrinking: bool,
    /// `T_c ≤ N*₀`.
    pub t_c_bounded: bool,
    /// `x(T_c) ∈ 𝒯`.
    pub final_in_set: bool,
    /// Every `δ(k)` inside the box `Δ_S |[x(k); u(k)]|`.
    pub delta_consistent: bool,
    /// Largest violation of the state polytope over `x(0) … x(T_c-1)` and of
    /// the input polytope over every applied input.
    pub max_state_violation: f64,
    pub max_input_violation: f64,
    pub max_candidate_residual: f64,
}

impl RunAudit {
    pub fn passes(&self) -> bool {
        self.shrinking
            && self.t_c_bounded
            && self.final_in_set
            && self.delta_consistent
            && self.max_state_violation <= AUDIT_TOL
            && self.max_input_violation <= AUDIT_TOL
            && self.max_candidate_residual <= AUDIT_TOL
    }
}

/// Checks the convergence and feasibility guarantees on `log`.
pub fn audit_run(model: &OcpModel, log: &RunLog) -> Result<RunAudit> {
    let ahat_k = model.bounds.ahat_k();
    let delta_s = model.bounds.delta_s();
    let shrinking = log.n_star_hist.windows(2).all(|w| w[1] < w[0]);
    let t_c_bounded = log.t_c == log.u_hist.len() && log.t_c <= log.n0();
    let t = final_set(log, ahat_k, delta_s)?;
    let final_in_set = t.contains(log.final_state(), AUDIT_TOL)?;
    let delta_consistent = log.delta_hist.iter().enumerate().all(|(k, d)| {
        let r = delta_s * stack(&log.x_hist[k], &log.u_hist[k]).abs();
        d.iter().zip(r.iter()).all(|(d, r)| d.abs() <= r + 1e-9 * (1.0 + r))
    });
    let mut max_state_violation = 0.0f64;
    // x(T_c) is only known to lie in 𝒯, which need not sit inside 𝒳.
    for (k, x) in log.x_hist[..log.t_c].iter().enumerate() {
        max_state_violation = max_state_violation.max(model.state.at(k).violation(x));
    }
    let mut max_input_violation = 0.0f64;
    for (k, u) in log.u_hist.iter().enumerate() {
        max_input_violation = max_input_violation.max(model.input.at(k).violation(u));
    }
    let max_candidate_residual = log.candidate_residual_hist.iter().fold(0.0, |a: f64, b| a.max(*b));
    Ok(RunAudit {
        shrinking,
        t_c_bounded,
        final_in_set,
        delta_consistent,
        max_state_violation,
        max_input_violation,
        max_candidate_residual,
    })
}

/// Residuals of a candidate against an explicit problem, for tests.
pub fn verify_candidate(
    model: &OcpModel,
    x_next: &Vector,
    terminal_set: Zonotope,
    time: usize,
    v: &[Vector],
    z: &[Vector],
) -> Result<Verification> {
    let spec = model.spec(x_next.clone(), terminal_set, time)?;
    verify_solution(&spec, v, z, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setalg::Polytope;
    use crate::sim::{sample_plant, SampleMode, Scenario};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m1(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn scalar(a: f64, da: f64, db: f64, k: f64, n_max: usize) -> Scenario {
        Scenario {
            a_hat: m1(a),
            b_hat: m1(1.0),
            delta_a: m1(da),
            delta_b: m1(db),
            k_gain: m1(k),
            state_poly: Polytope::symmetric_box(1, 20.0).unwrap(),
            input_poly: Polytope::symmetric_box(1, 1.0).unwrap(),
            n_max,
            dt: 1.0,
            state_labels: vec![],
            input_labels: vec![],
        }
    }

    #[test]
    fn enlarge_without_uncertainty_is_identity() {
        let z = Zonotope::origin(1);
        let out = enlarge_terminal_set(
            &z,
            &m1(0.5),
            &Matrix::zeros(1, 2),
            3,
            &Vector::from_element(1, 1.0),
            &Vector::from_element(1, 1.0),
        )
        .unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn enlarge_scalar_hand_value() {
        let ds = Matrix::from_row_slice(1, 2, &[0.1, 0.2]);
        let one = Vector::from_element(1, 1.0);
        let out = enlarge_terminal_set(&Zonotope::origin(1), &m1(0.5), &ds, 3, &one, &one).unwrap();
        assert_eq!(out.num_generators(), 1);
        assert!((out.generators()[0][0] - 0.075).abs() < 1e-15);
    }

    #[test]
    fn enlarge_contains_sampled_images() {
        let ahat_k = Matrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.7]);
        let ds = Matrix::from_row_slice(2, 3, &[0.05, 0.0, 0.1, 0.02, 0.03, 0.0]);
        let x = Vector::from_vec(vec![1.5, -2.0]);
        let u = Vector::from_element(1, 0.4);
        let z = enlarge_terminal_set(&Zonotope::origin(2), &ahat_k, &ds, 4, &x, &u).unwrap();
        let power = ahat_k.clone().pow(3);
        let xi = stack(&x, &u);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = Matrix::from_fn(2, 3, |i, j| ds[(i, j)] * rng.random_range(-1.0..=1.0));
            assert!(z.contains(&(&power * (d * &xi)), 1e-9).unwrap());
        }
    }

    #[test]
    fn enlarge_rejects_bad_shapes() {
        let one = Vector::from_element(1, 1.0);
        assert!(enlarge_terminal_set(&Zonotope::origin(2), &m1(0.5), &Matrix::zeros(1, 2), 2, &one, &one).is_err());
        assert!(enlarge_terminal_set(&Zonotope::origin(1), &m1(0.5), &Matrix::zeros(1, 2), 0, &one, &one).is_err());
    }

    #[test]
    fn candidate_zero_delta_is_shift() {
        let v = |x: f64| Vector::from_element(1, x);
        let prev = OcpSolution {
            horizon: 3,
            v_seq: vec![v(-1.0), v(-1.0), v(-0.5)],
            z_seq: vec![v(2.5), v(1.5), v(0.5), v(0.0)],
            beta: vec![],
        };
        let (vh, zh) = candidate_solution(&prev, &v(0.0), &m1(-0.5), &m1(0.5));
        assert_eq!(vh, prev.v_seq[1..].to_vec());
        assert_eq!(zh, prev.z_seq[1..].to_vec());

        let (vh, zh) = candidate_solution(&prev, &v(0.2), &m1(-0.5), &m1(0.5));
        let close = |a: &Vector, b: f64| (a[0] - b).abs() < 1e-15;
        assert!(close(&zh[0], 1.7) && close(&zh[1], 0.6) && close(&zh[2], 0.05));
        assert!(close(&vh[0], -1.1) && close(&vh[1], -0.55));
    }

    #[test]
    fn nominal_run_shrinks_by_one() {
        let sc = scalar(1.0, 0.0, 0.0, -0.5, 30);
        let model = sc.ocp_model().unwrap();
        let x0 = Vector::from_element(1, 7.3);
        let RunOutcome::Completed(log) =
            run_closed_loop(&model, &Plant::nominal(&sc), &x0, 0, RunOptions::default()).unwrap()
        else {
            panic!("x0 is inside the region of attraction");
        };
        assert_eq!(log.n0(), 8);
        assert_eq!(log.t_c, 8);
        for (k, n) in log.n_star_hist.iter().enumerate() {
            assert_eq!(*n, 8 - k);
        }
        assert!(log.terminal_generators_hist.iter().all(|g| *g == 0));
        assert!(log.final_state()[0].abs() < 1e-9);
        let t = final_set(&log, model.bounds.ahat_k(), model.bounds.delta_s()).unwrap();
        assert!(t.is_singleton());
    }

    #[test]
    fn origin_converges_in_one_step() {
        let sc = scalar(1.0, 0.05, 0.05, -0.5, 10);
        let model = sc.ocp_model().unwrap();
        let plant = sample_plant(&sc, 1, SampleMode::Uniform);
        let RunOutcome::Completed(log) =
            run_closed_loop(&model, &plant, &Vector::zeros(1), 1, RunOptions::default()).unwrap()
        else {
            panic!("origin is feasible");
        };
        assert_eq!(log.t_c, 1);
        assert_eq!(log.final_state()[0], 0.0);
    }

    #[test]
    fn outside_state_set_is_out_of_roa() {
        let sc = scalar(1.0, 0.05, 0.05, -0.5, 10);
        let model = sc.ocp_model().unwrap();
        let out = run_closed_loop(
            &model,
            &Plant::nominal(&sc),
            &Vector::from_element(1, 25.0),
            0,
            RunOptions::default(),
        )
        .unwrap();
        assert_eq!(out, RunOutcome::OutOfRoa);
    }

    #[test]
    fn single_step_tail_is_one_increment() {
        let sc = scalar(1.0, 0.05, 0.05, -0.5, 10);
        let model = sc.ocp_model().unwrap();
        let v = |x: f64| Vector::from_element(1, x);
        let log = RunLog {
            seed: 0,
            plant_a: m1(1.0),
            plant_b: m1(1.0),
            x_hist: vec![v(3.0), v(2.0), v(0.01)],
            u_hist: vec![v(-1.0), v(-1.0)],
            n_star_hist: vec![3, 1],
            branch_hist: vec![Branch::Initial, Branch::Reset],
            terminal_generators_hist: vec![0, 0],
            delta_hist: vec![v(0.0), v(0.01)],
            solve_ms_hist: vec![0.0, 0.0],
            candidate_residual_hist: vec![],
            t_l: 1,
            t_c: 2,
        };
        let ahat_k = model.bounds.ahat_k();
        let ds = model.bounds.delta_s();
        let t = final_set(&log, ahat_k, ds).unwrap();
        let inc = enlarge_terminal_set(&Zonotope::origin(1), ahat_k, ds, 1, &v(2.0), &v(-1.0)).unwrap();
        assert_eq!(t, inc);
    }

    #[test]
    fn step_after_convergence_is_rejected() {
        let sc = scalar(1.0, 0.0, 0.0, -0.5, 10);
        let model = sc.ocp_model().unwrap();
        let (_, state) = controller_init(&model, &Vector::from_element(1, 0.5)).unwrap().unwrap();
        assert_eq!(state.n_prev, 1);
        assert!(controller_step(&model, &state, &Vector::zeros(1)).is_err());
    }
}
