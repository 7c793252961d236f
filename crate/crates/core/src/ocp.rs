//! Tightened time-optimal problem `ℙ_k(x, 𝒵_f)`.
//!
//! For a fixed horizon `N` the problem is a linear program in the nominal
//! states `z(1..N)`, inputs `v(0..N-1)` and terminal coefficients `β`. The
//! state rows at prediction step `j` are
//!
//! ```text
//! H z(j) + |H| Σ_{i<j} Δ_I(j-i-1) |ξ(i)| ≤ b,      ξ(i) = [z(i); v(i)]
//! ```
//!
//! and the input rows use `|H_u K|` in place of `|H|`. The absolute values
//! enter with nonnegative weights, so each `ξ` coordinate that needs one is
//! written as `p - q` with `p, q ≥ 0` and `p + q` standing in for `|ξ|`.
//! The minimum horizon is then found by scanning `N`.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundsTable;
use crate::error::{dim_err, Error, Result};
use crate::lp::{lp_solve, LpProblem, LpStatus, RowKind};
use crate::nested;
use crate::setalg::{Matrix, Polytope, Vector, Zonotope};

pub use crate::lp::{LpResult, LpRow};

/// Slack allowed by [`verify_solution`].
pub const VERIFY_TOL: f64 = 1e-7;

/// Time-indexed polytopes; the last entry repeats forever.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSchedule {
    polys: Vec<Polytope>,
}

impl ConstraintSchedule {
    pub fn constant(p: Polytope) -> Self {
        ConstraintSchedule { polys: vec![p] }
    }

    pub fn new(polys: Vec<Polytope>) -> Result<Self> {
        let Some(first) = polys.first() else {
            return Err(Error::InvalidArgument("empty constraint schedule".into()));
        };
        if let Some(p) = polys.iter().find(|p| p.dim() != first.dim()) {
            return Err(dim_err("ConstraintSchedule::new", first.dim(), p.dim()));
        }
        Ok(ConstraintSchedule { polys })
    }

    pub fn at(&self, k: usize) -> &Polytope {
        &self.polys[k.min(self.polys.len() - 1)]
    }

    pub fn dim(&self) -> usize {
        self.polys[0].dim()
    }

    pub fn is_constant(&self) -> bool {
        self.polys.len() == 1
    }

    /// Whether every polytope from time `k` onward contains the origin.
    pub fn contains_origin_from(&self, k: usize) -> bool {
        let origin = Vector::zeros(self.dim());
        self.polys[k.min(self.polys.len() - 1)..]
            .iter()
            .all(|p| p.contains(&origin, 0.0))
    }
}

/// Additive error tube: `𝓑(j) = box(r(j))`, `r(j) = Σ_{i<j} |Â_K^i| w`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveTube {
    w: Vector,
    radii: Vec<Vector>,
}

impl AdditiveTube {
    pub fn new(table: &BoundsTable, w: Vector) -> Result<Self> {
        if w.len() != table.state_dim() {
            return Err(dim_err("AdditiveTube::new", table.state_dim(), w.len()));
        }
        let mut radii = Vec::with_capacity(table.n_max());
        let mut acc = Vector::zeros(w.len());
        for j in 0..table.n_max() {
            radii.push(acc.clone());
            acc += table.power(j).abs() * &w;
        }
        Ok(AdditiveTube { w, radii })
    }

    pub fn w(&self) -> &Vector {
        &self.w
    }

    /// `r(j)`; `r(0) = 0`.
    pub fn radius(&self, j: usize) -> &Vector {
        &self.radii[j]
    }
}

/// Error tube used to tighten the constraints.
#[derive(Clone, Debug)]
pub enum Tube {
    /// State-dependent tube from the bounds table.
    Multiplicative,
    /// Constant tube from a fixed disturbance box.
    Additive(AdditiveTube),
}

/// Optional objective on top of the horizon.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Objective {
    /// Zero objective: any feasible trajectory.
    #[default]
    Feasibility,
    /// Minimize `Σ_j ‖ξ(j)‖₁`, which picks a reproducible trajectory among
    /// the feasible ones.
    AbsSum,
}

/// Data shared by every problem instance of one controller.
#[derive(Clone, Debug)]
pub struct OcpModel {
    pub a_hat: Matrix,
    pub b_hat: Matrix,
    pub k_gain: Matrix,
    pub bounds: BoundsTable,
    pub tube: Tube,
    pub state: ConstraintSchedule,
    pub input: ConstraintSchedule,
    pub n_max: usize,
    pub objective: Objective,
}

impl OcpModel {
    pub fn new(
        a_hat: Matrix,
        b_hat: Matrix,
        k_gain: Matrix,
        bounds: BoundsTable,
        state: ConstraintSchedule,
        input: ConstraintSchedule,
        n_max: usize,
    ) -> Result<Self> {
        let n = a_hat.nrows();
        let m = b_hat.ncols();
        if a_hat.shape() != (n, n) || b_hat.nrows() != n || k_gain.shape() != (m, n) {
            return Err(dim_err(
                "OcpModel::new",
                format!("A {n}x{n}, B {n}x{m}, K {m}x{n}"),
                format!("{:?}, {:?}, {:?}", a_hat.shape(), b_hat.shape(), k_gain.shape()),
            ));
        }
        if bounds.state_dim() != n || bounds.input_dim() != m {
            return Err(dim_err(
                "OcpModel::new",
                format!("bounds table for n={n}, m={m}"),
                format!("n={}, m={}", bounds.state_dim(), bounds.input_dim()),
            ));
        }
        if state.dim() != n {
            return Err(dim_err("OcpModel::new state polytope", n, state.dim()));
        }
        if input.dim() != m {
            return Err(dim_err("OcpModel::new input polytope", m, input.dim()));
        }
        if n_max == 0 || n_max > bounds.n_max() {
            return Err(Error::InvalidArgument(format!(
                "n_max {n_max} must be in 1..={}",
                bounds.n_max()
            )));
        }
        Ok(OcpModel {
            a_hat,
            b_hat,
            k_gain,
            bounds,
            tube: Tube::Multiplicative,
            state,
            input,
            n_max,
            objective: Objective::Feasibility,
        })
    }

    pub fn with_tube(mut self, tube: Tube) -> Self {
        self.tube = tube;
        self
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_hat.ncols()
    }

    /// Problem instance at time `k` from state `x0`.
    pub fn spec(&self, x0: Vector, terminal_set: Zonotope, time_offset: usize) -> Result<OcpSpec<'_>> {
        if x0.len() != self.state_dim() {
            return Err(dim_err("OcpSpec x0", self.state_dim(), x0.len()));
        }
        if terminal_set.dim() != self.state_dim() {
            return Err(dim_err("OcpSpec terminal set", self.state_dim(), terminal_set.dim()));
        }
        Ok(OcpSpec {
            model: self,
            x0,
            terminal_set,
            time_offset,
        })
    }
}

/// One instance `ℙ_k(x0, 𝒵_f)`.
#[derive(Clone, Debug)]
pub struct OcpSpec<'a> {
    pub model: &'a OcpModel,
    pub x0: Vector,
    pub terminal_set: Zonotope,
    pub time_offset: usize,
}

/// Optimal nominal trajectory for one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcpSolution {
    pub horizon: usize,
    /// `v(0) … v(N-1)`.
    #[serde(with = "nested::vector_list")]
    pub v_seq: Vec<Vector>,
    /// `z(0) … z(N)`, with `z(0) = x0`.
    #[serde(with = "nested::vector_list")]
    pub z_seq: Vec<Vector>,
    /// Terminal coefficients, one per generator of the terminal set.
    pub beta: Vec<f64>,
}

impl OcpSolution {
    /// `[z(j); v(j)]`.
    pub fn xi(&self, j: usize) -> Vector {
        stack(&self.z_seq[j], &self.v_seq[j])
    }
}

pub(crate) fn stack(z: &Vector, v: &Vector) -> Vector {
    let mut xi = Vector::zeros(z.len() + v.len());
    xi.rows_mut(0, z.len()).copy_from(z);
    xi.rows_mut(z.len(), v.len()).copy_from(v);
    xi
}

/// A scalar quantity of the trajectory as seen by the LP.
#[derive(Clone, Copy, Debug)]
enum Quantity {
    Fixed(f64),
    Free(usize),
    /// `p - q`, with `p + q ≥ |value|`.
    Split(usize, usize),
}

#[derive(Default)]
struct Expr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Expr {
    fn value(&mut self, q: Quantity, c: f64) {
        if c == 0.0 {
            return;
        }
        match q {
            Quantity::Fixed(v) => self.constant += c * v,
            Quantity::Free(i) => self.terms.push((i, c)),
            Quantity::Split(p, n) => {
                self.terms.push((p, c));
                self.terms.push((n, -c));
            }
        }
    }

    fn abs(&mut self, q: Quantity, c: f64) {
        if c == 0.0 {
            return;
        }
        match q {
            Quantity::Fixed(v) => self.constant += c * v.abs(),
            Quantity::Split(p, n) => {
                self.terms.push((p, c));
                self.terms.push((n, c));
            }
            Quantity::Free(_) => unreachable!("absolute value of an unsplit variable"),
        }
    }

    fn push(self, p: &mut LpProblem, kind: RowKind, rhs: f64) {
        p.add_row(self.terms, kind, rhs - self.constant);
    }
}

struct Layout {
    z: Vec<Vec<Quantity>>,
    v: Vec<Vec<Quantity>>,
    beta: std::ops::Range<usize>,
}

/// Tightening weights for the rows of `poly` at step `j`: entry `i` holds
/// `M Δ_I(j-i-1)` for `i < j`, where `M = |H|` (state) or `|H K|` (input).
fn multiplicative_weights(bounds: &BoundsTable, map: &Matrix, j: usize) -> Vec<Matrix> {
    (0..j).map(|i| map * bounds.radius(j - i - 1)).collect()
}

/// How a polytope's rows are tightened.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Which {
    State,
    Input,
}

impl<'a> OcpSpec<'a> {
    fn n(&self) -> usize {
        self.model.state_dim()
    }

    fn m(&self) -> usize {
        self.model.input_dim()
    }

    fn polytope(&self, which: Which, j: usize) -> &'a Polytope {
        match which {
            Which::State => self.model.state.at(self.time_offset + j),
            Which::Input => self.model.input.at(self.time_offset + j),
        }
    }

    /// `|H|` or `|H_u K|`.
    fn tube_map(&self, which: Which, poly: &Polytope) -> Matrix {
        match which {
            Which::State => poly.h().abs(),
            Which::Input => (poly.h() * &self.model.k_gain).abs(),
        }
    }

    /// Columns of `Δ_S` that are not identically zero.
    fn uncertain_coords(&self) -> Vec<bool> {
        let ds = self.model.bounds.delta_s();
        (0..ds.ncols())
            .map(|c| ds.column(c).iter().any(|v| *v != 0.0))
            .collect()
    }

    fn layout(&self, p: &mut LpProblem, horizon: usize, tightened: bool) -> Layout {
        let (n, m) = (self.n(), self.m());
        let abs_sum = self.model.objective == Objective::AbsSum;
        let needs_abs = match (&self.model.tube, tightened) {
            (Tube::Multiplicative, true) => self.uncertain_coords(),
            _ => vec![false; n + m],
        };
        // ξ(j) enters the tube only for j ≤ N-2.
        let quantity = |p: &mut LpProblem, coord: usize, j: usize| {
            if abs_sum || (needs_abs[coord] && j + 2 <= horizon) {
                let pos = p.add_var(0.0, f64::INFINITY);
                let neg = p.add_var(0.0, f64::INFINITY);
                if abs_sum {
                    p.set_cost(pos, 1.0);
                    p.set_cost(neg, 1.0);
                }
                Quantity::Split(pos, neg)
            } else {
                Quantity::Free(p.add_var(f64::NEG_INFINITY, f64::INFINITY))
            }
        };
        let mut z = vec![self.x0.iter().map(|v| Quantity::Fixed(*v)).collect::<Vec<_>>()];
        let mut v = Vec::with_capacity(horizon);
        for j in 0..horizon {
            v.push((0..m).map(|c| quantity(p, n + c, j)).collect());
            if j + 1 < horizon {
                z.push((0..n).map(|c| quantity(p, c, j + 1)).collect());
            }
        }
        let ts = &self.terminal_set;
        if ts.is_singleton() {
            z.push(ts.center().iter().map(|c| Quantity::Fixed(*c)).collect());
        } else {
            z.push(
                (0..n)
                    .map(|_| Quantity::Free(p.add_var(f64::NEG_INFINITY, f64::INFINITY)))
                    .collect(),
            );
        }
        let beta = p.add_vars(ts.num_generators(), -1.0, 1.0);
        Layout { z, v, beta }
    }

    fn push_constraint_rows(&self, p: &mut LpProblem, lay: &Layout, which: Which, j: usize, tightened: bool) {
        let poly = self.polytope(which, j);
        let (n, m) = (self.n(), self.m());
        let own = match which {
            Which::State => &lay.z[j],
            Which::Input => &lay.v[j],
        };
        let mut offset = Vector::zeros(poly.num_rows());
        let mut weights = Vec::new();
        if tightened && j > 0 {
            let map = self.tube_map(which, poly);
            match &self.model.tube {
                Tube::Multiplicative => weights = multiplicative_weights(&self.model.bounds, &map, j),
                Tube::Additive(t) => offset = &map * t.radius(j),
            }
        }
        for r in 0..poly.num_rows() {
            let mut e = Expr::default();
            for (c, q) in own.iter().enumerate() {
                e.value(*q, poly.h()[(r, c)]);
            }
            for (i, w) in weights.iter().enumerate() {
                for c in 0..n {
                    e.abs(lay.z[i][c], w[(r, c)]);
                }
                for c in 0..m {
                    e.abs(lay.v[i][c], w[(r, n + c)]);
                }
            }
            e.constant += offset[r];
            e.push(p, RowKind::Le, poly.b()[r]);
        }
    }

    /// Assembles the LP for horizon `N`. Returns `None` when the problem is
    /// trivially infeasible because `x0` itself violates the step-0 state
    /// constraints.
    fn build(&self, horizon: usize, tightened: bool) -> Option<(LpProblem, Layout)> {
        if !self.polytope(Which::State, 0).contains(&self.x0, 0.0) {
            return None;
        }
        let (n, m) = (self.n(), self.m());
        let mut p = LpProblem::new();
        let lay = self.layout(&mut p, horizon, tightened);
        let (a, b) = (&self.model.a_hat, &self.model.b_hat);
        for j in 0..horizon {
            for r in 0..n {
                let mut e = Expr::default();
                e.value(lay.z[j + 1][r], 1.0);
                for c in 0..n {
                    e.value(lay.z[j][c], -a[(r, c)]);
                }
                for c in 0..m {
                    e.value(lay.v[j][c], -b[(r, c)]);
                }
                if e.terms.is_empty() {
                    // Only reachable when everything is fixed, i.e. never
                    // with at least one input.
                    if e.constant.abs() > 1e-12 {
                        return None;
                    }
                    continue;
                }
                e.push(&mut p, RowKind::Eq, 0.0);
            }
        }
        for j in 0..horizon {
            if j > 0 {
                self.push_constraint_rows(&mut p, &lay, Which::State, j, tightened);
            }
            self.push_constraint_rows(&mut p, &lay, Which::Input, j, tightened);
        }
        let ts = &self.terminal_set;
        if !ts.is_singleton() {
            for r in 0..n {
                let mut e = Expr::default();
                e.value(lay.z[horizon][r], 1.0);
                for (g, bvar) in ts.generators().iter().zip(lay.beta.clone()) {
                    e.value(Quantity::Free(bvar), -g[r]);
                }
                e.push(&mut p, RowKind::Eq, ts.center()[r]);
            }
        }
        Some((p, lay))
    }

    fn extract(&self, horizon: usize, lay: &Layout, x: &[f64]) -> OcpSolution {
        let value = |q: &Quantity| match *q {
            Quantity::Fixed(v) => v,
            Quantity::Free(i) => x[i],
            Quantity::Split(p, n) => x[p] - x[n],
        };
        let to_vec = |qs: &Vec<Quantity>| Vector::from_iterator(qs.len(), qs.iter().map(value));
        OcpSolution {
            horizon,
            v_seq: lay.v.iter().map(to_vec).collect(),
            z_seq: lay.z.iter().map(to_vec).collect(),
            beta: lay.beta.clone().map(|i| x[i]).collect(),
        }
    }

    fn solve_horizon(&self, horizon: usize, tightened: bool) -> Result<Option<OcpSolution>> {
        if horizon == 0 || horizon > self.model.n_max {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} outside 1..={}",
                self.model.n_max
            )));
        }
        let Some((p, lay)) = self.build(horizon, tightened) else {
            return Ok(None);
        };
        let r = lp_solve(&p);
        match r.status {
            LpStatus::Optimal => Ok(Some(self.extract(horizon, &lay, &r.x))),
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::Unbounded(format!(
                "horizon-{horizon} problem has an unbounded objective"
            ))),
            LpStatus::NumericFailure => Err(Error::NumericFailure(format!(
                "LP solver failed at horizon {horizon} after {} iterations",
                r.iterations
            ))),
        }
    }

    /// LP for horizon `N` (exposed for diagnostics and benchmarks).
    pub fn lp_for_horizon(&self, horizon: usize) -> Option<LpProblem> {
        self.build(horizon, true).map(|(p, _)| p)
    }
}

/// Solves the tightened problem for a fixed horizon. `Ok(None)` means
/// infeasible.
pub fn solve_fixed_horizon(spec: &OcpSpec<'_>, horizon: usize) -> Result<Option<OcpSolution>> {
    spec.solve_horizon(horizon, true)
}

/// Same constraints without any tube.
pub fn solve_nominal(spec: &OcpSpec<'_>, horizon: usize) -> Result<Option<OcpSolution>> {
    spec.solve_horizon(horizon, false)
}

/// Smallest feasible horizon at or above `lower_bound`, by ascending scan.
/// Numeric failures at a single horizon are logged and treated as
/// infeasible there.
pub fn solve_min_time(spec: &OcpSpec<'_>, lower_bound: usize) -> Result<Option<OcpSolution>> {
    for horizon in lower_bound.max(1)..=spec.model.n_max {
        match solve_fixed_horizon(spec, horizon) {
            Ok(Some(sol)) => return Ok(Some(sol)),
            Ok(None) => {}
            Err(Error::NumericFailure(msg)) => log::warn!("treating horizon {horizon} as infeasible: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Lower bound on the optimal horizon from the untightened problem.
///
/// With terminal set `{0}` and the origin admissible at all future times the
/// untightened problem stays feasible once it is feasible (rest at the
/// origin), so its minimum horizon is found by doubling and bisection. The
/// tightened problem can only be harder. `Ok(None)` means even the
/// untightened problem is infeasible up to `n_max`, so the tightened one is
/// too. Without the monotonicity conditions the bound is 1.
pub fn nominal_lower_bound(spec: &OcpSpec<'_>) -> Result<Option<usize>> {
    let model = spec.model;
    let origin_ok = spec.terminal_set.is_singleton()
        && spec.terminal_set.center().iter().all(|c| *c == 0.0)
        && model.state.contains_origin_from(spec.time_offset)
        && model.input.contains_origin_from(spec.time_offset);
    if !origin_ok {
        return Ok(Some(1));
    }
    let feasible = |h: usize| -> Result<bool> {
        match solve_nominal(spec, h) {
            Ok(s) => Ok(s.is_some()),
            Err(Error::NumericFailure(msg)) => {
                log::warn!("nominal bound probe at {h} failed: {msg}");
                Err(Error::NumericFailure(msg))
            }
            Err(e) => Err(e),
        }
    };
    let n_max = model.n_max;
    let mut lo = 0; // known infeasible (or zero)
    let mut hi = 1;
    loop {
        match feasible(hi) {
            Ok(true) => break,
            Ok(false) => {}
            Err(_) => return Ok(Some(lo + 1)),
        }
        if hi == n_max {
            return Ok(None);
        }
        lo = hi;
        hi = (hi * 2).min(n_max);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match feasible(mid) {
            Ok(true) => hi = mid,
            Ok(false) => lo = mid,
            Err(_) => return Ok(Some(lo + 1)),
        }
    }
    Ok(Some(hi))
}

/// Minimum-time solve starting from the untightened lower bound.
pub fn solve_min_time_auto(spec: &OcpSpec<'_>) -> Result<Option<OcpSolution>> {
    if !spec.model.state.at(spec.time_offset).contains(&spec.x0, 0.0) {
        return Ok(None);
    }
    match nominal_lower_bound(spec)? {
        Some(lb) => solve_min_time(spec, lb),
        None => Ok(None),
    }
}

/// Per-constraint-family residuals from [`verify_solution`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Verification {
    pub initial: f64,
    pub dynamics: f64,
    pub state: f64,
    pub input: f64,
    pub terminal: f64,
}

impl Verification {
    pub fn max(&self) -> f64 {
        [self.initial, self.dynamics, self.state, self.input, self.terminal]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Checks a trajectory against every constraint of `spec` by direct
/// evaluation with exact `|ξ|`, independent of the LP encoding. When `beta`
/// is `None` terminal membership is decided by an LP and reported as 0 (in)
/// or infinity (out).
pub fn verify_solution(
    spec: &OcpSpec<'_>,
    v_seq: &[Vector],
    z_seq: &[Vector],
    beta: Option<&[f64]>,
) -> Result<Verification> {
    let model = spec.model;
    let horizon = v_seq.len();
    if horizon == 0 || z_seq.len() != horizon + 1 {
        return Err(Error::InvalidArgument(format!(
            "trajectory lengths {} inputs / {} states are inconsistent",
            v_seq.len(),
            z_seq.len()
        )));
    }
    if horizon > model.n_max {
        return Err(Error::InvalidArgument(format!("horizon {horizon} exceeds n_max")));
    }
    let mut out = Verification {
        initial: (&z_seq[0] - &spec.x0).amax(),
        ..Verification::default()
    };
    for j in 0..horizon {
        let next = &model.a_hat * &z_seq[j] + &model.b_hat * &v_seq[j];
        out.dynamics = out.dynamics.max((&z_seq[j + 1] - next).amax());
    }
    let xi_abs: Vec<Vector> = (0..horizon).map(|j| stack(&z_seq[j], &v_seq[j]).abs()).collect();
    for j in 0..horizon {
        let err_box = match &model.tube {
            Tube::Multiplicative => (0..j).fold(Vector::zeros(spec.n()), |acc, i| {
                acc + model.bounds.radius(j - i - 1) * &xi_abs[i]
            }),
            Tube::Additive(t) => t.radius(j).clone(),
        };
        let xs = spec.polytope(Which::State, j);
        let slack = xs.h() * &z_seq[j] + xs.h().abs() * &err_box - xs.b();
        out.state = out.state.max(slack.max().max(0.0));
        let us = spec.polytope(Which::Input, j);
        let slack = us.h() * &v_seq[j] + spec.tube_map(Which::Input, us) * &err_box - us.b();
        out.input = out.input.max(slack.max().max(0.0));
    }
    let ts = &spec.terminal_set;
    let end = &z_seq[horizon];
    out.terminal = match beta {
        Some(beta) if beta.len() == ts.num_generators() => {
            let over = beta.iter().fold(0.0f64, |a, b| a.max(b.abs() - 1.0));
            (end - ts.point(beta)).amax().max(over)
        }
        Some(_) => f64::INFINITY,
        None => {
            if ts.contains(end, VERIFY_TOL * 0.1)? {
                0.0
            } else {
                f64::INFINITY
            }
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{bound_radii_recursive, closed_loop_interval, stack_delta_s};

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, v)
    }

    /// Scalar integrator `x⁺ = a x + b u`, `|x| ≤ xmax`, `|u| ≤ umax`.
    fn scalar_model(a: f64, b: f64, da: f64, db: f64, xmax: f64, umax: f64, k: f64, n_max: usize) -> OcpModel {
        let (a, b, da, db, kk) = (
            m(1, 1, &[a]),
            m(1, 1, &[b]),
            m(1, 1, &[da]),
            m(1, 1, &[db]),
            m(1, 1, &[k]),
        );
        let cl = closed_loop_interval(&a, &b, &da, &db, &kk).unwrap();
        let ds = stack_delta_s(&da, &db).unwrap();
        let table = bound_radii_recursive(&cl.ahat_k, &cl.delta_k, &ds, n_max).unwrap();
        let xs = Polytope::symmetric_box(1, xmax).unwrap();
        let us = Polytope::symmetric_box(1, umax).unwrap();
        OcpModel::new(
            a,
            b,
            kk,
            table,
            ConstraintSchedule::constant(xs),
            ConstraintSchedule::constant(us),
            n_max,
        )
        .unwrap()
    }

    fn x(v: f64) -> Vector {
        Vector::from_vec(vec![v])
    }

    #[test]
    fn origin_is_feasible_at_horizon_one() {
        let model = scalar_model(1.0, 1.0, 0.0, 0.0, 10.0, 1.0, 0.0, 10);
        let spec = model.spec(x(0.0), Zonotope::origin(1), 0).unwrap();
        let sol = solve_fixed_horizon(&spec, 1).unwrap().unwrap();
        assert_eq!(sol.v_seq[0][0], 0.0);
        assert_eq!(solve_min_time_auto(&spec).unwrap().unwrap().horizon, 1);
    }

    #[test]
    fn scalar_bang_control() {
        let model = scalar_model(1.0, 1.0, 0.0, 0.0, 10.0, 1.0, 0.0, 10);
        let spec = model.spec(x(3.0), Zonotope::origin(1), 0).unwrap();
        assert!(solve_fixed_horizon(&spec, 2).unwrap().is_none());
        let sol = solve_fixed_horizon(&spec, 3).unwrap().unwrap();
        for v in &sol.v_seq {
            assert!((v[0] + 1.0).abs() < 1e-9);
        }
        assert_eq!(solve_min_time(&spec, 1).unwrap().unwrap().horizon, 3);
        assert_eq!(nominal_lower_bound(&spec).unwrap(), Some(3));
        let check = verify_solution(&spec, &sol.v_seq, &sol.z_seq, Some(&sol.beta)).unwrap();
        assert!(check.passes(VERIFY_TOL));
    }

    #[test]
    fn outside_state_set_is_infeasible_everywhere() {
        let model = scalar_model(1.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 10);
        let spec = model.spec(x(3.0), Zonotope::origin(1), 0).unwrap();
        assert!(solve_min_time(&spec, 1).unwrap().is_none());
        assert!(solve_min_time_auto(&spec).unwrap().is_none());
    }

    #[test]
    fn tightened_row_by_hand() {
        // Δ_I(0) = [0.1, 0.2]; row at j=1 is z(1) + 0.1 |z(0)| + 0.2 |v(0)| ≤ 1.
        let model = scalar_model(1.0, 1.0, 0.1, 0.2, 1.0, 1.0, 0.0, 5);
        assert_eq!(model.bounds.radius(0), &m(1, 2, &[0.1, 0.2]));
        let spec = model.spec(x(0.5), Zonotope::origin(1), 0).unwrap();
        let good = verify_solution(&spec, &[x(0.2), x(-0.7)], &[x(0.5), x(0.7), x(0.0)], Some(&[])).unwrap();
        // 0.7 + 0.05 + 0.04 ≤ 1.
        assert!(good.passes(1e-12));
        let bad = verify_solution(&spec, &[x(0.45), x(-0.95)], &[x(0.5), x(0.95), x(0.0)], Some(&[])).unwrap();
        // 0.95 + 0.05 + 0.09 = 1.09; input row at j=1 has zero tube with K=0.
        assert!((bad.state - 0.09).abs() < 1e-12);
        assert_eq!(bad.input, 0.0);
    }

    #[test]
    fn terminal_zonotope_relaxes_the_endpoint() {
        let model = scalar_model(1.0, 1.0, 0.0, 0.0, 10.0, 1.0, 0.0, 10);
        let zf = Zonotope::new(Vector::zeros(1), vec![x(1.0)]).unwrap();
        let spec = model.spec(x(3.0), zf, 0).unwrap();
        let sol = solve_min_time(&spec, 1).unwrap().unwrap();
        assert_eq!(sol.horizon, 2);
        assert!(sol.z_seq[2][0].abs() <= 1.0 + 1e-9);
        let check = verify_solution(&spec, &sol.v_seq, &sol.z_seq, None).unwrap();
        assert!(check.passes(VERIFY_TOL));
        // Without β the verifier falls back to LP membership.
        let out = verify_solution(&spec, &[x(-1.0)], &[x(3.0), x(2.0)], None).unwrap();
        assert!(out.terminal.is_infinite());
    }

    #[test]
    fn tightening_increases_the_horizon() {
        let loose = scalar_model(1.0, 1.0, 0.0, 0.0, 10.0, 1.0, -0.5, 30);
        let tight = scalar_model(1.0, 1.0, 0.02, 0.05, 10.0, 1.0, -0.5, 30);
        let s0 = loose.spec(x(5.0), Zonotope::origin(1), 0).unwrap();
        let s1 = tight.spec(x(5.0), Zonotope::origin(1), 0).unwrap();
        let n0 = solve_min_time_auto(&s0).unwrap().unwrap();
        let n1 = solve_min_time_auto(&s1).unwrap().unwrap();
        assert_eq!(n0.horizon, 5);
        assert!(n1.horizon >= n0.horizon);
        let check = verify_solution(&s1, &n1.v_seq, &n1.z_seq, Some(&n1.beta)).unwrap();
        assert!(check.passes(VERIFY_TOL), "{check:?}");
    }

    #[test]
    fn abs_sum_objective_gives_a_verified_solution() {
        let model = scalar_model(1.0, 1.0, 0.02, 0.05, 10.0, 1.0, -0.5, 30).with_objective(Objective::AbsSum);
        let spec = model.spec(x(4.0), Zonotope::origin(1), 0).unwrap();
        let sol = solve_min_time_auto(&spec).unwrap().unwrap();
        let check = verify_solution(&spec, &sol.v_seq, &sol.z_seq, Some(&sol.beta)).unwrap();
        assert!(check.passes(VERIFY_TOL), "{check:?}");
    }

    #[test]
    fn additive_tube_rows() {
        let base = scalar_model(1.0, 1.0, 0.0, 0.0, 10.0, 1.0, -0.5, 30);
        let tube = AdditiveTube::new(&base.bounds, x(0.1)).unwrap();
        assert_eq!(tube.radius(0), &x(0.0));
        // |Â_K| = 0.5: r(2) = 0.1 + 0.05.
        assert!((tube.radius(2)[0] - 0.15).abs() < 1e-15);
        let model = base.with_tube(Tube::Additive(tube));
        let spec = model.spec(x(4.0), Zonotope::origin(1), 0).unwrap();
        let sol = solve_min_time_auto(&spec).unwrap().unwrap();
        let check = verify_solution(&spec, &sol.v_seq, &sol.z_seq, Some(&sol.beta)).unwrap();
        assert!(check.passes(VERIFY_TOL));
        // Input rows are tightened by |K| r(j); r(1) = 0.1.
        assert!(sol.horizon > 1);
        assert!(sol.v_seq[1][0].abs() <= 0.95 + 1e-9);
    }

    #[test]
    fn model_validation() {
        let model = scalar_model(1.0, 1.0, 0.0, 0.0, 10.0, 1.0, 0.0, 10);
        assert!(model.spec(Vector::zeros(2), Zonotope::origin(1), 0).is_err());
        assert!(model.spec(x(0.0), Zonotope::origin(2), 0).is_err());
        let spec = model.spec(x(0.0), Zonotope::origin(1), 0).unwrap();
        assert!(solve_fixed_horizon(&spec, 11).is_err());
        assert!(solve_fixed_horizon(&spec, 0).is_err());
    }
}
