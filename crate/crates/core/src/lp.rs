//! Linear programming backend.
//!
//! A bounded-variable revised simplex method with an explicit dense basis
//! inverse. Structural columns are stored sparsely and every row gets a
//! slack column. The starting basis may violate bounds; phase 1 minimizes
//! the sum of those violations, phase 2 the user objective.
//!
//! Adequate for the problem sizes met here (a few thousand variables, rows in
//! the low thousands). There is no shared solver state, so independent
//! instances can be solved from different threads.

use std::ops::Range;

/// Sense of a linear constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `min cᵀx` subject to sparse rows and variable bounds (bounds may be infinite).
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<LpRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    /// Primal values; empty unless `status == Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        assert!(lower <= upper, "variable bounds out of order");
        self.objective.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_vars(&mut self, count: usize, lower: f64, upper: f64) -> Range<usize> {
        let start = self.num_vars();
        for _ in 0..count {
            self.add_var(lower, upper);
        }
        start..start + count
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars()));
        self.rows.push(LpRow { coeffs, kind, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LpRow] {
        &self.rows
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.kind {
                RowKind::Le => act - row.rhs,
                RowKind::Ge => row.rhs - act,
                RowKind::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Residual infeasibility, relative to the right-hand side scale, above which
/// the problem is declared infeasible.
const INFEAS_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_STREAK: usize = 40;

/// Solve `p`. Never panics on numerical trouble; reports `NumericFailure`.
pub fn lp_solve(p: &LpProblem) -> LpResult {
    let mut s = Simplex::new(p);
    s.run(p)
}

struct Simplex {
    m: usize,
    n: usize,
    // CSC storage of the structural part, row indices ascending per column.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    col_norm: Vec<f64>,
    rhs: Vec<f64>,
    // Bounds, values and costs of structural then slack columns.
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    basic_pos: Vec<usize>,
    // Column-major dense inverse of the basis matrix:
    // binv[k * m + i] = (B⁻¹)[i, k].
    binv: Vec<f64>,
    iterations: usize,
}

const NOT_BASIC: usize = usize::MAX;

enum Step {
    Optimal,
    Unbounded,
    Progress(f64),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Minimize the sum of bound violations of the basic variables.
    Feasibility,
    Optimality,
}

impl Simplex {
    fn new(p: &LpProblem) -> Self {
        let m = p.num_rows();
        let n = p.num_vars();
        let mut counts = vec![0usize; n + 1];
        for row in &p.rows {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    counts[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let nnz = col_ptr[n];
        let mut fill = counts;
        let mut row_idx = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    let pos = fill[j];
                    row_idx[pos] = i;
                    vals[pos] = a;
                    fill[j] += 1;
                }
            }
        }
        // Duplicate (row, col) entries are summed wherever columns are
        // scattered into dense storage, so they are harmless.
        let col_norm = (0..n)
            .map(|j| {
                let s: f64 = vals[col_ptr[j]..col_ptr[j + 1]].iter().map(|v| v * v).sum();
                s.sqrt().max(1e-12)
            })
            .collect();

        let total = n + m;
        let mut lo = vec![0.0; total];
        let mut up = vec![0.0; total];
        lo[..n].copy_from_slice(&p.lower);
        up[..n].copy_from_slice(&p.upper);
        for (i, row) in p.rows.iter().enumerate() {
            let (l, u) = match row.kind {
                RowKind::Le => (0.0, f64::INFINITY),
                RowKind::Ge => (f64::NEG_INFINITY, 0.0),
                RowKind::Eq => (0.0, 0.0),
            };
            lo[n + i] = l;
            up[n + i] = u;
        }
        let mut cost = vec![0.0; total];
        cost[..n].copy_from_slice(&p.objective);
        Simplex {
            m,
            n,
            col_ptr,
            row_idx,
            vals,
            col_norm,
            rhs: p.rows.iter().map(|r| r.rhs).collect(),
            lo,
            up,
            x: vec![0.0; total],
            cost,
            basis: vec![0; m],
            basic_pos: vec![NOT_BASIC; total],
            binv: vec![0.0; m * m],
            iterations: 0,
        }
    }

    fn total(&self) -> usize {
        self.n + self.m
    }

    /// Calls `f(row, value)` for each nonzero of column `j`.
    #[inline]
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                f(self.row_idx[k], self.vals[k]);
            }
        } else {
            f(j - self.n, 1.0);
        }
    }

    fn set_basis(&mut self, basis: Vec<usize>) {
        self.basic_pos.iter_mut().for_each(|p| *p = NOT_BASIC);
        for (i, &b) in basis.iter().enumerate() {
            self.basic_pos[b] = i;
        }
        self.basis = basis;
    }

    /// Starting point: nonbasic columns at a finite bound (or zero), slack
    /// basis except that equality rows take a structural column whose first
    /// nonzero sits in that row. Such a basis is lower triangular, hence
    /// nonsingular.
    fn initialize(&mut self) -> Result<(), ()> {
        let (n, m) = (self.n, self.m);
        for j in 0..self.total() {
            self.x[j] = if self.lo[j].is_finite() {
                self.lo[j]
            } else if self.up[j].is_finite() {
                self.up[j]
            } else {
                0.0
            };
        }
        let mut basis: Vec<usize> = (n..n + m).collect();
        let mut best = vec![0.0f64; m];
        for j in 0..n {
            let (start, end) = (self.col_ptr[j], self.col_ptr[j + 1]);
            if start == end || (self.lo[j].is_finite() && self.up[j].is_finite()) {
                continue;
            }
            let i = self.row_idx[start];
            let a = self.vals[start].abs();
            if self.lo[n + i] == self.up[n + i] && a > 1e-7 && a > best[i] {
                best[i] = a;
                basis[i] = j;
            }
        }
        self.set_basis(basis);
        if self.refactor().is_ok() {
            return Ok(());
        }
        for i in 0..m {
            self.x[n + i] = if self.lo[n + i].is_finite() {
                self.lo[n + i]
            } else {
                self.up[n + i].min(0.0)
            };
        }
        for j in 0..n {
            self.x[j] = if self.lo[j].is_finite() {
                self.lo[j]
            } else if self.up[j].is_finite() {
                self.up[j]
            } else {
                0.0
            };
        }
        self.set_basis((n..n + m).collect());
        self.refactor()
    }

    fn scale(&self) -> f64 {
        1.0 + max_abs(&self.rhs)
    }

    /// Largest row residual |b - A x - s| over the current point.
    fn residual(&self) -> f64 {
        let mut r = self.rhs.clone();
        for j in 0..self.total() {
            let xj = self.x[j];
            if xj != 0.0 {
                self.for_col(j, |i, v| r[i] -= v * xj);
            }
        }
        max_abs(&r)
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&b| (self.lo[b] - self.x[b]).max(self.x[b] - self.up[b]).max(0.0))
            .sum()
    }

    fn run(&mut self, p: &LpProblem) -> LpResult {
        let fail = |it| LpResult {
            status: LpStatus::NumericFailure,
            x: Vec::new(),
            objective: f64::NAN,
            iterations: it,
        };
        let done = |status, it| LpResult {
            status,
            x: Vec::new(),
            objective: if status == LpStatus::Unbounded {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            },
            iterations: it,
        };
        if self.initialize().is_err() {
            return fail(0);
        }
        match self.optimize(Phase::Feasibility) {
            Ok(_) => {}
            Err(()) => return fail(self.iterations),
        }
        if self.infeasibility() > INFEAS_TOL * self.scale() {
            return done(LpStatus::Infeasible, self.iterations);
        }
        let unbounded = match self.optimize(Phase::Optimality) {
            Ok(unb) => unb,
            Err(()) => return fail(self.iterations),
        };
        if unbounded {
            return done(LpStatus::Unbounded, self.iterations);
        }

        let n = self.n;
        let tol = 1e-7 * self.scale();
        let mut x = self.x[..n].to_vec();
        if p.max_violation(&x) > tol {
            if self.refactor().is_err() {
                return fail(self.iterations);
            }
            x = self.x[..n].to_vec();
            if p.max_violation(&x) > tol {
                return fail(self.iterations);
            }
        }
        let objective = x.iter().zip(&p.objective).map(|(a, c)| a * c).sum();
        LpResult {
            status: LpStatus::Optimal,
            x,
            objective,
            iterations: self.iterations,
        }
    }

    /// Runs simplex iterations for `phase`.
    /// Returns `Ok(true)` if unbounded, `Ok(false)` when no improving column
    /// remains.
    fn optimize(&mut self, phase: Phase) -> Result<bool, ()> {
        let limit = 50 * (self.total() + 10);
        let mut since_refactor = 0;
        let mut degenerate = 0;
        let mut rechecked = false;
        let mut y = vec![0.0; self.m];
        let mut alpha = vec![0.0; self.m];
        loop {
            if self.iterations > limit {
                return Err(());
            }
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            let bland = degenerate >= DEGENERATE_STREAK;
            match self.iterate(phase, &mut y, &mut alpha, bland)? {
                Step::Optimal => {
                    // Confirm on a fresh factorization unless the current
                    // point still satisfies the rows tightly.
                    if rechecked || since_refactor == 0 || self.residual() <= 1e-10 * self.scale() {
                        return Ok(false);
                    }
                    self.refactor()?;
                    since_refactor = 0;
                    rechecked = true;
                }
                Step::Unbounded => return Ok(true),
                Step::Progress(theta) => {
                    self.iterations += 1;
                    since_refactor += 1;
                    rechecked = false;
                    if theta > 1e-12 {
                        degenerate = 0;
                    } else {
                        degenerate += 1;
                    }
                }
            }
        }
    }

    /// Distance a basic variable at position `i` may travel at `rate` before
    /// it hits the bound it is moving toward, and that bound. Basic variables
    /// outside their bounds are allowed to move to the violated bound only.
    #[inline]
    fn limit(&self, i: usize, rate: f64) -> Option<(f64, f64)> {
        let b = self.basis[i];
        let (x, lo, up) = (self.x[b], self.lo[b], self.up[b]);
        if rate < 0.0 {
            if x > up + FEAS_TOL {
                Some((x - up, up))
            } else if x < lo - FEAS_TOL || !lo.is_finite() {
                None
            } else {
                Some(((x - lo).max(0.0), lo))
            }
        } else if x < lo - FEAS_TOL {
            Some((lo - x, lo))
        } else if x > up + FEAS_TOL || !up.is_finite() {
            None
        } else {
            Some(((up - x).max(0.0), up))
        }
    }

    fn basic_cost(&self, phase: Phase, i: usize) -> f64 {
        let b = self.basis[i];
        match phase {
            Phase::Optimality => self.cost[b],
            Phase::Feasibility => {
                if self.x[b] < self.lo[b] - FEAS_TOL {
                    -1.0
                } else if self.x[b] > self.up[b] + FEAS_TOL {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn iterate(&mut self, phase: Phase, y: &mut [f64], alpha: &mut [f64], bland: bool) -> Result<Step, ()> {
        let (n, m) = (self.n, self.m);
        // Duals y = c_Bᵀ B⁻¹.
        let costed: Vec<(usize, f64)> = (0..m)
            .map(|i| (i, self.basic_cost(phase, i)))
            .filter(|(_, c)| *c != 0.0)
            .collect();
        if phase == Phase::Feasibility && costed.is_empty() {
            return Ok(Step::Optimal);
        }
        for (k, yk) in y.iter_mut().enumerate() {
            let col = &self.binv[k * m..(k + 1) * m];
            *yk = costed.iter().map(|&(i, c)| c * col[i]).sum();
        }

        // Pricing.
        let mut entering = NOT_BASIC;
        let mut best = 0.0;
        let mut dir = 0.0;
        for j in 0..self.total() {
            if self.basic_pos[j] != NOT_BASIC || self.up[j] - self.lo[j] <= 0.0 {
                continue;
            }
            let mut d = if phase == Phase::Optimality { self.cost[j] } else { 0.0 };
            self.for_col(j, |i, a| d -= y[i] * a);
            let at_lo = self.x[j] <= self.lo[j] + FEAS_TOL;
            let at_up = self.x[j] >= self.up[j] - FEAS_TOL;
            let this_dir = if d < -OPT_TOL && !at_up {
                1.0
            } else if d > OPT_TOL && !at_lo {
                -1.0
            } else {
                continue;
            };
            if bland {
                entering = j;
                dir = this_dir;
                break;
            }
            let norm = if j < n { self.col_norm[j] } else { 1.0 };
            let score = d.abs() / norm;
            if score > best {
                best = score;
                entering = j;
                dir = this_dir;
            }
        }
        if entering == NOT_BASIC {
            return Ok(Step::Optimal);
        }
        let q = entering;

        // alpha = B⁻¹ a_q
        alpha.iter_mut().for_each(|v| *v = 0.0);
        {
            let binv = &self.binv;
            let mut add = |k: usize, a: f64| {
                let col = &binv[k * m..(k + 1) * m];
                for (al, c) in alpha.iter_mut().zip(col) {
                    *al += a * c;
                }
            };
            self.for_col(q, &mut add);
        }

        // Harris two-pass ratio test. Basic x_i changes at rate -dir*alpha_i.
        let mut theta_max = f64::INFINITY;
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -dir * a;
            if let Some((dist, _)) = self.limit(i, rate) {
                theta_max = theta_max.min((dist + FEAS_TOL) / rate.abs());
            }
        }
        let flip = self.up[q] - self.lo[q];
        let mut leave = NOT_BASIC;
        let mut theta = 0.0;
        let mut target = 0.0;
        if flip.is_finite() && flip <= theta_max {
            theta = flip;
        } else {
            if theta_max.is_infinite() {
                return if phase == Phase::Optimality {
                    Ok(Step::Unbounded)
                } else {
                    Err(())
                };
            }
            let mut best_piv = 0.0;
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let Some((dist, bound)) = self.limit(i, rate) else {
                    continue;
                };
                let t = dist / rate.abs();
                if t <= theta_max {
                    let better = if bland {
                        leave == NOT_BASIC || self.basis[i] < self.basis[leave]
                    } else {
                        a.abs() > best_piv
                    };
                    if better {
                        best_piv = a.abs();
                        leave = i;
                        theta = t;
                        target = bound;
                    }
                }
            }
            if leave == NOT_BASIC {
                return Err(());
            }
        }

        // Update primal values.
        self.x[q] += dir * theta;
        for (i, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let b = self.basis[i];
                self.x[b] -= dir * theta * a;
            }
        }
        if leave == NOT_BASIC {
            self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
            return Ok(Step::Progress(theta));
        }

        let r = leave;
        let old = self.basis[r];
        self.x[old] = target;
        self.basic_pos[old] = NOT_BASIC;
        self.basis[r] = q;
        self.basic_pos[q] = r;

        // Eta update of the column-major inverse.
        let piv = alpha[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let pr = col[r] / piv;
            if pr != 0.0 {
                for (c, a) in col.iter_mut().zip(alpha.iter()) {
                    *c -= a * pr;
                }
            }
            col[r] = pr;
        }
        Ok(Step::Progress(theta))
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination and recomputes
    /// the basic values. Zero multipliers are skipped and the diagonal is
    /// preferred as pivot, which keeps near-triangular bases cheap.
    fn refactor(&mut self) -> Result<(), ()> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        // Dense B, row-major, and its inverse built in place alongside.
        let mut a = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            self.for_col(j, |i, v| a[i * m + pos] += v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        let mut nz: Vec<usize> = Vec::with_capacity(m);
        for c in 0..m {
            let mut piv_row = c;
            let mut piv_val = 0.0f64;
            for r in c..m {
                piv_val = piv_val.max(a[r * m + c].abs());
            }
            if piv_val < 1e-13 {
                return Err(());
            }
            if a[c * m + c].abs() < 0.1 * piv_val {
                for r in c + 1..m {
                    if a[r * m + c].abs() == piv_val {
                        piv_row = r;
                        break;
                    }
                }
            }
            if piv_row != c {
                for k in 0..m {
                    a.swap(c * m + k, piv_row * m + k);
                    inv.swap(c * m + k, piv_row * m + k);
                }
            }
            let p = a[c * m + c];
            nz.clear();
            for k in c..m {
                if a[c * m + k] != 0.0 {
                    a[c * m + k] /= p;
                    nz.push(k);
                }
            }
            let mut inz: Vec<usize> = Vec::new();
            for k in 0..m {
                if inv[c * m + k] != 0.0 {
                    inv[c * m + k] /= p;
                    inz.push(k);
                }
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for &k in &nz {
                        a[r * m + k] -= f * a[c * m + k];
                    }
                    a[r * m + c] = 0.0;
                    for &k in &inz {
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // `inv` is row-major B⁻¹; store column-major.
        for i in 0..m {
            for k in 0..m {
                self.binv[k * m + i] = inv[i * m + k];
            }
        }
        // x_B = B⁻¹ (b - N x_N)
        let mut resid = self.rhs.clone();
        for j in 0..self.total() {
            if self.basic_pos[j] == NOT_BASIC && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_col(j, |i, v| resid[i] -= v * xj);
            }
        }
        for i in 0..m {
            let row = &inv[i * m..(i + 1) * m];
            let acc: f64 = row.iter().zip(&resid).map(|(a, r)| a * r).sum();
            let b = self.basis[i];
            self.x[b] = acc;
        }
        Ok(())
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}
