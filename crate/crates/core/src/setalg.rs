//! Interval matrices, matrix zonotopes, zonotopes and H-polytopes.
//!
//! An interval matrix is stored as a center/radius pair, `C ⊕ ⟨Δ⟩`, meaning
//! every matrix `M` with `C - Δ ≤ M ≤ C + Δ` entrywise. A matrix zonotope is
//! `⟨M_C; G₁, …, G_e⟩ = { M_C + Σ Gᵢ βᵢ : |βᵢ| ≤ 1 }`; the single-column case
//! is an ordinary zonotope and gets its own vector type.
//!
//! All operations are pure and return new values.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{dim_err, Error, Result};
use crate::lp::{lp_solve, LpProblem, LpStatus, RowKind};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

fn shape(m: &Matrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

fn check_same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(dim_err(op, shape(a), shape(b)));
    }
    Ok(())
}

fn check_inner(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.ncols() != b.nrows() {
        return Err(dim_err(
            op,
            format!("{} rows on the right operand", a.ncols()),
            shape(b),
        ));
    }
    Ok(())
}

/// Interval matrix `C ⊕ ⟨Δ⟩` with `Δ ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalMatrix {
    center: Matrix,
    radius: Matrix,
}

impl IntervalMatrix {
    pub fn new(center: Matrix, radius: Matrix) -> Result<Self> {
        check_same_shape("IntervalMatrix::new", &center, &radius)?;
        if radius.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument(
                "interval radius must be finite and entrywise nonnegative".into(),
            ));
        }
        Ok(IntervalMatrix { center, radius })
    }

    /// Degenerate interval containing only `center`.
    pub fn point(center: Matrix) -> Self {
        let radius = Matrix::zeros(center.nrows(), center.ncols());
        IntervalMatrix { center, radius }
    }

    /// Zero-centered interval `⟨Δ⟩`.
    pub fn symmetric(radius: Matrix) -> Result<Self> {
        let center = Matrix::zeros(radius.nrows(), radius.ncols());
        Self::new(center, radius)
    }

    pub fn center(&self) -> &Matrix {
        &self.center
    }

    pub fn radius(&self) -> &Matrix {
        &self.radius
    }

    pub fn shape(&self) -> (usize, usize) {
        self.center.shape()
    }

    pub fn lower(&self) -> Matrix {
        &self.center - &self.radius
    }

    pub fn upper(&self) -> Matrix {
        &self.center + &self.radius
    }

    /// Entrywise membership with absolute slack `tol`.
    pub fn contains(&self, m: &Matrix, tol: f64) -> bool {
        m.shape() == self.shape()
            && m.iter()
                .zip(self.center.iter().zip(self.radius.iter()))
                .all(|(v, (c, r))| (v - c).abs() <= r + tol)
    }

    /// `(C₁ + C₂) ⊕ ⟨Δ₁ + Δ₂⟩`.
    pub fn sum(&self, other: &IntervalMatrix) -> Result<IntervalMatrix> {
        check_same_shape("iv_sum", &self.center, &other.center)?;
        Ok(IntervalMatrix {
            center: &self.center + &other.center,
            radius: &self.radius + &other.radius,
        })
    }

    /// Interval product `C₁C₂ ⊕ ⟨|C₁|Δ₂ + Δ₁|C₂| + Δ₁Δ₂⟩`, an enclosure of the
    /// exact set product.
    pub fn product(&self, other: &IntervalMatrix) -> Result<IntervalMatrix> {
        check_inner("iv_product", &self.center, &other.center)?;
        let radius =
            self.center.abs() * &other.radius + &self.radius * other.center.abs() + &self.radius * &other.radius;
        Ok(IntervalMatrix {
            center: &self.center * &other.center,
            radius,
        })
    }

    /// Right multiplication by a point matrix: `CM ⊕ ⟨Δ|M|⟩`.
    pub fn mul_matrix(&self, m: &Matrix) -> Result<IntervalMatrix> {
        check_inner("iv_times_matrix", &self.center, m)?;
        Ok(IntervalMatrix {
            center: &self.center * m,
            radius: &self.radius * m.abs(),
        })
    }

    /// Left multiplication by a point matrix: `MC ⊕ ⟨|M|Δ⟩`.
    pub fn left_mul_matrix(&self, m: &Matrix) -> Result<IntervalMatrix> {
        check_inner("matrix_times_iv", m, &self.center)?;
        Ok(IntervalMatrix {
            center: m * &self.center,
            radius: m.abs() * &self.radius,
        })
    }

    /// Uniform sample: each entry `c + β r` with `β ~ U[-1, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix {
        Matrix::from_fn(self.center.nrows(), self.center.ncols(), |i, j| {
            let r = self.radius[(i, j)];
            let beta: f64 = if r > 0.0 { rng.random_range(-1.0..=1.0) } else { 0.0 };
            self.center[(i, j)] + beta * r
        })
    }

    /// Sample at a random vertex: each entry at `c ± r`.
    pub fn sample_vertex<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix {
        Matrix::from_fn(self.center.nrows(), self.center.ncols(), |i, j| {
            let r = self.radius[(i, j)];
            let sign = if r > 0.0 && rng.random_bool(0.5) { -1.0 } else { 1.0 };
            self.center[(i, j)] + sign * r
        })
    }
}

/// Row-major entrywise decomposition: one matrix per entry of `m`, holding that
/// entry in place and zeros elsewhere. The outputs sum to `m`.
pub fn entrywise_decomposition(m: &Matrix) -> Vec<Matrix> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let mut e = Matrix::zeros(rows, cols);
            e[(i, j)] = m[(i, j)];
            out.push(e);
        }
    }
    out
}

/// Matrix zonotope `⟨M_C; G₁, …, G_e⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixZonotope {
    center: Matrix,
    generators: Vec<Matrix>,
}

impl MatrixZonotope {
    pub fn new(center: Matrix, generators: Vec<Matrix>) -> Result<Self> {
        for g in &generators {
            check_same_shape("MatrixZonotope::new", &center, g)?;
        }
        Ok(MatrixZonotope { center, generators })
    }

    pub fn singleton(center: Matrix) -> Self {
        MatrixZonotope {
            center,
            generators: Vec::new(),
        }
    }

    /// Zonotopic form of the symmetric interval `⟨Δ⟩`: zero center, generators
    /// from the entrywise decomposition of `Δ`.
    pub fn from_symmetric_interval(radius: &Matrix) -> Self {
        MatrixZonotope {
            center: Matrix::zeros(radius.nrows(), radius.ncols()),
            generators: entrywise_decomposition(radius),
        }
    }

    pub fn center(&self) -> &Matrix {
        &self.center
    }

    pub fn generators(&self) -> &[Matrix] {
        &self.generators
    }

    pub fn shape(&self) -> (usize, usize) {
        self.center.shape()
    }

    /// Minkowski sum: centers add, generator lists concatenate (self first).
    pub fn minkowski_sum(&self, other: &MatrixZonotope) -> Result<MatrixZonotope> {
        check_same_shape("mz_sum", &self.center, &other.center)?;
        let mut generators = self.generators.clone();
        generators.extend(other.generators.iter().cloned());
        Ok(MatrixZonotope {
            center: &self.center + &other.center,
            generators,
        })
    }

    /// Smallest interval matrix containing the zonotope: radius `Σ|Gᵢ|`.
    pub fn bounding_box(&self) -> IntervalMatrix {
        let (r, c) = self.shape();
        let radius = self.generators.iter().fold(Matrix::zeros(r, c), |acc, g| acc + g.abs());
        IntervalMatrix {
            center: self.center.clone(),
            radius,
        }
    }

    /// Member for the given coefficients (`|βᵢ| ≤ 1` is the caller's concern).
    pub fn point(&self, beta: &[f64]) -> Matrix {
        assert_eq!(beta.len(), self.generators.len());
        self.generators
            .iter()
            .zip(beta)
            .fold(self.center.clone(), |acc, (g, b)| acc + g * *b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Matrix {
        let beta: Vec<f64> = (0..self.generators.len())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        self.point(&beta)
    }

    /// Exact membership by linear programming on the coefficients.
    pub fn contains(&self, m: &Matrix, tol: f64) -> Result<bool> {
        check_same_shape("MatrixZonotope::contains", &self.center, m)?;
        let cols: Vec<Vector> = self
            .generators
            .iter()
            .map(|g| Vector::from_column_slice(g.as_slice()))
            .collect();
        let target = Vector::from_column_slice((m - &self.center).as_slice());
        coefficient_feasible(&cols, &target, tol)
    }
}

/// Bounding operator: encloses `𝓘𝓜` by
/// `⟨C M_C; C G₁, …, C G_e, E(F)⟩` with `F = Δ(|M_C| + Σ|Gⱼ|)`.
pub fn bounding_operator(i: &IntervalMatrix, mz: &MatrixZonotope) -> Result<MatrixZonotope> {
    check_inner("t_apply", &i.center, &mz.center)?;
    let abs_sum = mz.generators.iter().fold(mz.center.abs(), |acc, g| acc + g.abs());
    let f = &i.radius * abs_sum;
    let mut generators: Vec<Matrix> = mz.generators.iter().map(|g| &i.center * g).collect();
    generators.extend(entrywise_decomposition(&f));
    Ok(MatrixZonotope {
        center: &i.center * &mz.center,
        generators,
    })
}

/// `j`-fold composition of [`bounding_operator`]; `j = 0` is the identity.
pub fn bounding_operator_iter(i: &IntervalMatrix, mz: &MatrixZonotope, j: usize) -> Result<MatrixZonotope> {
    let mut out = mz.clone();
    for _ in 0..j {
        out = bounding_operator(i, &out)?;
    }
    Ok(out)
}

/// Vector zonotope `⟨c; g₁, …, g_e⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct Zonotope {
    center: Vector,
    generators: Vec<Vector>,
}

impl Zonotope {
    pub fn new(center: Vector, generators: Vec<Vector>) -> Result<Self> {
        for g in &generators {
            if g.len() != center.len() {
                return Err(dim_err("Zonotope::new", center.len(), g.len()));
            }
        }
        Ok(Zonotope { center, generators })
    }

    /// `{0}` in dimension `n`.
    pub fn origin(n: usize) -> Self {
        Zonotope {
            center: Vector::zeros(n),
            generators: Vec::new(),
        }
    }

    /// Axis-aligned box `{d : |d| ≤ radius}`, one generator per nonzero entry.
    pub fn from_box(radius: &Vector) -> Result<Self> {
        if radius.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::InvalidArgument("box radius must be nonnegative".into()));
        }
        let n = radius.len();
        let generators = radius
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > 0.0)
            .map(|(i, r)| {
                let mut g = Vector::zeros(n);
                g[i] = *r;
                g
            })
            .collect();
        Ok(Zonotope {
            center: Vector::zeros(n),
            generators,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn is_singleton(&self) -> bool {
        self.generators.is_empty()
    }

    /// Linear image `{Mx : x ∈ Z}`. Generators mapped to zero are dropped.
    pub fn affine_image(&self, m: &Matrix) -> Result<Zonotope> {
        if m.ncols() != self.dim() {
            return Err(dim_err("zonotope_affine", self.dim(), m.ncols()));
        }
        Ok(Zonotope {
            center: m * &self.center,
            generators: self
                .generators
                .iter()
                .map(|g| m * g)
                .filter(|g| g.iter().any(|v| *v != 0.0))
                .collect(),
        })
    }

    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        if self.dim() != other.dim() {
            return Err(dim_err("zonotope_sum", self.dim(), other.dim()));
        }
        let mut generators = self.generators.clone();
        generators.extend(other.generators.iter().cloned());
        Ok(Zonotope {
            center: &self.center + &other.center,
            generators,
        })
    }

    /// Per-coordinate radius of the interval hull.
    pub fn box_radius(&self) -> Vector {
        self.generators
            .iter()
            .fold(Vector::zeros(self.dim()), |acc, g| acc + g.abs())
    }

    pub fn point(&self, beta: &[f64]) -> Vector {
        assert_eq!(beta.len(), self.generators.len());
        self.generators
            .iter()
            .zip(beta)
            .fold(self.center.clone(), |acc, (g, b)| acc + g * *b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let beta: Vec<f64> = (0..self.generators.len())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        self.point(&beta)
    }

    /// Exact membership: is there `β ∈ [-1-tol, 1+tol]ᵉ` with `c + Gβ = x`?
    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(dim_err("Zonotope::contains", self.dim(), x.len()));
        }
        coefficient_feasible(&self.generators, &(x - &self.center), tol)
    }
}

/// Is `target = Σ gᵢ βᵢ` solvable with `|βᵢ| ≤ 1 + tol`, up to `tol` per row?
fn coefficient_feasible(gens: &[Vector], target: &Vector, tol: f64) -> Result<bool> {
    let n = target.len();
    if gens.is_empty() {
        return Ok(target.iter().all(|v| v.abs() <= tol));
    }
    let mut p = LpProblem::new();
    let beta = p.add_vars(gens.len(), -1.0 - tol, 1.0 + tol);
    for i in 0..n {
        let coeffs: Vec<(usize, f64)> = beta
            .clone()
            .zip(gens)
            .filter(|(_, g)| g[i] != 0.0)
            .map(|(b, g)| (b, g[i]))
            .collect();
        if coeffs.is_empty() {
            if target[i].abs() > tol {
                return Ok(false);
            }
            continue;
        }
        p.add_row(coeffs.clone(), RowKind::Le, target[i] + tol);
        p.add_row(coeffs, RowKind::Ge, target[i] - tol);
    }
    match lp_solve(&p).status {
        LpStatus::Optimal => Ok(true),
        LpStatus::Infeasible => Ok(false),
        other => Err(Error::NumericFailure(format!(
            "zonotope membership LP ended with {other:?}"
        ))),
    }
}

/// H-polytope `{x : Hx ≤ b}`, nonempty by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    h: Matrix,
    b: Vector,
}

impl Polytope {
    /// Validates shapes and nonemptiness (one LP feasibility call).
    pub fn new(h: Matrix, b: Vector) -> Result<Self> {
        if h.nrows() != b.len() {
            return Err(dim_err("Polytope::new", h.nrows(), b.len()));
        }
        if h.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("polytope data must be finite".into()));
        }
        let poly = Polytope { h, b };
        let mut p = LpProblem::new();
        let x = p.add_vars(poly.dim(), f64::NEG_INFINITY, f64::INFINITY);
        poly.push_rows(&mut p, x.start);
        match lp_solve(&p).status {
            LpStatus::Optimal => Ok(poly),
            LpStatus::Infeasible => Err(Error::EmptySet("polytope {x : Hx <= b} has no points".into())),
            other => Err(Error::NumericFailure(format!(
                "polytope feasibility LP ended with {other:?}"
            ))),
        }
    }

    /// Box `{x : |xᵢ| ≤ bound}` in dimension `n`.
    pub fn symmetric_box(n: usize, bound: f64) -> Result<Self> {
        let mut h = Matrix::zeros(2 * n, n);
        for i in 0..n {
            h[(i, i)] = 1.0;
            h[(n + i, i)] = -1.0;
        }
        Self::new(h, Vector::from_element(2 * n, bound))
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.h.nrows()
    }

    /// Largest row violation `max(Hx - b)`, clipped at zero.
    pub fn violation(&self, x: &Vector) -> f64 {
        (&self.h * x - &self.b).iter().fold(0.0f64, |a, v| a.max(*v))
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Appends `H x ≤ b` with `x` stored at variables `first..first + dim`.
    pub(crate) fn push_rows(&self, p: &mut LpProblem, first: usize) {
        for r in 0..self.num_rows() {
            let coeffs = (0..self.dim())
                .filter(|&c| self.h[(r, c)] != 0.0)
                .map(|c| (first + c, self.h[(r, c)]))
                .collect();
            p.add_row(coeffs, RowKind::Le, self.b[r]);
        }
    }

    /// `(min, max)` of coordinate `i` over the polytope.
    pub fn coordinate_range(&self, i: usize) -> Result<(f64, f64)> {
        let mut out = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut p = LpProblem::new();
            let x = p.add_vars(self.dim(), f64::NEG_INFINITY, f64::INFINITY);
            self.push_rows(&mut p, x.start);
            p.set_cost(x.start + i, sign);
            let r = lp_solve(&p);
            match r.status {
                LpStatus::Optimal => out[k] = r.x[x.start + i],
                LpStatus::Unbounded => {
                    return Err(Error::Unbounded(format!(
                        "coordinate {i} is unbounded over the polytope"
                    )))
                }
                other => {
                    return Err(Error::NumericFailure(format!(
                        "coordinate range LP ended with {other:?}"
                    )))
                }
            }
        }
        Ok((out[0], out[1]))
    }
}
