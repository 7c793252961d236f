//! Scenarios, plant sampling and the orbital rendezvous case study.

mod campaign;
mod report;

pub use campaign::*;
pub use report::*;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    bound_radii_recursive, cache_key, closed_loop_interval, gain_spotcheck, load_or_compute, stack_delta_s,
    BoundsTable, ClosedLoop,
};
use crate::error::{Error, Result};
use crate::nested;
use crate::ocp::{ConstraintSchedule, OcpModel};
use crate::setalg::{IntervalMatrix, Matrix, Polytope, Vector};

pub const DEFAULT_N_MAX: usize = 200;

/// Uncertain linear plant with polytopic constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub a_hat: Matrix,
    pub b_hat: Matrix,
    pub delta_a: Matrix,
    pub delta_b: Matrix,
    pub k_gain: Matrix,
    pub state_poly: Polytope,
    pub input_poly: Polytope,
    pub n_max: usize,
    /// Sampling time in seconds; metadata only.
    pub dt: f64,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct PolyFile {
    #[serde(rename = "H", with = "nested::matrix")]
    h: Matrix,
    #[serde(with = "nested::vector")]
    b: Vector,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(with = "nested::matrix")]
    a_hat: Matrix,
    #[serde(with = "nested::matrix")]
    b_hat: Matrix,
    #[serde(with = "nested::matrix")]
    delta_a: Matrix,
    #[serde(with = "nested::matrix")]
    delta_b: Matrix,
    #[serde(with = "nested::matrix")]
    k_gain: Matrix,
    state_poly: PolyFile,
    input_poly: PolyFile,
    #[serde(default = "default_n_max")]
    n_max: usize,
    #[serde(default)]
    dt: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    state_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    input_labels: Vec<String>,
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

impl Scenario {
    pub fn state_dim(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_hat.ncols()
    }

    /// Shape and sanity checks: consistent dimensions, nonnegative radii,
    /// origin admissible for the input.
    pub fn validate(&self) -> Result<()> {
        closed_loop_interval(&self.a_hat, &self.b_hat, &self.delta_a, &self.delta_b, &self.k_gain)?;
        IntervalMatrix::new(self.a_hat.clone(), self.delta_a.clone())?;
        IntervalMatrix::new(self.b_hat.clone(), self.delta_b.clone())?;
        if self.state_poly.dim() != self.state_dim() || self.input_poly.dim() != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "constraint dimensions {}/{} do not match n={}, m={}",
                self.state_poly.dim(),
                self.input_poly.dim(),
                self.state_dim(),
                self.input_dim()
            )));
        }
        if !self.input_poly.contains(&Vector::zeros(self.input_dim()), 0.0) {
            return Err(Error::InvalidArgument("input constraints must admit u = 0".into()));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidArgument("n_max must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ScenarioFile = serde_json::from_str(text)?;
        let sc = Scenario {
            a_hat: f.a_hat,
            b_hat: f.b_hat,
            delta_a: f.delta_a,
            delta_b: f.delta_b,
            k_gain: f.k_gain,
            state_poly: Polytope::new(f.state_poly.h, f.state_poly.b)?,
            input_poly: Polytope::new(f.input_poly.h, f.input_poly.b)?,
            n_max: f.n_max,
            dt: f.dt,
            state_labels: f.state_labels,
            input_labels: f.input_labels,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = ScenarioFile {
            a_hat: self.a_hat.clone(),
            b_hat: self.b_hat.clone(),
            delta_a: self.delta_a.clone(),
            delta_b: self.delta_b.clone(),
            k_gain: self.k_gain.clone(),
            state_poly: PolyFile {
                h: self.state_poly.h().clone(),
                b: self.state_poly.b().clone(),
            },
            input_poly: PolyFile {
                h: self.input_poly.h().clone(),
                b: self.input_poly.b().clone(),
            },
            n_max: self.n_max,
            dt: self.dt,
            state_labels: self.state_labels.clone(),
            input_labels: self.input_labels.clone(),
        };
        Ok(compact_number_rows(&serde_json::to_string_pretty(&f)?))
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    pub fn closed_loop(&self) -> Result<ClosedLoop> {
        closed_loop_interval(&self.a_hat, &self.b_hat, &self.delta_a, &self.delta_b, &self.k_gain)
    }

    /// `Δ_S = [Δ_A Δ_B]`.
    pub fn delta_s(&self) -> Matrix {
        stack_delta_s(&self.delta_a, &self.delta_b).expect("validated scenario")
    }

    pub fn bounds_table(&self) -> Result<BoundsTable> {
        let cl = self.closed_loop()?;
        bound_radii_recursive(&cl.ahat_k, &cl.delta_k, &self.delta_s(), self.n_max)
    }

    pub fn bounds_key(&self) -> String {
        cache_key(
            &[&self.a_hat, &self.b_hat, &self.delta_a, &self.delta_b, &self.k_gain],
            self.n_max,
        )
    }

    /// Bounds table through the on-disk cache in `dir`.
    pub fn bounds_table_cached(&self, dir: &Path) -> Result<(BoundsTable, bool)> {
        load_or_compute(dir, &self.bounds_key(), || self.bounds_table())
    }

    pub fn ocp_model_with(&self, bounds: BoundsTable) -> Result<OcpModel> {
        OcpModel::new(
            self.a_hat.clone(),
            self.b_hat.clone(),
            self.k_gain.clone(),
            bounds,
            ConstraintSchedule::constant(self.state_poly.clone()),
            ConstraintSchedule::constant(self.input_poly.clone()),
            self.n_max,
        )
    }

    pub fn ocp_model(&self) -> Result<OcpModel> {
        self.ocp_model_with(self.bounds_table()?)
    }

    /// Largest sampled closed-loop spectral radius; logs a warning when it
    /// reaches 1.
    pub fn spotcheck_gain(&self, samples: usize, seed: u64) -> Result<f64> {
        let rho = gain_spotcheck(&self.closed_loop()?.interval, samples, seed);
        if rho >= 1.0 {
            log::warn!("sampled closed-loop spectral radius {rho:.4} is not below 1");
        }
        Ok(rho)
    }
}

/// Puts every innermost array of numbers in pretty JSON on one line.
fn compact_number_rows(pretty: &str) -> String {
    let mut out = String::with_capacity(pretty.len());
    let mut rest = pretty;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..=open]);
        rest = &rest[open + 1..];
        let Some(close) = rest.find(']') else { break };
        let inner = &rest[..close];
        let numeric = !inner.trim().is_empty()
            && inner
                .chars()
                .all(|c| c.is_ascii_digit() || c.is_whitespace() || ",.-+eE".contains(c));
        if numeric {
            let items: Vec<&str> = inner.split(',').map(str::trim).collect();
            out.push_str(&items.join(", "));
            out.push(']');
            rest = &rest[close + 1..];
        }
    }
    out.push_str(rest);
    out
}

/// Inner polyhedral approximation of a circular cone with apex at the origin
/// and axis along +x: `facets` half-spaces whose normals are spread evenly
/// around the axis, with the vertices of every cross-section polygon on the
/// cone surface, plus the cap `x ≤ x_max`.
///
/// Returns rows over `(x, y, z)`.
pub fn visibility_cone(half_angle_deg: f64, facets: usize, x_max: f64) -> (Matrix, Vector) {
    let slope = half_angle_deg.to_radians().tan() * (std::f64::consts::PI / facets as f64).cos();
    let mut h = Matrix::zeros(facets + 1, 3);
    let mut b = Vector::zeros(facets + 1);
    for i in 0..facets {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / facets as f64;
        h[(i, 0)] = -slope;
        h[(i, 1)] = phi.cos();
        h[(i, 2)] = phi.sin();
    }
    h[(facets, 0)] = 1.0;
    b[facets] = x_max;
    (h, b)
}

pub const HCW_DT: f64 = 11.7;
pub const HCW_MAX_SPEED: f64 = 0.4;
pub const HCW_MAX_ACCEL: f64 = 0.01;
pub const HCW_VIEW_HALF_ANGLE_DEG: f64 = 60.0;
pub const HCW_CONE_FACETS: usize = 8;
pub const HCW_MAX_RANGE: f64 = 70.0;

/// Discrete HCW rendezvous model with the 60° visibility cone.
pub fn hcw_scenario() -> Scenario {
    hcw_scenario_with(HCW_VIEW_HALF_ANGLE_DEG, HCW_CONE_FACETS)
}

pub fn hcw_scenario_with(half_angle_deg: f64, facets: usize) -> Scenario {
    let dt = HCW_DT;
    #[rustfmt::skip]
    let a_hat = Matrix::from_row_slice(6, 6, &[
        1.0,    0.0, 0.0,     dt,    0.0,  0.0,
        0.0,    1.0, 0.0,     0.0,   dt,   0.0,
        0.0,    0.0, 1.0,     0.0,   0.0,  dt,
        3.8e-5, 0.0, 0.0,     1.0,   0.02, 0.0,
        0.0,    0.0, 0.0,    -0.02,  1.0,  0.0,
        0.0,    0.0, -1.3e-5, 0.0,   0.0,  1.0,
    ]);
    let mut b_hat = Matrix::zeros(6, 3);
    for i in 0..3 {
        b_hat[(3 + i, i)] = dt;
    }
    let mut delta_a = Matrix::zeros(6, 6);
    delta_a[(3, 0)] = 1e-3 * 0.004;
    delta_a[(3, 4)] = 1e-3 * 1.23;
    delta_a[(4, 3)] = 1e-3 * 1.23;
    delta_a[(5, 2)] = 1e-3 * 0.001;
    let mut delta_b = Matrix::zeros(6, 3);
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                delta_b[(3 + i, j)] = 0.205;
            }
        }
    }
    #[rustfmt::skip]
    let k_gain = Matrix::from_row_slice(3, 6, &[
        0.025, 0.0,   0.0,   1.005, 0.021, 0.0,
        0.0,   0.026, 0.0,  -0.021, 1.022, 0.0,
        0.0,   0.0,   0.026, 0.0,   0.0,   1.022,
    ]) * -0.1;

    let (cone_h, cone_b) = visibility_cone(half_angle_deg, facets, HCW_MAX_RANGE);
    let rows = cone_h.nrows() + 6;
    let mut h = Matrix::zeros(rows, 6);
    let mut b = Vector::zeros(rows);
    h.view_mut((0, 0), cone_h.shape()).copy_from(&cone_h);
    b.rows_mut(0, cone_b.len()).copy_from(&cone_b);
    for i in 0..3 {
        h[(cone_h.nrows() + 2 * i, 3 + i)] = 1.0;
        h[(cone_h.nrows() + 2 * i + 1, 3 + i)] = -1.0;
        b[cone_h.nrows() + 2 * i] = HCW_MAX_SPEED;
        b[cone_h.nrows() + 2 * i + 1] = HCW_MAX_SPEED;
    }
    let state_poly = Polytope::new(h, b).expect("cone section is nonempty");
    let input_poly = Polytope::symmetric_box(3, HCW_MAX_ACCEL).expect("box is nonempty");
    let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
    Scenario {
        a_hat,
        b_hat,
        delta_a,
        delta_b,
        k_gain,
        state_poly,
        input_poly,
        n_max: DEFAULT_N_MAX,
        dt,
        state_labels: labels(&["x", "y", "z", "vx", "vy", "vz"]),
        input_labels: labels(&["ux", "uy", "uz"]),
    }
}

/// Initial conditions for the case study: a triangular lattice over the
/// in-plane (z = 0) section of the cone, zero initial velocity. Row `r`
/// (`r = 2..=11`) sits at radial distance `70 r / 11` and holds `r + 1`
/// points evenly spaced across the section, for 75 points in total.
pub fn default_grid() -> Vec<Vector> {
    cone_grid(HCW_VIEW_HALF_ANGLE_DEG, HCW_CONE_FACETS, HCW_MAX_RANGE, 2, 11)
}

pub fn cone_grid(half_angle_deg: f64, facets: usize, x_max: f64, first_row: usize, last_row: usize) -> Vec<Vector> {
    let slope = half_angle_deg.to_radians().tan() * (std::f64::consts::PI / facets as f64).cos();
    let mut out = Vec::new();
    for r in first_row..=last_row {
        let x = x_max * r as f64 / last_row as f64;
        let half_width = x * slope;
        for q in 0..=r {
            let y = -half_width + 2.0 * half_width * q as f64 / r as f64;
            let mut p = Vector::zeros(6);
            p[0] = x;
            p[1] = y;
            out.push(p);
        }
    }
    out
}

/// How a plant is drawn from the interval model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    /// Entries uniform in `[c - r, c + r]`.
    #[default]
    Uniform,
    /// Entries at `c ± r` with equal probability.
    Vertex,
}

/// A concrete plant `(A, B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plant {
    pub a: Matrix,
    pub b: Matrix,
}

impl Plant {
    pub fn nominal(sc: &Scenario) -> Self {
        Plant {
            a: sc.a_hat.clone(),
            b: sc.b_hat.clone(),
        }
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }
}

pub fn sample_plant(sc: &Scenario, seed: u64, mode: SampleMode) -> Plant {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ia = IntervalMatrix::new(sc.a_hat.clone(), sc.delta_a.clone()).expect("validated scenario");
    let ib = IntervalMatrix::new(sc.b_hat.clone(), sc.delta_b.clone()).expect("validated scenario");
    match mode {
        SampleMode::Uniform => Plant {
            a: ia.sample(&mut rng),
            b: ib.sample(&mut rng),
        },
        SampleMode::Vertex => Plant {
            a: ia.sample_vertex(&mut rng),
            b: ib.sample_vertex(&mut rng),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hcw_matrices() {
        let sc = hcw_scenario();
        assert_eq!(sc.a_hat[(0, 3)], 11.7);
        assert_eq!(sc.a_hat[(3, 0)], 3.8e-5);
        assert_eq!(sc.a_hat[(4, 3)], -0.02);
        assert_eq!(sc.a_hat[(5, 2)], -1.3e-5);
        assert_eq!(sc.b_hat[(0, 0)], 0.0);
        assert_eq!(sc.b_hat[(4, 1)], 11.7);
        assert_eq!(sc.delta_b[(3, 0)], 0.0);
        assert_eq!(sc.delta_b[(3, 1)], 0.205);
        assert_eq!(sc.delta_a[(3, 4)], 1.23e-3);
        assert!((sc.k_gain[(1, 3)] - 0.0021).abs() < 1e-15);
        assert!((sc.k_gain[(2, 5)] + 0.1022).abs() < 1e-15);
        sc.validate().unwrap();
    }

    #[test]
    fn hcw_closed_loop_interval() {
        let sc = hcw_scenario();
        let cl = sc.closed_loop().unwrap();
        // Δ_K(3,3) = 0.205 (|K(1,3)| + |K(2,3)|).
        let expect = 0.205 * (0.0021 + 0.0);
        assert!((cl.delta_k[(3, 3)] - expect).abs() < 1e-15);
        // Δ_K(4,4) = 1.23e-3·0 + 0.205 (|K(0,4)| + |K(2,4)|).
        assert!((cl.delta_k[(4, 4)] - 0.205 * 0.0021).abs() < 1e-15);
        let rho = sc.spotcheck_gain(1000, 1).unwrap();
        assert!(rho < 1.0);
    }

    #[test]
    fn cone_contains_axis_and_excludes_outside() {
        let sc = hcw_scenario();
        let mut x = Vector::zeros(6);
        x[0] = 35.0;
        assert!(sc.state_poly.contains(&x, 0.0));
        x[1] = 35.0 * 60f64.to_radians().tan();
        assert!(!sc.state_poly.contains(&x, 0.0));
        x[1] = 0.0;
        x[0] = -1.0;
        assert!(!sc.state_poly.contains(&x, 0.0));
        x[0] = 71.0;
        assert!(!sc.state_poly.contains(&x, 0.0));
    }

    #[test]
    fn grid_layout() {
        let sc = hcw_scenario();
        let grid = default_grid();
        assert_eq!(grid.len(), 75);
        for p in &grid {
            assert!(sc.state_poly.contains(p, 1e-9));
            assert_eq!(p[2], 0.0);
            assert!(p.rows(3, 3).iter().all(|v| *v == 0.0));
        }
        assert!(grid.iter().any(|p| (p[0] - 70.0).abs() < 1e-12));
    }

    #[test]
    fn plant_sampling() {
        let sc = hcw_scenario();
        for seed in 0..20 {
            let p = sample_plant(&sc, seed, SampleMode::Uniform);
            assert!(((&p.a - &sc.a_hat).abs() - &sc.delta_a).max() <= 1e-15);
            assert!(((&p.b - &sc.b_hat).abs() - &sc.delta_b).max() <= 1e-15);
            let v = sample_plant(&sc, seed, SampleMode::Vertex);
            assert!(((&v.b - &sc.b_hat).abs() - &sc.delta_b).amax() <= 1e-15);
        }
        assert_eq!(
            sample_plant(&sc, 5, SampleMode::Uniform),
            sample_plant(&sc, 5, SampleMode::Uniform)
        );
        let mut exact = sc.clone();
        exact.delta_a.fill(0.0);
        exact.delta_b.fill(0.0);
        assert_eq!(sample_plant(&exact, 3, SampleMode::Uniform), Plant::nominal(&exact));
    }

    #[test]
    fn scenario_json_round_trip() {
        let sc = hcw_scenario();
        let text = sc.to_json().unwrap();
        assert_eq!(Scenario::from_json(&text).unwrap(), sc);
        let err = Scenario::from_json("{\n  \"a_hat\": [[1.0]],\n  \"oops\": 1\n}").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
