//! Offline error-bound tables.
//!
//! The prediction error after `j` steps is enclosed by the interval
//! `𝓘(j) = ⟨Δ_I(j)⟩`, the box hull of `𝕋ʲ(𝓜_Δ)` where `𝓜_Δ` is the
//! zonotopic form of `⟨Δ_S⟩`, `Δ_S = [Δ_A Δ_B]`. Two independent routes
//! produce the radii: iterating the bounding operator, and a closed-form
//! recursion on absolute matrix powers. They must agree.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{dim_err, Error, Result};
use crate::nested;
use crate::setalg::{bounding_operator, IntervalMatrix, Matrix, MatrixZonotope};

/// Nominal closed loop `Â_K = Â + B̂K` and its interval enclosure
/// `Â_K ⊕ ⟨Δ_K⟩` with `Δ_K = Δ_A + Δ_B|K|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoop {
    pub ahat_k: Matrix,
    pub delta_k: Matrix,
    pub interval: IntervalMatrix,
}

pub fn closed_loop_interval(
    a_hat: &Matrix,
    b_hat: &Matrix,
    delta_a: &Matrix,
    delta_b: &Matrix,
    k_gain: &Matrix,
) -> Result<ClosedLoop> {
    let n = a_hat.nrows();
    if a_hat.ncols() != n {
        return Err(dim_err(
            "closed_loop_interval",
            "square A",
            format!("{:?}", a_hat.shape()),
        ));
    }
    let m = b_hat.ncols();
    for (name, mat, want) in [
        ("B", b_hat, (n, m)),
        ("delta_A", delta_a, (n, n)),
        ("delta_B", delta_b, (n, m)),
        ("K", k_gain, (m, n)),
    ] {
        if mat.shape() != want {
            return Err(dim_err(
                "closed_loop_interval",
                format!("{name} {}x{}", want.0, want.1),
                format!("{}x{}", mat.nrows(), mat.ncols()),
            ));
        }
    }
    let ahat_k = a_hat + b_hat * k_gain;
    let delta_k = delta_a + delta_b * k_gain.abs();
    let interval = IntervalMatrix::new(ahat_k.clone(), delta_k.clone())?;
    Ok(ClosedLoop {
        ahat_k,
        delta_k,
        interval,
    })
}

/// `Δ_S = [Δ_A Δ_B]`.
pub fn stack_delta_s(delta_a: &Matrix, delta_b: &Matrix) -> Result<Matrix> {
    if delta_a.nrows() != delta_b.nrows() {
        return Err(dim_err("stack_delta_s", delta_a.nrows(), delta_b.nrows()));
    }
    let n = delta_a.nrows();
    let mut s = Matrix::zeros(n, delta_a.ncols() + delta_b.ncols());
    s.view_mut((0, 0), delta_a.shape()).copy_from(delta_a);
    s.view_mut((0, delta_a.ncols()), delta_b.shape()).copy_from(delta_b);
    Ok(s)
}

/// `Â_K⁰ … Â_K^{count-1}` by repeated multiplication.
fn powers(ahat_k: &Matrix, count: usize) -> Vec<Matrix> {
    let n = ahat_k.nrows();
    let mut out = Vec::with_capacity(count);
    let mut p = Matrix::identity(n, n);
    for _ in 0..count {
        let next = ahat_k * &p;
        out.push(p);
        p = next;
    }
    out
}

/// Precomputed radii `Δ_I(j)`, `j = 0..n_max-1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsTable {
    #[serde(with = "nested::matrix")]
    ahat_k: Matrix,
    #[serde(with = "nested::matrix")]
    delta_k: Matrix,
    #[serde(with = "nested::matrix")]
    delta_s: Matrix,
    n_max: usize,
    #[serde(with = "nested::matrix_list")]
    radii: Vec<Matrix>,
    #[serde(skip)]
    powers: Vec<Matrix>,
}

impl PartialEq for BoundsTable {
    fn eq(&self, other: &Self) -> bool {
        self.ahat_k == other.ahat_k
            && self.delta_k == other.delta_k
            && self.delta_s == other.delta_s
            && self.n_max == other.n_max
            && self.radii == other.radii
    }
}

fn check_table_args(ahat_k: &Matrix, delta_k: &Matrix, delta_s: &Matrix, n_max: usize) -> Result<()> {
    let n = ahat_k.nrows();
    if ahat_k.ncols() != n || delta_k.shape() != (n, n) {
        return Err(dim_err(
            "bounds table",
            format!("{n}x{n} closed loop"),
            format!("{:?} / {:?}", ahat_k.shape(), delta_k.shape()),
        ));
    }
    if delta_s.nrows() != n || delta_s.ncols() < n {
        return Err(dim_err(
            "bounds table",
            format!("delta_S with {n} rows and at least {n} columns"),
            format!("{:?}", delta_s.shape()),
        ));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    Ok(())
}

/// Radii by iterating the bounding operator on `𝓜_Δ`.
pub fn bound_radii_direct(i_ak: &IntervalMatrix, delta_s: &Matrix, n_max: usize) -> Result<BoundsTable> {
    check_table_args(i_ak.center(), i_ak.radius(), delta_s, n_max)?;
    let mut mz = MatrixZonotope::from_symmetric_interval(delta_s);
    let mut radii = Vec::with_capacity(n_max);
    for j in 0..n_max {
        if j > 0 {
            mz = bounding_operator(i_ak, &mz)?;
        }
        let hull = mz.bounding_box();
        debug_assert!(hull.center().iter().all(|c| *c == 0.0));
        if hull.center().iter().any(|c| *c != 0.0) {
            return Err(Error::NumericFailure(format!(
                "bounding operator produced a nonzero center at step {j}"
            )));
        }
        radii.push(hull.radius().clone());
    }
    Ok(BoundsTable {
        ahat_k: i_ak.center().clone(),
        delta_k: i_ak.radius().clone(),
        delta_s: delta_s.clone(),
        n_max,
        powers: powers(i_ak.center(), n_max),
        radii,
    })
}

/// `F₀ … F_{count-1}` with `F₀ = Δ_S`, `F_{j+1} = Δ_K Σ_{i≤j} |Â_K^{j-i}| F_i`.
/// Also returns the partial sums `Σ_{i≤j} |Â_K^{j-i}| F_i`, which are the radii.
fn f_and_radii(abs_pow: &[Matrix], delta_k: &Matrix, delta_s: &Matrix, count: usize) -> (Vec<Matrix>, Vec<Matrix>) {
    let mut f: Vec<Matrix> = Vec::with_capacity(count + 1);
    let mut radii = Vec::with_capacity(count);
    f.push(delta_s.clone());
    for j in 0..count {
        let mut acc = Matrix::zeros(delta_s.nrows(), delta_s.ncols());
        for (i, fi) in f.iter().enumerate().take(j + 1) {
            acc += &abs_pow[j - i] * fi;
        }
        f.push(delta_k * &acc);
        radii.push(acc);
    }
    f.truncate(count);
    (f, radii)
}

/// Radii by the closed-form recursion on `|Â_K^p|` (absolute values of exact
/// powers, not powers of absolute values).
pub fn bound_radii_recursive(ahat_k: &Matrix, delta_k: &Matrix, delta_s: &Matrix, n_max: usize) -> Result<BoundsTable> {
    check_table_args(ahat_k, delta_k, delta_s, n_max)?;
    let pw = powers(ahat_k, n_max);
    let abs_pow: Vec<Matrix> = pw.iter().map(|p| p.abs()).collect();
    let (_, radii) = f_and_radii(&abs_pow, delta_k, delta_s, n_max);
    Ok(BoundsTable {
        ahat_k: ahat_k.clone(),
        delta_k: delta_k.clone(),
        delta_s: delta_s.clone(),
        n_max,
        powers: pw,
        radii,
    })
}

/// `F₀ … F_{count-1}` from the recursion.
pub fn f_sequence(ahat_k: &Matrix, delta_k: &Matrix, delta_s: &Matrix, count: usize) -> Result<Vec<Matrix>> {
    check_table_args(ahat_k, delta_k, delta_s, count.max(1))?;
    let abs_pow: Vec<Matrix> = powers(ahat_k, count).iter().map(|p| p.abs()).collect();
    Ok(f_and_radii(&abs_pow, delta_k, delta_s, count).0)
}

/// `P₁ … P_{j_max}` (index 0 holds `P₁ = I`), with
/// `P_{j+1} = |Â_K^j| + Σ_{h=1}^{j} P_h Δ_K |Â_K^{j-h}|`.
pub fn pj_sequence(ahat_k: &Matrix, delta_k: &Matrix, j_max: usize) -> Result<Vec<Matrix>> {
    if j_max < 1 {
        return Err(Error::InvalidArgument("j_max must be at least 1".into()));
    }
    let n = ahat_k.nrows();
    if ahat_k.ncols() != n || delta_k.shape() != (n, n) {
        return Err(dim_err(
            "pj_sequence",
            format!("{n}x{n}"),
            format!("{:?}", delta_k.shape()),
        ));
    }
    let abs_pow: Vec<Matrix> = powers(ahat_k, j_max).iter().map(|p| p.abs()).collect();
    let mut p = vec![Matrix::identity(n, n)];
    for j in 1..j_max {
        let mut next = abs_pow[j].clone();
        for h in 1..=j {
            next += &p[h - 1] * delta_k * &abs_pow[j - h];
        }
        p.push(next);
    }
    Ok(p)
}

/// Radii of `𝓘_{A_K}ʲ 𝓘_Δ` by `j` successive interval products. A coarser
/// enclosure than the table, kept for comparison.
pub fn interval_power_radii(i_ak: &IntervalMatrix, delta_s: &Matrix, count: usize) -> Result<Vec<Matrix>> {
    let mut cur = IntervalMatrix::symmetric(delta_s.clone())?;
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        if j > 0 {
            cur = i_ak.product(&cur)?;
        }
        out.push(cur.radius().clone());
    }
    Ok(out)
}

/// Largest spectral radius over `samples` uniform members of `𝓘_{A_K}`.
/// A spot check only.
pub fn gain_spotcheck(i_ak: &IntervalMatrix, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples.max(1) {
        let a = i_ak.sample(&mut rng);
        worst = worst.max(spectral_radius(&a));
    }
    worst
}

pub fn spectral_radius(a: &Matrix) -> f64 {
    a.complex_eigenvalues().iter().map(|l| l.norm()).fold(0.0, f64::max)
}

impl BoundsTable {
    pub fn ahat_k(&self) -> &Matrix {
        &self.ahat_k
    }

    pub fn delta_k(&self) -> &Matrix {
        &self.delta_k
    }

    pub fn delta_s(&self) -> &Matrix {
        &self.delta_s
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn state_dim(&self) -> usize {
        self.delta_s.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.delta_s.ncols() - self.delta_s.nrows()
    }

    pub fn radii(&self) -> &[Matrix] {
        &self.radii
    }

    /// `Δ_I(j)`.
    pub fn radius(&self, j: usize) -> &Matrix {
        &self.radii[j]
    }

    /// `Â_K^p` for `p < n_max`.
    pub fn power(&self, p: usize) -> &Matrix {
        &self.powers[p]
    }

    pub fn interval(&self) -> IntervalMatrix {
        IntervalMatrix::new(self.ahat_k.clone(), self.delta_k.clone())
            .expect("table holds a valid closed-loop interval")
    }

    /// Largest entry of each `Δ_I(j)`.
    pub fn max_entries(&self) -> Vec<f64> {
        self.radii.iter().map(|r| r.max()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut t: BoundsTable = serde_json::from_str(s)?;
        check_table_args(&t.ahat_k, &t.delta_k, &t.delta_s, t.n_max)?;
        if t.radii.len() != t.n_max || t.radii.iter().any(|r| r.shape() != t.delta_s.shape()) {
            return Err(Error::InvalidArgument("bounds table radii do not match n_max".into()));
        }
        t.powers = powers(&t.ahat_k, t.n_max);
        Ok(t)
    }
}

/// Hex sha256 over the shapes and bit patterns of the inputs.
pub fn cache_key(parts: &[&Matrix], n_max: usize) -> String {
    let mut h = Sha256::new();
    h.update(b"tormpc-bounds-v1");
    h.update((n_max as u64).to_le_bytes());
    for m in parts {
        h.update((m.nrows() as u64).to_le_bytes());
        h.update((m.ncols() as u64).to_le_bytes());
        for v in m.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("bounds-{key}.json"))
}

/// Loads `bounds-<key>.json` from `dir` if present and well formed, otherwise
/// runs `build` and writes the result there.
pub fn load_or_compute<F>(dir: &Path, key: &str, build: F) -> Result<(BoundsTable, bool)>
where
    F: FnOnce() -> Result<BoundsTable>,
{
    let path = cache_path(dir, key);
    if let Ok(text) = fs::read_to_string(&path) {
        match BoundsTable::from_json(&text) {
            Ok(t) => return Ok((t, true)),
            Err(e) => log::warn!("ignoring unreadable bounds cache {}: {e}", path.display()),
        }
    }
    let table = build()?;
    fs::create_dir_all(dir)?;
    fs::write(&path, table.to_json()?)?;
    Ok((table, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, v)
    }

    fn scalar_case() -> (IntervalMatrix, Matrix) {
        (
            IntervalMatrix::new(m(1, 1, &[0.5]), m(1, 1, &[0.1])).unwrap(),
            m(1, 2, &[0.1, 0.2]),
        )
    }

    #[test]
    fn closed_loop_examples() {
        let a = m(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let k = m(1, 2, &[-0.5, -1.0]);
        let z2 = Matrix::zeros(2, 2);
        let z1 = Matrix::zeros(2, 1);
        let cl = closed_loop_interval(&a, &b, &z2, &z1, &k).unwrap();
        assert_eq!(cl.delta_k, z2);
        assert_eq!(cl.ahat_k, &a + &b * &k);

        let da = m(2, 2, &[0.1, 0.0, 0.0, 0.2]);
        let db = m(2, 1, &[0.0, 0.3]);
        let cl = closed_loop_interval(&a, &b, &da, &db, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(cl.ahat_k, a);
        assert_eq!(cl.delta_k, da);

        let cl = closed_loop_interval(&a, &b, &da, &db, &k).unwrap();
        assert_eq!(cl.delta_k, m(2, 2, &[0.1, 0.0, 0.15, 0.5]));
        assert!(closed_loop_interval(&a, &b, &da, &db, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn scalar_table_by_hand() {
        let (i, ds) = scalar_case();
        let t = bound_radii_direct(&i, &ds, 3).unwrap();
        assert_eq!(t.radius(0), &ds);
        // One operator step: C·G keeps 0.5·[0.1, 0.2]; F = 0.1·[0.1, 0.2].
        let r1 = [0.5 * 0.1 + 0.1 * 0.1, 0.5 * 0.2 + 0.1 * 0.2];
        assert!((t.radius(1)[(0, 0)] - r1[0]).abs() < 1e-15);
        assert!((t.radius(1)[(0, 1)] - r1[1]).abs() < 1e-15);
        let rec = bound_radii_recursive(i.center(), i.radius(), &ds, 3).unwrap();
        for j in 0..3 {
            assert!((t.radius(j) - rec.radius(j)).abs().max() < 1e-15);
        }
        // Scalar recursion r_{j+1} = 0.6 r_j.
        assert!((t.radius(2)[(0, 0)] - 0.1 * 0.36).abs() < 1e-15);
    }

    #[test]
    fn f_and_p_sequences() {
        let ak = m(2, 2, &[0.5, 0.2, -0.1, 0.3]);
        let dk = m(2, 2, &[0.01, 0.0, 0.02, 0.03]);
        let ds = m(2, 3, &[0.1, 0.0, 0.05, 0.0, 0.2, 0.01]);
        let f = f_sequence(&ak, &dk, &ds, 5).unwrap();
        assert_eq!(f[0], ds);
        assert_eq!(f[1], &dk * &ds);
        let p = pj_sequence(&ak, &dk, 5).unwrap();
        assert_eq!(p[0], Matrix::identity(2, 2));
        assert!((&p[1] - (ak.abs() + &dk)).abs().max() < 1e-15);
        for j in 1..5 {
            let lhs = &f[j];
            let rhs = &dk * &p[j - 1] * &ds;
            assert!((lhs - rhs).abs().max() <= 1e-12 * lhs.max());
        }
        assert!(pj_sequence(&ak, &dk, 0).is_err());
    }

    #[test]
    fn direct_matches_recursive_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = rng.random_range(2..5);
            let mm = rng.random_range(1..3);
            let ak = Matrix::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
            let dk = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..0.02));
            let ds = Matrix::from_fn(n, n + mm, |_, _| rng.random_range(0.0..0.05));
            let i = IntervalMatrix::new(ak.clone(), dk.clone()).unwrap();
            let d = bound_radii_direct(&i, &ds, 25).unwrap();
            let r = bound_radii_recursive(&ak, &dk, &ds, 25).unwrap();
            for j in 0..25 {
                let scale = d.radius(j).max().max(1e-300);
                assert!((d.radius(j) - r.radius(j)).abs().max() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn radii_enclose_sampled_error_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ak = m(2, 2, &[0.6, 0.3, -0.2, 0.5]);
        let dk = m(2, 2, &[0.02, 0.01, 0.0, 0.03]);
        let ds = m(2, 3, &[0.1, 0.0, 0.05, 0.0, 0.2, 0.01]);
        let i = IntervalMatrix::new(ak, dk).unwrap();
        let t = bound_radii_direct(&i, &ds, 8).unwrap();
        let id = IntervalMatrix::symmetric(ds).unwrap();
        for _ in 0..1000 {
            let mut prod = id.sample(&mut rng);
            for j in 0..8 {
                if j > 0 {
                    prod = i.sample(&mut rng) * prod;
                }
                let ok = prod.iter().zip(t.radius(j).iter()).all(|(p, r)| p.abs() <= r + 1e-12);
                assert!(ok);
            }
        }
    }

    #[test]
    fn interval_powers_are_coarser() {
        let (i, ds) = scalar_case();
        let coarse = interval_power_radii(&i, &ds, 5).unwrap();
        let t = bound_radii_direct(&i, &ds, 5).unwrap();
        for j in 0..5 {
            assert!(coarse[j].iter().zip(t.radius(j).iter()).all(|(c, r)| *c >= r - 1e-15));
        }
    }

    #[test]
    fn spotcheck_examples() {
        let half = IntervalMatrix::point(Matrix::identity(3, 3) * 0.5);
        assert!((gain_spotcheck(&half, 10, 0) - 0.5).abs() < 1e-12);
        let big = IntervalMatrix::point(Matrix::identity(2, 2) * 1.1);
        assert!(gain_spotcheck(&big, 10, 0) > 1.0);
        let rot = m(2, 2, &[0.0, -0.9, 0.9, 0.0]);
        assert!((spectral_radius(&rot) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn cache_round_trip() {
        let (i, ds) = scalar_case();
        let t = bound_radii_direct(&i, &ds, 4).unwrap();
        let back = BoundsTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.power(2), t.power(2));

        let dir = tempfile::tempdir().unwrap();
        let key = cache_key(&[i.center(), i.radius(), &ds], 4);
        let (first, hit) = load_or_compute(dir.path(), &key, || Ok(t.clone())).unwrap();
        assert!(!hit);
        let (second, hit) = load_or_compute(dir.path(), &key, || panic!("cache should have been used")).unwrap();
        assert!(hit);
        assert_eq!(first, second);
        assert_ne!(key, cache_key(&[i.center(), i.radius(), &ds], 5));
    }
}
