use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tormpc::bounds::{bound_radii_direct, bound_radii_recursive, closed_loop_interval, stack_delta_s};
use tormpc::controller::{enlarge_terminal_set, run_closed_loop, RunOptions, RunOutcome};
use tormpc::lp::{lp_solve, LpProblem, LpStatus, RowKind};
use tormpc::ocp::solve_min_time_auto;
use tormpc::sim::{sample_plant, SampleMode};
use tormpc::{Matrix, Polytope, Scenario, Vector, Zonotope};

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

fn double_integrator() -> Scenario {
    Scenario {
        a_hat: Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
        b_hat: Matrix::from_row_slice(2, 1, &[0.125, 0.5]),
        delta_a: Matrix::from_row_slice(2, 2, &[0.0, 0.01, 0.005, 0.01]),
        delta_b: Matrix::from_row_slice(2, 1, &[0.01, 0.02]),
        k_gain: Matrix::from_row_slice(1, 2, &[-0.5, -1.0]),
        state_poly: Polytope::symmetric_box(2, 10.0).unwrap(),
        input_poly: Polytope::symmetric_box(1, 1.0).unwrap(),
        n_max: 40,
        dt: 0.5,
        state_labels: vec![],
        input_labels: vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bound_radii_are_nonnegative_and_start_at_delta_s(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (rng.random_range(1..5), rng.random_range(1..4));
        let a = random_matrix(&mut rng, n, n, -0.6, 0.6);
        let b = random_matrix(&mut rng, n, m, -1.0, 1.0);
        let da = random_matrix(&mut rng, n, n, 0.0, 0.05);
        let db = random_matrix(&mut rng, n, m, 0.0, 0.05);
        let k = random_matrix(&mut rng, m, n, -0.3, 0.3);
        let cl = closed_loop_interval(&a, &b, &da, &db, &k).unwrap();
        let ds = stack_delta_s(&da, &db).unwrap();
        let rec = bound_radii_recursive(&cl.ahat_k, &cl.delta_k, &ds, 15).unwrap();
        let direct = bound_radii_direct(&cl.interval, &ds, 15).unwrap();
        prop_assert_eq!(rec.radius(0), &ds);
        for (r, d) in rec.radii().iter().zip(direct.radii()) {
            prop_assert_eq!(r.shape(), (n, n + m));
            prop_assert!(r.iter().all(|&x| x >= 0.0));
            for (x, y) in r.iter().zip(d.iter()) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()) + 1e-300);
            }
        }
    }

    #[test]
    fn lp_optimum_is_feasible_and_beats_known_point(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nv = rng.random_range(1..12);
        let mut p = LpProblem::new();
        let vars = p.add_vars(nv, -1.0, 1.0);
        let point: Vec<f64> = (0..nv).map(|_| rng.random_range(-1.0..1.0)).collect();
        let costs: Vec<f64> = (0..nv).map(|_| rng.random_range(-1.0..1.0)).collect();
        for v in vars.clone() {
            p.set_cost(v, costs[v]);
        }
        for _ in 0..rng.random_range(0..10) {
            let coeffs: Vec<(usize, f64)> = vars.clone().map(|v| (v, rng.random_range(-2.0..2.0))).collect();
            let at: f64 = coeffs.iter().map(|&(v, c)| c * point[v]).sum();
            let (kind, rhs) = match rng.random_range(0..3) {
                0 => (RowKind::Le, at + rng.random_range(0.0..1.0)),
                1 => (RowKind::Ge, at - rng.random_range(0.0..1.0)),
                _ => (RowKind::Eq, at),
            };
            p.add_row(coeffs, kind, rhs);
        }
        let r = lp_solve(&p);
        prop_assert_eq!(r.status, LpStatus::Optimal);
        prop_assert!(p.max_violation(&r.x) <= 1e-7);
        let cost = |x: &[f64]| -> f64 { costs.iter().zip(x).map(|(c, x)| c * x).sum() };
        prop_assert!(cost(&r.x) <= cost(&point) + 1e-7);
    }

    #[test]
    fn ocp_solution_follows_nominal_dynamics(x in -8.0f64..8.0, v in -2.5f64..2.5) {
        let sc = double_integrator();
        let model = sc.ocp_model().unwrap();
        let x0 = Vector::from_vec(vec![x, v]);
        let spec = model.spec(x0.clone(), Zonotope::origin(2), 0).unwrap();
        if let Some(sol) = solve_min_time_auto(&spec).unwrap() {
            prop_assert_eq!(sol.v_seq.len(), sol.horizon);
            prop_assert_eq!(sol.z_seq.len(), sol.horizon + 1);
            prop_assert_eq!(&sol.z_seq[0], &x0);
            for j in 0..sol.horizon {
                let next = &sc.a_hat * &sol.z_seq[j] + &sc.b_hat * &sol.v_seq[j];
                prop_assert!((next - &sol.z_seq[j + 1]).amax() <= 1e-8);
            }
        }
    }

    #[test]
    fn enlargement_keeps_terminal_set_centered(seed in 0u64..10_000, n_prev in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sc = double_integrator();
        let model = sc.ocp_model().unwrap();
        let ds = sc.delta_s();
        let mut z = Zonotope::origin(2);
        for _ in 0..3 {
            let x = Vector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
            let u = Vector::from_fn(1, |_, _| rng.random_range(-1.0..1.0));
            z = enlarge_terminal_set(&z, model.bounds.ahat_k(), &ds, n_prev, &x, &u).unwrap();
            prop_assert!(z.center().iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn run_horizons_strictly_shrink(seed in 0u64..10_000, x in -8.0f64..8.0, v in -2.0f64..2.0) {
        let sc = double_integrator();
        let model = sc.ocp_model().unwrap();
        let plant = sample_plant(&sc, seed, SampleMode::Uniform);
        let x0 = Vector::from_vec(vec![x, v]);
        if let RunOutcome::Completed(log) = run_closed_loop(&model, &plant, &x0, seed, RunOptions::default()).unwrap() {
            prop_assert_eq!(log.t_c, log.u_hist.len());
            prop_assert!(log.t_c <= log.n_star_hist[0]);
            prop_assert!(log.t_l <= log.t_c);
            for w in log.n_star_hist.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
        }
    }
}
