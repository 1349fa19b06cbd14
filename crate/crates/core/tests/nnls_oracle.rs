//! The active-set solver against the exhaustive oracle, plus the solver
//! invariants stated as properties.

use gravicont::{brute_force_nnls, kkt_check, nnls_solve, LsSolver, NnlsOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn objective(a: &DMatrix<f64>, f: &[f64], x: &[f64]) -> f64 {
    let fx = a * DMatrix::from_column_slice(x.len(), 1, x);
    f.iter()
        .zip(fx.iter())
        .map(|(v, p)| (v - p) * (v - p))
        .sum()
}

fn small_instance() -> impl Strategy<Value = (DMatrix<f64>, Vec<f64>)> {
    (2usize..9, 1usize..7).prop_flat_map(|(m, n)| {
        (
            proptest::collection::vec(-100i32..100, m * n),
            proptest::collection::vec(-100i32..100, m),
        )
            .prop_map(move |(av, fv)| {
                let a = DMatrix::from_fn(m, n, |i, j| av[i * n + j] as f64 / 25.0);
                let f: Vec<f64> = fv.iter().map(|v| *v as f64 / 25.0).collect();
                (a, f)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    // The active-set objective matches the exhaustive enumeration.
    #[test]
    fn objective_matches_oracle((a, f) in small_instance()) {
        let solved = nnls_solve(&a, &f, &NnlsOptions::default()).unwrap();
        let oracle = brute_force_nnls(&a, &f).unwrap();
        let bound = 1e-10 * (1.0 + f.iter().map(|v| v * v).sum::<f64>());
        let delta = (objective(&a, &f, &solved.phi) - objective(&a, &f, &oracle)).abs();
        prop_assert!(delta <= bound, "objective gap {delta} exceeds {bound}");
    }

    // Every converged solve satisfies the KKT conditions at the resolved
    // default tolerance.
    #[test]
    fn converged_solves_pass_kkt((a, f) in small_instance()) {
        let solved = nnls_solve(&a, &f, &NnlsOptions::default()).unwrap();
        prop_assert!(solved.converged);
        let atf_inf = (a.transpose() * DMatrix::from_column_slice(f.len(), 1, &f)).amax();
        let tol = 1e-10 * atf_inf;
        let report = kkt_check(&a, &f, &solved.phi, tol).unwrap();
        prop_assert!(report.feasible,
            "gradient {:e}, complementarity {:e}, tol {:e}",
            report.max_positive_gradient, report.max_complementarity_violation, tol);
        // The reported residual is consistent when recomputed.
        let recomputed = objective(&a, &f, &solved.phi).sqrt();
        prop_assert!((recomputed - solved.residual_norm).abs()
            <= 1e-10 * (1.0 + recomputed));
    }

    // Both subproblem backends minimize the same objective.
    #[test]
    fn backends_agree((a, f) in small_instance()) {
        let hh = nnls_solve(&a, &f, &NnlsOptions::default()).unwrap();
        let ne = nnls_solve(
            &a,
            &f,
            &NnlsOptions { ls_solver: LsSolver::NormalEquations, ..Default::default() },
        )
        .unwrap();
        let bound = 1e-8 * (1.0 + f.iter().map(|v| v * v).sum::<f64>());
        let delta = (objective(&a, &f, &hh.phi) - objective(&a, &f, &ne.phi)).abs();
        prop_assert!(delta <= bound, "backend objective gap {delta}");
    }

    // Scaling the system by c > 0 leaves the minimizer unchanged.
    #[test]
    fn scale_equivariance((a, f) in small_instance(), c in 1u32..10_000) {
        let c = c as f64 / 100.0;
        let base = nnls_solve(&a, &f, &NnlsOptions::default()).unwrap();
        let scaled_f: Vec<f64> = f.iter().map(|v| c * v).collect();
        let scaled = nnls_solve(&a.scale(c), &scaled_f, &NnlsOptions::default()).unwrap();
        for (x, y) in base.phi.iter().zip(&scaled.phi) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }
}

#[test]
fn oracle_prefers_small_lexicographic_supports() {
    // Two identical columns: either alone reproduces f; the oracle must
    // pick support {0}.
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
    let x = brute_force_nnls(&a, &[1.0, 2.0]).unwrap();
    assert!((x[0] - 1.0).abs() <= 1e-10);
    assert_eq!(x[1], 0.0);
}

#[test]
fn solver_handles_tall_and_wide_shapes() {
    let tall = DMatrix::from_fn(40, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 / 11.0 + 0.1);
    let f: Vec<f64> = (0..40).map(|i| ((i % 5) as f64) - 1.0).collect();
    let r = nnls_solve(&tall, &f, &NnlsOptions::default()).unwrap();
    assert!(r.converged);
    assert!(r.phi.iter().all(|&v| v >= 0.0));

    let wide = DMatrix::from_fn(3, 12, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
    let f = vec![1.0, -2.0, 0.5];
    let r = nnls_solve(&wide, &f, &NnlsOptions::default()).unwrap();
    assert!(r.converged);
    let oracle = brute_force_nnls(&wide, &f).unwrap();
    let gap = (objective(&wide, &f, &r.phi) - objective(&wide, &f, &oracle)).abs();
    assert!(gap <= 1e-10 * (1.0 + f.iter().map(|v| v * v).sum::<f64>()));
}
