use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use residual_core::linalg::least_squares;
use residual_core::oracle::{grid_search_solve, OracleOptions};
use residual_core::{feasible, regularizer_value, residual_method_solve, value_function, Problem, SolverOptions, Status};

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(1.5), Just(2.0)]
}

/// Operator, data and a radius fraction `u ∈ [0, 1.2]` of `‖y‖`.
fn instance(max_m: usize, max_n: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, f64)> {
    (1..=max_m, 1..=max_n).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(-2.0f64..2.0, m * n).prop_map(move |v| DMatrix::from_vec(m, n, v)),
            prop::collection::vec(-3.0f64..3.0, m).prop_map(DVector::from_vec),
            0.0f64..1.2,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reports_are_consistent((f, y, u) in instance(4, 5), p in exponent()) {
        let beta = u * y.norm();
        let problem = Problem::new(f.clone(), y.clone(), beta, p).unwrap();
        let r = residual_method_solve(&problem, &SolverOptions::default()).unwrap();
        let (_, r_ls) = least_squares(&f, &y);
        let tol = problem.feasibility_tolerance();
        prop_assert!((r.objective - regularizer_value(r.x.as_slice(), p).unwrap()).abs() <= 1e-12 * (1.0 + r.objective));
        prop_assert!((r.discrepancy - (&f * &r.x - &y).norm()).abs() <= 1e-12 * (1.0 + y.norm()));
        match r.status {
            Status::Infeasible => prop_assert!(r_ls > beta),
            Status::ZeroFeasible => {
                prop_assert!(y.norm() <= beta);
                prop_assert!(r.x.iter().all(|v| *v == 0.0));
            }
            _ => {
                prop_assert!(feasible(&problem, &r.x, tol));
                prop_assert!(y.norm() > beta);
            }
        }
        if y.norm() <= beta {
            prop_assert_eq!(r.status, Status::ZeroFeasible);
        }
        if r_ls > beta + tol {
            prop_assert_eq!(r.status, Status::Infeasible);
        }
    }

    // Convex solves agree with the exhaustive grid oracle and never beat it by more
    // than the oracle's own resolution.
    #[test]
    fn convex_solver_matches_oracle((f, y, u) in instance(3, 2), p in prop_oneof![Just(1.0), Just(1.5), Just(2.0)]) {
        let (_, r_ls) = least_squares(&f, &y);
        let beta = r_ls + (0.05 + 0.9 * u / 1.2) * (y.norm() - r_ls);
        prop_assume!(y.norm() - r_ls > 1e-3);
        let problem = Problem::new(f, y, beta, p).unwrap();
        let opts = SolverOptions { discrepancy_match_tolerance: 1e-10, ..SolverOptions::default() };
        let r = residual_method_solve(&problem, &opts).unwrap();
        let o = grid_search_solve(&problem, &OracleOptions::precise(1e-8, 400)).unwrap();
        prop_assert!(r.is_feasible() && o.is_feasible());
        prop_assert!((r.objective - o.objective).abs() <= 1e-5, "solver {} oracle {}", r.objective, o.objective);
    }

    #[test]
    fn value_function_is_nonincreasing((f, y, _u) in instance(3, 4), p in prop_oneof![Just(1.0), Just(1.5), Just(2.0)]) {
        let problem = Problem::new(f, y.clone(), 0.0, p).unwrap();
        let grid: Vec<f64> = (0..8).map(|i| y.norm() * i as f64 / 7.0).collect();
        let values = value_function(&problem, &grid, &SolverOptions::default()).unwrap();
        for w in values.windows(2) {
            prop_assert!(w[1].value <= w[0].value + 1e-6 * (1.0 + w[0].value.abs()) || w[0].value.is_infinite());
        }
    }
}

#[test]
fn solver_is_deterministic() {
    let f = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -0.2, 0.3, 1.0, 0.7]);
    let y = DVector::from_vec(vec![1.0, -2.0]);
    let problem = Problem::new(f, y, 0.3, 0.5).unwrap();
    let opts = SolverOptions { rng_seed: 9, ..SolverOptions::default() };
    assert_eq!(residual_method_solve(&problem, &opts).unwrap(), residual_method_solve(&problem, &opts).unwrap());
}
