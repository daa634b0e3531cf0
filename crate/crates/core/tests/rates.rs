use residual_core::rates::{build_rate_instance, geometric_grid, noise_direction, run_rate_experiment, RateInstanceSpec};
use residual_core::SolverOptions;

#[test]
fn sparse_instances_have_valid_certificates() {
    for (p, seed) in [(1.0, 1), (1.5, 2), (2.0, 3)] {
        let inst = build_rate_instance(&RateInstanceSpec::new(16, 32, p, 3, seed)).unwrap();
        assert_eq!(inst.support.len(), 3);
        let nonzero: Vec<usize> = (0..32).filter(|&i| inst.x_dagger[i] != 0.0).collect();
        assert_eq!(nonzero, inst.support);
        let cert = inst.certificate.as_ref().unwrap();
        assert!(cert.fit_residual <= 1e-8, "p={p}: {}", cert.fit_residual);
        let xi = inst.operator.tr_mul(&cert.omega);
        for i in 0..32 {
            if inst.support.contains(&i) {
                continue;
            }
            if p == 1.0 {
                assert!(xi[i].abs() < 1.0, "off-support |ξ| = {}", xi[i].abs());
            } else {
                assert!(xi[i].abs() < 1e-10);
            }
        }
    }
}

#[test]
fn nonconvex_instances_are_injective_on_the_support() {
    let inst = build_rate_instance(&RateInstanceSpec::new(12, 24, 0.5, 3, 4)).unwrap();
    assert!(inst.certificate.is_none());
    let cols = inst.operator.select_columns(&inst.support);
    assert!(cols.svd(false, false).singular_values.min() > 1e-6);
}

#[test]
fn noise_draws_are_unit_directions_with_bounded_length() {
    for seed in 0..50 {
        let (d, u) = noise_direction(7, seed, 9);
        assert!((d.norm() - 1.0).abs() < 1e-12);
        assert!((0.5..=1.0).contains(&u));
        assert_eq!((d.clone(), u), noise_direction(7, seed, 9));
    }
}

#[test]
fn experiment_rows_witness_feasibility_and_the_linear_bound() {
    let inst = build_rate_instance(&RateInstanceSpec::new(10, 20, 2.0, 0, 5)).unwrap();
    let cert = inst.certificate.clone().unwrap();
    let table = run_rate_experiment(&inst, &geometric_grid(1e-3, 1e-1, 4), 3, &SolverOptions::default()).unwrap();
    assert_eq!(table.rows.len(), 12);
    assert!(table.diagnostics.is_empty());
    for r in &table.rows {
        assert!(r.noise <= r.beta && r.noise >= 0.5 * r.beta * (1.0 - 1e-12));
        assert!(r.discrepancy <= r.beta * (1.0 + 1e-8));
        // R(x_β) ≤ R(x†) since x† is feasible
        assert!(r.objective_gap <= 1e-8);
        let d = r.bregman.unwrap();
        assert!((d - r.err_l2 * r.err_l2).abs() <= 1e-9);
        assert!(d <= cert.omega.norm() * (r.beta + r.noise) + 1e-8);
    }
    let again = run_rate_experiment(&inst, &geometric_grid(1e-3, 1e-1, 4), 3, &SolverOptions::default()).unwrap();
    assert_eq!(table, again);
}
