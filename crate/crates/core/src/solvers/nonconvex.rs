//! Multistart solver for `0 < p < 1`.

use alloc::vec::Vec;
use core::cmp::Ordering;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::morozov::{affine_minimize, morozov_search, scale_to_boundary};
use super::tikhonov::InnerSolver;
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::problem::{lp_power_sum, Problem, SolveReport, Status};

/// Candidates refined on their own support after the multistart phase.
const POLISHED_CANDIDATES: usize = 3;

struct Candidate {
    x: DVector<f64>,
    objective: f64,
    alpha: Option<f64>,
}

fn better(a: &Candidate, b: &Candidate) -> Ordering {
    a.objective.total_cmp(&b.objective).then_with(|| {
        a.x.iter()
            .zip(b.x.iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn support_of(x: &DVector<f64>) -> Vec<bool> {
    x.iter().map(|v| *v != 0.0).collect()
}

/// Least-squares fit of `y` using only the columns in `support`.
fn restricted_fit(f: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> DVector<f64> {
    let sub = f.select_columns(support);
    let (coef, _) = least_squares(&sub, y);
    let mut x = DVector::zeros(f.ncols());
    for (k, &j) in support.iter().enumerate() {
        x[j] = coef[k];
    }
    x
}

/// Supports of a greedy pursuit: each step adds the column most correlated
/// with the current residual and refits.
fn greedy_supports(f: &DMatrix<f64>, y: &DVector<f64>, max_size: usize) -> Vec<Vec<usize>> {
    let n = f.ncols();
    let norms: Vec<f64> = (0..n).map(|j| f.column(j).norm()).collect();
    let mut support: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    let mut residual = y.clone();
    while support.len() < max_size {
        let next = (0..n)
            .filter(|j| !support.contains(j) && norms[*j] > 0.0)
            .map(|j| (j, f.column(j).dot(&residual).abs() / norms[j]))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((j, _)) = next else { break };
        support.push(j);
        support.sort_unstable();
        let x = restricted_fit(f, y, &support);
        residual = y - f * &x;
        out.push(support.clone());
    }
    out
}

/// Starting points: the least-squares solution, fits on the greedy
/// supports, two small perturbations of zero, then random sparse fits.
fn starting_points(
    f: &DMatrix<f64>,
    y: &DVector<f64>,
    x_ls: &DVector<f64>,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<DVector<f64>> {
    let (m, n) = f.shape();
    let scale = x_ls.amax().max(f64::MIN_POSITIVE);
    let max_support = (m.min(n) / 2).max(1);
    let mut starts = Vec::with_capacity(count);
    starts.push(x_ls.clone());
    for support in greedy_supports(f, y, m.min(n)) {
        if starts.len() + 2 >= count {
            break;
        }
        starts.push(restricted_fit(f, y, &support));
    }
    let greedy = starts.len() - 1;
    if greedy + 1 >= count {
        starts.truncate(count);
        return starts;
    }
    for i in (1 + greedy)..count {
        let i = i - greedy;
        if i <= 2 {
            let x = DVector::from_fn(n, |_, _| 1e-2 * scale * rng.sample::<f64, _>(StandardNormal));
            starts.push(x);
        } else {
            let k = 1 + (i - 3) % max_support;
            let support = sample(rng, n, k).into_vec();
            starts.push(restricted_fit(f, y, &support));
        }
    }
    starts
}

/// Solves the constrained problem for `p ∈ (0, 1)` by multistart proximal
/// descent with a Morozov search per start, keeping the feasible candidate
/// with the smallest `R_p` (ties: lexicographically smallest vector).
///
/// Only a local solution is guaranteed; global optimality is checked
/// against exhaustive oracles on small instances.
pub fn nonconvex_solve(problem: &Problem, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let p = problem.p();
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::UnsupportedExponent(p));
    }
    let f = problem.operator();
    let y = problem.data();
    let beta = problem.beta();
    let n = problem.cols();
    let tol = problem.feasibility_tolerance();

    if y.norm() <= beta {
        let mut r = SolveReport::evaluate(problem, DVector::zeros(n), None, Status::ZeroFeasible, 0);
        r.restarts_used = 0;
        return Ok(r);
    }
    let (x_ls, r_ls) = least_squares(f, y);
    if r_ls > beta + tol {
        return Ok(SolveReport::infeasible(problem, x_ls, 0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let starts = starting_points(f, y, &x_ls, opts.restarts, &mut rng);
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut iterations = 0usize;
    let push = |x: DVector<f64>, alpha: Option<f64>, candidates: &mut Vec<Candidate>| {
        if (f * &x - y).norm() <= beta + tol {
            let objective = lp_power_sum(x.as_slice(), p);
            candidates.push(Candidate { x, objective, alpha });
        }
    };

    if beta <= r_ls + tol {
        for start in &starts {
            let (x, iters) = affine_minimize(f, y, p, start, opts);
            iterations += iters;
            push(x, None, &mut candidates);
        }
    } else {
        let inner = InnerSolver::new(f, y, p, opts);
        for start in &starts {
            // A feasible start keeps its support as a candidate of its own.
            push(scale_to_boundary(f, y, start, beta), None, &mut candidates);
            if let Some(outcome) = morozov_search(&inner, beta, tol, start, opts) {
                iterations += outcome.iterations;
                for (alpha, x) in outcome.feasible {
                    push(scale_to_boundary(f, y, &x, beta), Some(alpha), &mut candidates);
                }
            }
        }

        // Refine the best few on their own support, where the landscape is smooth.
        candidates.sort_by(better);
        let mut seen: Vec<Vec<bool>> = Vec::new();
        let mut polished = Vec::new();
        for c in &candidates {
            if polished.len() >= POLISHED_CANDIDATES {
                break;
            }
            let support = support_of(&c.x);
            if seen.contains(&support) || !support.iter().any(|s| *s) {
                continue;
            }
            seen.push(support.clone());
            let restricted = InnerSolver::new(f, y, p, opts).restricted_to(support);
            if let Some(outcome) = morozov_search(&restricted, beta, tol, &c.x, opts) {
                iterations += outcome.iterations;
                let x = if outcome.matched {
                    outcome.x
                } else {
                    scale_to_boundary(f, y, &outcome.x, beta)
                };
                polished.push((x, outcome.alpha));
            }
        }
        for (x, alpha) in polished {
            push(x, Some(alpha), &mut candidates);
        }
    }

    let best = candidates.into_iter().min_by(better);
    let mut report = match best {
        Some(c) => SolveReport::evaluate(problem, c.x, c.alpha, Status::ConstraintActive, iterations),
        None => SolveReport::infeasible(problem, x_ls, iterations),
    };
    report.restarts_used = starts.len();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn separable_identity_instance() {
        // min |u|^{1/2} + |w|^{1/2} with (u − 2)² + w² ≤ 1 → (1, 0).
        let pr = Problem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![2.0, 0.0]), 1.0, 0.5)
            .unwrap();
        let r = nonconvex_solve(&pr, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::ConstraintActive);
        assert!((r.x[0] - 1.0).abs() < 1e-5, "{}", r.x);
        assert!(r.x[1].abs() < 1e-9);
        assert_eq!(r.restarts_used, 16);
    }

    #[test]
    fn zero_when_radius_covers_data() {
        let pr = Problem::new(DMatrix::identity(2, 2), DVector::from_vec(vec![0.6, 0.8]), 1.0, 0.5)
            .unwrap();
        let r = nonconvex_solve(&pr, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, Status::ZeroFeasible);
        assert_eq!(r.x, DVector::zeros(2));
    }

    #[test]
    fn rejects_convex_exponent() {
        let pr = Problem::new(DMatrix::identity(1, 1), DVector::from_vec(vec![1.0]), 0.1, 1.0)
            .unwrap();
        assert!(nonconvex_solve(&pr, &SolverOptions::default()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = DMatrix::from_fn(4, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(4, |i, _| 1.0 + i as f64 * 0.25);
        let pr = Problem::new(f, y, 0.05, 0.5).unwrap();
        let opts = SolverOptions { rng_seed: 9, ..SolverOptions::default() };
        let a = nonconvex_solve(&pr, &opts).unwrap();
        let b = nonconvex_solve(&pr, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.discrepancy <= 0.05 * (1.0 + 1e-6) + 1e-9, "{a:?}");
    }
}
