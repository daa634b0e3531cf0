//! Brute-force reference solvers for tiny instances.
//!
//! [`grid_search_solve`] scans all but one coordinate on a grid and solves
//! the remaining coordinate exactly: for fixed other entries the feasible
//! values form an interval, and `|t|^p` is minimized at the point of that
//! interval closest to zero.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::problem::{lp_power_sum, Problem, SolveReport, Status};

/// Largest dimension accepted by [`grid_search_solve`].
pub const GRID_MAX_DIMENSION: usize = 3;
/// Largest coarse grid accepted by [`grid_search_solve`].
pub const GRID_MAX_POINTS: f64 = 1e8;
/// Largest dimension accepted by [`support_enumeration_solve`].
pub const SUPPORT_MAX_DIMENSION: usize = 12;
/// Largest support size accepted by [`support_enumeration_solve`].
pub const SUPPORT_MAX_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Per-coordinate `(lo, hi)`; the default box is
    /// `±max(2(‖x_ls‖∞ + 1), ‖x_ls‖_p)`, which contains every minimizer.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Coarse grid step.
    pub resolution: f64,
    pub refinements: usize,
    /// Step reduction per refinement.
    pub factor: usize,
    /// Incumbents kept for refinement at each level.
    pub candidates: usize,
    /// When set, `resolution` is the target step of the last pass: the
    /// coarse step becomes the smallest power of `factor` giving at most
    /// this many points across the widest side of the box, and
    /// `refinements` is derived from it.
    pub auto_coarse_points: Option<usize>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { bounds: None, resolution: 1e-3, refinements: 2, factor: 10, candidates: 16, auto_coarse_points: None }
    }
}

impl OracleOptions {
    /// Adaptive coarse grid of at most `points` per axis refined down to `target`.
    pub fn precise(target: f64, points: usize) -> Self {
        Self { resolution: target, auto_coarse_points: Some(points), ..Self::default() }
    }

    /// `(coarse step, refinements)` for a box whose widest side is `width`.
    fn schedule(&self, width: f64) -> (f64, usize) {
        let Some(points) = self.auto_coarse_points else {
            return (self.resolution, self.refinements);
        };
        let factor = self.factor as f64;
        let mut coarse = self.resolution;
        let mut refinements = 0;
        while width / coarse > points as f64 {
            coarse *= factor;
            refinements += 1;
        }
        (coarse, refinements)
    }

    /// Step of the last refinement pass.
    pub fn final_resolution(&self) -> f64 {
        match self.auto_coarse_points {
            Some(_) => self.resolution,
            None => self.resolution / (self.factor as f64).powi(self.refinements as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(Error::InvalidInput("oracle resolution must be positive".into()));
        }
        if self.factor < 2 || self.candidates == 0 || self.auto_coarse_points == Some(0) {
            return Err(Error::InvalidInput("refinement factor must be ≥ 2 and candidates ≥ 1".into()));
        }
        Ok(())
    }
}

/// Grid point with its exact completion.
#[derive(Debug, Clone, PartialEq)]
struct Candidate {
    scanned: Vec<f64>,
    exact: f64,
    violation: f64,
    objective: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.violation, self.objective)
            .partial_cmp(&(other.violation, other.objective))
            .map(|o| o.is_lt() || (o.is_eq() && self.scanned < other.scanned))
            .unwrap_or(false)
    }
}

struct Scanner<'a> {
    f: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    p: f64,
    radius: f64,
    exact_col: usize,
    scanned_cols: Vec<usize>,
    column_sq: f64,
    evaluations: usize,
}

impl Scanner<'_> {
    fn evaluate(&mut self, z: &[f64]) -> Candidate {
        self.evaluations += 1;
        let mut r = -self.y.clone();
        for (k, &j) in self.scanned_cols.iter().enumerate() {
            r.axpy(z[k], &self.f.column(j), 1.0);
        }
        let base = lp_power_sum(z, self.p);
        let a = self.column_sq;
        let rr = r.norm_squared();
        if a == 0.0 {
            let violation = (rr.sqrt() - self.radius).max(0.0);
            return Candidate { scanned: z.to_vec(), exact: 0.0, violation, objective: base };
        }
        let b = self.f.column(self.exact_col).dot(&r);
        let c = rr - self.radius * self.radius;
        // min_t ‖a t + r‖² = ‖r‖² − b²/a
        let closest = (rr - b * b / a).max(0.0).sqrt();
        let disc = b * b - a * c;
        if closest > self.radius || disc < 0.0 {
            let violation = (closest - self.radius).max(f64::MIN_POSITIVE);
            return Candidate { scanned: z.to_vec(), exact: -b / a, violation, objective: f64::INFINITY };
        }
        let root = disc.max(0.0).sqrt();
        let (lo, hi) = ((-b - root) / a, (-b + root) / a);
        let t = 0.0f64.clamp(lo, hi);
        Candidate { scanned: z.to_vec(), exact: t, violation: 0.0, objective: base + t.abs().powf(self.p) }
    }

    fn assemble(&self, c: &Candidate) -> DVector<f64> {
        let mut x = DVector::zeros(self.f.ncols());
        for (k, &j) in self.scanned_cols.iter().enumerate() {
            x[j] = c.scanned[k];
        }
        x[self.exact_col] = c.exact;
        x
    }
}

/// Keeps the `limit` best distinct candidates, best first.
fn offer(top: &mut Vec<Candidate>, c: Candidate, limit: usize) {
    if top.iter().any(|t| t.scanned == c.scanned) {
        return;
    }
    let pos = top.iter().position(|t| c.better_than(t)).unwrap_or(top.len());
    if pos < limit {
        top.insert(pos, c);
        top.truncate(limit);
    }
}

/// Visits every point of the lattice `step·ℤ^d` inside `ranges`.
fn scan_lattice(ranges: &[(f64, f64)], step: f64, mut visit: impl FnMut(&[f64])) {
    let bounds: Vec<(i64, i64)> =
        ranges.iter().map(|(lo, hi)| ((lo / step).ceil() as i64, (hi / step).floor() as i64)).collect();
    if bounds.iter().any(|(a, b)| a > b) {
        return;
    }
    let mut idx: Vec<i64> = bounds.iter().map(|b| b.0).collect();
    let mut point = alloc::vec![0.0; ranges.len()];
    loop {
        for (k, i) in idx.iter().enumerate() {
            point[k] = *i as f64 * step;
        }
        visit(&point);
        let mut k = 0;
        loop {
            if k == idx.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] <= bounds[k].1 {
                break;
            }
            idx[k] = bounds[k].0;
            k += 1;
        }
    }
}

/// Default search box: contains every `x` with `R_p(x) ≤ R_p(x_ls)`.
pub fn default_bounds(f: &DMatrix<f64>, y: &DVector<f64>, p: f64) -> Vec<(f64, f64)> {
    let (x_ls, _) = least_squares(f, y);
    let half = (2.0 * (x_ls.amax() + 1.0)).max(lp_power_sum(x_ls.as_slice(), p).powf(1.0 / p));
    alloc::vec![(-half, half); f.ncols()]
}

/// Exhaustive search for `min R_p(x)` subject to `‖Fx − y‖ ≤ β` with `n ≤ 3`.
///
/// The coarse grid consists of the multiples of `resolution` inside the box.
/// Each refinement rescans two old cells around every kept candidate at the
/// finer step. Feasibility uses the problem's tolerance, so the returned
/// point satisfies `‖Fx − y‖ ≤ β + tol` up to rounding.
pub fn grid_search_solve(problem: &Problem, opts: &OracleOptions) -> Result<SolveReport> {
    opts.validate()?;
    let n = problem.cols();
    if n > GRID_MAX_DIMENSION {
        return Err(Error::SizeLimit(alloc::format!(
            "grid search handles at most {GRID_MAX_DIMENSION} unknowns, got {n}"
        )));
    }
    let f = problem.operator();
    let bounds = match &opts.bounds {
        Some(b) if b.len() != n => {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        Some(b) => b.clone(),
        None => default_bounds(f, problem.data(), problem.p()),
    };
    // The best-conditioned column is solved exactly.
    let exact_col = (0..n)
        .max_by(|&a, &b| f.column(a).norm().total_cmp(&f.column(b).norm()).then(b.cmp(&a)))
        .unwrap_or(0);
    let scanned_cols: Vec<usize> = (0..n).filter(|&j| j != exact_col).collect();
    let ranges: Vec<(f64, f64)> = scanned_cols.iter().map(|&j| bounds[j]).collect();
    let width = ranges.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    let (coarse, refinements) = opts.schedule(width);
    let points: f64 = ranges.iter().map(|(lo, hi)| ((hi - lo) / coarse).floor() + 1.0).product();
    if points > GRID_MAX_POINTS {
        return Err(Error::SizeLimit(alloc::format!(
            "coarse grid would have {points:e} points (limit {GRID_MAX_POINTS:e})"
        )));
    }
    let mut scanner = Scanner {
        f,
        y: problem.data(),
        p: problem.p(),
        radius: problem.beta() + problem.feasibility_tolerance(),
        exact_col,
        scanned_cols,
        column_sq: f.column(exact_col).norm_squared(),
        evaluations: 0,
    };

    let mut top: Vec<Candidate> = Vec::new();
    scan_lattice(&ranges, coarse, |z| {
        let c = scanner.evaluate(z);
        offer(&mut top, c, opts.candidates);
    });
    let mut step = coarse;
    for _ in 0..refinements {
        let fine = step / opts.factor as f64;
        let centers: Vec<Vec<f64>> = top.iter().map(|c| c.scanned.clone()).collect();
        for center in centers {
            let window: Vec<(f64, f64)> = center
                .iter()
                .zip(&ranges)
                .map(|(c, (lo, hi))| ((c - 2.0 * step).max(*lo), (c + 2.0 * step).min(*hi)))
                .collect();
            scan_lattice(&window, fine, |z| {
                let c = scanner.evaluate(z);
                offer(&mut top, c, opts.candidates);
            });
        }
        step = fine;
    }

    let evaluations = scanner.evaluations;
    let Some(best) = top.first() else {
        return Ok(SolveReport::infeasible(problem, DVector::zeros(n), evaluations));
    };
    let x = scanner.assemble(best);
    if best.violation > 0.0 {
        return Ok(SolveReport::infeasible(problem, x, evaluations));
    }
    let status = if x.iter().all(|v| *v == 0.0) { Status::ZeroFeasible } else { Status::ConstraintActive };
    Ok(SolveReport::evaluate(problem, x, None, status, evaluations))
}

/// All subsets of `0..n` of size `k` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    use itertools::Itertools;
    (0..n).combinations(k).collect()
}

/// Minimizes over every support of size at most `max_support` with
/// [`grid_search_solve`] on the restricted problem and returns the best.
///
/// Supports whose restricted least-squares residual already exceeds `β`
/// cannot hold a feasible point and are skipped. Ties keep the support
/// visited first (smaller supports first, then lexicographic).
pub fn support_enumeration_solve(problem: &Problem, max_support: usize, opts: &OracleOptions) -> Result<SolveReport> {
    let n = problem.cols();
    if n > SUPPORT_MAX_DIMENSION || max_support > SUPPORT_MAX_SIZE {
        return Err(Error::SizeLimit(alloc::format!(
            "support enumeration handles n ≤ {SUPPORT_MAX_DIMENSION} and supports ≤ {SUPPORT_MAX_SIZE}, \
             got n = {n}, max_support = {max_support}"
        )));
    }
    let tol = problem.feasibility_tolerance();
    let f = problem.operator();
    let mut best: Option<SolveReport> = None;
    let mut evaluations = 0;
    for size in 0..=max_support.min(n) {
        for support in subsets(n, size) {
            let report = if support.is_empty() {
                let x = DVector::zeros(n);
                if problem.data().norm() <= problem.beta() + tol {
                    SolveReport::evaluate(problem, x, None, Status::ZeroFeasible, 0)
                } else {
                    continue;
                }
            } else {
                let f_s = f.select_columns(&support);
                let (_, resid) = least_squares(&f_s, problem.data());
                if resid > problem.beta() + tol {
                    continue;
                }
                let restricted = Problem::new(f_s, problem.data().clone(), problem.beta(), problem.p())?;
                let sub_opts = OracleOptions { bounds: None, ..opts.clone() };
                let r = grid_search_solve(&restricted, &sub_opts)?;
                evaluations += r.iterations;
                if !r.is_feasible() {
                    continue;
                }
                let mut x = DVector::zeros(n);
                for (k, &j) in support.iter().enumerate() {
                    x[j] = r.x[k];
                }
                let status = if x.iter().all(|v| *v == 0.0) { Status::ZeroFeasible } else { Status::ConstraintActive };
                SolveReport::evaluate(problem, x, None, status, 0)
            };
            if best.as_ref().is_none_or(|b| report.objective < b.objective) {
                best = Some(report);
            }
        }
    }
    Ok(match best {
        Some(mut r) => {
            r.iterations = evaluations;
            r
        }
        None => SolveReport::infeasible(problem, DVector::zeros(n), evaluations),
    })
}
