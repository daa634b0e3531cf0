//! One-dimensional optimal transport and Wasserstein-constrained entropy
//! density estimation.

use alloc::vec::Vec;
use itertools::Itertools;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::problem::Status;

/// Tolerance on the total mass of a [`DiscreteMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Tolerance on `h·Σu` for a [`GridDensity`].
pub const DENSITY_TOLERANCE: f64 = 1e-10;
/// Largest support handled by [`wasserstein_oracle_permutation`].
pub const ORACLE_MAX_ATOMS: usize = 8;

/// Probability measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates strictly increasing atoms and positive weights summing to 1.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(invalid("a measure needs matching, nonempty atom and weight lists"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(invalid("atoms must be finite"));
        }
        if atoms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("atoms must be strictly increasing"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid(alloc::format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    /// Sorts, merges equal locations and drops zero weights.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().filter(|(_, w)| *w != 0.0).collect();
        if pairs.iter().any(|(a, w)| !a.is_finite() || !w.is_finite() || *w < 0.0) {
            return Err(invalid("atoms must be finite and weights nonnegative"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            if atoms.last() == Some(&a) {
                *weights.last_mut().unwrap() += w;
            } else {
                atoms.push(a);
                weights.push(w);
            }
        }
        Self::new(atoms, weights)
    }

    pub fn dirac(at: f64) -> Result<Self> {
        Self::new(alloc::vec![at], alloc::vec![1.0])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `λ·self + (1 − λ)·other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid("mixture weight must lie in [0, 1]"));
        }
        let a = self.atoms.iter().zip(&self.weights).map(|(x, w)| (*x, lambda * w));
        let b = other.atoms.iter().zip(&other.weights).map(|(x, w)| (*x, (1.0 - lambda) * w));
        Self::from_pairs(a.chain(b))
    }
}

/// `{x₁, …, x_k}` with weight `1/k` per sample; duplicates are merged.
pub fn empirical_measure(samples: &[f64]) -> Result<DiscreteMeasure> {
    if samples.is_empty() {
        return Err(invalid("empirical measure of an empty sample"));
    }
    let w = 1.0 / samples.len() as f64;
    DiscreteMeasure::from_pairs(samples.iter().map(|&x| (x, w)))
}

fn check_order(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::UnsupportedExponent(p));
    }
    Ok(())
}

/// Exact `W_p` on the line by pairing quantile functions.
pub fn wasserstein_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_order(p)?;
    let (mut i, mut j) = (0, 0);
    let (mut left_mu, mut left_nu) = (mu.weights[0], nu.weights[0]);
    let mut total = 0.0;
    loop {
        let mass = left_mu.min(left_nu);
        total += mass * (mu.atoms[i] - nu.atoms[j]).abs().powf(p);
        left_mu -= mass;
        left_nu -= mass;
        // Round-off leftovers below the mass tolerance do not open a new segment.
        let next_mu = left_mu <= MASS_TOLERANCE * 1e-3 && i + 1 < mu.len();
        let next_nu = left_nu <= MASS_TOLERANCE * 1e-3 && j + 1 < nu.len();
        if next_mu {
            i += 1;
            left_mu = mu.weights[i];
        }
        if next_nu {
            j += 1;
            left_nu = nu.weights[j];
        }
        if !next_mu && !next_nu {
            break;
        }
    }
    Ok(total.powf(1.0 / p))
}

/// `min_σ ((1/k) Σ |xᵢ − y_σ(i)|^p)^{1/p}` over all permutations.
pub fn wasserstein_oracle_permutation(x: &[f64], y: &[f64], p: f64) -> Result<f64> {
    check_order(p)?;
    if x.len() != y.len() || x.is_empty() {
        return Err(invalid("the permutation oracle needs two nonempty samples of equal size"));
    }
    if x.len() > ORACLE_MAX_ATOMS {
        return Err(Error::SizeLimit(alloc::format!(
            "permutation oracle is limited to {ORACLE_MAX_ATOMS} atoms, got {}",
            x.len()
        )));
    }
    let k = x.len();
    let best = (0..k)
        .permutations(k)
        .map(|sigma| x.iter().zip(&sigma).map(|(xi, &s)| (xi - y[s]).abs().powf(p)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok((best / k as f64).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub max_violation: f64,
    pub checked: usize,
}

/// Checks `W_p(λμ₁ + (1−λ)μ₂, ν)^p ≤ λW_p(μ₁, ν)^p + (1−λ)W_p(μ₂, ν)^p`.
pub fn wp_convexity_check(
    mu1: &DiscreteMeasure,
    mu2: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    lambda_grid: &[f64],
) -> Result<ConvexityReport> {
    check_order(p)?;
    let d1 = wasserstein_discrete(mu1, nu, p)?.powf(p);
    let d2 = wasserstein_discrete(mu2, nu, p)?.powf(p);
    let mut max_violation = 0.0f64;
    for &lambda in lambda_grid {
        let mixed = mu1.mix(mu2, lambda)?;
        let lhs = wasserstein_discrete(&mixed, nu, p)?.powf(p);
        max_violation = max_violation.max(lhs - (lambda * d1 + (1.0 - lambda) * d2));
    }
    Ok(ConvexityReport { max_violation, checked: lambda_grid.len() })
}

/// Piecewise-constant probability density on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    a: f64,
    b: f64,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid("density domain must be a bounded interval a < b"));
        }
        if values.len() < 2 {
            return Err(invalid("a grid density needs at least two cells"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("density values must be finite and nonnegative"));
        }
        let h = (b - a) / values.len() as f64;
        let mass = h * values.iter().sum::<f64>();
        if (mass - 1.0).abs() > DENSITY_TOLERANCE {
            return Err(invalid(alloc::format!("density integrates to {mass}, not 1")));
        }
        Ok(Self { a, b, values })
    }

    /// Builds a density from cell masses summing to 1.
    pub fn from_masses(a: f64, b: f64, masses: &[f64]) -> Result<Self> {
        let h = (b - a) / masses.len() as f64;
        Self::new(a, b, masses.iter().map(|m| m / h).collect())
    }

    pub fn uniform(a: f64, b: f64, cells: usize) -> Result<Self> {
        Self::new(a, b, alloc::vec![1.0 / (b - a); cells])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_width(&self) -> f64 {
        (self.b - self.a) / self.values.len() as f64
    }

    pub fn cell_left(&self, i: usize) -> f64 {
        self.a + self.cell_width() * i as f64
    }

    pub fn masses(&self) -> Vec<f64> {
        let h = self.cell_width();
        self.values.iter().map(|v| v * h).collect()
    }

    /// Cell masses placed at cell centers; empty cells are dropped.
    pub fn as_measure(&self) -> Result<DiscreteMeasure> {
        let h = self.cell_width();
        DiscreteMeasure::from_pairs(self.masses().into_iter().enumerate().map(|(i, m)| (self.a + h * (i as f64 + 0.5), m)))
    }

    /// Cell index containing `x`; the right endpoint belongs to the last cell.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.a && x <= self.b) {
            return None;
        }
        let i = ((x - self.a) / self.cell_width()).floor() as usize;
        Some(i.min(self.values.len() - 1))
    }
}

/// `∫ u log u` with `0 log 0 = 0`.
pub fn entropy(u: &GridDensity) -> f64 {
    let h = u.cell_width();
    u.values.iter().filter(|v| **v > 0.0).map(|v| v * v.ln() * h).sum()
}

/// A distribution on the line with enough structure to integrate its CDF.
pub trait Continuous1D {
    /// Support `[a, b]`.
    fn support(&self) -> (f64, f64);
    fn cdf(&self, x: f64) -> f64;
    /// `∫_a^x cdf(t) dt` for `x ∈ [a, b]`.
    fn cdf_integral(&self, x: f64) -> f64;
    /// Some `x` with `cdf(x) = c`, for `c ∈ (0, 1)`.
    fn quantile(&self, c: f64) -> f64;
}

impl Continuous1D for GridDensity {
    fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.a {
            return 0.0;
        }
        if x >= self.b {
            return 1.0;
        }
        let h = self.cell_width();
        let i = self.cell_of(x).unwrap();
        let before: f64 = self.values[..i].iter().sum::<f64>() * h;
        (before + self.values[i] * (x - self.cell_left(i))).min(1.0)
    }

    fn cdf_integral(&self, x: f64) -> f64 {
        let x = x.clamp(self.a, self.b);
        let h = self.cell_width();
        let mut total = 0.0;
        let mut cum = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let left = self.cell_left(i);
            let width = (x - left).min(h);
            if width <= 0.0 {
                break;
            }
            total += cum * width + 0.5 * v * width * width;
            cum += v * h;
        }
        total
    }

    fn quantile(&self, c: f64) -> f64 {
        let h = self.cell_width();
        let mut cum = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let mass = v * h;
            if cum + mass >= c && mass > 0.0 {
                return (self.cell_left(i) + (c - cum) / v).clamp(self.a, self.b);
            }
            cum += mass;
        }
        self.b
    }
}

/// Triangular distribution on `[a, b]` with its mode at `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularDensity {
    pub a: f64,
    pub mode: f64,
    pub b: f64,
}

impl TriangularDensity {
    pub fn new(a: f64, mode: f64, b: f64) -> Result<Self> {
        if !(a < b && a <= mode && mode <= b) || ![a, mode, b].iter().all(|v| v.is_finite()) {
            return Err(invalid("triangular density needs a ≤ mode ≤ b and a < b"));
        }
        Ok(Self { a, mode, b })
    }

    /// Symmetric triangle on `[0, 1]`.
    pub fn standard() -> Self {
        Self { a: 0.0, mode: 0.5, b: 1.0 }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (a, c, b) = (self.a, self.mode, self.b);
        if x < a || x > b {
            0.0
        } else if x < c {
            2.0 * (x - a) / ((b - a) * (c - a))
        } else if x > c {
            2.0 * (b - x) / ((b - a) * (b - c))
        } else {
            2.0 / (b - a)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

impl Continuous1D for TriangularDensity {
    fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn cdf(&self, x: f64) -> f64 {
        let (a, c, b) = (self.a, self.mode, self.b);
        if x <= a {
            0.0
        } else if x >= b {
            1.0
        } else if x <= c {
            (x - a) * (x - a) / ((b - a) * (c - a))
        } else {
            1.0 - (b - x) * (b - x) / ((b - a) * (b - c))
        }
    }

    fn cdf_integral(&self, x: f64) -> f64 {
        let (a, c, b) = (self.a, self.mode, self.b);
        let x = x.clamp(a, b);
        let left = |t: f64| (t - a).powi(3) / (3.0 * (b - a) * (c - a));
        if x <= c {
            if c == a {
                return 0.0;
            }
            return left(x);
        }
        let head = if c > a { left(c) } else { 0.0 };
        let tail = |t: f64| t + (b - t).powi(3) / (3.0 * (b - a) * (b - c));
        head + tail(x) - tail(c)
    }

    fn quantile(&self, u: f64) -> f64 {
        let (a, c, b) = (self.a, self.mode, self.b);
        let split = (c - a) / (b - a);
        if u <= split {
            a + (u * (b - a) * (c - a)).sqrt()
        } else {
            b - ((1.0 - u) * (b - a) * (b - c)).sqrt()
        }
    }
}

/// Exact `W_1(μ, ν) = ∫ |F_μ − F_ν|` for a discrete `μ` and continuous `ν`.
pub fn wasserstein1_to_continuous(mu: &DiscreteMeasure, nu: &impl Continuous1D) -> f64 {
    let (a, b) = nu.support();
    // Extended CDF integral so atoms outside [a, b] are handled.
    let big_i = |x: f64| {
        if x <= a {
            0.0
        } else if x >= b {
            nu.cdf_integral(b) + (x - b)
        } else {
            nu.cdf_integral(x)
        }
    };
    let cdf = |x: f64| nu.cdf(x);
    // ∫_{t0}^{t1} |c − F|, F nondecreasing.
    let piece = |t0: f64, t1: f64, c: f64| -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let area = big_i(t1) - big_i(t0);
        if cdf(t0) >= c {
            area - c * (t1 - t0)
        } else if cdf(t1) <= c {
            c * (t1 - t0) - area
        } else {
            let x = nu.quantile(c).clamp(t0, t1);
            (c * (x - t0) - (big_i(x) - big_i(t0))) + ((big_i(t1) - big_i(x)) - c * (t1 - x))
        }
    };
    let lo = a.min(mu.atoms[0]);
    let hi = b.max(mu.atoms[mu.len() - 1]);
    let mut total = piece(lo, mu.atoms[0], 0.0);
    let mut cum = 0.0;
    for k in 0..mu.len() {
        cum += mu.weights[k];
        let right = if k + 1 < mu.len() { mu.atoms[k + 1] } else { hi };
        total += piece(mu.atoms[k], right, cum.min(1.0));
    }
    total
}

/// Masses of the samples binned on the grid of `shape`.
pub fn binned_masses(samples: &[f64], shape: &GridShape) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(invalid("no samples"));
    }
    let probe = GridDensity::uniform(shape.a, shape.b, shape.cells)?;
    let w = 1.0 / samples.len() as f64;
    let mut masses = alloc::vec![0.0; shape.cells];
    for &x in samples {
        let i = probe
            .cell_of(x)
            .ok_or_else(|| invalid(alloc::format!("sample {x} lies outside [{}, {}]", shape.a, shape.b)))?;
        masses[i] += w;
    }
    Ok(masses)
}

/// `W_1` between two mass vectors on the same grid: `h Σ |cumsum(m − q)|`.
pub fn grid_w1(m: &[f64], q: &[f64], h: f64) -> f64 {
    let mut c = 0.0;
    let mut total = 0.0;
    for i in 0..m.len().saturating_sub(1) {
        c += m[i] - q[i];
        total += c.abs();
    }
    h * total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridShape {
    pub a: f64,
    pub b: f64,
    pub cells: usize,
}

impl GridShape {
    pub fn new(a: f64, b: f64, cells: usize) -> Result<Self> {
        GridDensity::uniform(a, b, cells)?;
        Ok(Self { a, b, cells })
    }

    pub fn cell_width(&self) -> f64 {
        (self.b - self.a) / self.cells as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOptions {
    /// Mirror-descent iterations per penalty weight.
    pub iterations: usize,
    /// Step size `η_t = step / √t`.
    pub step: f64,
    pub bisection_rounds: usize,
    /// Relative tolerance for declaring the constraint active.
    pub relative_tolerance: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { iterations: 20_000, step: 0.1, bisection_rounds: 40, relative_tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub status: Status,
    /// Penalty weight `θ` of `(1−θ)·entropy + θ·W₁`; `None` when no descent ran.
    pub theta: Option<f64>,
    pub w1: f64,
    pub entropy: f64,
    pub beta: f64,
    pub bisections: usize,
    pub iterations: usize,
}

/// Minimizes the entropy of `u` subject to `W_1(u, ŷ) ≤ β`, where `ŷ` is the
/// histogram of the samples on the grid.
///
/// For fixed `θ`, `(1−θ)·H + θ·W₁` is minimized by entropic mirror descent
/// with an ergodic average; `θ` is bisected until `W₁` is within the relative
/// tolerance of `β` from above, and the result is then mixed with `ŷ` so that
/// `W₁ = β` exactly.
pub fn density_estimate(
    samples: &[f64],
    beta: f64,
    shape: &GridShape,
    opts: &DensityOptions,
) -> Result<(GridDensity, DensityReport)> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(invalid("beta must be finite and nonnegative"));
    }
    let positive = |t: f64| t.is_finite() && t > 0.0;
    if opts.iterations == 0 || !positive(opts.step) || !positive(opts.relative_tolerance) {
        return Err(invalid("density options must be positive"));
    }
    let q = binned_masses(samples, shape)?;
    let n = shape.cells;
    let h = shape.cell_width();
    let finish = |m: Vec<f64>, status, theta, bisections, iterations| -> Result<(GridDensity, DensityReport)> {
        let w1 = grid_w1(&m, &q, h);
        let u = GridDensity::from_masses(shape.a, shape.b, &m)?;
        let report = DensityReport { status, theta, w1, entropy: entropy(&u), beta, bisections, iterations };
        Ok((u, report))
    };
    if beta == 0.0 {
        return finish(q.clone(), Status::ConstraintActive, None, 0, 0);
    }
    let uniform = alloc::vec![1.0 / n as f64; n];
    if grid_w1(&uniform, &q, h) <= beta {
        return finish(uniform, Status::InteriorMinimum, None, 0, 0);
    }

    let mut iterations = 0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // Best iterate found on the infeasible side (W₁ ≥ β) and on the feasible side.
    let mut above: Option<(f64, Vec<f64>)> = None;
    let mut below: Option<(f64, Vec<f64>)> = None;
    let mut bisections = 0;
    for _ in 0..opts.bisection_rounds {
        bisections += 1;
        let theta = 0.5 * (lo + hi);
        // Warm start from the closest penalty weight visited so far.
        let start = [&above, &below]
            .into_iter()
            .flatten()
            .min_by(|x, y| (x.0 - theta).abs().total_cmp(&(y.0 - theta).abs()))
            .map_or(uniform.as_slice(), |(_, m)| m.as_slice());
        let m = penalized_descent(&q, h, theta, start, opts);
        iterations += opts.iterations;
        let w = grid_w1(&m, &q, h);
        if w >= beta {
            lo = theta;
            let done = w <= beta * (1.0 + opts.relative_tolerance);
            above = Some((theta, m));
            if done {
                break;
            }
        } else {
            hi = theta;
            below = Some((theta, m));
        }
    }
    match (above, below) {
        (Some((theta, m)), _) => {
            // Mixing with ŷ scales every cumulative difference by (1 − t).
            let w = grid_w1(&m, &q, h);
            let t = (1.0 - beta / w).clamp(0.0, 1.0);
            let mixed: Vec<f64> = m.iter().zip(&q).map(|(mi, qi)| (1.0 - t) * mi + t * qi).collect();
            finish(mixed, Status::ConstraintActive, Some(theta), bisections, iterations)
        }
        (None, Some((theta, m))) => finish(m, Status::ConstraintActive, Some(theta), bisections, iterations),
        (None, None) => finish(q.clone(), Status::ConstraintActive, None, bisections, iterations),
    }
}

/// Entropic mirror descent on `(1−θ) Σ m log m + θ W₁(m, q)` from `start`;
/// returns the step-weighted average of the iterates.
fn penalized_descent(q: &[f64], h: f64, theta: f64, start: &[f64], opts: &DensityOptions) -> Vec<f64> {
    let n = q.len();
    // Floor keeps the logarithm finite when the start has empty cells.
    let floor = 1e-300;
    let mut log_m: Vec<f64> = start.iter().map(|v| v.max(floor).ln()).collect();
    let mut m: Vec<f64> = start.to_vec();
    let mut average = alloc::vec![0.0; n];
    let mut weight_sum = 0.0;
    let mut signs = alloc::vec![0.0; n];
    for t in 1..=opts.iterations {
        let eta = opts.step / (t as f64).sqrt();
        // Subgradient of h Σ_i |C_i|: g_j = h Σ_{i ≥ j} sign(C_i).
        let mut c = 0.0;
        for i in 0..n - 1 {
            c += m[i] - q[i];
            signs[i] = if c > 1e-15 {
                1.0
            } else if c < -1e-15 {
                -1.0
            } else {
                0.0
            };
        }
        signs[n - 1] = 0.0;
        let mut g = 0.0;
        let shrink = 1.0 / (1.0 + eta * (1.0 - theta));
        let mut top = f64::NEG_INFINITY;
        for j in (0..n).rev() {
            g += signs[j];
            log_m[j] = (log_m[j] - eta * theta * h * g) * shrink;
            top = top.max(log_m[j]);
        }
        let mut total = 0.0;
        for j in 0..n {
            m[j] = (log_m[j] - top).exp();
            total += m[j];
        }
        let log_total = total.ln() + top;
        for j in 0..n {
            m[j] /= total;
            log_m[j] -= log_total;
            average[j] += eta * m[j];
        }
        weight_sum += eta;
    }
    let mut out: Vec<f64> = average.into_iter().map(|v| v / weight_sum).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// `∫ |u − pdf|` for a grid density against a triangular density, exact.
pub fn l1_error_triangular(u: &GridDensity, truth: &TriangularDensity) -> f64 {
    // On each piece the truth is affine, so |u_i − pdf| integrates in closed form.
    let affine_abs = |c: f64, x0: f64, x1: f64| -> f64 {
        if x1 <= x0 {
            return 0.0;
        }
        let d0 = c - truth.pdf(x0);
        let d1 = c - truth.pdf(x1);
        if d0 * d1 >= 0.0 {
            0.5 * (d0.abs() + d1.abs()) * (x1 - x0)
        } else {
            let s = d0.abs() / (d0.abs() + d1.abs());
            0.5 * (x1 - x0) * (d0.abs() * s + d1.abs() * (1.0 - s))
        }
    };
    let (ga, gb) = u.domain();
    let mut cuts: Vec<f64> = (0..=u.cells()).map(|i| if i == u.cells() { gb } else { u.cell_left(i) }).collect();
    cuts.extend([truth.a, truth.mode, truth.b]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let c = if mid >= ga && mid <= gb { u.values()[u.cell_of(mid).unwrap()] } else { 0.0 };
        total += affine_abs(c, w[0], w[1]);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(atoms: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn wasserstein_examples() {
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        let d1 = DiscreteMeasure::dirac(1.0).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(wasserstein_discrete(&d0, &d1, p).unwrap(), 1.0);
            assert_eq!(wasserstein_discrete(&d1, &d1, p).unwrap(), 0.0);
        }
        let a = m(&[0.0, 1.0], &[0.5, 0.5]);
        let b = m(&[0.5, 1.5], &[0.5, 0.5]);
        assert!((wasserstein_discrete(&a, &b, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((wasserstein_oracle_permutation(&[0.0, 1.0], &[0.5, 1.5], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(wasserstein_discrete(&a, &b, 0.5), Err(Error::UnsupportedExponent(_))));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(wasserstein_oracle_permutation(&[0.3], &[1.0], 2.0).unwrap(), 0.7);
        assert_eq!(wasserstein_oracle_permutation(&[0.0, 1.0], &[1.0, 0.0], 1.0).unwrap(), 0.0);
        assert!(matches!(
            wasserstein_oracle_permutation(&[0.0; 9], &[0.0; 9], 1.0),
            Err(Error::SizeLimit(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let exact = wasserstein_discrete(&empirical_measure(&x).unwrap(), &empirical_measure(&y).unwrap(), 2.0).unwrap();
        assert!((exact - wasserstein_oracle_permutation(&x, &y, 2.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn empirical_merges_duplicates() {
        let e = empirical_measure(&[0.5]).unwrap();
        assert_eq!((e.atoms(), e.weights()), (&[0.5][..], &[1.0][..]));
        let e = empirical_measure(&[0.25, 0.75, 0.25]).unwrap();
        assert_eq!(e.atoms(), &[0.25, 0.75]);
        assert!((e.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(empirical_measure(&[]).is_err());
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&GridDensity::uniform(0.0, 1.0, 10).unwrap()), 0.0);
        let half = GridDensity::new(0.0, 1.0, vec![2.0, 0.0]).unwrap();
        assert!((entropy(&half) - 2f64.ln()).abs() < 1e-15);
        let mut spike = vec![0.0; 100];
        spike[3] = 100.0;
        let spike = GridDensity::new(0.0, 1.0, spike).unwrap();
        assert!((entropy(&spike) - 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn convexity_endpoints_and_identical() {
        let mu1 = m(&[0.0, 1.0], &[0.3, 0.7]);
        let mu2 = m(&[0.4], &[1.0]);
        let nu = m(&[0.2, 0.9], &[0.5, 0.5]);
        let rep = wp_convexity_check(&mu1, &mu2, &nu, 2.0, &[0.0, 1.0]).unwrap();
        assert!(rep.max_violation.abs() < 1e-15);
        let rep = wp_convexity_check(&mu1, &mu1, &nu, 1.0, &[0.1, 0.5, 0.9]).unwrap();
        assert!(rep.max_violation.abs() < 1e-15);
    }

    #[test]
    fn w1_to_continuous_matches_quadrature() {
        let tri = TriangularDensity::standard();
        let mu = m(&[0.1, 0.4, 0.45, 0.9, 1.2], &[0.2, 0.1, 0.3, 0.3, 0.1]);
        let exact = wasserstein1_to_continuous(&mu, &tri);
        let steps = 200_000;
        let (lo, hi) = (0.0, 1.2);
        let dx = (hi - lo) / steps as f64;
        let mut quad = 0.0;
        for s in 0..steps {
            let x = lo + (s as f64 + 0.5) * dx;
            let fm: f64 = mu.atoms().iter().zip(mu.weights()).filter(|(a, _)| **a <= x).map(|(_, w)| w).sum();
            quad += (fm - tri.cdf(x)).abs() * dx;
        }
        assert!((exact - quad).abs() < 1e-6, "{exact} {quad}");

        let grid = GridDensity::new(0.0, 1.0, vec![0.5, 1.5, 1.0, 1.0]).unwrap();
        let exact = wasserstein1_to_continuous(&mu, &grid);
        let mut quad = 0.0;
        for s in 0..steps {
            let x = lo + (s as f64 + 0.5) * dx;
            let fm: f64 = mu.atoms().iter().zip(mu.weights()).filter(|(a, _)| **a <= x).map(|(_, w)| w).sum();
            quad += (fm - grid.cdf(x)).abs() * dx;
        }
        assert!((exact - quad).abs() < 1e-6, "{exact} {quad}");
    }

    #[test]
    fn uniform_samples_close_to_uniform_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let e = empirical_measure(&samples).unwrap();
        let u = GridDensity::uniform(0.0, 1.0, 50).unwrap();
        assert!(wasserstein1_to_continuous(&e, &u) <= 0.05);
    }

    #[test]
    fn triangular_cdf_integral_and_quantile() {
        let t = TriangularDensity::standard();
        // ∫_0^1 F = 1 − mean
        assert!((t.cdf_integral(1.0) - 0.5).abs() < 1e-15);
        for u in [0.1, 0.5, 0.77] {
            assert!((t.cdf(t.quantile(u)) - u).abs() < 1e-14);
        }
        let skew = TriangularDensity::new(0.0, 0.2, 1.0).unwrap();
        assert!((skew.cdf_integral(1.0) - (1.0 - 1.2 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn density_limits() {
        let shape = GridShape::new(0.0, 1.0, 20).unwrap();
        let samples = [0.1, 0.12, 0.5, 0.93];
        let (u, rep) = density_estimate(&samples, 1.0, &shape, &DensityOptions::default()).unwrap();
        assert_eq!(rep.status, Status::InteriorMinimum);
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-12));

        let (u, rep) = density_estimate(&samples, 0.0, &shape, &DensityOptions::default()).unwrap();
        assert_eq!(rep.w1, 0.0);
        assert!((u.values()[2] - 10.0).abs() < 1e-12);

        assert!(density_estimate(&samples, -1.0, &shape, &DensityOptions::default()).is_err());
        assert!(density_estimate(&[1.5], 0.1, &shape, &DensityOptions::default()).is_err());
    }

    #[test]
    fn density_symmetric_data_gives_symmetric_output() {
        // An odd cell count keeps both samples off cell boundaries.
        let shape = GridShape::new(0.0, 1.0, 21).unwrap();
        let opts = DensityOptions { iterations: 4000, ..DensityOptions::default() };
        let (u, rep) = density_estimate(&[0.25, 0.75], 0.1, &shape, &opts).unwrap();
        assert_eq!(rep.status, Status::ConstraintActive);
        assert!((rep.w1 - 0.1).abs() <= 1e-4 * 0.1 + 1e-15);
        let v = u.values();
        for i in 0..21 {
            assert!((v[i] - v[20 - i]).abs() < 1e-6, "{i}: {} {}", v[i], v[20 - i]);
        }
    }

    #[test]
    fn l1_error_is_exact_on_uniform() {
        // |1 − tri| integrates to 2·(area of the triangle above 1) = 0.5
        let u = GridDensity::uniform(0.0, 1.0, 4).unwrap();
        assert!((l1_error_triangular(&u, &TriangularDensity::standard()) - 0.5).abs() < 1e-14);
    }
}
