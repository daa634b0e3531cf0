//! Convergence-rate experiments for constrained `ℓ^p` regularization.
//!
//! Instances are built so that the rate premises hold by construction (a
//! source certificate `ξ = Fᵀω`, sparsity, injectivity on the support), then
//! the radius `β` is swept and `log error` is regressed on `log β`.

use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bregman::{bregman_distance, source_certificate, SourceCertificate};
use crate::error::{precondition, Error, Result};
use crate::linalg::{pseudo_inverse, smallest_singular_value};
use crate::problem::{check_exponent, lp_power_sum, Problem};
use crate::solvers::{residual_method_solve, SolverOptions};

/// Attempts before instance construction gives up.
pub const CONSTRUCTION_ATTEMPTS: u32 = 20;
/// Off-support margin for `p = 1` certificates: `|ξ_λ| < 1 − margin`.
pub const OFF_SUPPORT_MARGIN: f64 = 1e-3;
/// Minimum singular value of the support columns.
pub const INJECTIVITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorModel {
    /// i.i.d. standard normal entries scaled by `1/√m`.
    GaussianIid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateInstanceSpec {
    pub m: usize,
    pub n: usize,
    pub p: f64,
    /// Number of nonzeros of `x†`; 0 means dense.
    pub sparsity: usize,
    pub operator_model: OperatorModel,
    pub rng_seed: u64,
}

impl RateInstanceSpec {
    pub fn new(m: usize, n: usize, p: f64, sparsity: usize, rng_seed: u64) -> Self {
        Self { m, n, p, sparsity, operator_model: OperatorModel::GaussianIid, rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        if self.m == 0 || self.n == 0 {
            return Err(precondition("m and n must be positive"));
        }
        if self.sparsity > self.n {
            return Err(precondition("sparsity exceeds n"));
        }
        if self.sparsity > self.m {
            return Err(precondition("sparsity exceeds m; F cannot be injective on the support"));
        }
        if self.p <= 1.0 && self.sparsity == 0 {
            return Err(precondition("p ≤ 1 rate instances must be sparse"));
        }
        Ok(())
    }
}

/// A ground truth `x†` with its operator and, for `p ≥ 1`, a certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateInstance {
    pub spec: RateInstanceSpec,
    pub operator: DMatrix<f64>,
    pub x_dagger: DVector<f64>,
    pub certificate: Option<SourceCertificate>,
    /// Sorted support of `x†` (all indices when dense).
    pub support: Vec<usize>,
    /// Seed that produced this instance (after deterministic re-seeding).
    pub seed_used: u64,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    let scale = 1.0 / (m as f64).sqrt();
    DMatrix::from_fn(m, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn injective_on(f: &DMatrix<f64>, support: &[usize]) -> bool {
    support.is_empty() || smallest_singular_value(&f.select_columns(support)) > INJECTIVITY_FLOOR
}

/// Builds an instance satisfying the rate premises for `spec`.
///
/// * `p ∈ (1, 2]`: `ω` is drawn first and `x†` inverts `∂R_p(x†) = Fᵀω`. For a
///   sparse `x†` the columns of `F` off the support are projected onto `ω^⊥`,
///   so `Fᵀω` vanishes there exactly.
/// * `p = 1`: `ω` is the minimum-norm solution of `F_Sᵀω = sign pattern`; the
///   draw is rejected unless `|Fᵀω| < 1 − 10⁻³` off the support.
/// * `p < 1`: `x†` is a random sparse vector; only injectivity is checked.
///
/// Failed draws are retried with seed `rng_seed + 1000·attempt`.
pub fn build_rate_instance(spec: &RateInstanceSpec) -> Result<RateInstance> {
    spec.validate()?;
    for attempt in 0..CONSTRUCTION_ATTEMPTS {
        let seed = spec.rng_seed.wrapping_add(1000 * u64::from(attempt));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(instance) = try_build(spec, seed, &mut rng)? {
            return Ok(instance);
        }
    }
    Err(Error::ConstructionFailed { attempts: CONSTRUCTION_ATTEMPTS })
}

fn try_build(spec: &RateInstanceSpec, seed: u64, rng: &mut ChaCha8Rng) -> Result<Option<RateInstance>> {
    let (m, n, p, s) = (spec.m, spec.n, spec.p, spec.sparsity);
    let mut f = gaussian_matrix(rng, m, n);

    let (x_dagger, support, free_values) = if p > 1.0 {
        let omega = gaussian_vector(rng, m);
        let support: Vec<usize> = if s == 0 {
            (0..n).collect()
        } else {
            let xi = f.tr_mul(&omega);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| xi[b].abs().total_cmp(&xi[a].abs()).then(a.cmp(&b)));
            let mut chosen = order[..s].to_vec();
            chosen.sort_unstable();
            let unit = &omega / omega.norm();
            for j in 0..n {
                if chosen.binary_search(&j).is_err() {
                    let coef = f.column(j).dot(&unit);
                    f.column_mut(j).axpy(-coef, &unit, 1.0);
                }
            }
            chosen
        };
        let xi = f.tr_mul(&omega);
        let mut x = DVector::zeros(n);
        for &j in &support {
            x[j] = xi[j].signum() * (xi[j].abs() / p).powf(1.0 / (p - 1.0));
        }
        (x, support, None)
    } else if p == 1.0 {
        let mut support = sample(rng, n, s).into_vec();
        support.sort_unstable();
        let signs: Vec<f64> = (0..s).map(|_| random_sign(rng)).collect();
        let f_s = f.select_columns(&support);
        let omega = pseudo_inverse(&f_s.transpose()) * DVector::from_column_slice(&signs);
        let xi = f.tr_mul(&omega);
        let off_ok = (0..n)
            .filter(|j| support.binary_search(j).is_err())
            .all(|j| xi[j].abs() < 1.0 - OFF_SUPPORT_MARGIN);
        if !off_ok {
            return Ok(None);
        }
        let mut x = DVector::zeros(n);
        for (k, &j) in support.iter().enumerate() {
            x[j] = signs[k] * rng.random_range(1.0..2.0);
        }
        (x, support, Some(xi.iter().copied().collect::<Vec<f64>>()))
    } else {
        let mut support = sample(rng, n, s).into_vec();
        support.sort_unstable();
        let mut x = DVector::zeros(n);
        for &j in &support {
            x[j] = random_sign(rng) * rng.random_range(1.0..2.0);
        }
        (x, support, None)
    };

    if s > 0 && !injective_on(&f, &support) {
        return Ok(None);
    }
    let certificate = if p >= 1.0 {
        let cert = source_certificate(&f, &x_dagger, p, free_values.as_deref())?;
        if !cert.is_exact() {
            return Ok(None);
        }
        Some(cert)
    } else {
        None
    };
    Ok(Some(RateInstance {
        spec: spec.clone(),
        operator: f,
        x_dagger,
        certificate,
        support,
        seed_used: seed,
    }))
}

/// One `(β, seed)` cell of a rate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub beta: f64,
    pub seed: u64,
    /// `‖x_β − x†‖₂`.
    pub err_l2: f64,
    /// `‖x_β − x†‖_p`.
    pub err_lp: f64,
    /// `D_ξ(x_β, x†)` when a certificate is available.
    pub bregman: Option<f64>,
    pub discrepancy: f64,
    /// `R_p(x_β) − R_p(x†)`.
    pub objective_gap: f64,
    /// `‖Fx† − y‖`, the realized noise level.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// Cells that produced no row, with the reason.
    pub diagnostics: Vec<String>,
}

/// Noise for seed `seed`: a direction uniform on the unit sphere and a
/// length factor uniform in `[0.5, 1]`. Independent of `β`, so every radius
/// sees the same relative perturbation for a given seed.
pub fn noise_direction(instance_seed: u64, seed: u64, m: usize) -> (DVector<f64>, f64) {
    let mixed = instance_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed.wrapping_add(0x5851_F42D);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    let mut d = gaussian_vector(&mut rng, m);
    while d.norm() == 0.0 {
        d = gaussian_vector(&mut rng, m);
    }
    let d = &d / d.norm();
    let u = rng.random_range(0.5..=1.0);
    (d, u)
}

/// Sweeps `β` over `beta_grid` with `seeds_per_beta` noise draws each.
///
/// Rows are ordered by `(β index, seed)`. A cell whose solve comes back
/// infeasible is reported in `diagnostics` instead of as a row.
pub fn run_rate_experiment(
    instance: &RateInstance,
    beta_grid: &[f64],
    seeds_per_beta: usize,
    opts: &SolverOptions,
) -> Result<RateTable> {
    if beta_grid.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(precondition("beta grid entries must be positive"));
    }
    if seeds_per_beta == 0 {
        return Err(precondition("at least one seed per beta is required"));
    }
    let f = &instance.operator;
    let p = instance.spec.p;
    let clean = f * &instance.x_dagger;
    let r_dagger = lp_power_sum(instance.x_dagger.as_slice(), p);
    let mut table = RateTable::default();
    for &beta in beta_grid {
        for seed in 0..seeds_per_beta as u64 {
            let (direction, u) = noise_direction(instance.seed_used, seed, f.nrows());
            let y = &clean + &direction * (beta * u);
            let problem = Problem::new(f.clone(), y.clone(), beta, p)?;
            let cell_opts = SolverOptions { rng_seed: opts.rng_seed.wrapping_add(seed), ..opts.clone() };
            let report = residual_method_solve(&problem, &cell_opts)?;
            if !report.is_feasible() {
                table.diagnostics.push(alloc::format!(
                    "beta={beta:e} seed={seed}: solver reported Infeasible although x† is feasible"
                ));
                continue;
            }
            let err = &report.x - &instance.x_dagger;
            let bregman = match &instance.certificate {
                Some(c) => Some(bregman_distance(&report.x, &instance.x_dagger, &c.xi, p)?),
                None => None,
            };
            table.rows.push(RateRow {
                beta,
                seed,
                err_l2: err.norm(),
                err_lp: lp_power_sum(err.as_slice(), p).powf(1.0 / p),
                bregman,
                discrepancy: report.discrepancy,
                objective_gap: report.objective - r_dagger,
                noise: (&clean - &y).norm(),
            });
        }
    }
    Ok(table)
}

/// Column of a [`RateTable`] used for slope fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateColumn {
    ErrL2,
    ErrLp,
    Bregman,
    Discrepancy,
}

impl RateColumn {
    fn value(self, row: &RateRow) -> Option<f64> {
        match self {
            RateColumn::ErrL2 => Some(row.err_l2),
            RateColumn::ErrLp => Some(row.err_lp),
            RateColumn::Bregman => row.bregman,
            RateColumn::Discrepancy => Some(row.discrepancy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Distinct `β` values used in the regression.
    pub points: usize,
    /// Rows dropped because the column was zero or missing.
    pub dropped: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Least-squares line through `(log β, log median(column))`.
pub fn fit_loglog_slope(table: &RateTable, column: RateColumn) -> Result<SlopeFit> {
    let mut groups: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut dropped = 0;
    for row in &table.rows {
        match column.value(row) {
            Some(v) if v > 0.0 && v.is_finite() => {
                match groups.iter_mut().find(|(b, _)| *b == row.beta) {
                    Some((_, vals)) => vals.push(v),
                    None => groups.push((row.beta, alloc::vec![v])),
                }
            }
            _ => dropped += 1,
        }
    }
    if groups.len() < 3 {
        return Err(Error::InsufficientData { usable: groups.len(), required: 3 });
    }
    let points: Vec<(f64, f64)> =
        groups.iter_mut().map(|(b, vals)| (b.ln(), median(vals).ln())).collect();
    let k = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(SlopeFit { slope, intercept, r_squared, points: points.len(), dropped })
}

/// Norm in which an error rate is stated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateNorm {
    L2,
    Lp,
}

/// Known rate exponents for the error norm (not its square):
///
/// | exponent | norm | premises |
/// |---|---|---|
/// | 1/2 | ℓ² | `p ∈ (1, 2)` |
/// | 1/2 | ℓ^p | `p ∈ (1, 2)` |
/// | 1/p | ℓ² | `p ∈ [1, 2)`, sparse, injective on the support |
/// | 1 | ℓ² | `p ∈ (0, 1)`, sparse, injective on the support, unique `x†` |
pub fn expected_rate(p: f64, sparse: bool, norm: RateNorm) -> Result<f64> {
    let unsupported = || {
        Error::Precondition(alloc::format!(
            "no known rate for p = {p}, sparse = {sparse}, norm = {norm:?}; supported: \
             (1<p<2, dense, l2) -> 1/2; (1<p<2, dense, lp) -> 1/2; \
             (1<=p<2, sparse, l2) -> 1/p; (0<p<1, sparse, l2) -> 1"
        ))
    };
    match (sparse, norm) {
        (false, _) if p > 1.0 && p < 2.0 => Ok(0.5),
        (true, RateNorm::L2) if (1.0..2.0).contains(&p) => Ok(1.0 / p),
        (true, RateNorm::L2) if p > 0.0 && p < 1.0 => Ok(1.0),
        _ => Err(unsupported()),
    }
}

/// `n` points from `lo` to `hi`, equally spaced on a log scale.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}
