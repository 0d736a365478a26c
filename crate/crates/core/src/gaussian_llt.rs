//! Mollified local limit theorem in the Gaussian chaos.
//!
//! For i.i.d. `X_i` with μ-density `f = 1 + Σ_{k≥3} γ_k h_k` (zero mean,
//! unit variance), the μ-density of
//!
//! ```text
//! sqrt(n/(n+b_n)) · (X_1 + … + X_n)/sqrt(n) + sqrt(b_n/(n+b_n)) · Z
//! ```
//!
//! is `(Γ(1/sqrt(n+b_n)) f)^{⋄n}`, and its L¹(μ) distance to the constant 1
//! is at most `n (b_n+1)^{-3/2} (Σ_{k≥3} k! γ_k²)^{1/2}`.

use rayon::prelude::*;
use thiserror::Error;

use crate::chaos::{gaussian_abs_integral, ChaosError, ChaosExpansion, WickPower};
use crate::experiment::{
    ConvergenceRecord, DensityViolation, ExperimentReport, ExperimentTolerances, InvalidDensity,
    LimitRegime, SequenceSchedule, MOMENT_TOL,
};
use crate::orthobasis::{
    cached_gauss_hermite_rule, default_quadrature_order, ReferenceMeasure,
};
use crate::sampling::{min_on_verification_points, NONNEGATIVITY_EPS};

/// Relative agreement required between the sign-split and trapezoid L¹ values.
pub const DEFAULT_CROSS_CHECK_REL: f64 = 1e-6;
/// Half-width of the trapezoid cross-check interval.
pub const TRAPEZOID_RADIUS: f64 = 12.0;
/// Number of trapezoid points.
pub const TRAPEZOID_POINTS: usize = 100_000;
/// Largest tolerated bound on the L¹ mass outside `[−12, 12]`.
pub const TAIL_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LltError {
    #[error(transparent)]
    Chaos(#[from] ChaosError),
    #[error(transparent)]
    Invalid(#[from] InvalidDensity),
    #[error("expected a Gaussian expansion")]
    NotGaussian,
    #[error(
        "L1 rules disagree: sign-split {primary:e}, trapezoid {trapezoid:e} (tail bound {tail:e})"
    )]
    CrossCheck {
        primary: f64,
        trapezoid: f64,
        tail: f64,
    },
    #[error("mass outside the trapezoid window may reach {0:e}")]
    TailTooHeavy(f64),
}

/// A μ-density with zero mean and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDensityInput {
    expansion: ChaosExpansion,
    provenance: String,
}

impl GaussianDensityInput {
    pub fn expansion(&self) -> &ChaosExpansion {
        &self.expansion
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, note: impl Into<String>) -> Self {
        self.provenance = note.into();
        self
    }

    /// `Σ_{k≥3} k! γ_k²`, which equals `‖f‖₂² − 1` for a valid input.
    pub fn tail_series(&self) -> f64 {
        self.expansion.weighted_sq_sum(3)
    }
}

/// `f* = 1 + 0.1·h_4`, strictly positive with minimum 0.4 at `x² = 3`.
pub fn canonical_h4_density() -> GaussianDensityInput {
    let f = ChaosExpansion::new(ReferenceMeasure::Gaussian, vec![1.0, 0.0, 0.0, 0.0, 0.1])
        .expect("finite coefficients");
    validate_gaussian_density(&f)
        .expect("canonical density is valid")
        .with_provenance("h4-canonical: 1 + 0.1 h_4")
}

/// Checks `γ_0 = 1`, `γ_1 = 0`, `γ_2 = 0`, nonnegativity on the verification
/// grid and a finite L² norm, reporting every failure at once.
pub fn validate_gaussian_density(f: &ChaosExpansion) -> Result<GaussianDensityInput, InvalidDensity> {
    if !f.measure().is_gaussian() {
        return Err(InvalidDensity(vec![DensityViolation::WrongMeasure]));
    }
    let mut violations = Vec::new();
    if (f.coeff(0) - 1.0).abs() > MOMENT_TOL {
        violations.push(DensityViolation::Mass { gamma0: f.coeff(0) });
    }
    if f.coeff(1).abs() > MOMENT_TOL {
        violations.push(DensityViolation::Mean { gamma1: f.coeff(1) });
    }
    if f.coeff(2).abs() > MOMENT_TOL {
        violations.push(DensityViolation::Variance { gamma2: f.coeff(2) });
    }
    let (at, value) = min_on_verification_points(f);
    if value < -NONNEGATIVITY_EPS {
        violations.push(DensityViolation::Negative { at, value });
    } else if let Some((at, value)) = negative_far_out(f) {
        violations.push(DensityViolation::Negative { at, value });
    }
    let norm_sq = f.weighted_sq_sum(0);
    if !norm_sq.is_finite() {
        violations.push(DensityViolation::L2Overflow { norm_sq });
    }
    if violations.is_empty() {
        Ok(GaussianDensityInput {
            expansion: f.clone(),
            provenance: "validated".into(),
        })
    } else {
        Err(InvalidDensity(violations))
    }
}

/// A polynomial with odd degree or negative leading coefficient turns
/// negative for large `|x|`, possibly beyond the verification grid.
fn negative_far_out(f: &ChaosExpansion) -> Option<(f64, f64)> {
    let g = f.trimmed(0.0);
    let d = g.degree();
    let lead = g.coeff(d);
    if d == 0 || (d % 2 == 0 && lead > 0.0) {
        return None;
    }
    let side = if d % 2 == 1 && lead > 0.0 { -1.0 } else { 1.0 };
    let mut x = 2.0 * crate::sampling::GAUSSIAN_GRID_RADIUS;
    while x.is_finite() {
        let v = g.eval(side * x);
        if v < 0.0 {
            return Some((side * x, v));
        }
        x *= 2.0;
    }
    None
}

/// `(Γ(1/sqrt(n+b_n)) f)^{⋄n}`, the μ-density of the mollified normalized sum.
pub fn mollified_sum_density(
    f: &GaussianDensityInput,
    n: usize,
    b_n: f64,
    d_cap: usize,
) -> Result<WickPower, LltError> {
    let lambda = 1.0 / (n as f64 + b_n).sqrt();
    let scaled = f.expansion.second_quantization(lambda)?;
    Ok(scaled.wick_power(n, d_cap)?)
}

/// Every L¹ evaluation of `‖g − 1‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Evaluation {
    /// Exact integration between the sign changes of `g − 1` (the reported value).
    pub sign_split: f64,
    /// Composite trapezoid on `[−12, 12]` (the cross-check).
    pub trapezoid: f64,
    /// Gauss–Hermite applied to `|g − 1|`; only algebraically convergent
    /// because of the kinks, so informational.
    pub gauss_hermite: f64,
    /// Bound on the trapezoid's neglected mass outside `[−12, 12]`.
    pub tail_bound: f64,
}

/// `‖g − 1‖₁` in L¹(μ), cross-checked against the trapezoid rule.
pub fn l1_distance_to_one(g: &ChaosExpansion) -> Result<f64, LltError> {
    l1_distance_to_one_with(g, DEFAULT_CROSS_CHECK_REL, None).map(|e| e.sign_split)
}

/// [`l1_distance_to_one`] with an explicit relative cross-check tolerance
/// and Gauss–Hermite order, returning every rule's value.
pub fn l1_distance_to_one_with(
    g: &ChaosExpansion,
    cross_check_rel: f64,
    quadrature_order: Option<usize>,
) -> Result<L1Evaluation, LltError> {
    if !g.measure().is_gaussian() {
        return Err(LltError::NotGaussian);
    }
    let centered = g.shifted(-1.0);
    let degree = centered.degree();
    let order = quadrature_order.unwrap_or_else(|| default_quadrature_order(degree));
    let rule = cached_gauss_hermite_rule(order).map_err(ChaosError::from)?;
    let gauss_hermite = rule.integrate(|x| centered.eval(x).abs());
    let sign_split = gaussian_abs_integral(&centered);
    let trapezoid = trapezoid_l1(&centered);
    let tail_bound = gaussian_tail_l1_bound(&centered, TRAPEZOID_RADIUS);
    if tail_bound > TAIL_LIMIT {
        return Err(LltError::TailTooHeavy(tail_bound));
    }
    let scale = sign_split.max(trapezoid);
    if (sign_split - trapezoid).abs() > cross_check_rel * scale + tail_bound + 1e-14 {
        return Err(LltError::CrossCheck {
            primary: sign_split,
            trapezoid,
            tail: tail_bound,
        });
    }
    Ok(L1Evaluation {
        sign_split,
        trapezoid,
        gauss_hermite,
        tail_bound,
    })
}

fn standard_normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `∫_{−R}^{R} |g(x)| φ(x) dx` by the composite trapezoid rule.
fn trapezoid_l1(g: &ChaosExpansion) -> f64 {
    let n = TRAPEZOID_POINTS;
    let step = 2.0 * TRAPEZOID_RADIUS / (n - 1) as f64;
    let mut total = 0.0;
    for i in 0..n {
        let x = -TRAPEZOID_RADIUS + i as f64 * step;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        total += w * g.eval(x).abs() * standard_normal_density(x);
    }
    total * step
}

/// Bound on `∫_{|x|>R} |g| dμ` by Cauchy–Schwarz per basis term:
/// `∫_{|x|>R} |h_j| dμ ≤ sqrt(j!) · μ(|x|>R)^{1/2}`, with the Mills-ratio
/// bound `μ(|x|>R) ≤ 2φ(R)/R`.
fn gaussian_tail_l1_bound(g: &ChaosExpansion, radius: f64) -> f64 {
    let tail_mass = 2.0 * standard_normal_density(radius) / radius;
    let norms = ReferenceMeasure::Gaussian.basis_norms_sq(g.degree());
    let coeff_sum: f64 = g
        .coeffs()
        .iter()
        .zip(&norms)
        .map(|(c, n)| c.abs() * n.sqrt())
        .sum();
    coeff_sum * tail_mass.sqrt()
}

/// `n (b_n+1)^{-3/2} (Σ_{k≥3} k! γ_k²)^{1/2}`.
pub fn theoretical_bound_gaussian(f: &GaussianDensityInput, n: usize, b_n: f64) -> f64 {
    n as f64 * (b_n + 1.0).powf(-1.5) * f.tail_series().sqrt()
}

/// Runs the convergence experiment over `n_list` (rows in ascending `n`).
///
/// Per-row failures are stored in the row rather than aborting the table.
pub fn run_llt_experiment(
    f: &GaussianDensityInput,
    schedule: &SequenceSchedule,
    n_list: &[usize],
    d_cap: usize,
    tolerances: &ExperimentTolerances,
) -> ExperimentReport {
    let mut ns: Vec<usize> = n_list.iter().copied().filter(|&n| n >= 1).collect();
    ns.sort_unstable();
    ns.dedup();
    let records: Vec<ConvergenceRecord> = ns
        .par_iter()
        .map(|&n| {
            let b_n = schedule.b(n);
            let bound = theoretical_bound_gaussian(f, n, b_n);
            let result = mollified_sum_density(f, n, b_n, d_cap).and_then(|power| {
                let l1 = l1_distance_to_one_with(
                    &power.expansion,
                    tolerances.cross_check_rel,
                    tolerances.quadrature_order,
                )?;
                Ok((l1.sign_split, power.discarded_mass))
            });
            ConvergenceRecord::from_result(
                n,
                b_n,
                bound,
                tolerances.bound_abs,
                result.map_err(|e| e.to_string()),
            )
        })
        .collect();
    ExperimentReport {
        records,
        schedule_warnings: schedule.check(LimitRegime::Gaussian, &ns),
    }
}
