//! Law of small numbers in the Charlier chaos.
//!
//! For i.i.d. ℕ₀-valued `X_i` with mean `a` and ν-density
//! `f = 1 + Σ_{j≥2} γ_j c_j^a`, the ν-density of
//!
//! ```text
//! T_{n/(n+b_n)}(T_{1/n}X_1 + … + T_{1/n}X_n) + T_{b_n/(n+b_n)} U,   U ~ Poisson(a)
//! ```
//!
//! is `(Γ(1/(n+b_n)) f)^{⋄n}`, and its L¹(ν) distance to 1 is at most
//! `n (b_n+1)^{-2} (Σ_{j≥2} a^j j! γ_j²)^{1/2}`.
//!
//! The scalar factors in front of the two summands are read as α-thinning
//! (`T_α`), which keeps the variable ℕ₀-valued and is the reading under
//! which the chaos identity above holds.

use rayon::prelude::*;
use thiserror::Error;

use crate::chaos::{
    poisson_weighted_sum, project_poisson_masses, ChaosError, ChaosExpansion, WickPower,
    POISSON_TAIL_TOL,
};
use crate::experiment::{
    ConvergenceRecord, DensityViolation, ExperimentReport, ExperimentTolerances, InvalidDensity,
    LimitRegime, SequenceSchedule, MOMENT_TOL,
};
use crate::orthobasis::{poisson_ln_pmf, poisson_support_bound, BasisError, ReferenceMeasure};
use crate::sampling::{poisson_verification_support, NONNEGATIVITY_EPS};

/// Charlier degree used when turning a pmf into a ν-density.
pub const DEFAULT_DENSITY_DEGREE: usize = 64;
/// Tolerance on `Σ p_k = 1`.
pub const PMF_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LsnError {
    #[error("pmf needs at least one entry")]
    EmptyPmf,
    #[error("pmf entry {index} is {value}, expected a finite nonnegative number")]
    NegativeMass { index: usize, value: f64 },
    #[error("pmf sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("thinning parameter must lie in [0, 1], got {0}")]
    ThinningOutOfRange(f64),
    #[error("expected a Poisson expansion with intensity {expected}")]
    WrongMeasure { expected: f64 },
    #[error(transparent)]
    Invalid(#[from] InvalidDensity),
    #[error(transparent)]
    Chaos(#[from] ChaosError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Probability mass function on `{0, …, K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmf {
    probs: Vec<f64>,
}

impl FinitePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self, LsnError> {
        if probs.is_empty() {
            return Err(LsnError::EmptyPmf);
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(LsnError::NegativeMass { index, value });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(LsnError::NotNormalized(total));
        }
        Ok(FinitePmf { probs })
    }

    /// Divides by the total mass first.
    pub fn normalized(mut probs: Vec<f64>) -> Result<Self, LsnError> {
        let total: f64 = probs.iter().sum();
        if total > 0.0 && total.is_finite() {
            for p in &mut probs {
                *p /= total;
            }
        }
        Self::new(probs)
    }

    pub fn dirac(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        FinitePmf { probs }
    }

    /// Poisson(a) restricted to `{0, …, k_max}` and renormalized.
    pub fn poisson_truncated(a: f64, k_max: usize) -> Result<Self, LsnError> {
        Self::normalized(crate::orthobasis::poisson_pmf_table(a, k_max))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// Largest point of the stored support.
    pub fn max_point(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// Half the ℓ¹ distance, over the union of supports.
    pub fn total_variation(&self, other: &FinitePmf) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        0.5 * (0..len)
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .sum::<f64>()
    }
}

/// `C(n, k)`, exact in `u128` for `n ≤ 120`, log-gamma otherwise.
fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    if n <= 120 {
        let mut acc: u128 = 1;
        for i in 0..k {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        acc as f64
    } else {
        use crate::orthobasis::ln_factorial;
        (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp()
    }
}

/// α-thinning: `(T_α p)_k = Σ_{n≥k} C(n,k) α^k (1−α)^{n−k} p_n`.
pub fn thin(alpha: f64, p: &FinitePmf) -> Result<FinitePmf, LsnError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LsnError::ThinningOutOfRange(alpha));
    }
    let len = p.probs.len();
    let mut out = vec![0.0; len];
    for (n, &pn) in p.probs.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
            *slot += binomial(n, k) * alpha.powi(k as i32) * (1.0 - alpha).powi((n - k) as i32) * pn;
        }
    }
    Ok(FinitePmf { probs: out })
}

fn poisson_measure(a: f64) -> Result<ReferenceMeasure, LsnError> {
    Ok(ReferenceMeasure::poisson(a)?)
}

/// ν-density `p_k / ν({k})` of a pmf, projected onto the Charlier basis
/// up to [`DEFAULT_DENSITY_DEGREE`].
pub fn pmf_to_density(p: &FinitePmf, a: f64) -> Result<ChaosExpansion, LsnError> {
    pmf_to_density_with_degree(p, a, DEFAULT_DENSITY_DEGREE)
}

pub fn pmf_to_density_with_degree(
    p: &FinitePmf,
    a: f64,
    degree: usize,
) -> Result<ChaosExpansion, LsnError> {
    let measure = poisson_measure(a)?;
    // project from the masses p_k = f(k) ν({k}) directly
    Ok(project_poisson_masses(&p.probs, measure, degree)?)
}

/// A ν-density with mean `a` (`γ_0 = 1`, `γ_1 = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonDensityInput {
    expansion: ChaosExpansion,
    intensity: f64,
}

impl PoissonDensityInput {
    pub fn expansion(&self) -> &ChaosExpansion {
        &self.expansion
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    /// `Σ_{j≥2} a^j j! γ_j²`, equal to `‖f‖₂² − 1` for a valid input.
    pub fn tail_series(&self) -> f64 {
        self.expansion.weighted_sq_sum(2)
    }
}

/// Where `ν({k})` is tiny, rounding in the truncated expansion is amplified
/// by `1/ν({k})`; a negative value only counts when the mass `f(k) ν({k})`
/// it stands for is below `−MASS_EPS` as well.
const MASS_EPS: f64 = 1e-15;

fn negative_mass_point(f: &ChaosExpansion, a: f64) -> Option<(f64, f64)> {
    poisson_verification_support(a).into_iter().find_map(|x| {
        let v = f.eval(x);
        let mass = v * poisson_ln_pmf(a, x as usize).exp();
        (v < -NONNEGATIVITY_EPS && mass < -MASS_EPS).then_some((x, v))
    })
}

/// Checks `γ_0 = 1`, `γ_1 = 0`, nonnegativity on the verification support
/// and a finite L² norm.
pub fn validate_poisson_density(
    f: &ChaosExpansion,
    a: f64,
) -> Result<PoissonDensityInput, InvalidDensity> {
    match f.measure().intensity() {
        Some(i) if i == a => {}
        _ => return Err(InvalidDensity(vec![DensityViolation::WrongMeasure])),
    }
    let mut violations = Vec::new();
    if (f.coeff(0) - 1.0).abs() > MOMENT_TOL {
        violations.push(DensityViolation::Mass { gamma0: f.coeff(0) });
    }
    if f.coeff(1).abs() > MOMENT_TOL {
        violations.push(DensityViolation::Mean { gamma1: f.coeff(1) });
    }
    if let Some((at, value)) = negative_mass_point(f, a) {
        violations.push(DensityViolation::Negative { at, value });
    }
    let norm_sq = f.weighted_sq_sum(0);
    if !norm_sq.is_finite() {
        violations.push(DensityViolation::L2Overflow { norm_sq });
    }
    if violations.is_empty() {
        Ok(PoissonDensityInput {
            expansion: f.clone(),
            intensity: a,
        })
    } else {
        Err(InvalidDensity(violations))
    }
}

/// Builtin input: `p* = (1/4, 1/2, 1/4)` against Poisson(1).
pub fn three_point_density() -> PoissonDensityInput {
    let p = FinitePmf::new(vec![0.25, 0.5, 0.25]).expect("valid pmf");
    let f = pmf_to_density(&p, 1.0).expect("finite support");
    validate_poisson_density(&f, 1.0).expect("mean equals intensity")
}

/// `(Γ(1/(n+b_n)) f)^{⋄n}`, the ν-density of the mollified thinned sum.
pub fn mollified_thinned_sum_density(
    f: &PoissonDensityInput,
    n: usize,
    b_n: f64,
    d_cap: usize,
) -> Result<WickPower, LsnError> {
    let lambda = 1.0 / (n as f64 + b_n);
    let scaled = f.expansion.second_quantization(lambda)?;
    Ok(scaled.wick_power(n, d_cap)?)
}

/// `Σ_{k ≤ K} |g(k) − 1| ν({k})`, with `K` from the weighted Poisson tail
/// bound at tolerance `1e−14` for the expansion's degree.
pub fn l1_distance_to_one_poisson(g: &ChaosExpansion) -> Result<f64, LsnError> {
    let a = match g.measure().intensity() {
        Some(a) => a,
        None => return Err(LsnError::WrongMeasure { expected: f64::NAN }),
    };
    let centered = g.shifted(-1.0).trimmed(1e-40);
    let k_max = poisson_support_bound(a, POISSON_TAIL_TOL, centered.degree())?;
    Ok(poisson_weighted_sum(a, k_max, |k| centered.eval(k as f64).abs()))
}

/// `n (b_n+1)^{-2} (Σ_{j≥2} a^j j! γ_j²)^{1/2}`.
pub fn theoretical_bound_poisson(f: &PoissonDensityInput, n: usize, b_n: f64) -> f64 {
    n as f64 * (b_n + 1.0).powi(-2) * f.tail_series().sqrt()
}

/// Runs the convergence experiment over `n_list` (rows in ascending `n`).
pub fn run_lsn_experiment(
    f: &PoissonDensityInput,
    schedule: &SequenceSchedule,
    n_list: &[usize],
    d_cap: usize,
    tolerances: &ExperimentTolerances,
) -> ExperimentReport {
    let mut ns: Vec<usize> = n_list.iter().copied().filter(|&n| n >= 1).collect();
    ns.sort_unstable();
    ns.dedup();
    let records = ns
        .par_iter()
        .map(|&n| {
            let b_n = schedule.b(n);
            let bound = theoretical_bound_poisson(f, n, b_n);
            let result = mollified_thinned_sum_density(f, n, b_n, d_cap).and_then(|power| {
                let l1 = l1_distance_to_one_poisson(&power.expansion)?;
                Ok((l1, power.discarded_mass))
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
        schedule_warnings: schedule.check(LimitRegime::Poisson, &ns),
    }
}
