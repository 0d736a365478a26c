//! Truncated chaos expansions and their algebra.
//!
//! A [`ChaosExpansion`] stores `γ_0, …, γ_D` against the monic orthogonal
//! basis of its [`ReferenceMeasure`]. Second quantization `Γ(λ)` scales
//! `γ_j` by `λ^j`; the Wick product is the Cauchy product of coefficient
//! sequences. Both are measure independent; only the basis norms
//! (`j!` or `a^j j!`) and the integration rules differ between the
//! Gaussian and Poisson settings.

use thiserror::Error;

use crate::orthobasis::{
    cached_gauss_hermite_rule, default_quadrature_order, hermite_values, poisson_ln_pmf,
    poisson_support_bound, BasisError, QuadratureRule, ReferenceMeasure,
};

/// Tail tolerance used to truncate sums over ℕ₀.
pub const POISSON_TAIL_TOL: f64 = 1e-14;
/// Default degree cap for Wick powers.
pub const DEFAULT_D_CAP: usize = 64;
/// Wick powers abort when `sqrt(discarded mass)` exceeds this fraction of the retained L² norm.
pub const TRUNCATION_REL_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChaosError {
    #[error("expansion needs at least one coefficient")]
    Empty,
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("reference measures differ: {left:?} vs {right:?}")]
    MeasureMismatch {
        left: ReferenceMeasure,
        right: ReferenceMeasure,
    },
    #[error("second quantization parameter must satisfy |λ| <= 1, got {0}")]
    LambdaOutOfRange(f64),
    #[error("exponent must satisfy p >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("invalid Young configuration: {0}")]
    InvalidYoungConfig(String),
    #[error("{count} expansions supplied for {alphas} Young coefficients")]
    YoungArity { count: usize, alphas: usize },
    #[error(
        "Wick power truncation discarded sqrt-mass {discarded:e} against retained norm {retained:e}"
    )]
    TruncationMass { discarded: f64, retained: f64 },
    #[error("{sites} sample values supplied for {expected} sites")]
    SampleLength { sites: usize, expected: usize },
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Coefficient vector `(γ_0, …, γ_D)` tagged with its reference measure.
///
/// The degree is a truncation bound: trailing coefficients may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosExpansion {
    measure: ReferenceMeasure,
    coeffs: Vec<f64>,
}

/// Where the values handed to [`project`] were sampled.
#[derive(Debug, Clone, Copy)]
pub enum SampleSites<'a> {
    /// Values at the nodes of a Gauss–Hermite rule.
    Quadrature(&'a QuadratureRule),
    /// Values at `k = 0, 1, …` for Poisson(a); the function is taken as zero beyond.
    Counting { intensity: f64 },
}

/// Result of [`ChaosExpansion::wick_power`].
#[derive(Debug, Clone, PartialEq)]
pub struct WickPower {
    pub expansion: ChaosExpansion,
    /// `Σ_{D_cap < j ≤ 2·D_cap} w_j γ_j²` of the product before truncation.
    pub discarded_mass: f64,
}

impl ChaosExpansion {
    pub fn new(measure: ReferenceMeasure, coeffs: Vec<f64>) -> Result<Self, ChaosError> {
        if coeffs.is_empty() {
            return Err(ChaosError::Empty);
        }
        if let Some((index, &value)) = coeffs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(ChaosError::NonFinite { index, value });
        }
        Ok(ChaosExpansion { measure, coeffs })
    }

    pub fn constant(measure: ReferenceMeasure, value: f64) -> Self {
        ChaosExpansion {
            measure,
            coeffs: vec![value],
        }
    }

    pub fn one(measure: ReferenceMeasure) -> Self {
        Self::constant(measure, 1.0)
    }

    pub fn measure(&self) -> ReferenceMeasure {
        self.measure
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Same function with the degree bound raised or lowered (zero-padded / cut).
    pub fn with_degree(&self, degree: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(degree + 1, 0.0);
        ChaosExpansion {
            measure: self.measure,
            coeffs,
        }
    }

    /// Drops trailing coefficients whose weighted square is at most
    /// `rel_tol` times the total squared norm.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let weights = self.measure.basis_norms_sq(self.degree());
        let total: f64 = weights
            .iter()
            .zip(&self.coeffs)
            .map(|(w, c)| w * c * c)
            .sum();
        let mut keep = self.coeffs.len();
        while keep > 1 {
            let j = keep - 1;
            let mass = weights[j] * self.coeffs[j] * self.coeffs[j];
            if mass <= rel_tol * total || self.coeffs[j] == 0.0 {
                keep -= 1;
            } else {
                break;
            }
        }
        ChaosExpansion {
            measure: self.measure,
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    /// `f + c` (adds `c` to the constant coefficient).
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        ChaosExpansion {
            measure: self.measure,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    /// Coefficientwise difference; degrees are padded to the larger one.
    pub fn sub(&self, other: &ChaosExpansion) -> Result<Self, ChaosError> {
        self.check_measure(other)?;
        let d = self.degree().max(other.degree());
        let coeffs = (0..=d).map(|j| self.coeff(j) - other.coeff(j)).collect();
        Ok(ChaosExpansion {
            measure: self.measure,
            coeffs,
        })
    }

    fn check_measure(&self, other: &ChaosExpansion) -> Result<(), ChaosError> {
        if self.measure != other.measure {
            return Err(ChaosError::MeasureMismatch {
                left: self.measure,
                right: other.measure,
            });
        }
        Ok(())
    }

    /// Pointwise value `Σ_j γ_j b_j(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let basis = self.measure.basis_values(x, self.degree());
        basis.iter().zip(&self.coeffs).map(|(b, c)| b * c).sum()
    }

    /// Second quantization: `γ_j ↦ λ^j γ_j`.
    pub fn second_quantization(&self, lambda: f64) -> Result<Self, ChaosError> {
        if !(lambda.abs() <= 1.0) {
            return Err(ChaosError::LambdaOutOfRange(lambda));
        }
        let mut power = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let v = power * c;
                power *= lambda;
                v
            })
            .collect();
        Ok(ChaosExpansion {
            measure: self.measure,
            coeffs,
        })
    }

    /// Wick product: the Cauchy product of the coefficient sequences.
    pub fn wick_product(&self, other: &ChaosExpansion) -> Result<Self, ChaosError> {
        self.check_measure(other)?;
        Ok(ChaosExpansion {
            measure: self.measure,
            coeffs: cauchy_product(&self.coeffs, &other.coeffs, usize::MAX),
        })
    }

    /// `f^{⋄n}` truncated at degree `d_cap`.
    ///
    /// The product is carried exactly up to degree `2·d_cap` (the Cauchy
    /// product never moves mass to lower degrees, so intermediate truncation
    /// does not disturb retained coefficients); the weighted mass that lands
    /// in `(d_cap, 2·d_cap]` is reported and must stay below
    /// [`TRUNCATION_REL_LIMIT`] relative to the retained norm.
    pub fn wick_power(&self, n: usize, d_cap: usize) -> Result<WickPower, ChaosError> {
        let window = d_cap.saturating_mul(2).max(1);
        let mut result = vec![1.0];
        let mut base: Vec<f64> = self.coeffs.iter().take(window + 1).copied().collect();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = cauchy_product(&result, &base, window);
            }
            e >>= 1;
            if e > 0 {
                base = cauchy_product(&base, &base, window);
            }
        }
        let weights = self.measure.basis_norms_sq(result.len().saturating_sub(1));
        let discarded_mass: f64 = (d_cap + 1..result.len())
            .map(|j| weights[j] * result[j] * result[j])
            .sum();
        result.truncate(d_cap + 1);
        let expansion = ChaosExpansion {
            measure: self.measure,
            coeffs: result,
        };
        let retained = expansion.l2_norm();
        if discarded_mass.sqrt() > TRUNCATION_REL_LIMIT * retained {
            return Err(ChaosError::TruncationMass {
                discarded: discarded_mass.sqrt(),
                retained,
            });
        }
        Ok(WickPower {
            expansion,
            discarded_mass,
        })
    }

    /// `sqrt(Σ_j w_j γ_j²)` with `w_j = j!` or `a^j j!`.
    pub fn l2_norm(&self) -> f64 {
        self.weighted_sq_sum(0).sqrt()
    }

    /// `Σ_{j ≥ from} w_j γ_j²`.
    pub fn weighted_sq_sum(&self, from: usize) -> f64 {
        let weights = self.measure.basis_norms_sq(self.degree());
        (from..self.coeffs.len())
            .map(|j| weights[j] * self.coeffs[j] * self.coeffs[j])
            .sum()
    }

    /// `‖f‖_p` against the reference measure.
    ///
    /// Gaussian: exact integration between sign changes for `p = 1`,
    /// otherwise Gauss–Hermite quadrature of order
    /// [`default_quadrature_order`]. Poisson: summation over `k ≤ K` with
    /// `K` from [`poisson_support_bound`]. For `p = ∞` the essential supremum
    /// of a polynomial is finite only when it is constant, so nonconstant
    /// expansions report `+∞`.
    pub fn lp_norm(&self, p: f64) -> Result<f64, ChaosError> {
        if !(p >= 1.0) {
            return Err(ChaosError::InvalidExponent(p));
        }
        if p.is_infinite() {
            let nonconstant = self.coeffs[1..].iter().any(|&c| c != 0.0);
            return Ok(if nonconstant {
                f64::INFINITY
            } else {
                self.coeffs[0].abs()
            });
        }
        let sum = self.integrate_abs_pow(p)?;
        Ok(sum.powf(1.0 / p))
    }

    /// `∫ |f|^p d(reference)`.
    pub fn integrate_abs_pow(&self, p: f64) -> Result<f64, ChaosError> {
        let pow = |v: f64| {
            let a = v.abs();
            if p == 1.0 {
                a
            } else if p == 2.0 {
                a * a
            } else {
                a.powf(p)
            }
        };
        match self.measure {
            ReferenceMeasure::Gaussian if p == 1.0 => Ok(gaussian_abs_integral(self)),
            ReferenceMeasure::Gaussian => {
                let rule = cached_gauss_hermite_rule(default_quadrature_order(self.degree()))?;
                Ok(rule.integrate(|x| pow(self.eval(x))))
            }
            ReferenceMeasure::Poisson { intensity } => {
                let k_max = poisson_support_bound(intensity, POISSON_TAIL_TOL, self.degree())?;
                Ok(poisson_weighted_sum(intensity, k_max, |k| pow(self.eval(k as f64))))
            }
        }
    }
}

/// Standard normal distribution function.
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Antiderivative of `g φ`: since `(h_{j−1} φ)' = −h_j φ`,
/// `∫_{−∞}^x g φ = γ_0 Φ(x) − φ(x) Σ_{j≥1} γ_j h_{j−1}(x)`.
fn weighted_antiderivative(g: &ChaosExpansion, x: f64) -> f64 {
    let c = g.coeffs();
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return c[0];
    }
    let mut poly = 0.0;
    if c.len() > 1 {
        let h = hermite_values(x, c.len() - 2);
        poly = c[1..].iter().zip(&h).map(|(a, b)| a * b).sum();
    }
    c[0] * normal_cdf(x) - (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * poly
}

const ROOT_SCAN_RADIUS: f64 = 12.0;
const ROOT_SCAN_POINTS: usize = 24_001;

/// Real sign changes of `g` on `[−12, 12]`, each located by bisection.
fn sign_changes(g: &ChaosExpansion) -> Vec<f64> {
    let r = ROOT_SCAN_RADIUS;
    let step = 2.0 * r / (ROOT_SCAN_POINTS - 1) as f64;
    let mut roots = Vec::new();
    let mut x0 = -r;
    let mut v0 = g.eval(x0);
    for i in 1..ROOT_SCAN_POINTS {
        let x1 = -r + i as f64 * step;
        let v1 = g.eval(x1);
        if v1 == 0.0 {
            roots.push(x1);
        } else if v0 != 0.0 && (v0 < 0.0) != (v1 < 0.0) {
            let (mut lo, mut hi, neg_lo) = (x0, x1, v0 < 0.0);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (g.eval(mid) < 0.0) == neg_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        x0 = x1;
        v0 = v1;
    }
    roots
}

/// `∫ |g| dμ` as `Σ |F(r_{i+1}) − F(r_i)|` over the intervals between
/// consecutive sign changes of `g`, with `F` the exact antiderivative of `gφ`.
/// Sign changes outside `[−12, 12]` are missed; the error this causes is at
/// most `∫_{|x|>12} |g| dμ`.
pub fn gaussian_abs_integral(g: &ChaosExpansion) -> f64 {
    let mut points = vec![f64::NEG_INFINITY];
    points.extend(sign_changes(g));
    points.push(f64::INFINITY);
    let values: Vec<f64> = points.iter().map(|&x| weighted_antiderivative(g, x)).collect();
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// `Σ_{k ≤ k_max} g(k) ν({k})`, skipping points where `ν({k})` underflows.
pub(crate) fn poisson_weighted_sum<F: Fn(usize) -> f64>(a: f64, k_max: usize, g: F) -> f64 {
    let mut total = 0.0;
    for k in 0..=k_max {
        let w = poisson_ln_pmf(a, k).exp();
        if w == 0.0 {
            continue;
        }
        total += g(k) * w;
    }
    total
}

fn cauchy_product(f: &[f64], g: &[f64], max_degree: usize) -> Vec<f64> {
    let full = f.len() + g.len() - 2;
    let top = full.min(max_degree);
    let mut out = vec![0.0; top + 1];
    for (i, &fi) in f.iter().enumerate().take(top + 1) {
        if fi == 0.0 {
            continue;
        }
        for (j, &gj) in g.iter().enumerate().take(top + 1 - i) {
            out[i + j] += fi * gj;
        }
    }
    out
}

/// Projects sampled function values onto the basis up to `degree`.
///
/// Gaussian: `γ_j = (1/j!) ∫ f h_j dμ` by the supplied quadrature rule.
/// Poisson: `γ_j = (1/(a^j j!)) Σ_k f(k) c_j^a(k) ν({k})` over the supplied points.
pub fn project(
    values: &[f64],
    sites: SampleSites<'_>,
    degree: usize,
) -> Result<ChaosExpansion, ChaosError> {
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(ChaosError::NonFinite { index, value });
    }
    match sites {
        SampleSites::Quadrature(rule) => {
            if values.len() != rule.order() {
                return Err(ChaosError::SampleLength {
                    sites: values.len(),
                    expected: rule.order(),
                });
            }
            let measure = ReferenceMeasure::Gaussian;
            let norms = measure.basis_norms_sq(degree);
            let mut coeffs = vec![0.0; degree + 1];
            for ((&x, &w), &fx) in rule.nodes().iter().zip(rule.weights()).zip(values) {
                let basis = measure.basis_values(x, degree);
                for (c, b) in coeffs.iter_mut().zip(&basis) {
                    *c += w * fx * b;
                }
            }
            for (c, n) in coeffs.iter_mut().zip(&norms) {
                *c /= n;
            }
            ChaosExpansion::new(measure, coeffs)
        }
        SampleSites::Counting { intensity } => {
            let measure = ReferenceMeasure::poisson(intensity)?;
            let masses: Vec<f64> = values
                .iter()
                .enumerate()
                .map(|(k, &v)| v * poisson_ln_pmf(intensity, k).exp())
                .collect();
            project_poisson_masses(&masses, measure, degree)
        }
    }
}

/// Poisson projection from masses `m_k = f(k) ν({k})`; avoids forming
/// `f(k)` where `ν({k})` is tiny.
pub fn project_poisson_masses(
    masses: &[f64],
    measure: ReferenceMeasure,
    degree: usize,
) -> Result<ChaosExpansion, ChaosError> {
    let intensity = match measure.intensity() {
        Some(a) => a,
        None => {
            return Err(ChaosError::MeasureMismatch {
                left: measure,
                right: ReferenceMeasure::Poisson { intensity: 1.0 },
            })
        }
    };
    let norms = measure.basis_norms_sq(degree);
    let mut coeffs = vec![0.0; degree + 1];
    for (k, &m) in masses.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let basis = crate::orthobasis::charlier_values(intensity, k as f64, degree);
        for (c, b) in coeffs.iter_mut().zip(&basis) {
            *c += m * b;
        }
    }
    for (c, n) in coeffs.iter_mut().zip(&norms) {
        *c /= n;
    }
    ChaosExpansion::new(measure, coeffs)
}

/// Exponents and coefficients for the Wick-form Young inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungConfig {
    pub alphas: Vec<f64>,
    pub exponents: Vec<f64>,
    pub r: f64,
}

/// Outcome of [`young_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl YoungConfig {
    pub fn new(alphas: Vec<f64>, exponents: Vec<f64>, r: f64) -> Self {
        YoungConfig {
            alphas,
            exponents,
            r,
        }
    }

    /// Gaussian configuration: `r` solved from `Σ α_i²/(p_i − 1) = 1/(r − 1)`.
    pub fn gaussian_balanced(alphas: Vec<f64>, exponents: Vec<f64>) -> Self {
        let s: f64 = alphas
            .iter()
            .zip(&exponents)
            .map(|(a, &p)| a * a * conjugate_term(p))
            .sum();
        let r = if s.is_infinite() { 1.0 } else { 1.0 + 1.0 / s };
        YoungConfig::new(alphas, exponents, r)
    }

    /// Poisson configuration with a single exponent.
    pub fn poisson(alphas: Vec<f64>, p: f64) -> Self {
        let exponents = vec![p; alphas.len()];
        YoungConfig::new(alphas, exponents, p)
    }

    pub fn validate(&self, measure: ReferenceMeasure) -> Result<(), ChaosError> {
        let bad = |m: String| Err(ChaosError::InvalidYoungConfig(m));
        if self.alphas.is_empty() || self.alphas.len() != self.exponents.len() {
            return bad("alphas and exponents must be nonempty and of equal length".into());
        }
        if self
            .exponents
            .iter()
            .chain(std::iter::once(&self.r))
            .any(|&p| !(p >= 1.0))
        {
            return bad("exponents must lie in [1, ∞]".into());
        }
        match measure {
            ReferenceMeasure::Gaussian => {
                if self.alphas.iter().any(|a| !(a.abs() <= 1.0)) {
                    return bad("alphas must lie in [-1, 1]".into());
                }
                let sq: f64 = self.alphas.iter().map(|a| a * a).sum();
                if (sq - 1.0).abs() > 1e-12 {
                    return bad(format!("Σ α_i² = {sq}, expected 1"));
                }
                let lhs: f64 = self
                    .alphas
                    .iter()
                    .zip(&self.exponents)
                    .filter(|(a, _)| **a != 0.0)
                    .map(|(a, &p)| a * a * conjugate_term(p))
                    .sum();
                let rhs = conjugate_term(self.r);
                let ok = if lhs.is_infinite() || rhs.is_infinite() {
                    lhs == rhs
                } else {
                    (lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs())
                };
                if !ok {
                    return bad(format!("Σ α_i²/(p_i−1) = {lhs} but 1/(r−1) = {rhs}"));
                }
            }
            ReferenceMeasure::Poisson { .. } => {
                if self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    return bad("alphas must lie in [0, 1]".into());
                }
                let s: f64 = self.alphas.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return bad(format!("Σ α_i = {s}, expected 1"));
                }
                if self.exponents.iter().any(|&p| p != self.r) {
                    return bad("Poisson form needs p_i = r for all i".into());
                }
            }
        }
        Ok(())
    }
}

/// `1/(p − 1)`, with `p = 1 ↦ ∞` and `p = ∞ ↦ 0`.
fn conjugate_term(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        1.0 / (p - 1.0)
    }
}

/// Evaluates `‖Γ(α_1)f_1 ⋄ ⋯ ⋄ Γ(α_n)f_n‖_r` against `Π ‖f_i‖_{p_i}`.
pub fn young_check(
    fs: &[ChaosExpansion],
    cfg: &YoungConfig,
    tol: f64,
) -> Result<YoungOutcome, ChaosError> {
    if fs.is_empty() || fs.len() != cfg.alphas.len() {
        return Err(ChaosError::YoungArity {
            count: fs.len(),
            alphas: cfg.alphas.len(),
        });
    }
    let measure = fs[0].measure();
    cfg.validate(measure)?;
    let mut product = ChaosExpansion::one(measure);
    let mut rhs = 1.0;
    for ((f, &alpha), &p) in fs.iter().zip(&cfg.alphas).zip(&cfg.exponents) {
        product = product.wick_product(&f.second_quantization(alpha)?)?;
        rhs *= f.lp_norm(p)?;
    }
    let lhs = product.lp_norm(cfg.r)?;
    Ok(YoungOutcome {
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orthobasis::gauss_hermite_rule;

    fn gauss(coeffs: &[f64]) -> ChaosExpansion {
        ChaosExpansion::new(ReferenceMeasure::Gaussian, coeffs.to_vec()).unwrap()
    }

    #[test]
    fn projection_of_constant_and_h4() {
        let rule = gauss_hermite_rule(40).unwrap();
        let ones = vec![1.0; rule.order()];
        let f = project(&ones, SampleSites::Quadrature(&rule), 6).unwrap();
        assert!((f.coeff(0) - 1.0).abs() < 1e-12);
        assert!(f.coeffs()[1..].iter().all(|c| c.abs() < 1e-12));

        let target = gauss(&[1.0, 0.0, 0.0, 0.0, 0.1]);
        let vals: Vec<f64> = rule.nodes().iter().map(|&x| target.eval(x)).collect();
        let g = project(&vals, SampleSites::Quadrature(&rule), 8).unwrap();
        for j in 0..=8 {
            assert!((g.coeff(j) - target.coeff(j)).abs() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn projection_rejects_bad_input() {
        let rule = gauss_hermite_rule(4).unwrap();
        assert!(matches!(
            project(&[1.0, f64::NAN, 1.0, 1.0], SampleSites::Quadrature(&rule), 2),
            Err(ChaosError::NonFinite { index: 1, .. })
        ));
        assert!(matches!(
            project(&[1.0; 3], SampleSites::Quadrature(&rule), 2),
            Err(ChaosError::SampleLength { .. })
        ));
    }

    #[test]
    fn poisson_projection_of_three_point_law() {
        let e = std::f64::consts::E;
        let values = [0.25 * e, 0.5 * e, 0.5 * e];
        let f = project(&values, SampleSites::Counting { intensity: 1.0 }, 10).unwrap();
        assert!((f.coeff(0) - 1.0).abs() < 1e-12);
        assert!(f.coeff(1).abs() < 1e-12);
    }

    #[test]
    fn second_quantization_examples() {
        let f = gauss(&[1.0, 0.0, 0.0, 0.2]);
        assert_eq!(f.second_quantization(1.0).unwrap(), f);
        let zero = f.second_quantization(0.0).unwrap();
        assert_eq!(zero.coeffs(), &[1.0, 0.0, 0.0, 0.0]);
        let half = f.second_quantization(0.5).unwrap();
        assert!((half.coeff(3) - 0.025).abs() < 1e-15);
        assert!(matches!(
            f.second_quantization(1.5),
            Err(ChaosError::LambdaOutOfRange(_))
        ));
    }

    #[test]
    fn wick_product_examples() {
        let f = gauss(&[1.0, 2.0]);
        let g = gauss(&[1.0, 3.0]);
        assert_eq!(f.wick_product(&g).unwrap().coeffs(), &[1.0, 5.0, 6.0]);
        let one = ChaosExpansion::one(ReferenceMeasure::Gaussian);
        assert_eq!(f.wick_product(&one).unwrap(), f);
        let p = ChaosExpansion::one(ReferenceMeasure::poisson(1.0).unwrap());
        assert!(matches!(
            f.wick_product(&p),
            Err(ChaosError::MeasureMismatch { .. })
        ));
    }

    #[test]
    fn wick_power_binomial_coefficients() {
        let eps = 0.3;
        let f = gauss(&[1.0, 0.0, 0.0, 0.0, eps]);
        assert_eq!(f.wick_power(0, 64).unwrap().expansion.coeffs(), &[1.0]);
        assert_eq!(f.wick_power(1, 64).unwrap().expansion, f);
        let p5 = f.wick_power(5, 64).unwrap();
        let binom = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
        for (k, &b) in binom.iter().enumerate() {
            let want = b * eps.powi(k as i32);
            assert!((p5.expansion.coeff(4 * k) - want).abs() < 1e-14);
        }
        assert_eq!(p5.discarded_mass, 0.0);
    }

    #[test]
    fn wick_power_reports_truncation() {
        let f = gauss(&[1.0, 0.0, 0.0, 0.0, 1e-3]);
        // degree 12 fits, cap 8 discards (1e-3)^3 at h_12
        let res = f.wick_power(3, 8);
        assert!(matches!(res, Err(ChaosError::TruncationMass { .. })));
        let tiny = gauss(&[1.0, 0.0, 0.0, 0.0, 1e-9]);
        let p = tiny.wick_power(3, 8).unwrap();
        let want = 1e-54 * ReferenceMeasure::Gaussian.basis_norm_sq(12);
        assert!((p.discarded_mass - want).abs() <= 1e-6 * want);
        assert_eq!(p.expansion.degree(), 8);
    }

    #[test]
    fn l2_and_lp_norms() {
        let one = ChaosExpansion::one(ReferenceMeasure::Gaussian);
        assert_eq!(one.l2_norm(), 1.0);
        for p in [1.0, 1.5, 3.0, f64::INFINITY] {
            assert!((one.lp_norm(p).unwrap() - 1.0).abs() < 1e-12);
        }
        let f = gauss(&[1.0, 0.0, 0.0, 0.0, 0.1]);
        assert!((f.l2_norm() - 1.24f64.sqrt()).abs() < 1e-15);
        assert!((f.lp_norm(2.0).unwrap() - 1.24f64.sqrt()).abs() < 1e-10);
        assert!((f.lp_norm(1.0).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(f.lp_norm(f64::INFINITY).unwrap(), f64::INFINITY);
        assert!(matches!(f.lp_norm(0.5), Err(ChaosError::InvalidExponent(_))));
    }

    #[test]
    fn poisson_l2_matches_summation() {
        let m = ReferenceMeasure::poisson(2.0).unwrap();
        let f = ChaosExpansion::new(m, vec![1.0, 0.0, 0.05, -0.01, 0.002]).unwrap();
        let by_sum = f.lp_norm(2.0).unwrap();
        assert!((by_sum - f.l2_norm()).abs() < 1e-10);
    }

    #[test]
    fn young_config_validation() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let cfg = YoungConfig::gaussian_balanced(vec![s, s], vec![3.0, 3.0]);
        assert!((cfg.r - 3.0).abs() < 1e-12);
        assert!(cfg.validate(ReferenceMeasure::Gaussian).is_ok());
        let l1 = YoungConfig::new(vec![s, s], vec![1.0, 1.0], 1.0);
        assert!(l1.validate(ReferenceMeasure::Gaussian).is_ok());
        let wrong = YoungConfig::new(vec![s, s], vec![3.0, 3.0], 2.0);
        assert!(wrong.validate(ReferenceMeasure::Gaussian).is_err());
        let poisson = YoungConfig::poisson(vec![0.3, 0.7], 2.0);
        let m = ReferenceMeasure::poisson(1.0).unwrap();
        assert!(poisson.validate(m).is_ok());
        assert!(YoungConfig::poisson(vec![0.3, 0.6], 2.0).validate(m).is_err());
        let infinite = YoungConfig::new(vec![1.0], vec![f64::INFINITY], f64::INFINITY);
        assert!(infinite.validate(ReferenceMeasure::Gaussian).is_ok());
    }

    #[test]
    fn young_trivial_case() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let one = ChaosExpansion::one(ReferenceMeasure::Gaussian);
        let cfg = YoungConfig::gaussian_balanced(vec![s, s], vec![3.0, 3.0]);
        let out = young_check(&[one.clone(), one], &cfg, 1e-9).unwrap();
        assert!((out.lhs - 1.0).abs() < 1e-12 && (out.rhs - 1.0).abs() < 1e-12);
        assert!(out.holds);
    }

    #[test]
    fn trimming_keeps_significant_terms() {
        let f = gauss(&[1.0, 0.5, 1e-15, 0.0]);
        assert_eq!(f.trimmed(1e-40).degree(), 2);
        assert_eq!(f.trimmed(1e-20).degree(), 1);
    }
}
