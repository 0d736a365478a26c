//! Monic Hermite and Charlier polynomials, and the rules used to integrate
//! against their reference measures.
//!
//! The Gaussian side uses the standard normal measure μ with the monic
//! (probabilists') Hermite family `h_n`, normalized so that
//! `∫ h_j h_k dμ = j! δ_jk`. The Poisson side uses ν = Poisson(a) on ℕ₀
//! with the monic Charlier family `c_n^a`, for which
//! `Σ_k c_j^a(k) c_k^a(k) ν({k}) = a^j j! δ_jk`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Hard cap on the Poisson support size returned by [`poisson_support_bound`].
pub const DEFAULT_SUPPORT_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("Poisson intensity must be finite and positive, got {0}")]
    InvalidIntensity(f64),
    #[error("quadrature order must be at least 1")]
    ZeroOrder,
    #[error("root finding did not converge for Hermite degree {degree}")]
    RootFinding { degree: usize },
    #[error("tail tolerance must lie in (0, 1), got {0}")]
    InvalidTailTolerance(f64),
    #[error("Poisson support for tail tolerance {tail_tol:e} exceeds the cap of {cap} points")]
    SupportCapExceeded { tail_tol: f64, cap: usize },
}

/// The reference measure a chaos expansion is taken against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceMeasure {
    /// Standard one-dimensional Gaussian measure μ.
    Gaussian,
    /// Poisson distribution ν with the given intensity `a > 0`.
    Poisson { intensity: f64 },
}

impl ReferenceMeasure {
    pub fn gaussian() -> Self {
        ReferenceMeasure::Gaussian
    }

    pub fn poisson(intensity: f64) -> Result<Self, BasisError> {
        if !(intensity.is_finite() && intensity > 0.0) {
            return Err(BasisError::InvalidIntensity(intensity));
        }
        Ok(ReferenceMeasure::Poisson { intensity })
    }

    pub fn intensity(&self) -> Option<f64> {
        match *self {
            ReferenceMeasure::Gaussian => None,
            ReferenceMeasure::Poisson { intensity } => Some(intensity),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, ReferenceMeasure::Gaussian)
    }

    /// Squared norm of the degree-`j` basis polynomial: `j!` or `a^j j!`.
    pub fn basis_norm_sq(&self, j: usize) -> f64 {
        let scale = self.intensity().unwrap_or(1.0);
        (1..=j).fold(1.0, |acc, i| acc * scale * i as f64)
    }

    /// All squared basis norms up to `degree` inclusive.
    pub fn basis_norms_sq(&self, degree: usize) -> Vec<f64> {
        let scale = self.intensity().unwrap_or(1.0);
        let mut out = Vec::with_capacity(degree + 1);
        let mut w = 1.0;
        out.push(w);
        for j in 1..=degree {
            w *= scale * j as f64;
            out.push(w);
        }
        out
    }

    /// Evaluates every basis polynomial of degree `0..=degree` at `x`.
    pub fn basis_values(&self, x: f64, degree: usize) -> Vec<f64> {
        match *self {
            ReferenceMeasure::Gaussian => hermite_values(x, degree),
            ReferenceMeasure::Poisson { intensity } => charlier_values(intensity, x, degree),
        }
    }
}

/// Monic Hermite polynomial `h_n(x)`, via `h_{n+1} = x h_n − n h_{n−1}`.
///
/// Overflows to ±∞ once `|x|^n` leaves the `f64` range (roughly `n·log10|x| > 308`).
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        if cur.is_infinite() {
            return cur;
        }
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `h_0(x), …, h_degree(x)`.
pub fn hermite_values(x: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree >= 1 {
        out.push(x);
    }
    for k in 1..degree {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

fn charlier_recurrence(n: usize, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x - a;
    for k in 1..n {
        let kf = k as f64;
        let next = (x - kf - a) * cur - kf * a * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn as_count(x: f64) -> Option<usize> {
    if x >= 0.0 && x.fract() == 0.0 && x < 1e15 {
        Some(x as usize)
    } else {
        None
    }
}

/// Monic Charlier polynomial `c_n^a(x)`, defined by
/// `c_{n+1} = (x − n − a) c_n − n a c_{n−1}` with `c_0 = 1`, `c_1 = x − a`.
///
/// At a nonnegative integer `x = k < n` the forward recurrence tracks the
/// minimal solution and loses all precision, so the self-duality
/// `c_n^a(k) = (−a)^{n−k} c_k^a(n)` is used there instead.
pub fn charlier_eval(n: usize, a: f64, x: f64) -> f64 {
    match as_count(x) {
        Some(k) if k < n => (-a).powi((n - k) as i32) * charlier_recurrence(k, a, n as f64),
        _ => charlier_recurrence(n, a, x),
    }
}

/// `c_0^a(x), …, c_degree^a(x)`, with the same integer-point handling as
/// [`charlier_eval`].
pub fn charlier_values(a: f64, x: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree == 0 {
        return out;
    }
    let direct_to = match as_count(x) {
        Some(k) => k.min(degree),
        None => degree,
    };
    if direct_to >= 1 {
        out.push(x - a);
    }
    for k in 1..direct_to {
        let kf = k as f64;
        let next = (x - kf - a) * out[k] - kf * a * out[k - 1];
        out.push(next);
    }
    if out.len() <= degree {
        let k = direct_to;
        for n in (k + 1)..=degree {
            out.push(charlier_eval(n, a, x));
        }
    }
    out
}

/// `ln k!`, exact summation for small `k`, Stirling series otherwise.
pub fn ln_factorial(k: usize) -> f64 {
    if k < 32 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = k as f64 + 1.0;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

/// `ln ν({k})` for Poisson(a).
pub fn poisson_ln_pmf(a: f64, k: usize) -> f64 {
    k as f64 * a.ln() - a - ln_factorial(k)
}

/// `ν({0}), …, ν({k_max})`.
pub fn poisson_pmf_table(a: f64, k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|k| poisson_ln_pmf(a, k).exp()).collect()
}

fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// Smallest `K` such that `Σ_{k>K} (1+k)^{2·max_degree} ν({k}) < tail_tol`.
///
/// The tail is summed explicitly (in log space) out to the point where the
/// terms decay geometrically with ratio below ½, and the remainder beyond
/// that point is bounded by the geometric series.
pub fn poisson_support_bound(
    a: f64,
    tail_tol: f64,
    max_degree: usize,
) -> Result<usize, BasisError> {
    poisson_support_bound_with_cap(a, tail_tol, max_degree, DEFAULT_SUPPORT_CAP)
}

pub fn poisson_support_bound_with_cap(
    a: f64,
    tail_tol: f64,
    max_degree: usize,
    cap: usize,
) -> Result<usize, BasisError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(BasisError::InvalidIntensity(a));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(BasisError::InvalidTailTolerance(tail_tol));
    }
    let power = 2.0 * max_degree as f64;
    let ln_term = |k: usize| power * (1.0 + k as f64).ln() + poisson_ln_pmf(a, k);
    // ratio t_{k+1}/t_k
    let ln_ratio = |k: usize| power * ((k as f64 + 2.0) / (k as f64 + 1.0)).ln() + a.ln()
        - (k as f64 + 1.0).ln();

    // Far enough out that the ratio is below 1/2 and the terms are negligible
    // against the tolerance; the ratio is eventually decreasing in k.
    let ln_tol = tail_tol.ln();
    let search_cap = cap.saturating_mul(4).max(64);
    let mut far = 0usize;
    while far < search_cap {
        if ln_ratio(far) < -std::f64::consts::LN_2 && ln_term(far) < ln_tol - 60.0 {
            break;
        }
        far += 1;
    }
    // remainder bound beyond `far`: t_{far+1} / (1 - r)
    let r = ln_ratio(far).exp().min(0.5);
    let mut ln_tail = ln_term(far + 1) - (1.0 - r).ln();
    // ln_tail now bounds Σ_{k>far}; walk backwards, tail(K) = Σ_{k>K}.
    let mut tails = vec![f64::NEG_INFINITY; far + 1];
    tails[far] = ln_tail;
    for k in (0..far).rev() {
        ln_tail = log_add_exp(ln_tail, ln_term(k + 1));
        tails[k] = ln_tail;
    }
    match tails.iter().position(|&t| t < ln_tol) {
        Some(k) if k <= cap => Ok(k),
        _ => Err(BasisError::SupportCapExceeded { tail_tol, cap }),
    }
}

/// Gauss–Hermite rule for μ (probabilists' normalization, weights sum to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Orthonormal Hermite values `ĥ_0(x), …, ĥ_n(x)` with `ĥ_k = h_k / √k!`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, usize) {
    // returns (ĥ_n, ĥ_{n-1}, number of sign changes in ĥ_0..ĥ_n)
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut changes = 0;
    let mut last_sign = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
        if cur != 0.0 {
            let s = cur.signum();
            if s != last_sign {
                changes += 1;
            }
            last_sign = s;
        }
    }
    (cur, prev, changes)
}

/// Nodes are the roots of `h_order`; each is isolated by bisection on the
/// Sturm sign-change count of the recurrence sequence, then polished by
/// Newton steps kept inside the bracket.
pub fn gauss_hermite_rule(order: usize) -> Result<QuadratureRule, BasisError> {
    if order == 0 {
        return Err(BasisError::ZeroOrder);
    }
    let n = order;
    let bound = (4.0 * n as f64 + 2.0).sqrt() + 1.0;
    // zeros > x counted by sign changes
    let roots_above = |x: f64| orthonormal_hermite(n, x).2;
    let mut nodes = Vec::with_capacity(n);
    let mut lo = -bound;
    for i in 0..n {
        // i-th smallest root: the point where roots_above drops from n-i to n-i-1
        let target = n - i - 1;
        let mut left = lo;
        let mut right = bound;
        for _ in 0..200 {
            let mid = 0.5 * (left + right);
            if roots_above(mid) > target {
                left = mid;
            } else {
                right = mid;
            }
            if right - left <= 1e-10 * (1.0 + mid.abs()) {
                break;
            }
        }
        let mut x = 0.5 * (left + right);
        for _ in 0..4 {
            let (p, q, _) = orthonormal_hermite(n, x);
            let dp = (n as f64).sqrt() * q;
            if dp == 0.0 {
                break;
            }
            let step = x - p / dp;
            if step.is_finite() && step >= left - 1e-9 && step <= right + 1e-9 {
                x = step;
            }
        }
        if !x.is_finite() {
            return Err(BasisError::RootFinding { degree: n });
        }
        nodes.push(x);
        lo = right;
    }
    let mut weights = Vec::with_capacity(n);
    for &x in &nodes {
        let (_, q, _) = orthonormal_hermite(n, x);
        let w = 1.0 / (n as f64 * q * q);
        if !(w.is_finite() && w > 0.0) {
            return Err(BasisError::RootFinding { degree: n });
        }
        weights.push(w);
    }
    // the odd-order middle node is exactly zero
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(BasisError::RootFinding { degree: n });
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Memoized [`gauss_hermite_rule`].
pub fn cached_gauss_hermite_rule(order: usize) -> Result<Arc<QuadratureRule>, BasisError> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&order) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(gauss_hermite_rule(order)?);
    cache
        .lock()
        .unwrap()
        .insert(order, Arc::clone(&rule));
    Ok(rule)
}

/// Default rule order for integrands built from expansions of degree `degree`.
pub fn default_quadrature_order(degree: usize) -> usize {
    (4 * degree + 8).max(40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_closed_forms() {
        assert_eq!(hermite_eval(0, 7.3), 1.0);
        assert_eq!(hermite_eval(2, 2.0), 3.0);
        assert_eq!(hermite_eval(4, 1.0), -2.0);
        for &x in &[-2.5, -0.3, 0.0, 1.7] {
            let h4 = x * x * x * x - 6.0 * x * x + 3.0;
            assert!((hermite_eval(4, x) - h4).abs() < 1e-12);
        }
        let v = hermite_values(1.3, 6);
        for (n, &val) in v.iter().enumerate() {
            assert_eq!(val, hermite_eval(n, 1.3));
        }
    }

    #[test]
    fn hermite_overflow_is_infinite() {
        assert!(hermite_eval(400, 1e3).is_infinite());
    }

    #[test]
    fn charlier_closed_forms() {
        assert_eq!(charlier_eval(0, 1.0, 5.0), 1.0);
        assert_eq!(charlier_eval(1, 1.0, 0.0), -1.0);
        assert_eq!(charlier_eval(2, 1.0, 0.0), 1.0);
        for &a in &[0.5, 1.0, 2.0] {
            for &x in &[0.0, 0.5, 1.0, 3.0, 7.25] {
                let c2 = (x - 1.0 - a) * (x - a) - a;
                assert!((charlier_eval(2, a, x) - c2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn charlier_duality_matches_recurrence_at_low_degree() {
        for &a in &[0.5, 1.0, 2.0] {
            for k in 0..6 {
                for n in 0..8 {
                    let via_eval = charlier_eval(n, a, k as f64);
                    let direct = charlier_recurrence(n, a, k as f64);
                    assert!(
                        (via_eval - direct).abs() <= 1e-9 * (1.0 + direct.abs()),
                        "n={n} k={k} a={a}"
                    );
                }
            }
        }
        let vals = charlier_values(1.5, 3.0, 10);
        for (n, &v) in vals.iter().enumerate() {
            assert_eq!(v, charlier_eval(n, 1.5, 3.0));
        }
    }

    #[test]
    fn charlier_at_zero_is_power_of_minus_a() {
        for n in 0..40 {
            let want = (-0.7f64).powi(n as i32);
            assert!((charlier_eval(n, 0.7, 0.0) - want).abs() <= 1e-14 * want.abs().max(1.0));
        }
    }

    #[test]
    fn small_rules() {
        let r1 = gauss_hermite_rule(1).unwrap();
        assert_eq!(r1.nodes(), &[0.0]);
        assert!((r1.weights()[0] - 1.0).abs() < 1e-15);
        let r2 = gauss_hermite_rule(2).unwrap();
        assert!((r2.nodes()[0] + 1.0).abs() < 1e-13 && (r2.nodes()[1] - 1.0).abs() < 1e-13);
        assert!(r2.weights().iter().all(|w| (w - 0.5).abs() < 1e-13));
        let r3 = gauss_hermite_rule(3).unwrap();
        let s3 = 3f64.sqrt();
        assert!((r3.nodes()[0] + s3).abs() < 1e-13);
        assert_eq!(r3.nodes()[1], 0.0);
        assert!((r3.nodes()[2] - s3).abs() < 1e-13);
        assert_eq!(gauss_hermite_rule(0), Err(BasisError::ZeroOrder));
    }

    #[test]
    fn large_rule_is_sane() {
        let rule = gauss_hermite_rule(264).unwrap();
        assert_eq!(rule.order(), 264);
        assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((rule.integrate(|x| x * x) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn support_bound_examples() {
        assert_eq!(poisson_support_bound(1.0, 0.5, 0).unwrap(), 1);
        assert_eq!(poisson_support_bound(1.0, 1.0 - 1e-12, 0).unwrap(), 0);
        assert!(matches!(
            poisson_support_bound(1.0, 1.5, 0),
            Err(BasisError::InvalidTailTolerance(_))
        ));
        assert!(matches!(
            poisson_support_bound_with_cap(50.0, 1e-14, 40, 20),
            Err(BasisError::SupportCapExceeded { cap: 20, .. })
        ));
    }

    #[test]
    fn intensity_must_be_positive() {
        assert!(ReferenceMeasure::poisson(0.0).is_err());
        assert!(ReferenceMeasure::poisson(f64::NAN).is_err());
        assert_eq!(ReferenceMeasure::poisson(2.0).unwrap().basis_norm_sq(3), 48.0);
        assert_eq!(ReferenceMeasure::gaussian().basis_norm_sq(4), 24.0);
    }
}
