//! Random expansions, densities and pmfs for property checks.
//!
//! Coefficients are drawn uniformly in `[−c_j, c_j]` with
//! `c_j = 0.5 / (j! · 2^j)`, which keeps every draw well inside L² and makes
//! valid densities (γ_0 = 1, nonnegative) a frequent outcome.

use rand::Rng;

use crate::chaos::ChaosExpansion;
use crate::orthobasis::{poisson_support_bound, ReferenceMeasure};
use crate::poisson_lsn::FinitePmf;

/// Lower bound accepted for a density on its verification grid or support.
pub const NONNEGATIVITY_EPS: f64 = 1e-9;

/// Half-width of the Gaussian verification grid.
pub const GAUSSIAN_GRID_RADIUS: f64 = 12.0;
const GAUSSIAN_GRID_POINTS: usize = 4801;

/// Uniform verification grid on `[−12, 12]`.
pub fn gaussian_verification_grid() -> Vec<f64> {
    let n = GAUSSIAN_GRID_POINTS;
    let step = 2.0 * GAUSSIAN_GRID_RADIUS / (n - 1) as f64;
    (0..n)
        .map(|i| -GAUSSIAN_GRID_RADIUS + i as f64 * step)
        .collect()
}

/// Points `0..=K` carrying all but `1e−14` of the Poisson(a) mass.
pub fn poisson_verification_support(a: f64) -> Vec<f64> {
    let k = poisson_support_bound(a, 1e-14, 0).unwrap_or(0);
    (0..=k).map(|k| k as f64).collect()
}

/// Verification points for the expansion's measure.
pub fn verification_points(measure: ReferenceMeasure) -> Vec<f64> {
    match measure {
        ReferenceMeasure::Gaussian => gaussian_verification_grid(),
        ReferenceMeasure::Poisson { intensity } => poisson_verification_support(intensity),
    }
}

/// Smallest value of `f` over the verification points, with its location.
pub fn min_on_verification_points(f: &ChaosExpansion) -> (f64, f64) {
    verification_points(f.measure())
        .into_iter()
        .map(|x| (x, f.eval(x)))
        .fold((f64::NAN, f64::INFINITY), |best, (x, v)| {
            if v < best.1 {
                (x, v)
            } else {
                best
            }
        })
}

fn coefficient_scale(j: usize) -> f64 {
    let fact: f64 = (1..=j).map(|i| i as f64).product();
    0.5 / (fact * 2f64.powi(j as i32))
}

/// Random expansion of the given degree (any sign, any constant term in `[−c_0, c_0]`).
pub fn random_expansion<R: Rng + ?Sized>(
    rng: &mut R,
    measure: ReferenceMeasure,
    degree: usize,
) -> ChaosExpansion {
    let coeffs = (0..=degree)
        .map(|j| {
            let c = coefficient_scale(j);
            rng.random_range(-c..=c)
        })
        .collect();
    ChaosExpansion::new(measure, coeffs).expect("finite draws")
}

/// Random density: γ_0 = 1, optional zero first and second moments
/// (`γ_1 = γ_2 = 0`), nonnegative on the verification points.
///
/// For the Gaussian measure the top coefficient is taken at an even degree
/// with a positive sign so that nonnegativity can hold on all of ℝ.
pub fn random_density<R: Rng + ?Sized>(
    rng: &mut R,
    measure: ReferenceMeasure,
    degree: usize,
    standardized: bool,
) -> ChaosExpansion {
    let degree = if measure.is_gaussian() && degree % 2 == 1 {
        degree + 1
    } else {
        degree
    };
    let points = verification_points(measure);
    for _ in 0..100_000 {
        let mut coeffs: Vec<f64> = (0..=degree)
            .map(|j| {
                let c = coefficient_scale(j);
                rng.random_range(-c..=c)
            })
            .collect();
        coeffs[0] = 1.0;
        if standardized {
            for c in coeffs.iter_mut().skip(1).take(2) {
                *c = 0.0;
            }
        }
        if measure.is_gaussian() && degree > 0 {
            coeffs[degree] = coeffs[degree].abs();
        }
        let f = ChaosExpansion::new(measure, coeffs).expect("finite draws");
        if points.iter().all(|&x| f.eval(x) >= -NONNEGATIVITY_EPS) {
            return f;
        }
    }
    panic!("rejection sampling failed to produce a density of degree {degree}");
}

/// Random pmf on `{0, …, len−1}` with strictly positive masses.
pub fn random_pmf<R: Rng + ?Sized>(rng: &mut R, len: usize) -> FinitePmf {
    let raw: Vec<f64> = (0..len.max(1)).map(|_| rng.random_range(0.05..1.0)).collect();
    FinitePmf::normalized(raw).expect("positive masses")
}

/// Random pmf with mean exactly `a`, obtained by mixing a random pmf with a
/// point mass at 0 or at the first integer above `a`.
pub fn random_pmf_with_mean<R: Rng + ?Sized>(rng: &mut R, len: usize, a: f64) -> FinitePmf {
    let top = (a.floor() as usize + 1).max(len.saturating_sub(1));
    let base = random_pmf(rng, top + 1);
    let m = base.mean();
    let (t, anchor) = if m >= a {
        (a / m, 0usize)
    } else {
        ((top as f64 - a) / (top as f64 - m), top)
    };
    let mut probs: Vec<f64> = base.probs().iter().map(|p| t * p).collect();
    probs[anchor] += 1.0 - t;
    FinitePmf::normalized(probs).expect("mixture of pmfs")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn densities_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let f = random_density(&mut rng, ReferenceMeasure::Gaussian, 6, true);
            assert_eq!(f.coeff(0), 1.0);
            assert_eq!(f.coeff(1), 0.0);
            assert_eq!(f.coeff(2), 0.0);
            assert!(min_on_verification_points(&f).1 >= -NONNEGATIVITY_EPS);
        }
    }

    #[test]
    fn mean_matched_pmfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &a in &[0.5, 1.0, 2.0] {
            for len in 1..6 {
                let p = random_pmf_with_mean(&mut rng, len, a);
                assert!((p.mean() - a).abs() < 1e-12, "a={a} len={len}");
            }
        }
    }
}
