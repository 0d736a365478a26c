//! Invariant suites shared by the `verify` CLI mode and the test suites.
//!
//! Each suite draws its cases from a seeded generator and reports the number
//! of cases, the number of violations and the largest observed error.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chaos::{young_check, ChaosError, ChaosExpansion, YoungConfig};
use crate::gaussian_llt::{canonical_h4_density, validate_gaussian_density, GaussianDensityInput};
use crate::oracles::{derive_seed, exact_thinned_sum_law, grid_convolution_density, GridSpec};
use crate::orthobasis::{
    cached_gauss_hermite_rule, poisson_ln_pmf, poisson_support_bound, ReferenceMeasure,
};
use crate::poisson_lsn::{pmf_to_density, FinitePmf};
use crate::sampling::{random_density, random_expansion, random_pmf};

/// Result of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({} cases, {} violations, max error {:.3e}, tolerance {:.0e}, {:.2?})",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.cases,
            self.violations,
            self.max_error,
            self.tolerance,
            self.elapsed
        )
    }
}

fn report(name: &str, errors: &[f64], tolerance: f64, started: Instant) -> SuiteReport {
    SuiteReport {
        name: name.to_string(),
        cases: errors.len(),
        violations: errors.iter().filter(|e| !(**e <= tolerance)).count(),
        max_error: errors.iter().copied().fold(0.0, f64::max),
        tolerance,
        elapsed: started.elapsed(),
    }
}

/// Gram matrix of the basis up to `max_degree`, normalized by the basis
/// norms: entry `(j, k)` is `⟨b_j, b_k⟩ / sqrt(‖b_j‖²‖b_k‖²)`.
///
/// Gaussian inner products use a Gauss–Hermite rule exact for the degree;
/// Poisson ones sum over `k ≤ K` with the weighted tail below `1e−16`.
pub fn normalized_gram(measure: ReferenceMeasure, max_degree: usize) -> Result<Vec<Vec<f64>>, ChaosError> {
    let norms = measure.basis_norms_sq(max_degree);
    let mut gram = vec![vec![0.0; max_degree + 1]; max_degree + 1];
    let mut accumulate = |x: f64, w: f64| {
        let v = measure.basis_values(x, max_degree);
        for j in 0..=max_degree {
            for k in 0..=max_degree {
                gram[j][k] += w * v[j] * v[k];
            }
        }
    };
    match measure {
        ReferenceMeasure::Gaussian => {
            let rule = cached_gauss_hermite_rule(max_degree + 2)?;
            for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
                accumulate(x, w);
            }
        }
        ReferenceMeasure::Poisson { intensity } => {
            let k_max = poisson_support_bound(intensity, 1e-16, max_degree)?;
            for k in 0..=k_max {
                accumulate(k as f64, poisson_ln_pmf(intensity, k).exp());
            }
        }
    }
    for j in 0..=max_degree {
        for k in 0..=max_degree {
            gram[j][k] /= (norms[j] * norms[k]).sqrt();
        }
    }
    Ok(gram)
}

/// Orthogonality of Hermite and Charlier polynomials (`a` in `intensities`),
/// one case per Gram entry.
pub fn orthogonality_suite(max_degree: usize, intensities: &[f64], tolerance: f64) -> SuiteReport {
    let started = Instant::now();
    let mut measures = vec![ReferenceMeasure::Gaussian];
    measures.extend(intensities.iter().filter_map(|&a| ReferenceMeasure::poisson(a).ok()));
    let mut errors = Vec::new();
    for m in measures {
        match normalized_gram(m, max_degree) {
            Ok(gram) => {
                for (j, row) in gram.iter().enumerate() {
                    for (k, &g) in row.iter().enumerate() {
                        let want = if j == k { 1.0 } else { 0.0 };
                        errors.push((g - want).abs());
                    }
                }
            }
            Err(_) => errors.push(f64::INFINITY),
        }
    }
    report("orthogonality", &errors, tolerance, started)
}

fn max_coeff_diff(f: &ChaosExpansion, g: &ChaosExpansion) -> f64 {
    let len = f.coeffs().len().max(g.coeffs().len());
    (0..len)
        .map(|j| (f.coeff(j) - g.coeff(j)).abs())
        .fold(0.0, f64::max)
}

fn functoriality_case(rng: &mut ChaCha8Rng, measure: ReferenceMeasure) -> Result<f64, ChaosError> {
    let draw = |rng: &mut ChaCha8Rng| {
        let degree = rng.random_range(0..=6);
        random_expansion(rng, measure, degree)
    };
    let (f, g, h) = (draw(rng), draw(rng), draw(rng));
    let lambda = rng.random_range(-1.0..=1.0);
    let rho = rng.random_range(-1.0..=1.0);
    let one = ChaosExpansion::one(measure);

    let hom_l = f.wick_product(&g)?.second_quantization(lambda)?;
    let hom_r = f
        .second_quantization(lambda)?
        .wick_product(&g.second_quantization(lambda)?)?;
    let comp_l = f.second_quantization(rho)?.second_quantization(lambda)?;
    let comp_r = f.second_quantization(lambda * rho)?;
    let unit = one.second_quantization(lambda)?;
    let comm_l = f.wick_product(&g)?;
    let comm_r = g.wick_product(&f)?;
    let assoc_l = f.wick_product(&g)?.wick_product(&h)?;
    let assoc_r = f.wick_product(&g.wick_product(&h)?)?;
    let neutral = f.wick_product(&one)?;
    Ok([
        max_coeff_diff(&hom_l, &hom_r),
        max_coeff_diff(&comp_l, &comp_r),
        max_coeff_diff(&unit, &one),
        max_coeff_diff(&comm_l, &comm_r),
        max_coeff_diff(&assoc_l, &assoc_r),
        max_coeff_diff(&neutral, &f),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

/// `Γ(λ)(f⋄g) = Γ(λ)f ⋄ Γ(λ)g`, `Γ(λ)Γ(ρ) = Γ(λρ)`, `Γ(λ)1 = 1`, and Wick
/// commutativity, associativity and unit, coefficientwise. Cases alternate
/// between the Gaussian measure and Poisson measures.
pub fn functoriality_suite(cases: usize, tolerance: f64, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let errors: Vec<f64> = (0..cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i));
            let measure = if i % 2 == 0 {
                ReferenceMeasure::Gaussian
            } else {
                ReferenceMeasure::Poisson {
                    intensity: rng.random_range(0.25..3.0),
                }
            };
            functoriality_case(&mut rng, measure).unwrap_or(f64::INFINITY)
        })
        .collect();
    report("functoriality", &errors, tolerance, started)
}

/// Which Young inequality a suite exercises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YoungForm {
    /// Gaussian, `α₁² + α₂² = 1`, exponents `(p, p, r)` balanced by the
    /// conjugate condition.
    Gaussian { p: f64 },
    /// Poisson, `α₁ + α₂ = 1`, all exponents equal to `p`.
    Poisson { p: f64 },
}

fn young_case(rng: &mut ChaCha8Rng, form: YoungForm) -> Result<f64, ChaosError> {
    let (measure, cfg) = match form {
        YoungForm::Gaussian { p } => {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let cfg = YoungConfig::gaussian_balanced(vec![theta.cos(), theta.sin()], vec![p, p]);
            (ReferenceMeasure::Gaussian, cfg)
        }
        YoungForm::Poisson { p } => {
            let a = rng.random_range(0.25..3.0);
            let alpha = rng.random_range(0.0..=1.0);
            (
                ReferenceMeasure::Poisson { intensity: a },
                YoungConfig::poisson(vec![alpha, 1.0 - alpha], p),
            )
        }
    };
    // half the cases are scaled densities (where the L¹ forms are equalities),
    // half are general expansions
    let fs: Vec<ChaosExpansion> = (0..2)
        .map(|_| {
            let degree = rng.random_range(1..=5);
            if rng.random_bool(0.5) {
                random_density(rng, measure, degree, false).scaled(rng.random_range(0.1..2.0))
            } else {
                random_expansion(rng, measure, degree)
            }
        })
        .collect();
    let outcome = young_check(&fs, &cfg, 0.0)?;
    Ok((outcome.lhs - outcome.rhs).max(0.0))
}

/// Young's inequality for the Wick product, reporting the excess of the
/// left side over the right side.
pub fn young_suite(form: YoungForm, cases: usize, tolerance: f64, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let errors: Vec<f64> = (0..cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i));
            young_case(&mut rng, form).unwrap_or(f64::INFINITY)
        })
        .collect();
    let name = match form {
        YoungForm::Gaussian { p } => format!("young-gaussian(p={p})"),
        YoungForm::Poisson { p } => format!("young-poisson(p={p})"),
    };
    report(&name, &errors, tolerance, started)
}

/// Law on `{0, …, K}` with masses `g(k) ν({k})` of a ν-density `g`.
pub fn chaos_side_masses(g: &ChaosExpansion, k_max: usize) -> Vec<f64> {
    let a = g.measure().intensity().unwrap_or(f64::NAN);
    (0..=k_max)
        .map(|k| g.eval(k as f64) * poisson_ln_pmf(a, k).exp())
        .collect()
}

/// `½ Σ_k |p_k − q_k|` over the union of supports.
pub fn total_variation_slices(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// One two-summand case of the Poisson Wick identity: the exact law of
/// `T_{α}X + T_{1−α}Y` against `Γ(α)f_p ⋄ Γ(1−α)f_q`. Returns the total
/// variation distance.
pub fn wick_thinning_case(p: &FinitePmf, q: &FinitePmf, a: f64, alpha: f64) -> Result<f64, String> {
    let exact =
        exact_thinned_sum_law(&[p.clone(), q.clone()], &[alpha, 1.0 - alpha]).map_err(|e| e.to_string())?;
    let fp = pmf_to_density(p, a).map_err(|e| e.to_string())?;
    let fq = pmf_to_density(q, a).map_err(|e| e.to_string())?;
    let g = fp
        .second_quantization(alpha)
        .and_then(|x| x.wick_product(&fq.second_quantization(1.0 - alpha)?))
        .map_err(|e| e.to_string())?;
    let k_ref = poisson_support_bound(a, 1e-16, 0).map_err(|e| e.to_string())?;
    let k_max = k_ref.max(exact.max_point());
    Ok(total_variation_slices(&chaos_side_masses(&g, k_max), exact.probs()))
}

/// Random pmf pairs, intensities and thinning weights for the Poisson Wick
/// identity.
pub fn wick_thinning_suite(cases: usize, tolerance: f64, seed: u64) -> SuiteReport {
    let started = Instant::now();
    let errors: Vec<f64> = (0..cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i));
            let (len_p, len_q) = (rng.random_range(1..=6), rng.random_range(1..=6));
            let p = random_pmf(&mut rng, len_p);
            let q = random_pmf(&mut rng, len_q);
            let a = rng.random_range(0.25..3.0);
            let alpha = rng.random_range(0.0..=1.0);
            wick_thinning_case(&p, &q, a, alpha).unwrap_or(f64::INFINITY)
        })
        .collect();
    report("wick-thinning", &errors, tolerance, started)
}

/// `∫ |q − w φ| dx` between the grid-convolved law of `α₁X₁ + α₂X₂` and the
/// Wick density `Γ(α₁)f₁ ⋄ Γ(α₂)f₂`.
pub fn gaussian_wick_case(
    f1: &GaussianDensityInput,
    f2: &GaussianDensityInput,
    alpha1: f64,
    alpha2: f64,
    spec: &GridSpec,
) -> Result<f64, String> {
    let grid = grid_convolution_density(f1, f2, alpha1, alpha2, spec).map_err(|e| e.to_string())?;
    let w = f1
        .expansion()
        .second_quantization(alpha1)
        .and_then(|x| x.wick_product(&f2.expansion().second_quantization(alpha2)?))
        .map_err(|e| e.to_string())?;
    Ok(grid.l1_mu_distance(&w))
}

/// Random valid Gaussian densities (degree 3 to 6) with random rotations.
pub fn random_gaussian_pair(rng: &mut ChaCha8Rng) -> (GaussianDensityInput, GaussianDensityInput, f64, f64) {
    let draw = |rng: &mut ChaCha8Rng| {
        let degree = rng.random_range(3..=6);
        let f = random_density(rng, ReferenceMeasure::Gaussian, degree, true);
        validate_gaussian_density(&f).expect("standardized draw is a valid density")
    };
    let f1 = draw(rng);
    let f2 = draw(rng);
    let theta = rng.random_range(0.05..(std::f64::consts::FRAC_PI_2 - 0.05));
    (f1, f2, theta.cos(), theta.sin())
}

/// Canonical case (tolerance `canonical_tol`) plus `random_cases` random
/// valid densities (tolerance `random_tol`). Reported errors are divided by
/// the tolerance of their case, so the suite tolerance is 1.
pub fn gaussian_wick_suite(
    random_cases: usize,
    canonical_tol: f64,
    random_tol: f64,
    seed: u64,
) -> SuiteReport {
    let started = Instant::now();
    let spec = GridSpec::default();
    let f = canonical_h4_density();
    let mut errors = vec![
        gaussian_wick_case(&f, &f, FRAC_1_SQRT_2, FRAC_1_SQRT_2, &spec)
            .map(|e| e / canonical_tol)
            .unwrap_or(f64::INFINITY),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_cases {
        let (f1, f2, a1, a2) = random_gaussian_pair(&mut rng);
        errors.push(
            gaussian_wick_case(&f1, &f2, a1, a2, &spec)
                .map(|e| e / random_tol)
                .unwrap_or(f64::INFINITY),
        );
    }
    report("gaussian-wick-grid", &errors, 1.0, started)
}

/// Every suite at its default size, as run by the `verify` mode.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        orthogonality_suite(12, &[0.5, 1.0, 2.0], 1e-8),
        functoriality_suite(1_000, 1e-12, seed),
        young_suite(YoungForm::Gaussian { p: 3.0 }, 1_000, 1e-9, seed),
        young_suite(YoungForm::Gaussian { p: 1.0 }, 1_000, 1e-9, seed),
        young_suite(YoungForm::Poisson { p: 1.0 }, 1_000, 1e-9, seed),
        young_suite(YoungForm::Poisson { p: 2.0 }, 1_000, 1e-9, seed),
        wick_thinning_suite(100, 1e-10, seed),
        gaussian_wick_suite(10, 1e-3, 5e-3, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(orthogonality_suite(6, &[1.0], 1e-10).passed());
        assert!(functoriality_suite(50, 1e-12, 1).passed());
        assert!(young_suite(YoungForm::Poisson { p: 2.0 }, 50, 1e-9, 1).passed());
        assert!(wick_thinning_suite(10, 1e-10, 1).passed());
    }

    #[test]
    fn tv_of_slices() {
        assert_eq!(total_variation_slices(&[0.5, 0.5], &[1.0]), 0.5);
        assert_eq!(total_variation_slices(&[1.0], &[1.0, 0.0]), 0.0);
    }
}
