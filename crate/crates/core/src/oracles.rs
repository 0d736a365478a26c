//! Brute-force references that never touch the chaos algebra.
//!
//! * exact pmf convolution and thinning, for the Poisson Wick identity;
//! * direct numerical convolution of Lebesgue densities on a grid, for the
//!   Gaussian Wick identity;
//! * Monte Carlo sampling of the mollified sums, for both limit theorems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::chaos::ChaosExpansion;
use crate::gaussian_llt::GaussianDensityInput;
use crate::orthobasis::{poisson_ln_pmf, poisson_support_bound};
use crate::poisson_lsn::{thin, FinitePmf, LsnError};

/// Minimum Monte Carlo sample count.
pub const MIN_MC_SAMPLES: usize = 1_000;
/// Bootstrap resamples used for Monte Carlo standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("thinning coefficients must lie in [0, 1] and sum to 1: {0:?}")]
    ThinningWeights(Vec<f64>),
    #[error("{pmfs} laws supplied for {alphas} coefficients")]
    Arity { pmfs: usize, alphas: usize },
    #[error("scaling coefficients must satisfy α₁² + α₂² = 1, got ({0}, {1})")]
    ScalingWeights(f64, f64),
    #[error("grid too coarse: convolved density has mass {mass}")]
    GridTooCoarse { mass: f64 },
    #[error("grid needs an odd number of at least 3 points, got {0}")]
    GridShape(usize),
    #[error("Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Lsn(#[from] LsnError),
}

/// `(p * q)_k = Σ_i p_i q_{k−i}`.
pub fn convolve_pmfs(p: &FinitePmf, q: &FinitePmf) -> FinitePmf {
    let (a, b) = (p.probs(), q.probs());
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &pi) in a.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        for (j, &qj) in b.iter().enumerate() {
            out[i + j] += pi * qj;
        }
    }
    FinitePmf::normalized(out).expect("convolution of pmfs is a pmf")
}

/// `p^{*n}` by repeated squaring.
pub fn convolution_power(p: &FinitePmf, n: usize) -> FinitePmf {
    let mut result = FinitePmf::dirac(0);
    let mut base = p.clone();
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = convolve_pmfs(&result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = convolve_pmfs(&base, &base);
        }
    }
    result
}

/// Law of `T_{α_1}X_1 + ⋯ + T_{α_n}X_n` for independent `X_i ~ pmfs[i]`.
pub fn exact_thinned_sum_law(pmfs: &[FinitePmf], alphas: &[f64]) -> Result<FinitePmf, OracleError> {
    if pmfs.len() != alphas.len() || pmfs.is_empty() {
        return Err(OracleError::Arity {
            pmfs: pmfs.len(),
            alphas: alphas.len(),
        });
    }
    let total: f64 = alphas.iter().sum();
    if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) || (total - 1.0).abs() > 1e-12 {
        return Err(OracleError::ThinningWeights(alphas.to_vec()));
    }
    let mut law = FinitePmf::dirac(0);
    for (p, &alpha) in pmfs.iter().zip(alphas) {
        law = convolve_pmfs(&law, &thin(alpha, p)?);
    }
    Ok(law)
}

/// Poisson(λ) on `{0, …, K}` with the neglected tail below `1e−16`, not renormalized.
fn poisson_law(lambda: f64) -> Vec<f64> {
    if lambda == 0.0 {
        return vec![1.0];
    }
    let k = poisson_support_bound(lambda, 1e-16, 0).unwrap_or(0);
    (0..=k).map(|k| poisson_ln_pmf(lambda, k).exp()).collect()
}

/// Exact law of the mollified thinned sum
/// `T_{1/(n+b_n)}X_1 + ⋯ + T_{1/(n+b_n)}X_n + Poisson(a·b_n/(n+b_n))`.
pub fn exact_mollified_law(
    p: &FinitePmf,
    a: f64,
    n: usize,
    b_n: f64,
) -> Result<FinitePmf, OracleError> {
    let total = n as f64 + b_n;
    let thinned = thin(1.0 / total, p)?;
    let sum = convolution_power(&thinned, n);
    let noise = FinitePmf::normalized(poisson_law(a * b_n / total))?;
    Ok(convolve_pmfs(&sum, &noise))
}

/// `Σ_k |q_k − ν({k})|`, i.e. the L¹(ν) distance of `q/ν` to 1.
pub fn pmf_l1_distance_to_poisson(q: &FinitePmf, a: f64) -> f64 {
    let k_ref = poisson_support_bound(a, 1e-16, 0).unwrap_or(0);
    let top = q.max_point().max(k_ref);
    let mut total = 0.0;
    let mut covered = 0.0;
    for k in 0..=top {
        let nu = poisson_ln_pmf(a, k).exp();
        covered += nu;
        total += (q.prob(k) - nu).abs();
    }
    total + (1.0 - covered).max(0.0)
}

/// Grid size for the Gaussian convolution oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub radius: f64,
    /// Odd, so that 0 is a node and node differences are nodes.
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            radius: 12.0,
            points: (1 << 14) + 1,
        }
    }
}

impl GridSpec {
    pub fn step(&self) -> f64 {
        2.0 * self.radius / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.step()
    }
}

/// Lebesgue density values on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl GridDensity {
    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.spec.step())
    }

    /// Density with respect to μ at each node (`q(x)/φ(x)`).
    pub fn mu_density(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, q)| q / phi(self.spec.node(i)))
            .collect()
    }

    /// `∫ |q/φ − w| dμ = ∫ |q − w φ| dx` for a μ-density `w` given as an expansion.
    pub fn l1_mu_distance(&self, w: &ChaosExpansion) -> f64 {
        let diffs: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let x = self.spec.node(i);
                (q - w.eval(x) * phi(x)).abs()
            })
            .collect();
        trapezoid(&diffs, self.spec.step())
    }
}

/// Lebesgue density of `αX` on the grid, where `X` has μ-density `f`.
fn scaled_density(f: &ChaosExpansion, alpha: f64, spec: &GridSpec) -> Vec<f64> {
    (0..spec.points)
        .map(|i| {
            let y = spec.node(i) / alpha;
            f.eval(y) * phi(y) / alpha.abs()
        })
        .collect()
}

/// Lebesgue density of `α₁X₁ + α₂X₂` by direct discrete convolution.
pub fn grid_convolution_density(
    f1: &GaussianDensityInput,
    f2: &GaussianDensityInput,
    alpha1: f64,
    alpha2: f64,
    spec: &GridSpec,
) -> Result<GridDensity, OracleError> {
    if (alpha1 * alpha1 + alpha2 * alpha2 - 1.0).abs() > 1e-12 {
        return Err(OracleError::ScalingWeights(alpha1, alpha2));
    }
    if spec.points < 3 || spec.points % 2 == 0 {
        return Err(OracleError::GridShape(spec.points));
    }
    let values = if alpha1 == 0.0 {
        scaled_density(f2.expansion(), alpha2, spec)
    } else if alpha2 == 0.0 {
        scaled_density(f1.expansion(), alpha1, spec)
    } else {
        let rho1 = scaled_density(f1.expansion(), alpha1, spec);
        let rho2 = scaled_density(f2.expansion(), alpha2, spec);
        let n = spec.points as isize;
        let centre = (n - 1) / 2;
        let step = spec.step();
        (0..n)
            .into_par_iter()
            .map(|m| {
                // x_m − y_j is node (m − j + centre)
                let j_lo = (m + centre - (n - 1)).max(0);
                let j_hi = (m + centre).min(n - 1);
                let mut acc = 0.0;
                for j in j_lo..=j_hi {
                    let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                    acc += w * rho1[j as usize] * rho2[(m - j + centre) as usize];
                }
                acc * step
            })
            .collect()
    };
    let density = GridDensity {
        spec: *spec,
        values,
    };
    let mass = density.mass();
    if (mass - 1.0).abs() > 1e-4 {
        return Err(OracleError::GridTooCoarse { mass });
    }
    Ok(density)
}

/// Monte Carlo estimate with a bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

/// SplitMix64 finalizer; derives independent sub-seeds from a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF sampler for a Lebesgue density tabulated on a grid
/// (piecewise-linear CDF).
struct GridSampler {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridSampler {
    fn new(density: &[f64], spec: &GridSpec) -> Self {
        let step = spec.step();
        let mut cdf = Vec::with_capacity(density.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in density.windows(2) {
            acc += 0.5 * (w[0].max(0.0) + w[1].max(0.0)) * step;
            cdf.push(acc);
        }
        let nodes = (0..spec.points).map(|i| spec.node(i)).collect();
        GridSampler { nodes, cdf }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.nodes[i - 1] + t * (self.nodes[i] - self.nodes[i - 1])
    }
}

const KDE_RADIUS: f64 = 10.0;
const KDE_BIN: f64 = 0.01;

/// Silverman's rule of thumb.
fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((n - 1.0) * p).round() as usize];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Binned Gaussian KDE estimate of `∫ |q̂ − K_h * φ| dx`.
///
/// Comparing against the kernel-smoothed reference `N(0, 1 + h²)` removes
/// the smoothing bias of the flat part; what remains estimates
/// `∫ |K_h * (q − φ)|`, which tends to the L¹(μ) distance of the μ-density
/// to 1 as `h → 0`.
fn kde_l1_to_gaussian<'a, I: Iterator<Item = &'a f64>>(samples: I, count: usize, h: f64) -> f64 {
    let bins = (2.0 * KDE_RADIUS / KDE_BIN).round() as usize + 1;
    let mut counts = vec![0.0; bins];
    for &x in samples {
        let pos = (x + KDE_RADIUS) / KDE_BIN;
        if pos < 0.0 || pos >= (bins - 1) as f64 {
            continue;
        }
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        counts[i] += 1.0 - t;
        counts[i + 1] += t;
    }
    let reach = (6.0 * h / KDE_BIN).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|d| phi(d as f64 * KDE_BIN / h) / h)
        .collect();
    let smoothed_sd = (1.0 + h * h).sqrt();
    let norm = 1.0 / count as f64;
    let mut total = 0.0;
    for i in 0..bins {
        let mut q = 0.0;
        for (o, kv) in kernel.iter().enumerate() {
            let j = i as isize + o as isize - reach;
            if j >= 0 && (j as usize) < bins {
                q += counts[j as usize] * kv;
            }
        }
        let x = -KDE_RADIUS + i as f64 * KDE_BIN;
        let reference = phi(x / smoothed_sd) / smoothed_sd;
        total += (q * norm - reference).abs();
    }
    total * KDE_BIN
}

fn bootstrap_std_error<F>(count: usize, seed: u64, stat: F) -> f64
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let values: Vec<f64> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, b));
            let idx: Vec<usize> = (0..count).map(|_| rng.random_range(0..count)).collect();
            stat(&idx)
        })
        .collect();
    let m = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Monte Carlo L¹(μ) distance to 1 of the μ-density of
/// `sqrt(n/(n+b_n))·(ΣX_i)/sqrt(n) + sqrt(b_n/(n+b_n))·Z`.
pub fn monte_carlo_l1_gaussian(
    f: &GaussianDensityInput,
    n: usize,
    b_n: f64,
    sample_count: usize,
    seed: u64,
) -> Result<McEstimate, OracleError> {
    if sample_count < MIN_MC_SAMPLES {
        return Err(OracleError::TooFewSamples(sample_count));
    }
    let spec = GridSpec::default();
    let law: Vec<f64> = (0..spec.points)
        .map(|i| {
            let x = spec.node(i);
            f.expansion().eval(x) * phi(x)
        })
        .collect();
    let sampler = GridSampler::new(&law, &spec);
    let total = n as f64 + b_n;
    let sum_scale = 1.0 / total.sqrt();
    let noise_scale = (b_n / total).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, n as u64));
    let samples: Vec<f64> = (0..sample_count)
        .map(|_| {
            let s: f64 = (0..n).map(|_| sampler.sample(&mut rng)).sum();
            let z: f64 = rng.sample(StandardNormal);
            sum_scale * s + noise_scale * z
        })
        .collect();
    let h = silverman_bandwidth(&samples);
    let estimate = kde_l1_to_gaussian(samples.iter(), sample_count, h);
    let std_error = bootstrap_std_error(sample_count, derive_seed(seed, !(n as u64)), |idx| {
        kde_l1_to_gaussian(idx.iter().map(|&i| &samples[i]), sample_count, h)
    });
    Ok(McEstimate {
        estimate,
        std_error,
        samples: sample_count,
        seed,
    })
}

fn empirical_l1_to_poisson(values: &[usize], count: usize, a: f64) -> f64 {
    let top = values.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0.0; top + 1];
    for &v in values {
        hist[v] += 1.0;
    }
    let k_ref = poisson_support_bound(a, 1e-16, 0).unwrap_or(0);
    let mut total = 0.0;
    let mut covered = 0.0;
    for k in 0..=top.max(k_ref) {
        let nu = poisson_ln_pmf(a, k).exp();
        covered += nu;
        let q = hist.get(k).copied().unwrap_or(0.0) / count as f64;
        total += (q - nu).abs();
    }
    total + (1.0 - covered).max(0.0)
}

/// Monte Carlo L¹(ν) distance to 1 of the ν-density of
/// `T_{n/(n+b_n)}(ΣT_{1/n}X_i) + T_{b_n/(n+b_n)}U` with `U ~ Poisson(a)`.
pub fn monte_carlo_l1_poisson(
    p: &FinitePmf,
    a: f64,
    n: usize,
    b_n: f64,
    sample_count: usize,
    seed: u64,
) -> Result<McEstimate, OracleError> {
    if sample_count < MIN_MC_SAMPLES {
        return Err(OracleError::TooFewSamples(sample_count));
    }
    let mut cdf = Vec::with_capacity(p.probs().len());
    let mut acc = 0.0;
    for &q in p.probs() {
        acc += q;
        cdf.push(acc);
    }
    let total = n as f64 + b_n;
    let keep_sum = n as f64 / total;
    let keep_noise = b_n / total;
    let poisson = Poisson::new(a).map_err(|_| LsnError::WrongMeasure { expected: a })?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, n as u64));
    let values: Vec<usize> = (0..sample_count)
        .map(|_| {
            let s: u64 = (0..n)
                .map(|_| {
                    let u = rng.random::<f64>() * acc;
                    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
                })
                .sum();
            // thinning a sum by 1/n equals summing the individual 1/n-thinnings
            let inner = Binomial::new(s, 1.0 / n as f64).unwrap().sample(&mut rng);
            let outer = Binomial::new(inner, keep_sum.min(1.0)).unwrap().sample(&mut rng);
            let u = poisson.sample(&mut rng) as u64;
            let noise = Binomial::new(u, keep_noise.min(1.0)).unwrap().sample(&mut rng);
            (outer + noise) as usize
        })
        .collect();
    let estimate = empirical_l1_to_poisson(&values, sample_count, a);
    let std_error = bootstrap_std_error(sample_count, derive_seed(seed, !(n as u64)), |idx| {
        let resampled: Vec<usize> = idx.iter().map(|&i| values[i]).collect();
        empirical_l1_to_poisson(&resampled, sample_count, a)
    });
    Ok(McEstimate {
        estimate,
        std_error,
        samples: sample_count,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_llt::validate_gaussian_density;
    use crate::orthobasis::ReferenceMeasure;

    #[test]
    fn convolution_examples() {
        let p = FinitePmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(convolve_pmfs(&p, &FinitePmf::dirac(0)), p);
        assert_eq!(
            convolve_pmfs(&FinitePmf::dirac(1), &FinitePmf::dirac(1)),
            FinitePmf::dirac(2)
        );
        let half = FinitePmf::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(convolve_pmfs(&half, &half).probs(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn thinned_sum_examples() {
        let p = FinitePmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(exact_thinned_sum_law(&[p.clone()], &[1.0]).unwrap(), p);
        let n = 5;
        let deltas = vec![FinitePmf::dirac(1); n];
        let alphas = vec![1.0 / n as f64; n];
        let law = exact_thinned_sum_law(&deltas, &alphas).unwrap();
        let bern = FinitePmf::new(vec![0.8, 0.2]).unwrap();
        let want = convolution_power(&bern, n);
        assert!(law.total_variation(&want) < 1e-15);
        assert!(exact_thinned_sum_law(&[p.clone(), p], &[0.5, 0.6]).is_err());
    }

    #[test]
    fn flat_grid_convolution_is_gaussian() {
        let one = validate_gaussian_density(&ChaosExpansion::one(ReferenceMeasure::Gaussian)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let spec = GridSpec {
            radius: 12.0,
            points: 4097,
        };
        let q = grid_convolution_density(&one, &one, s, s, &spec).unwrap();
        assert!((q.mass() - 1.0).abs() < 1e-10);
        let mid = q.mu_density()[(spec.points - 1) / 2];
        assert!((mid - 1.0).abs() < 1e-8);
        assert!(q.l1_mu_distance(&ChaosExpansion::one(ReferenceMeasure::Gaussian)) < 1e-8);
        assert!(matches!(
            grid_convolution_density(&one, &one, 0.5, 0.5, &spec),
            Err(OracleError::ScalingWeights(..))
        ));
    }

    #[test]
    fn coarse_grid_is_reported() {
        let one = validate_gaussian_density(&ChaosExpansion::one(ReferenceMeasure::Gaussian)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let spec = GridSpec {
            radius: 2.0,
            points: 101,
        };
        assert!(matches!(
            grid_convolution_density(&one, &one, s, s, &spec),
            Err(OracleError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn mc_rejects_small_samples() {
        let p = FinitePmf::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert!(matches!(
            monte_carlo_l1_poisson(&p, 1.0, 4, 4.0, 10, 1),
            Err(OracleError::TooFewSamples(10))
        ));
    }

    #[test]
    fn mc_poisson_input_is_near_zero() {
        let p = FinitePmf::poisson_truncated(1.0, 30).unwrap();
        let est = monte_carlo_l1_poisson(&p, 1.0, 8, 4.0, 20_000, 11).unwrap();
        assert!(est.estimate < 0.05, "{est:?}");
        let again = monte_carlo_l1_poisson(&p, 1.0, 8, 4.0, 20_000, 11).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn mc_gaussian_flat_density_decreases_with_samples() {
        let one = validate_gaussian_density(&ChaosExpansion::one(ReferenceMeasure::Gaussian)).unwrap();
        let small = monte_carlo_l1_gaussian(&one, 4, 4.0, 2_000, 5).unwrap();
        let large = monte_carlo_l1_gaussian(&one, 4, 4.0, 50_000, 5).unwrap();
        assert!(large.estimate < small.estimate, "{small:?} {large:?}");
        assert!(large.estimate < 0.03);
    }
}
