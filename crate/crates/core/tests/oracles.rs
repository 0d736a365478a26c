use std::f64::consts::FRAC_1_SQRT_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wick_limits::chaos::ChaosExpansion;
use wick_limits::experiment::SequenceSchedule;
use wick_limits::gaussian_llt::{
    canonical_h4_density, l1_distance_to_one, mollified_sum_density, validate_gaussian_density,
};
use wick_limits::oracles::{
    convolution_power, exact_mollified_law, exact_thinned_sum_law, grid_convolution_density,
    monte_carlo_l1_gaussian, monte_carlo_l1_poisson, pmf_l1_distance_to_poisson, GridSpec,
};
use wick_limits::orthobasis::ReferenceMeasure;
use wick_limits::poisson_lsn::{
    l1_distance_to_one_poisson, mollified_thinned_sum_density, three_point_density, FinitePmf,
};
use wick_limits::sampling::random_pmf;
use wick_limits::verification::{gaussian_wick_case, random_gaussian_pair, wick_thinning_case};

#[test]
fn three_point_mollified_law_agrees_with_chaos_side() {
    let f = three_point_density();
    let p = FinitePmf::new(vec![0.25, 0.5, 0.25]).unwrap();
    let schedule = SequenceSchedule::power(0.8);
    for n in [4usize, 16, 64, 256, 1024] {
        let b = schedule.b(n);
        let chaos = l1_distance_to_one_poisson(&mollified_thinned_sum_density(&f, n, b, 64).unwrap().expansion)
            .unwrap();
        let exact = pmf_l1_distance_to_poisson(&exact_mollified_law(&p, 1.0, n, b).unwrap(), 1.0);
        assert!((chaos - exact).abs() < 1e-12, "n={n}: {chaos} vs {exact}");
    }
}

#[test]
fn thinned_sum_of_points_is_binomial() {
    let n = 7;
    let law = exact_thinned_sum_law(&vec![FinitePmf::dirac(1); n], &vec![1.0 / n as f64; n]).unwrap();
    let bern = FinitePmf::new(vec![1.0 - 1.0 / n as f64, 1.0 / n as f64]).unwrap();
    assert!(law.total_variation(&convolution_power(&bern, n)) < 1e-15);
}

#[test]
fn wick_thinning_identity_on_extreme_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for &alpha in &[0.0, 1.0, 0.5] {
        for &a in &[0.5, 1.0, 2.0] {
            let p = random_pmf(&mut rng, 5);
            let q = random_pmf(&mut rng, 3);
            assert!(wick_thinning_case(&p, &q, a, alpha).unwrap() < 1e-10);
        }
    }
}

#[test]
fn grid_oracle_matches_wick_density() {
    let spec = GridSpec::default();
    let f = canonical_h4_density();
    let d = gaussian_wick_case(&f, &f, FRAC_1_SQRT_2, FRAC_1_SQRT_2, &spec).unwrap();
    assert!(d <= 1e-3, "{d}");
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (f1, f2, a1, a2) = random_gaussian_pair(&mut rng);
    assert!(gaussian_wick_case(&f1, &f2, a1, a2, &spec).unwrap() <= 5e-3);
}

#[test]
fn grid_oracle_handles_degenerate_rotation() {
    let spec = GridSpec {
        radius: 12.0,
        points: 2049,
    };
    let f = canonical_h4_density();
    let one = validate_gaussian_density(&ChaosExpansion::one(ReferenceMeasure::Gaussian)).unwrap();
    let q = grid_convolution_density(&f, &one, 1.0, 0.0, &spec).unwrap();
    assert!(q.l1_mu_distance(f.expansion()) < 1e-10);
    let q = grid_convolution_density(&f, &one, 0.0, -1.0, &spec).unwrap();
    assert!(q.l1_mu_distance(&ChaosExpansion::one(ReferenceMeasure::Gaussian)) < 1e-10);
}

#[test]
fn monte_carlo_tracks_exact_distances() {
    let schedule = SequenceSchedule::power(0.8);
    let f = canonical_h4_density();
    let p = FinitePmf::new(vec![0.25, 0.5, 0.25]).unwrap();
    let pf = three_point_density();
    let n = 16;
    let b = schedule.b(n);
    let exact_g = l1_distance_to_one(&mollified_sum_density(&f, n, b, 64).unwrap().expansion).unwrap();
    let mc_g = monte_carlo_l1_gaussian(&f, n, b, 20_000, 99).unwrap();
    assert!((mc_g.estimate - exact_g).abs() <= (3.0 * mc_g.std_error).max(0.03), "{mc_g:?} vs {exact_g}");
    let exact_p =
        l1_distance_to_one_poisson(&mollified_thinned_sum_density(&pf, n, b, 64).unwrap().expansion).unwrap();
    let mc_p = monte_carlo_l1_poisson(&p, 1.0, n, b, 20_000, 99).unwrap();
    assert!((mc_p.estimate - exact_p).abs() <= (3.0 * mc_p.std_error).max(0.03), "{mc_p:?} vs {exact_p}");
}

#[test]
fn monte_carlo_is_seed_deterministic() {
    let f = canonical_h4_density();
    let a = monte_carlo_l1_gaussian(&f, 4, 4.0, 5_000, 3).unwrap();
    let b = monte_carlo_l1_gaussian(&f, 4, 4.0, 5_000, 3).unwrap();
    let c = monte_carlo_l1_gaussian(&f, 4, 4.0, 5_000, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.estimate, c.estimate);
}
