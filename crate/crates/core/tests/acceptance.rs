//! Acceptance criteria, run in order with one PASS/FAIL line each.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use wick_limits::experiment::{ExperimentTolerances, SequenceSchedule, DEFAULT_N_LIST};
use wick_limits::gaussian_llt::{
    canonical_h4_density, l1_distance_to_one, mollified_sum_density, run_llt_experiment,
};
use wick_limits::oracles::{monte_carlo_l1_gaussian, monte_carlo_l1_poisson};
use wick_limits::orthobasis::poisson_ln_pmf;
use wick_limits::poisson_lsn::{
    l1_distance_to_one_poisson, mollified_thinned_sum_density, run_lsn_experiment, three_point_density,
    FinitePmf,
};
use wick_limits::verification::{
    functoriality_suite, gaussian_wick_suite, orthogonality_suite, wick_thinning_suite, young_suite,
    SuiteReport, YoungForm,
};

const SEED: u64 = 0x00C0_FFEE;

struct Outcome {
    passed: bool,
    detail: String,
}

fn suite_outcome(reports: &[SuiteReport]) -> Outcome {
    Outcome {
        passed: reports.iter().all(|r| r.passed()),
        detail: reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; "),
    }
}

fn orthogonality() -> Outcome {
    suite_outcome(&[orthogonality_suite(12, &[0.5, 1.0, 2.0], 1e-8)])
}

fn wick_thinning() -> Outcome {
    suite_outcome(&[wick_thinning_suite(100, 1e-10, SEED)])
}

fn gaussian_wick() -> Outcome {
    suite_outcome(&[gaussian_wick_suite(10, 1e-3, 5e-3, SEED)])
}

fn young() -> Outcome {
    suite_outcome(&[
        young_suite(YoungForm::Gaussian { p: 3.0 }, 1_000, 1e-9, SEED),
        young_suite(YoungForm::Gaussian { p: 1.0 }, 1_000, 1e-9, SEED),
        young_suite(YoungForm::Poisson { p: 1.0 }, 1_000, 1e-9, SEED),
        young_suite(YoungForm::Poisson { p: 2.0 }, 1_000, 1e-9, SEED),
    ])
}

fn gaussian_llt() -> Outcome {
    let f = canonical_h4_density();
    let report = run_llt_experiment(
        &f,
        &SequenceSchedule::power(0.8),
        &DEFAULT_N_LIST,
        64,
        &ExperimentTolerances::gaussian(),
    );
    let mut passed = report.records.len() == DEFAULT_N_LIST.len();
    let mut detail = Vec::new();
    for r in &report.records {
        // sqrt(Σ_{k≥3} k! γ_k²) = sqrt(4! · 0.1²) = sqrt(0.24)
        let bound = r.n as f64 * (r.b_n + 1.0).powf(-1.5) * 0.24f64.sqrt() * (1.0 + 1e-6);
        let ok = matches!(r.measured_l1, Some(m) if m <= bound);
        passed &= ok;
        detail.push(format!("n={} b={} l1={:?} bound={bound:.4e}", r.n, r.b_n, r.measured_l1));
    }
    let first = report.records.first().and_then(|r| r.measured_l1);
    let last = report.records.last().and_then(|r| r.measured_l1);
    passed &= matches!((first, last), (Some(a), Some(b)) if b < a);
    Outcome {
        passed,
        detail: detail.join("; "),
    }
}

fn poisson_lsn() -> Outcome {
    let f = three_point_density();
    // ‖f‖₂² = Σ p_k² / ν({k}) summed directly from the pmf
    let p = [0.25, 0.5, 0.25];
    let norm_sq: f64 = p
        .iter()
        .enumerate()
        .map(|(k, pk)| pk * pk / poisson_ln_pmf(1.0, k).exp())
        .sum();
    let report = run_lsn_experiment(
        &f,
        &SequenceSchedule::power(0.8),
        &DEFAULT_N_LIST,
        64,
        &ExperimentTolerances::poisson(),
    );
    let mut passed = report.records.len() == DEFAULT_N_LIST.len();
    let mut detail = vec![format!("|f|^2 = {norm_sq:.12}")];
    for r in &report.records {
        let bound = r.n as f64 * (r.b_n + 1.0).powi(-2) * (norm_sq - 1.0).sqrt() * (1.0 + 1e-6);
        let ok = matches!(r.measured_l1, Some(m) if m <= bound);
        passed &= ok;
        detail.push(format!("n={} b={} l1={:?} bound={bound:.4e}", r.n, r.b_n, r.measured_l1));
    }
    let first = report.records.first().and_then(|r| r.measured_l1);
    let last = report.records.last().and_then(|r| r.measured_l1);
    passed &= matches!((first, last), (Some(a), Some(b)) if b < a);
    Outcome {
        passed,
        detail: detail.join("; "),
    }
}

fn monte_carlo() -> Outcome {
    let schedule = SequenceSchedule::power(0.8);
    let f = canonical_h4_density();
    let pf = three_point_density();
    let pmf = FinitePmf::new(vec![0.25, 0.5, 0.25]).unwrap();
    let mut passed = true;
    let mut detail = Vec::new();
    for n in [16usize, 64] {
        let b = schedule.b(n);
        let exact_g = l1_distance_to_one(&mollified_sum_density(&f, n, b, 64).unwrap().expansion).unwrap();
        let exact_p =
            l1_distance_to_one_poisson(&mollified_thinned_sum_density(&pf, n, b, 64).unwrap().expansion)
                .unwrap();
        let mc_g = monte_carlo_l1_gaussian(&f, n, b, 100_000, SEED).unwrap();
        let mc_p = monte_carlo_l1_poisson(&pmf, 1.0, n, b, 100_000, SEED).unwrap();
        for (label, exact, mc) in [("gaussian", exact_g, mc_g), ("poisson", exact_p, mc_p)] {
            let allowed = (3.0 * mc.std_error).max(0.02);
            passed &= (mc.estimate - exact).abs() <= allowed;
            detail.push(format!(
                "{label} n={n}: mc={:.4e}±{:.1e} exact={exact:.4e}",
                mc.estimate, mc.std_error
            ));
        }
    }
    Outcome {
        passed,
        detail: detail.join("; "),
    }
}

fn functoriality() -> Outcome {
    suite_outcome(&[functoriality_suite(1_000, 1e-12, SEED)])
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        "mode = gaussian-llt\ndensity = h4-canonical\nn_list = 4,16,64\nmc_samples = 5000\nseed = 1234\n",
    )
    .unwrap();
    let csv = |name: &str| {
        let out = dir.path().join(name);
        Command::new(env!("CARGO_BIN_EXE_wick-limits"))
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env_remove("WICK_LIMITS_SEED")
            .output()
            .unwrap();
        fs::read(&out).unwrap_or_default()
    };
    let (a, b) = (csv("first.csv"), csv("second.csv"));
    Outcome {
        passed: !a.is_empty() && a == b,
        detail: format!("{} bytes, identical: {}", a.len(), a == b),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<(&str, Option<Duration>, fn() -> Outcome)> = vec![
        ("orthogonality", Some(Duration::from_secs(1)), orthogonality),
        ("wick/thinning oracle", Some(Duration::from_secs(5)), wick_thinning),
        ("gaussian wick oracle", Some(Duration::from_secs(30)), gaussian_wick),
        ("young inequalities", Some(Duration::from_secs(10)), young),
        ("gaussian llt convergence", Some(Duration::from_secs(60)), gaussian_llt),
        ("poisson lsn convergence", Some(Duration::from_secs(30)), poisson_lsn),
        ("monte carlo cross-check", Some(Duration::from_secs(60)), monte_carlo),
        ("functoriality", Some(Duration::from_secs(5)), functoriality),
        ("cli determinism", None, determinism),
    ];
    let mut failures = Vec::new();
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let passed = outcome.passed && in_time;
        println!(
            "criterion {} {name}: {} [{elapsed:.2?}{}] {}",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            limit.map_or(String::new(), |l| format!(" < {l:?}")),
            outcome.detail
        );
        if !passed {
            failures.push(i + 1);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
