//! Executes a validated configuration: tables, checks and summary text.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Mode, PreparedDensity};
use crate::experiment::{ConvergenceRecord, ExperimentReport, ExperimentTolerances, SequenceSchedule};
use crate::gaussian_llt::run_llt_experiment;
use crate::oracles::{derive_seed, monte_carlo_l1_gaussian, monte_carlo_l1_poisson};
use crate::poisson_lsn::{run_lsn_experiment, FinitePmf};
use crate::verification;

/// Fixed CSV header.
pub const CSV_HEADER: &str =
    "n,b_n,measured_l1,bound,bound_satisfied,mc_estimate,mc_std_error,trunc_mass";

/// Allowed gap between a Monte Carlo estimate and the exact distance is
/// `max(MC_SIGMAS · std_error, MC_FLOOR)`.
pub const MC_SIGMAS: f64 = 3.0;
pub const MC_FLOOR: f64 = 0.02;

/// A named pass/fail check for the summary and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// CSV table (experiment modes only).
    pub csv: Option<String>,
    pub checks: Vec<Check>,
    pub summary: String,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn float_cell(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:.16e}"))
}

/// Renders rows with 17 significant digits; missing values are empty cells.
pub fn render_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.n,
            float_cell(Some(r.b_n)),
            float_cell(r.measured_l1),
            float_cell(Some(r.theoretical_bound)),
            r.bound_satisfied,
            float_cell(r.mc_estimate),
            float_cell(r.mc_std_error),
            float_cell(r.truncation_mass),
        );
    }
    s
}

fn attach_monte_carlo(report: &mut ExperimentReport, config: &ExperimentConfig, density: &PreparedDensity) {
    let results: Vec<Result<(f64, f64), String>> = report
        .records
        .par_iter()
        .map(|r| {
            // every row gets its own stream, so results do not depend on scheduling
            let seed = derive_seed(config.seed, r.n as u64);
            let est = match density {
                PreparedDensity::Gaussian(f) => {
                    monte_carlo_l1_gaussian(f, r.n, r.b_n, config.mc_samples, seed)
                }
                PreparedDensity::Poisson { input, pmf } => {
                    let pmf = match pmf {
                        Some(p) => p.clone(),
                        None => density_to_pmf(input.expansion(), config.a),
                    };
                    monte_carlo_l1_poisson(&pmf, config.a, r.n, r.b_n, config.mc_samples, seed)
                }
            };
            est.map(|e| (e.estimate, e.std_error)).map_err(|e| e.to_string())
        })
        .collect();
    for (r, res) in report.records.iter_mut().zip(results) {
        match res {
            Ok((est, se)) => {
                r.mc_estimate = Some(est);
                r.mc_std_error = Some(se);
            }
            Err(e) => {
                r.failure.get_or_insert(format!("monte carlo: {e}"));
            }
        }
    }
}

/// Masses `f(k) ν({k})` on the verification support, for sampling inputs
/// given as Charlier coefficients.
fn density_to_pmf(f: &crate::chaos::ChaosExpansion, a: f64) -> FinitePmf {
    let support = crate::sampling::poisson_verification_support(a);
    let masses = verification::chaos_side_masses(f, support.len() - 1)
        .into_iter()
        .map(|m| m.max(0.0))
        .collect();
    FinitePmf::normalized(masses).expect("nonnegative masses with positive total")
}

fn experiment_checks(report: &ExperimentReport, mc_enabled: bool) -> Vec<Check> {
    let mut checks = Vec::new();
    let failed: Vec<String> = report
        .records
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|f| format!("n={}: {f}", r.n)))
        .collect();
    checks.push(Check {
        name: "rows computed".into(),
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} rows", report.records.len())
        } else {
            failed.join("; ")
        },
    });
    let violating: Vec<usize> = report
        .records
        .iter()
        .filter(|r| !r.bound_satisfied)
        .map(|r| r.n)
        .collect();
    checks.push(Check {
        name: "bound dominance".into(),
        passed: violating.is_empty(),
        detail: if violating.is_empty() {
            "measured_l1 <= bound on every row".into()
        } else {
            format!("violated at n = {violating:?}")
        },
    });
    if let Some((first, last)) = report.first_and_last() {
        if first.n != last.n {
            let (a, b) = (first.measured_l1, last.measured_l1);
            checks.push(Check {
                name: "convergence".into(),
                passed: matches!((a, b), (Some(a), Some(b)) if b < a),
                detail: format!(
                    "measured_l1(n={}) = {} vs measured_l1(n={}) = {}",
                    last.n,
                    float_cell(b),
                    first.n,
                    float_cell(a)
                ),
            });
        }
    }
    if mc_enabled {
        let off: Vec<usize> = report
            .records
            .iter()
            .filter(|r| match (r.measured_l1, r.mc_estimate, r.mc_std_error) {
                (Some(m), Some(e), Some(se)) => (m - e).abs() > (MC_SIGMAS * se).max(MC_FLOOR),
                _ => true,
            })
            .map(|r| r.n)
            .collect();
        checks.push(Check {
            name: "monte carlo agreement".into(),
            passed: off.is_empty(),
            detail: if off.is_empty() {
                format!("within max({MC_SIGMAS} se, {MC_FLOOR}) on every row")
            } else {
                format!("outside tolerance at n = {off:?}")
            },
        });
    }
    checks
}

fn render_summary(config: &ExperimentConfig, checks: &[Check], extra: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode: {}", config.mode);
    if config.mode != Mode::Verify {
        let _ = writeln!(
            s,
            "density: {}  a: {}  beta: {}  seed: {}",
            config.density, config.a, config.beta, config.seed
        );
    } else {
        let _ = writeln!(s, "seed: {}", config.seed);
    }
    s.push_str(extra);
    for c in checks {
        let _ = writeln!(
            s,
            "[{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let all = checks.iter().all(|c| c.passed);
    let _ = writeln!(s, "overall: {}", if all { "PASS" } else { "FAIL" });
    s
}

/// Runs the configured mode.
pub fn run(config: &ExperimentConfig) -> RunOutcome {
    if config.mode == Mode::Verify {
        let suites = verification::run_all(config.seed);
        let checks: Vec<Check> = suites
            .iter()
            .map(|r| Check {
                name: r.name.clone(),
                passed: r.passed(),
                detail: format!(
                    "{} cases, {} violations, max error {:.3e} (tolerance {:.0e})",
                    r.cases, r.violations, r.max_error, r.tolerance
                ),
            })
            .collect();
        let summary = render_summary(config, &checks, "");
        return RunOutcome {
            csv: None,
            checks,
            summary,
        };
    }

    let density = match config.prepared_density() {
        Ok(d) => d,
        Err(e) => {
            let checks = vec![Check {
                name: "density".into(),
                passed: false,
                detail: e.to_string(),
            }];
            let summary = render_summary(config, &checks, "");
            return RunOutcome {
                csv: None,
                checks,
                summary,
            };
        }
    };
    let schedule = SequenceSchedule::power(config.beta);
    let mut report = match &density {
        PreparedDensity::Gaussian(f) => {
            let tol = ExperimentTolerances {
                quadrature_order: config.quad_order,
                ..ExperimentTolerances::gaussian()
            };
            run_llt_experiment(f, &schedule, &config.n_list, config.d_cap, &tol)
        }
        PreparedDensity::Poisson { input, .. } => run_lsn_experiment(
            input,
            &schedule,
            &config.n_list,
            config.d_cap,
            &ExperimentTolerances::poisson(),
        ),
    };
    let mc_enabled = config.mc_samples > 0;
    if mc_enabled {
        attach_monte_carlo(&mut report, config, &density);
    }
    let mut checks = experiment_checks(&report, mc_enabled);
    if !report.schedule_warnings.is_empty() {
        checks.push(Check {
            name: "schedule".into(),
            passed: false,
            detail: report
                .schedule_warnings
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        });
    }
    let csv = render_csv(&report.records);
    let summary = render_summary(config, &checks, "");
    RunOutcome {
        csv: Some(csv),
        checks,
        summary,
    }
}
