//! Pieces shared by the Gaussian and Poisson convergence experiments:
//! the mollifier schedule `b_n`, its admissibility checks, and the per-`n`
//! result rows.

use std::fmt;

/// Which limit theorem a schedule is checked against.
///
/// Both require `b_n / n → 0`; the growth condition is
/// `b_n / n^{2/3} → ∞` (Gaussian) or `b_n / n^{1/2} → ∞` (Poisson).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitRegime {
    Gaussian,
    Poisson,
}

impl LimitRegime {
    pub fn growth_exponent(self) -> f64 {
        match self {
            LimitRegime::Gaussian => 2.0 / 3.0,
            LimitRegime::Poisson => 0.5,
        }
    }

    pub fn growth_label(self) -> &'static str {
        match self {
            LimitRegime::Gaussian => "b_n/n^(2/3) -> +inf",
            LimitRegime::Poisson => "b_n/n^(1/2) -> +inf",
        }
    }

    /// Whether the power schedule `⌈n^β⌉` satisfies both limits.
    pub fn admits_power(self, beta: f64) -> bool {
        beta > self.growth_exponent() && beta < 1.0
    }
}

/// Rule `n ↦ b_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceSchedule {
    /// `b_n = ⌈n^β⌉`.
    Power { beta: f64 },
    /// `b_n = c`.
    Constant { value: f64 },
    /// `b_n = c·n`.
    Proportional { factor: f64 },
}

impl SequenceSchedule {
    pub fn power(beta: f64) -> Self {
        SequenceSchedule::Power { beta }
    }

    pub fn b(&self, n: usize) -> f64 {
        match *self {
            SequenceSchedule::Power { beta } => {
                let v = (n as f64).powf(beta);
                // exact integer powers (1024^0.8 = 256) must not round up
                let r = v.round();
                if (v - r).abs() <= 1e-9 * r.max(1.0) {
                    r
                } else {
                    v.ceil()
                }
            }
            SequenceSchedule::Constant { value } => value,
            SequenceSchedule::Proportional { factor } => factor * n as f64,
        }
    }

    /// Trend checks of the two limits on a finite list of `n`.
    ///
    /// Power schedules are judged by their exponent. Other rules are judged
    /// by comparing the ratios at the smallest and largest `n`: `b_n/n` must
    /// strictly decrease and `b_n/n^κ` must strictly increase.
    pub fn check(&self, regime: LimitRegime, n_list: &[usize]) -> Vec<ScheduleWarning> {
        let mut warnings = Vec::new();
        if let SequenceSchedule::Power { beta } = *self {
            if beta >= 1.0 {
                warnings.push(ScheduleWarning::NotSublinear);
            }
            if beta <= regime.growth_exponent() {
                warnings.push(ScheduleWarning::GrowthTooSlow(regime));
            }
            return warnings;
        }
        let (lo, hi) = match (n_list.iter().min(), n_list.iter().max()) {
            (Some(&lo), Some(&hi)) if hi > lo => (lo as f64, hi as f64),
            _ => return warnings,
        };
        let kappa = regime.growth_exponent();
        let (b_lo, b_hi) = (self.b(lo as usize), self.b(hi as usize));
        if !(b_hi / hi < b_lo / lo || b_hi == 0.0) {
            warnings.push(ScheduleWarning::NotSublinear);
        }
        if !(b_hi / hi.powf(kappa) > b_lo / lo.powf(kappa)) {
            warnings.push(ScheduleWarning::GrowthTooSlow(regime));
        }
        warnings
    }
}

/// A violated admissibility condition on `b_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleWarning {
    /// `b_n / n → 0` fails.
    NotSublinear,
    /// `b_n / n^κ → ∞` fails.
    GrowthTooSlow(LimitRegime),
}

impl fmt::Display for ScheduleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleWarning::NotSublinear => write!(f, "condition b_n/n -> 0 violated"),
            ScheduleWarning::GrowthTooSlow(regime) => {
                write!(f, "condition {} violated", regime.growth_label())
            }
        }
    }
}

/// Tolerances and numerical settings for one experiment run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentTolerances {
    /// Absolute slack in `measured ≤ bound + tol`.
    pub bound_abs: f64,
    /// Relative disagreement allowed between the two Gaussian L¹ rules.
    pub cross_check_rel: f64,
    /// Gauss–Hermite order; `None` picks `max(40, 4D+8)` from the degree.
    pub quadrature_order: Option<usize>,
}

impl ExperimentTolerances {
    pub fn gaussian() -> Self {
        ExperimentTolerances {
            bound_abs: 1e-6,
            cross_check_rel: crate::gaussian_llt::DEFAULT_CROSS_CHECK_REL,
            quadrature_order: None,
        }
    }

    pub fn poisson() -> Self {
        ExperimentTolerances {
            bound_abs: 1e-8,
            cross_check_rel: crate::gaussian_llt::DEFAULT_CROSS_CHECK_REL,
            quadrature_order: None,
        }
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub b_n: f64,
    /// `None` when the row failed; see `failure`.
    pub measured_l1: Option<f64>,
    pub theoretical_bound: f64,
    pub bound_satisfied: bool,
    pub mc_estimate: Option<f64>,
    pub mc_std_error: Option<f64>,
    pub truncation_mass: Option<f64>,
    pub failure: Option<String>,
}

impl ConvergenceRecord {
    pub(crate) fn from_result(
        n: usize,
        b_n: f64,
        bound: f64,
        tol: f64,
        result: Result<(f64, f64), String>,
    ) -> Self {
        match result {
            Ok((measured, trunc)) => ConvergenceRecord {
                n,
                b_n,
                measured_l1: Some(measured),
                theoretical_bound: bound,
                bound_satisfied: measured <= bound + tol,
                mc_estimate: None,
                mc_std_error: None,
                truncation_mass: Some(trunc),
                failure: None,
            },
            Err(msg) => ConvergenceRecord {
                n,
                b_n,
                measured_l1: None,
                theoretical_bound: bound,
                bound_satisfied: false,
                mc_estimate: None,
                mc_std_error: None,
                truncation_mass: None,
                failure: Some(msg),
            },
        }
    }
}

/// Rows in ascending `n`, plus schedule warnings that apply to every row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub records: Vec<ConvergenceRecord>,
    pub schedule_warnings: Vec<ScheduleWarning>,
}

impl ExperimentReport {
    pub fn all_bounds_satisfied(&self) -> bool {
        self.records.iter().all(|r| r.bound_satisfied)
    }

    pub fn first_and_last(&self) -> Option<(&ConvergenceRecord, &ConvergenceRecord)> {
        Some((self.records.first()?, self.records.last()?))
    }
}

/// A violated density condition, with the measured value.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityViolation {
    /// The expansion is not taken against the expected measure.
    WrongMeasure,
    /// `γ_0 ≠ 1`: total mass is not one.
    Mass { gamma0: f64 },
    /// `γ_1 ≠ 0`: the mean condition fails.
    Mean { gamma1: f64 },
    /// `γ_2 ≠ 0`: the unit-variance condition fails.
    Variance { gamma2: f64 },
    /// Negative somewhere on the verification grid or support.
    Negative { at: f64, value: f64 },
    /// `‖f‖₂²` is not finite.
    L2Overflow { norm_sq: f64 },
}

impl fmt::Display for DensityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityViolation::WrongMeasure => write!(f, "expansion has the wrong reference measure"),
            DensityViolation::Mass { gamma0 } => write!(f, "gamma_0 = {gamma0}, expected 1"),
            DensityViolation::Mean { gamma1 } => write!(f, "gamma_1 = {gamma1}, expected 0"),
            DensityViolation::Variance { gamma2 } => write!(f, "gamma_2 = {gamma2}, expected 0"),
            DensityViolation::Negative { at, value } => {
                write!(f, "density takes value {value} at {at}")
            }
            DensityViolation::L2Overflow { norm_sq } => {
                write!(f, "squared L2 norm {norm_sq} is not finite")
            }
        }
    }
}

/// Every violated condition found while validating a density.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid density: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidDensity(pub Vec<DensityViolation>);

/// Absolute tolerance on the moment coefficients of a density.
pub const MOMENT_TOL: f64 = 1e-10;

/// Default list of sample sizes.
pub const DEFAULT_N_LIST: [usize; 5] = [4, 16, 64, 256, 1024];
/// Default schedule exponent.
pub const DEFAULT_BETA: f64 = 0.8;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_values() {
        let s = SequenceSchedule::power(0.8);
        let b: Vec<f64> = DEFAULT_N_LIST.iter().map(|&n| s.b(n)).collect();
        assert_eq!(b, vec![4.0, 10.0, 28.0, 85.0, 256.0]);
        assert!(s.check(LimitRegime::Gaussian, &DEFAULT_N_LIST).is_empty());
        assert!(s.check(LimitRegime::Poisson, &DEFAULT_N_LIST).is_empty());
    }

    #[test]
    fn degenerate_schedules_are_flagged() {
        let zero = SequenceSchedule::Constant { value: 0.0 };
        assert_eq!(
            zero.check(LimitRegime::Gaussian, &DEFAULT_N_LIST),
            vec![ScheduleWarning::GrowthTooSlow(LimitRegime::Gaussian)]
        );
        let linear = SequenceSchedule::Proportional { factor: 1.0 };
        assert_eq!(
            linear.check(LimitRegime::Poisson, &DEFAULT_N_LIST),
            vec![ScheduleWarning::NotSublinear]
        );
        let slow = SequenceSchedule::power(0.6);
        assert_eq!(slow.check(LimitRegime::Poisson, &DEFAULT_N_LIST), vec![]);
        assert_eq!(
            slow.check(LimitRegime::Gaussian, &DEFAULT_N_LIST),
            vec![ScheduleWarning::GrowthTooSlow(LimitRegime::Gaussian)]
        );
    }
}
