//! Flat `key = value` configuration, merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::chaos::{ChaosExpansion, DEFAULT_D_CAP};
use crate::experiment::{LimitRegime, DEFAULT_BETA, DEFAULT_N_LIST};
use crate::gaussian_llt::{canonical_h4_density, validate_gaussian_density, GaussianDensityInput};
use crate::oracles::MIN_MC_SAMPLES;
use crate::orthobasis::ReferenceMeasure;
use crate::poisson_lsn::{
    pmf_to_density, three_point_density, validate_poisson_density, FinitePmf, PoissonDensityInput,
};

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "WICK_LIMITS_SEED";
/// Seed used when neither a flag, the config file nor the environment sets one.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Keys accepted in config files, in serialization order.
pub const KEYS: [&str; 10] = [
    "mode",
    "density",
    "a",
    "beta",
    "n_list",
    "d_cap",
    "quad_order",
    "seed",
    "mc_samples",
    "out",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    GaussianLlt,
    PoissonLsn,
    Verify,
}

impl Mode {
    pub fn regime(self) -> Option<LimitRegime> {
        match self {
            Mode::GaussianLlt => Some(LimitRegime::Gaussian),
            Mode::PoissonLsn => Some(LimitRegime::Poisson),
            Mode::Verify => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::GaussianLlt => "gaussian-llt",
            Mode::PoissonLsn => "poisson-lsn",
            Mode::Verify => "verify",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian-llt" => Ok(Mode::GaussianLlt),
            "poisson-lsn" => Ok(Mode::PoissonLsn),
            "verify" => Ok(Mode::Verify),
            other => Err(format!(
                "unknown mode '{other}' (expected gaussian-llt, poisson-lsn or verify)"
            )),
        }
    }
}

/// Input density: a builtin, chaos coefficients, or a pmf.
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    H4Canonical,
    ThreePoint,
    /// Coefficients in the basis of the mode's reference measure.
    Coeffs(Vec<f64>),
    /// Masses on `0, 1, …` (Poisson mode only).
    Pmf(Vec<f64>),
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("'{t}' is not a finite number"))
        })
        .collect()
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::H4Canonical => f.write_str("h4-canonical"),
            DensitySpec::ThreePoint => f.write_str("three-point"),
            DensitySpec::Coeffs(c) => write!(f, "coeffs:{}", join_floats(c)),
            DensitySpec::Pmf(p) => write!(f, "pmf:{}", join_floats(p)),
        }
    }
}

impl FromStr for DensitySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "h4-canonical" => return Ok(DensitySpec::H4Canonical),
            "three-point" => return Ok(DensitySpec::ThreePoint),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("coeffs:") {
            return parse_floats(rest).map(DensitySpec::Coeffs);
        }
        if let Some(rest) = s.strip_prefix("pmf:") {
            return parse_floats(rest).map(DensitySpec::Pmf);
        }
        Err(format!(
            "unknown density '{s}' (expected h4-canonical, three-point, coeffs:... or pmf:...)"
        ))
    }
}

/// Raw settings before validation; every field is optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub mode: Option<Mode>,
    pub density: Option<DensitySpec>,
    pub a: Option<f64>,
    pub beta: Option<f64>,
    pub n_list: Option<Vec<usize>>,
    pub d_cap: Option<usize>,
    pub quad_order: Option<usize>,
    pub seed: Option<u64>,
    pub mc_samples: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ConfigOverrides {
    /// Fields set in `other` replace those in `self`.
    pub fn merged_with(self, other: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            mode: other.mode.or(self.mode),
            density: other.density.or(self.density),
            a: other.a.or(self.a),
            beta: other.beta.or(self.beta),
            n_list: other.n_list.or(self.n_list),
            d_cap: other.d_cap.or(self.d_cap),
            quad_order: other.quad_order.or(self.quad_order),
            seed: other.seed.or(self.seed),
            mc_samples: other.mc_samples.or(self.mc_samples),
            out: other.out.or(self.out),
        }
    }
}

pub fn parse_n_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<usize>()
                .map_err(|_| format!("'{t}' is not a nonnegative integer"))
        })
        .collect()
}

fn set_key(o: &mut ConfigOverrides, key: &str, value: &str) -> Result<(), String> {
    fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
        value
            .parse()
            .map_err(|_| format!("{key}: cannot parse '{value}'"))
    }
    match key {
        "mode" => o.mode = Some(value.parse()?),
        "density" => o.density = Some(value.parse().map_err(|e| format!("density: {e}"))?),
        "a" => o.a = Some(num(key, value)?),
        "beta" => o.beta = Some(num(key, value)?),
        "n_list" => o.n_list = Some(parse_n_list(value).map_err(|e| format!("n_list: {e}"))?),
        "d_cap" => o.d_cap = Some(num(key, value)?),
        "quad_order" => {
            o.quad_order = if value == "auto" {
                None
            } else {
                Some(num(key, value)?)
            }
        }
        "seed" => o.seed = Some(num(key, value)?),
        "mc_samples" => o.mc_samples = Some(num(key, value)?),
        "out" => o.out = Some(PathBuf::from(value)),
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

/// Parses config text, collecting one message per bad line.
pub fn parse_config_text(text: &str) -> Result<ConfigOverrides, ConfigError> {
    let mut o = ConfigOverrides::default();
    let mut errors = Vec::new();
    let mut seen = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected 'key = value'", lineno + 1));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if let Some(prev) = seen.insert(key.to_string(), lineno + 1) {
            errors.push(format!("line {}: key '{key}' already set on line {prev}", lineno + 1));
            continue;
        }
        if let Err(e) = set_key(&mut o, key, value) {
            errors.push(format!("line {}: {e}", lineno + 1));
        }
    }
    if errors.is_empty() {
        Ok(o)
    } else {
        Err(ConfigError(errors))
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigError(pub Vec<String>);

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub density: DensitySpec,
    pub a: f64,
    pub beta: f64,
    pub n_list: Vec<usize>,
    pub d_cap: usize,
    /// `None` picks the order from the expansion degree.
    pub quad_order: Option<usize>,
    pub seed: u64,
    /// 0 disables the Monte Carlo columns.
    pub mc_samples: usize,
    /// CSV destination; `None` writes the table to standard output.
    pub out: Option<PathBuf>,
}

/// Validated input density for an experiment mode.
#[derive(Debug, Clone, PartialEq)]
pub enum PreparedDensity {
    Gaussian(GaussianDensityInput),
    Poisson {
        input: PoissonDensityInput,
        /// Original pmf when the density was given as one.
        pmf: Option<FinitePmf>,
    },
}

fn prepare_density(mode: Mode, spec: &DensitySpec, a: f64) -> Result<PreparedDensity, Vec<String>> {
    let msgs = |e: crate::experiment::InvalidDensity| -> Vec<String> {
        e.0.iter().map(|v| format!("density: {v}")).collect()
    };
    match (mode, spec) {
        (Mode::GaussianLlt, DensitySpec::H4Canonical) => {
            Ok(PreparedDensity::Gaussian(canonical_h4_density()))
        }
        (Mode::GaussianLlt, DensitySpec::Coeffs(c)) => {
            let f = ChaosExpansion::new(ReferenceMeasure::Gaussian, c.clone())
                .map_err(|e| vec![format!("density: {e}")])?;
            validate_gaussian_density(&f).map(PreparedDensity::Gaussian).map_err(msgs)
        }
        (Mode::PoissonLsn, DensitySpec::ThreePoint) => {
            if a != 1.0 {
                return Err(vec![format!(
                    "density: three-point has mean 1 and needs a = 1, got a = {a}"
                )]);
            }
            let pmf = FinitePmf::new(vec![0.25, 0.5, 0.25]).expect("valid pmf");
            Ok(PreparedDensity::Poisson {
                input: three_point_density(),
                pmf: Some(pmf),
            })
        }
        (Mode::PoissonLsn, DensitySpec::Pmf(p)) => {
            let pmf = FinitePmf::new(p.clone()).map_err(|e| vec![format!("density: {e}")])?;
            let f = pmf_to_density(&pmf, a).map_err(|e| vec![format!("density: {e}")])?;
            let input = validate_poisson_density(&f, a).map_err(msgs)?;
            Ok(PreparedDensity::Poisson {
                input,
                pmf: Some(pmf),
            })
        }
        (Mode::PoissonLsn, DensitySpec::Coeffs(c)) => {
            let measure = ReferenceMeasure::poisson(a).map_err(|e| vec![format!("a: {e}")])?;
            let f = ChaosExpansion::new(measure, c.clone()).map_err(|e| vec![format!("density: {e}")])?;
            let input = validate_poisson_density(&f, a).map_err(msgs)?;
            Ok(PreparedDensity::Poisson { input, pmf: None })
        }
        (mode, spec) => Err(vec![format!("density '{spec}' cannot be used with mode {mode}")]),
    }
}

impl ExperimentConfig {
    /// Validates merged settings, filling documented defaults and reporting
    /// every violation at once. `env_seed` is the value of [`SEED_ENV`].
    pub fn from_overrides(o: ConfigOverrides, env_seed: Option<&str>) -> Result<Self, ConfigError> {
        let mut errors = Vec::new();
        let mode = o.mode.unwrap_or_else(|| {
            errors.push("mode: missing (gaussian-llt, poisson-lsn or verify)".to_string());
            Mode::Verify
        });
        let density = o.density.unwrap_or(match mode {
            Mode::PoissonLsn => DensitySpec::ThreePoint,
            _ => DensitySpec::H4Canonical,
        });
        let a = o.a.unwrap_or(1.0);
        let beta = o.beta.unwrap_or(DEFAULT_BETA);
        let n_list = o.n_list.unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
        let d_cap = o.d_cap.unwrap_or(DEFAULT_D_CAP);
        let mc_samples = o.mc_samples.unwrap_or(0);
        let seed = match (o.seed, env_seed) {
            (Some(s), _) => s,
            (None, Some(text)) => text.trim().parse().unwrap_or_else(|_| {
                errors.push(format!("{SEED_ENV}: cannot parse '{text}' as a 64-bit seed"));
                DEFAULT_SEED
            }),
            (None, None) => DEFAULT_SEED,
        };

        if !(a.is_finite() && a > 0.0) {
            errors.push(format!("a: intensity must be finite and positive, got {a}"));
        }
        if n_list.is_empty() {
            errors.push("n_list: must not be empty".to_string());
        }
        if n_list.contains(&0) {
            errors.push("n_list: sample sizes must be at least 1".to_string());
        }
        if d_cap == 0 {
            errors.push("d_cap: must be at least 1".to_string());
        }
        if o.quad_order == Some(0) {
            errors.push("quad_order: must be at least 1".to_string());
        }
        if mc_samples != 0 && mc_samples < MIN_MC_SAMPLES {
            errors.push(format!(
                "mc_samples: must be 0 (disabled) or at least {MIN_MC_SAMPLES}, got {mc_samples}"
            ));
        }
        if let Some(regime) = mode.regime() {
            if !regime.admits_power(beta) {
                let lo = match regime {
                    LimitRegime::Gaussian => "2/3",
                    LimitRegime::Poisson => "1/2",
                };
                errors.push(format!(
                    "beta: b_n = ceil(n^{beta}) must satisfy b_n/n -> 0 and {}, which requires beta in ({lo}, 1)",
                    regime.growth_label()
                ));
            }
            if a.is_finite() && a > 0.0 {
                if let Err(e) = prepare_density(mode, &density, a) {
                    errors.extend(e);
                }
            }
        }

        if errors.is_empty() {
            Ok(ExperimentConfig {
                mode,
                density,
                a,
                beta,
                n_list,
                d_cap,
                quad_order: o.quad_order,
                seed,
                mc_samples,
                out: o.out,
            })
        } else {
            Err(ConfigError(errors))
        }
    }

    /// Parses and validates config text on its own.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        ExperimentConfig::from_overrides(parse_config_text(text)?, None)
    }

    /// The validated density for an experiment mode.
    pub fn prepared_density(&self) -> Result<PreparedDensity, ConfigError> {
        prepare_density(self.mode, &self.density, self.a).map_err(ConfigError)
    }

    /// Config text that parses back to an equal configuration.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("mode", self.mode.to_string());
        line("density", self.density.to_string());
        line("a", format!("{:?}", self.a));
        line("beta", format!("{:?}", self.beta));
        line(
            "n_list",
            self.n_list
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        line("d_cap", self.d_cap.to_string());
        line(
            "quad_order",
            self.quad_order.map_or("auto".to_string(), |q| q.to_string()),
        );
        line("seed", self.seed.to_string());
        line("mc_samples", self.mc_samples.to_string());
        if let Some(out) = &self.out {
            line("out", out.display().to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overrides(mode: Mode, density: DensitySpec) -> ConfigOverrides {
        ConfigOverrides {
            mode: Some(mode),
            density: Some(density),
            ..Default::default()
        }
    }

    #[test]
    fn minimal_gaussian_config_gets_defaults() {
        let cfg = ExperimentConfig::from_overrides(
            overrides(Mode::GaussianLlt, DensitySpec::H4Canonical),
            None,
        )
        .unwrap();
        assert_eq!(cfg.beta, 0.8);
        assert_eq!(cfg.n_list, vec![4, 16, 64, 256, 1024]);
        assert_eq!(cfg.d_cap, 64);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.mc_samples, 0);
    }

    #[test]
    fn slow_schedule_refused_for_gaussian_only() {
        let mut o = overrides(Mode::GaussianLlt, DensitySpec::H4Canonical);
        o.beta = Some(0.6);
        let err = ExperimentConfig::from_overrides(o, None).unwrap_err();
        assert!(err.0.iter().any(|m| m.contains("b_n/n^(2/3) -> +inf")), "{err}");

        let mut o = overrides(Mode::PoissonLsn, DensitySpec::ThreePoint);
        o.beta = Some(0.6);
        assert!(ExperimentConfig::from_overrides(o, None).is_ok());
    }

    #[test]
    fn all_violations_reported() {
        let mut o = overrides(Mode::GaussianLlt, DensitySpec::Pmf(vec![0.5, 0.5]));
        o.beta = Some(1.2);
        o.mc_samples = Some(10);
        o.a = Some(-1.0);
        let err = ExperimentConfig::from_overrides(o, None).unwrap_err();
        assert_eq!(err.0.len(), 3, "{err}");
        let mut o = overrides(Mode::GaussianLlt, DensitySpec::Pmf(vec![0.5, 0.5]));
        o.beta = Some(1.2);
        let err = ExperimentConfig::from_overrides(o, None).unwrap_err();
        assert!(err.0.iter().any(|m| m.contains("cannot be used with mode")));
    }

    #[test]
    fn parse_file_and_round_trip() {
        let text = "# experiment\nmode = poisson-lsn\ndensity = pmf:0.25,0.5,0.25  # p*\nbeta = 0.7\nn_list = 4,16\nseed = 9\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.density, DensitySpec::Pmf(vec![0.25, 0.5, 0.25]));
        assert_eq!(cfg.seed, 9);
        assert_eq!(ExperimentConfig::parse(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_lines() {
        let err = parse_config_text("mode = verify\ncolour = red\nnonsense\nmode = verify\n").unwrap_err();
        assert_eq!(err.0.len(), 3, "{err}");
    }

    #[test]
    fn seed_precedence() {
        let o = overrides(Mode::Verify, DensitySpec::H4Canonical);
        assert_eq!(ExperimentConfig::from_overrides(o.clone(), Some("17")).unwrap().seed, 17);
        let mut with_flag = o.clone();
        with_flag.seed = Some(3);
        assert_eq!(ExperimentConfig::from_overrides(with_flag, Some("17")).unwrap().seed, 3);
        assert!(ExperimentConfig::from_overrides(o, Some("x")).is_err());
    }
}
