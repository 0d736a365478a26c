//! Command-line front end.

pub mod config;
pub mod run;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

pub use config::{ConfigError, ConfigOverrides, DensitySpec, ExperimentConfig, Mode, SEED_ENV};
pub use run::{run, RunOutcome};

/// Chaos-expansion experiments for the mollified Gaussian local limit
/// theorem and the Poisson law of small numbers.
#[derive(Debug, Parser)]
#[command(name = "wick-limits", version)]
pub struct Args {
    /// gaussian-llt, poisson-lsn or verify
    #[arg(long)]
    pub mode: Option<Mode>,
    /// h4-canonical, three-point, coeffs:γ0,γ1,... or pmf:p0,p1,...
    #[arg(long)]
    pub density: Option<DensitySpec>,
    /// Poisson intensity
    #[arg(long)]
    pub a: Option<f64>,
    /// Schedule exponent, b_n = ceil(n^beta)
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comma-separated sample sizes
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Maximum retained chaos degree
    #[arg(long)]
    pub d_cap: Option<usize>,
    /// Gauss-Hermite order (default: max(40, 4D+8))
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Master seed (falls back to WICK_LIMITS_SEED)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo samples per row; 0 disables
    #[arg(long)]
    pub mc_samples: Option<usize>,
    /// CSV output path (default: standard output)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file with `key = value` lines; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl Args {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            mode: self.mode,
            density: self.density.clone(),
            a: self.a,
            beta: self.beta,
            n_list: self.n_list.clone(),
            d_cap: self.d_cap,
            quad_order: self.quad_order,
            seed: self.seed,
            mc_samples: self.mc_samples,
            out: self.out.clone(),
        }
    }

    /// Merges the config file (if any), flags and the seed variable.
    pub fn resolve(&self, env_seed: Option<&str>) -> Result<ExperimentConfig, ConfigError> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| ConfigError(vec![format!("config {}: {e}", path.display())]))?;
                config::parse_config_text(&text)?
            }
            None => ConfigOverrides::default(),
        };
        ExperimentConfig::from_overrides(base.merged_with(self.overrides()), env_seed)
    }
}

/// Exit status 0 when every check passes, 1 when a check fails, 2 for
/// configuration or I/O errors.
pub fn main_with(args: Args) -> ExitCode {
    let env_seed = std::env::var(SEED_ENV).ok();
    let config = match args.resolve(env_seed.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let outcome = run(&config);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if let Some(csv) = &outcome.csv {
        match &config.out {
            Some(path) => {
                if let Err(e) = fs::write(path, csv) {
                    eprintln!("cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            None => {
                let _ = out.write_all(csv.as_bytes());
                let _ = writeln!(out);
            }
        }
    }
    let _ = out.write_all(outcome.summary.as_bytes());
    if outcome.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
