//! Flags, config files and the validated experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use swrl_core::lowdeg::{Degree, Method};
use swrl_core::prior::SpikePrior;
use swrl_core::roc::{RocPoint, DEFAULT_GAMMA_DISCRETIZE, DEFAULT_GAMMA_PERTURB};
use swrl_core::spectral::Backend;
use swrl_core::witness::WitnessChoice;

pub const LAMBDA_RANGE: (f64, f64) = (0.0, 5.0);
pub const N_RANGE: (usize, usize) = (2, 10_000);
pub const TRIALS_RANGE: (usize, usize) = (100, 10_000_000);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError {
    pub field: String,
    pub constraint: String,
}

impl UsageError {
    pub fn new(field: &str, constraint: impl Into<String>) -> Self {
        UsageError {
            field: field.to_string(),
            constraint: constraint.into(),
        }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid {}: {}", self.field, self.constraint)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "swrl", version, about = "Spiked Wigner ROC experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Empirical ROC of calibrated LSS tests (CSV).
    Roc(Flags),
    /// Low-degree likelihood-ratio norm (CSV).
    LowdegNorm(Flags),
    /// Envelope chain through an exterior point (JSON).
    Envelope(Flags),
    /// Witness ratio for a battery of LSS tests (JSON).
    Witness(Flags),
    /// Top-eigenvalue and mean-gap diagnostics (CSV).
    Diag(Flags),
}

impl Command {
    pub fn split(self) -> (SubcommandKind, Flags) {
        match self {
            Command::Roc(f) => (SubcommandKind::Roc, f),
            Command::LowdegNorm(f) => (SubcommandKind::LowdegNorm, f),
            Command::Envelope(f) => (SubcommandKind::Envelope, f),
            Command::Witness(f) => (SubcommandKind::Witness, f),
            Command::Diag(f) => (SubcommandKind::Diag, f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubcommandKind {
    Roc,
    LowdegNorm,
    Envelope,
    Witness,
    Diag,
}

/// Where the witness gets its test outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeSourceKind {
    #[default]
    Lss,
    Nested,
    Independent,
}

/// Every setting, as given on the command line. Flags override the
/// `--config` file field by field.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with any of the settings below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// `λ` inside the LSS statistic (roc only; defaults to --lambda).
    #[arg(long)]
    pub statistic_lambda: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// `rademacher`, `sparse:<rho>`, or a JSON prior object.
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Null draws used to set thresholds (defaults to --trials).
    #[arg(long)]
    pub calib_trials: Option<usize>,
    /// Integer or `inf`.
    #[arg(long)]
    pub degree: Option<String>,
    /// `binomial_sum`, `exact_enum` or `monte_carlo`.
    #[arg(long)]
    pub method: Option<String>,
    /// Comma-separated sizes in (0, 1).
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    /// `alpha,beta`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub exterior: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma_u: Option<f64>,
    #[arg(long)]
    pub gamma_v: Option<f64>,
    /// `lower`, `upper` or `midpoint`.
    #[arg(long)]
    pub choice: Option<String>,
    /// `lss`, `nested` or `independent`.
    #[arg(long)]
    pub source: Option<String>,
    /// `tridiagonal` or `dense`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Results file; without it results go to stdout and the manifest to
    /// stderr.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; `SWRL_THREADS` takes precedence.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// The `--config` file. Same fields as the flags; the prior is a JSON
/// object and the exterior point a two-element array.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lambda: Option<f64>,
    pub statistic_lambda: Option<f64>,
    pub n: Option<usize>,
    pub prior: Option<SpikePrior>,
    pub trials: Option<usize>,
    pub calib_trials: Option<usize>,
    pub degree: Option<Degree>,
    pub method: Option<Method>,
    pub alpha_grid: Option<Vec<f64>>,
    pub exterior: Option<[f64; 2]>,
    pub gamma_u: Option<f64>,
    pub gamma_v: Option<f64>,
    pub choice: Option<WitnessChoice>,
    pub source: Option<OutcomeSourceKind>,
    pub backend: Option<Backend>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            UsageError::new("config", format!("cannot read {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| UsageError::new("config", e.to_string()))
    }
}

/// Validated settings for one run; echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: SubcommandKind,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub prior: SpikePrior,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calib_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<Degree>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exterior: Option<RocPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choice: Option<WitnessChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<OutcomeSourceKind>,
    pub backend: Backend,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Parses a string with the serde representation of `T`.
fn parse_named<T: DeserializeOwned>(field: &str, s: &str) -> Result<T, UsageError> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| UsageError::new(field, format!("unknown value {s:?}")))
}

pub fn parse_prior(s: &str) -> Result<SpikePrior, UsageError> {
    let s = s.trim();
    let prior = if s.starts_with('{') {
        serde_json::from_str(s).map_err(|e| UsageError::new("prior", e.to_string()))?
    } else if s == "rademacher" {
        SpikePrior::Rademacher
    } else if let Some(rho) = s.strip_prefix("sparse:") {
        let rho = rho
            .parse()
            .map_err(|_| UsageError::new("prior", format!("bad sparsity {rho:?}")))?;
        SpikePrior::SparseRademacher { rho }
    } else {
        return Err(UsageError::new(
            "prior",
            format!("expected rademacher, sparse:<rho> or a JSON object, got {s:?}"),
        ));
    };
    prior
        .validate()
        .map_err(|e| UsageError::new("prior", e.to_string()))?;
    Ok(prior)
}

fn in_range<T: PartialOrd + fmt::Display + Copy>(
    field: &str,
    v: T,
    (lo, hi): (T, T),
) -> Result<T, UsageError> {
    if v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(UsageError::new(field, format!("{v} outside [{lo}, {hi}]")))
    }
}

fn open_unit(field: &str, v: f64) -> Result<f64, UsageError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(UsageError::new(field, format!("{v} must lie in (0, 1)")))
    }
}

fn required<T>(field: &str, v: Option<T>) -> Result<T, UsageError> {
    v.ok_or_else(|| UsageError::new(field, "is required"))
}

/// Thread count: `SWRL_THREADS` beats `--threads` beats the file.
pub fn resolve_threads(
    flags: &Flags,
    file: &FileConfig,
    env: Option<&str>,
) -> Result<Option<usize>, UsageError> {
    if let Some(raw) = env {
        let t: usize = raw.trim().parse().map_err(|_| {
            UsageError::new("SWRL_THREADS", format!("{raw:?} is not a positive integer"))
        })?;
        if t == 0 {
            return Err(UsageError::new("SWRL_THREADS", "must be positive"));
        }
        return Ok(Some(t));
    }
    match flags.threads.or(file.threads) {
        Some(0) => Err(UsageError::new("threads", "must be positive")),
        t => Ok(t),
    }
}

/// Merges flags over the file and checks every field the subcommand uses.
pub fn resolve(
    kind: SubcommandKind,
    flags: &Flags,
    file: &FileConfig,
) -> Result<ExperimentConfig, UsageError> {
    use SubcommandKind::*;

    let seed = required("seed", flags.seed.or(file.seed))?;
    let lambda = required("lambda", flags.lambda.or(file.lambda))?;
    if !lambda.is_finite() {
        return Err(UsageError::new("lambda", "must be finite"));
    }
    in_range("lambda", lambda, LAMBDA_RANGE)?;
    match kind {
        Witness if !(lambda > 0.0 && lambda < 1.0) => {
            return Err(UsageError::new(
                "lambda",
                format!("{lambda}: witness requires 0 < lambda < 1"),
            ));
        }
        Envelope if !(lambda > 0.0 && lambda < 1.0) => {
            return Err(UsageError::new(
                "lambda",
                format!("{lambda}: envelope requires 0 < lambda < 1"),
            ));
        }
        _ => {}
    }

    let n = match kind {
        Envelope => None,
        _ => Some(in_range("n", required("n", flags.n.or(file.n))?, N_RANGE)?),
    };

    let prior = match &flags.prior {
        Some(s) => parse_prior(s)?,
        None => {
            let p = file.prior.clone().unwrap_or(SpikePrior::Rademacher);
            p.validate()
                .map_err(|e| UsageError::new("prior", e.to_string()))?;
            p
        }
    };

    let backend = match &flags.backend {
        Some(s) => parse_named("backend", s)?,
        None => file.backend.unwrap_or_default(),
    };

    let method = match kind {
        LowdegNorm => Some(match &flags.method {
            Some(s) => parse_named("method", s)?,
            None => file.method.unwrap_or(Method::BinomialSum),
        }),
        _ => None,
    };
    if method == Some(Method::BinomialSum) && prior != SpikePrior::Rademacher {
        return Err(UsageError::new(
            "method",
            "binomial_sum needs the rademacher prior",
        ));
    }

    let default_trials = match (kind, method) {
        (Envelope, _) => None,
        (LowdegNorm, Some(Method::MonteCarlo)) => Some(100_000),
        (LowdegNorm, _) => None,
        (Roc, _) => Some(2000),
        (Witness, _) => Some(4000),
        (Diag, _) => Some(100),
    };
    let trials = match default_trials {
        None => None,
        Some(d) => Some(in_range(
            "trials",
            flags.trials.or(file.trials).unwrap_or(d),
            TRIALS_RANGE,
        )?),
    };
    let calib_trials = match kind {
        Roc | Witness => Some(in_range(
            "calib_trials",
            flags
                .calib_trials
                .or(file.calib_trials)
                .or(trials)
                .unwrap_or(0),
            TRIALS_RANGE,
        )?),
        _ => None,
    };

    let statistic_lambda = match kind {
        Roc => Some(open_unit(
            "statistic_lambda",
            flags
                .statistic_lambda
                .or(file.statistic_lambda)
                .unwrap_or(lambda),
        )?),
        _ => None,
    };

    let degree = match kind {
        LowdegNorm => Some(match &flags.degree {
            Some(s) => s
                .parse()
                .map_err(|e: swrl_core::Error| UsageError::new("degree", e.to_string()))?,
            None => file.degree.unwrap_or(Degree::Infinite),
        }),
        _ => None,
    };

    let alpha_grid = match kind {
        Roc | Witness => {
            let default: Vec<f64> = if kind == Roc {
                (1..=9).map(|k| k as f64 / 10.0).collect()
            } else {
                vec![0.05, 0.15, 0.3, 0.5, 0.75]
            };
            let grid = flags
                .alpha_grid
                .clone()
                .or(file.alpha_grid.clone())
                .unwrap_or(default);
            if grid.is_empty() {
                return Err(UsageError::new("alpha_grid", "must not be empty"));
            }
            for a in &grid {
                open_unit("alpha_grid", *a)?;
            }
            Some(grid)
        }
        _ => None,
    };

    let exterior = match kind {
        Envelope => {
            let pair = match &flags.exterior {
                Some(v) if v.len() == 2 => [v[0], v[1]],
                Some(v) => {
                    return Err(UsageError::new(
                        "exterior",
                        format!("expected alpha,beta, got {} values", v.len()),
                    ));
                }
                None => required("exterior", file.exterior)?,
            };
            if !pair.iter().all(|x| (0.0..=1.0).contains(x)) {
                return Err(UsageError::new(
                    "exterior",
                    "coordinates must lie in [0, 1]",
                ));
            }
            Some(RocPoint::new(pair[0], pair[1]))
        }
        _ => None,
    };

    let gamma_u = match kind {
        Envelope => Some(
            flags
                .gamma_u
                .or(file.gamma_u)
                .unwrap_or(DEFAULT_GAMMA_DISCRETIZE),
        ),
        _ => None,
    };
    if let Some(g) = gamma_u {
        if !(g > 0.0 && g.is_finite()) {
            return Err(UsageError::new("gamma_u", format!("{g} must be positive")));
        }
    }
    let gamma_v = match kind {
        Envelope | Witness => Some(open_unit(
            "gamma_v",
            flags
                .gamma_v
                .or(file.gamma_v)
                .unwrap_or(DEFAULT_GAMMA_PERTURB),
        )?),
        _ => None,
    };

    let (choice, source) = match kind {
        Witness => (
            Some(match &flags.choice {
                Some(s) => parse_named("choice", s)?,
                None => file.choice.unwrap_or_default(),
            }),
            Some(match &flags.source {
                Some(s) => parse_named("source", s)?,
                None => file.source.unwrap_or_default(),
            }),
        ),
        _ => (None, None),
    };

    Ok(ExperimentConfig {
        subcommand: kind,
        lambda,
        statistic_lambda,
        n,
        prior,
        trials,
        calib_trials,
        degree,
        method,
        alpha_grid,
        exterior,
        gamma_u,
        gamma_v,
        choice,
        source,
        backend,
        seed,
        out: flags.out.clone().or(file.out.clone()),
    })
}
