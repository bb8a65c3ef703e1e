//! Subcommand pipelines and result formatting.

use serde::Serialize;

use swrl_core::lowdeg::{
    ldr_norm_exact_enum, ldr_norm_exact_rademacher, ldr_norm_limit, ldr_norm_mc, Method,
};
use swrl_core::roc::{envelope_chain, perturb_points, phi_eval, RocPoint, RocPolyline};
use swrl_core::spectral::{
    empirical_roc, predicted_top_eigenvalue, standardized_mean_gap, top_eigenvalue_diag,
    RocExperiment,
};
use swrl_core::witness::{
    build_witness, evaluate_outcomes, live_witness, IndependentOracle, LiveWitness, NestedOracle,
};

use crate::config::{ExperimentConfig, OutcomeSourceKind, SubcommandKind};

/// Rendered results of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub body: String,
    pub extension: &'static str,
}

/// Round-trip exact float formatting for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn json<T: Serialize>(value: &T) -> RunOutput {
    let mut body = serde_json::to_string_pretty(value).expect("plain data serializes");
    body.push('\n');
    RunOutput {
        body,
        extension: "json",
    }
}

/// `φ_λ(α)` where the curve exists, NaN otherwise.
fn phi_or_nan(lambda: f64, alpha: f64) -> f64 {
    if (0.0..1.0).contains(&lambda) {
        phi_eval(lambda, alpha)
    } else {
        f64::NAN
    }
}

pub fn run(cfg: &ExperimentConfig) -> swrl_core::Result<RunOutput> {
    match cfg.subcommand {
        SubcommandKind::Roc => roc(cfg),
        SubcommandKind::LowdegNorm => lowdeg_norm(cfg),
        SubcommandKind::Envelope => envelope(cfg),
        SubcommandKind::Witness => witness(cfg),
        SubcommandKind::Diag => diag(cfg),
    }
}

fn roc(cfg: &ExperimentConfig) -> swrl_core::Result<RunOutput> {
    let exp = RocExperiment {
        prior: cfg.prior.clone(),
        lambda: cfg.lambda,
        statistic_lambda: cfg.statistic_lambda.unwrap_or(cfg.lambda),
        n: cfg.n.unwrap_or_default(),
        calib_trials: cfg.calib_trials.unwrap_or_default(),
        trials: cfg.trials.unwrap_or_default(),
        backend: cfg.backend,
    };
    let roc = empirical_roc(
        &exp,
        cfg.alpha_grid.as_deref().unwrap_or_default(),
        cfg.seed,
    )?;
    let rows: Vec<Vec<String>> = roc
        .points
        .iter()
        .map(|p| {
            vec![
                fmt_f64(p.alpha_target),
                fmt_f64(p.alpha_hat),
                fmt_f64(p.beta_hat),
                fmt_f64(p.se_alpha),
                fmt_f64(p.se_beta),
                fmt_f64(phi_or_nan(cfg.lambda, p.alpha_hat)),
            ]
        })
        .collect();
    Ok(RunOutput {
        body: csv(
            &[
                "alpha_target",
                "alpha_hat",
                "beta_hat",
                "se_alpha",
                "se_beta",
                "phi_lambda_alpha",
            ],
            &rows,
        ),
        extension: "csv",
    })
}

fn lowdeg_norm(cfg: &ExperimentConfig) -> swrl_core::Result<RunOutput> {
    let n = cfg.n.unwrap_or_default();
    let degree = cfg.degree.expect("resolved for lowdeg-norm");
    let est = match cfg.method.expect("resolved for lowdeg-norm") {
        Method::BinomialSum => ldr_norm_exact_rademacher(n, cfg.lambda, degree)?,
        Method::ExactEnum => ldr_norm_exact_enum(&cfg.prior, n, cfg.lambda, degree)?,
        Method::MonteCarlo => ldr_norm_mc(
            &cfg.prior,
            n,
            cfg.lambda,
            degree,
            cfg.trials.unwrap_or_default(),
            cfg.seed,
        )?,
    };
    let limit = if cfg.lambda < 1.0 {
        ldr_norm_limit(cfg.lambda).powi(2)
    } else {
        f64::INFINITY
    };
    let row = vec![
        n.to_string(),
        fmt_f64(cfg.lambda),
        degree.to_string(),
        est.method.to_string(),
        fmt_f64(est.value),
        fmt_f64(est.stderr),
        fmt_f64(limit),
    ];
    Ok(RunOutput {
        body: csv(
            &[
                "n",
                "lambda",
                "D",
                "method",
                "value",
                "stderr",
                "limit_value",
            ],
            &[row],
        ),
        extension: "csv",
    })
}

fn envelope(cfg: &ExperimentConfig) -> swrl_core::Result<RunOutput> {
    let chain = envelope_chain(
        cfg.lambda,
        cfg.exterior.expect("resolved for envelope"),
        cfg.gamma_u.expect("resolved for envelope"),
        cfg.gamma_v.expect("resolved for envelope"),
    )?;
    Ok(json(&chain))
}

#[derive(Debug, Serialize)]
struct WitnessReport {
    lambda: f64,
    n: usize,
    r: usize,
    source: OutcomeSourceKind,
    val_conc_v: f64,
    #[serde(rename = "R_hat")]
    r_hat: f64,
    #[serde(rename = "R_stderr")]
    r_stderr: f64,
    limit: f64,
    monotone_fraction: f64,
    trials_per_arm: usize,
    points_v: Vec<RocPoint>,
}

fn witness(cfg: &ExperimentConfig) -> swrl_core::Result<RunOutput> {
    let n = cfg.n.unwrap_or_default();
    let trials = cfg.trials.unwrap_or_default();
    let alphas = cfg.alpha_grid.clone().unwrap_or_default();
    let gamma = cfg.gamma_v.expect("resolved for witness");
    let choice = cfg.choice.unwrap_or_default();
    let source = cfg.source.unwrap_or_default();
    let (r, points_v, eval) = match source {
        OutcomeSourceKind::Lss => {
            let live = LiveWitness {
                prior: cfg.prior.clone(),
                lambda: cfg.lambda,
                n,
                calib_trials: cfg.calib_trials.unwrap_or(trials),
                trials,
                alphas,
                gamma,
                choice,
                backend: cfg.backend,
            };
            let report = live_witness(&live, cfg.seed)?;
            (report.r, report.points_v, report.evaluation)
        }
        OutcomeSourceKind::Nested | OutcomeSourceKind::Independent => {
            let mut alphas = alphas;
            alphas.sort_by(f64::total_cmp);
            let mut u = vec![RocPoint::new(0.0, 0.0)];
            u.extend(
                alphas
                    .iter()
                    .map(|&a| RocPoint::new(a, phi_eval(cfg.lambda, a))),
            );
            u.push(RocPoint::new(1.0, 1.0));
            let v = perturb_points(&RocPolyline::new(u)?, gamma)?;
            let wfn = build_witness(&v, choice)?;
            let eval = if source == OutcomeSourceKind::Nested {
                evaluate_outcomes(&wfn, &NestedOracle::new(&v), trials, cfg.seed)?
            } else {
                evaluate_outcomes(&wfn, &IndependentOracle::new(&v), trials, cfg.seed)?
            };
            (wfn.r(), v.points().to_vec(), eval)
        }
    };
    Ok(json(&WitnessReport {
        lambda: cfg.lambda,
        n,
        r,
        source,
        val_conc_v: eval.val_conc_v,
        r_hat: eval.ratio.value,
        r_stderr: eval.ratio.stderr,
        limit: ldr_norm_limit(cfg.lambda),
        monotone_fraction: eval.monotone_fraction,
        trials_per_arm: eval.trials_per_arm,
        points_v,
    }))
}

fn diag(cfg: &ExperimentConfig) -> swrl_core::Result<RunOutput> {
    let n = cfg.n.unwrap_or_default();
    let trials = cfg.trials.unwrap_or_default();
    let top = top_eigenvalue_diag(&cfg.prior, cfg.lambda, n, trials, cfg.seed, cfg.backend)?;
    let mut rows = vec![vec![
        "top_eigenvalue".to_string(),
        fmt_f64(cfg.lambda),
        n.to_string(),
        trials.to_string(),
        fmt_f64(top.mean),
        fmt_f64(top.stderr),
        fmt_f64(predicted_top_eigenvalue(cfg.lambda)),
    ]];
    if cfg.lambda > 0.0 && cfg.lambda < 1.0 {
        let gap = standardized_mean_gap(&cfg.prior, cfg.lambda, n, trials, cfg.seed, cfg.backend)?;
        rows.push(vec![
            "standardized_gap".to_string(),
            fmt_f64(cfg.lambda),
            n.to_string(),
            trials.to_string(),
            fmt_f64(gap.gap),
            fmt_f64(gap.stderr),
            fmt_f64(gap.predicted),
        ]);
    }
    Ok(RunOutput {
        body: csv(
            &[
                "quantity",
                "lambda",
                "n",
                "trials",
                "estimate",
                "stderr",
                "predicted",
            ],
            &rows,
        ),
        extension: "csv",
    })
}
