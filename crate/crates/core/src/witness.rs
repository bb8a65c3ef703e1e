//! Witness functions built from a battery of tests.
//!
//! Tests `t₀, …, t_r` achieve the points `v₀, …, v_r` of a polyline in
//! concave position, with `t₀` always `q` and `t_r` always `p`. A witness `f`
//! maps the outcome vector `s` to a value in the interval
//! `[Σσᵢℓᵢ, √(Σσᵢℓᵢ²)]`, where `σᵢ` marks the `q → p` (`+1`) and `p → q`
//! (`−1`) transitions of `s`. Then `E_P[f] / √E_Q[f²] → val(conc(v))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowdeg::{ratio_estimate, NormEstimate};
use crate::prior::SpikePrior;
use crate::roc::{perturb_points, phi_eval, RocPoint, RocPolyline};
use crate::spectral::{calibrate_null, make_test, sample_lss, Backend, CalibratedTest, Threshold};
use crate::stream::{map_trials, TrialRng};

pub use crate::spectral::Outcome;

/// Largest `r` for which a witness is built.
pub const MAX_TESTS: usize = 20;
/// Largest `r` for which the whole table is stored up front.
pub const MATERIALIZE_LIMIT: usize = 12;

/// Outcomes `s` and their transition signs `σ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignPattern {
    pub s: Vec<Outcome>,
    pub sigma: Vec<i8>,
}

impl SignPattern {
    /// True iff `s = (q, …, q, p, …, p)`.
    pub fn is_monotone(&self) -> bool {
        self.sigma.iter().filter(|x| **x != 0).count() == 1
    }
}

/// `σᵢ = +1` for `(sᵢ, sᵢ₊₁) = (q, p)`, `−1` for `(p, q)`, else `0`.
pub fn sign_pattern(s: &[Outcome]) -> Result<SignPattern> {
    if s.len() < 2 {
        return Err(Error::MalformedOutcomes(format!(
            "need at least 2 outcomes, got {}",
            s.len()
        )));
    }
    if s[0] != Outcome::Q {
        return Err(Error::MalformedOutcomes("first outcome must be q".into()));
    }
    if s[s.len() - 1] != Outcome::P {
        return Err(Error::MalformedOutcomes("last outcome must be p".into()));
    }
    let sigma = s
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Outcome::Q, Outcome::P) => 1,
            (Outcome::P, Outcome::Q) => -1,
            _ => 0,
        })
        .collect();
    Ok(SignPattern {
        s: s.to_vec(),
        sigma,
    })
}

/// `(Σσᵢℓᵢ, √(Σσᵢℓᵢ²))`.
///
/// Each `+1` is paired with the `−1` that follows it, so every partial term
/// is a nonnegative difference of decreasing slopes.
pub fn altsum_interval(sigma: &[i8], slopes: &[f64]) -> (f64, f64) {
    debug_assert_eq!(sigma.len(), slopes.len());
    let nonzero: Vec<(i8, f64)> = sigma
        .iter()
        .zip(slopes)
        .filter(|(s, _)| **s != 0)
        .map(|(s, l)| (*s, *l))
        .collect();
    let (mut lo, mut hi_sq) = (0.0, 0.0);
    for pair in nonzero.chunks(2) {
        match pair {
            [(1, a), (-1, b)] => {
                lo += a - b;
                hi_sq += a * a - b * b;
            }
            [(s, a)] => {
                let s = f64::from(*s);
                lo += s * a;
                hi_sq += s * a * a;
            }
            _ => {
                // not alternating: plain sums
                for (s, l) in pair {
                    lo += f64::from(*s) * l;
                    hi_sq += f64::from(*s) * l * l;
                }
            }
        }
    }
    let hi = hi_sq.max(0.0).sqrt();
    (lo, hi.max(lo))
}

/// Which point of the admissible interval `f` takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessChoice {
    #[default]
    Lower,
    Upper,
    Midpoint,
}

/// Lookup table `s ↦ f(s)` over patterns with `s₀ = q`, `s_r = p`.
///
/// Patterns are indexed by the bitmask of the interior outcomes
/// (`bit i−1` set iff `sᵢ = p`).
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessFn {
    polyline: RocPolyline,
    choice: WitnessChoice,
    table: Option<Vec<f64>>,
}

fn mask_to_outcomes(mask: u64, r: usize) -> Vec<Outcome> {
    let mut s = Vec::with_capacity(r + 1);
    s.push(Outcome::Q);
    for i in 1..r {
        s.push(if mask >> (i - 1) & 1 == 1 {
            Outcome::P
        } else {
            Outcome::Q
        });
    }
    s.push(Outcome::P);
    s
}

impl WitnessFn {
    pub fn slopes(&self) -> &[f64] {
        self.polyline.slopes()
    }

    pub fn polyline(&self) -> &RocPolyline {
        &self.polyline
    }

    pub fn choice(&self) -> WitnessChoice {
        self.choice
    }

    /// Number of segments `r`; the battery has `r + 1` tests.
    pub fn r(&self) -> usize {
        self.polyline.segments()
    }

    fn compute(&self, sigma: &[i8]) -> f64 {
        let (lo, hi) = altsum_interval(sigma, self.slopes());
        match self.choice {
            WitnessChoice::Lower => lo,
            WitnessChoice::Upper => hi,
            WitnessChoice::Midpoint => 0.5 * (lo + hi),
        }
    }

    /// `f(s)`.
    pub fn value(&self, s: &[Outcome]) -> Result<f64> {
        if s.len() != self.r() + 1 {
            return Err(Error::MalformedOutcomes(format!(
                "expected {} outcomes, got {}",
                self.r() + 1,
                s.len()
            )));
        }
        let pattern = sign_pattern(s)?;
        if let Some(table) = &self.table {
            let mask = s[1..s.len() - 1]
                .iter()
                .enumerate()
                .fold(0usize, |m, (i, o)| m | (usize::from(*o == Outcome::P) << i));
            return Ok(table[mask]);
        }
        Ok(self.compute(&pattern.sigma))
    }

    /// All `2^{r−1}` entries as `(s, f(s))`.
    pub fn entries(&self) -> Vec<(Vec<Outcome>, f64)> {
        let r = self.r();
        (0..1u64 << (r - 1))
            .map(|mask| {
                let s = mask_to_outcomes(mask, r);
                let f = self.value(&s).expect("admissible by construction");
                (s, f)
            })
            .collect()
    }
}

/// Builds the table from the slopes of `v`.
pub fn build_witness(v: &RocPolyline, choice: WitnessChoice) -> Result<WitnessFn> {
    let r = v.segments();
    if r > MAX_TESTS {
        return Err(Error::TooManyTests { r });
    }
    let mut w = WitnessFn {
        polyline: v.clone(),
        choice,
        table: None,
    };
    if r <= MATERIALIZE_LIMIT {
        let table = (0..1u64 << (r - 1))
            .map(|mask| {
                let s = mask_to_outcomes(mask, r);
                w.compute(&sign_pattern(&s).expect("admissible by construction").sigma)
            })
            .collect();
        w.table = Some(table);
    }
    Ok(w)
}

/// Which hypothesis generates the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Null,
    Planted,
}

/// Produces one outcome vector `(t₀(Y), …, t_r(Y))` per call.
pub trait OutcomeSource: Sync {
    fn tests(&self) -> usize;

    fn draw(&self, arm: Arm, rng: &mut TrialRng) -> Result<Vec<Outcome>>;
}

/// Idealized tests driven by one uniform `U`: `tᵢ = p` iff `U < aᵢ` under
/// `Q` and iff `U < bᵢ` under `P`. Marginals are exact and the rejection
/// regions are nested.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedOracle {
    points: Vec<RocPoint>,
}

impl NestedOracle {
    pub fn new(v: &RocPolyline) -> Self {
        NestedOracle {
            points: v.points().to_vec(),
        }
    }
}

impl OutcomeSource for NestedOracle {
    fn tests(&self) -> usize {
        self.points.len()
    }

    fn draw(&self, arm: Arm, rng: &mut TrialRng) -> Result<Vec<Outcome>> {
        let u: f64 = rng.random();
        Ok(self
            .points
            .iter()
            .map(|p| {
                let cut = if arm == Arm::Null { p.alpha } else { p.beta };
                if u < cut {
                    Outcome::P
                } else {
                    Outcome::Q
                }
            })
            .collect())
    }
}

/// Independent coin flips with the same marginals; produces non-monotone
/// patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentOracle {
    points: Vec<RocPoint>,
}

impl IndependentOracle {
    pub fn new(v: &RocPolyline) -> Self {
        IndependentOracle {
            points: v.points().to_vec(),
        }
    }
}

impl OutcomeSource for IndependentOracle {
    fn tests(&self) -> usize {
        self.points.len()
    }

    fn draw(&self, arm: Arm, rng: &mut TrialRng) -> Result<Vec<Outcome>> {
        Ok(self
            .points
            .iter()
            .map(|p| {
                let cut = if arm == Arm::Null { p.alpha } else { p.beta };
                if rng.random::<f64>() < cut {
                    Outcome::P
                } else {
                    Outcome::Q
                }
            })
            .collect())
    }
}

/// Calibrated LSS threshold tests run on spiked Wigner draws.
#[derive(Debug, Clone, PartialEq)]
pub struct LssBattery {
    pub tests: Vec<CalibratedTest>,
    pub prior: SpikePrior,
    pub lambda: f64,
    pub n: usize,
    pub backend: Backend,
}

impl LssBattery {
    pub fn new(
        tests: Vec<CalibratedTest>,
        prior: SpikePrior,
        lambda: f64,
        n: usize,
        backend: Backend,
    ) -> Result<Self> {
        if tests.len() < 2 {
            return Err(Error::InvalidArgument(
                "a battery needs at least two tests".into(),
            ));
        }
        if tests[0].threshold != Threshold::AlwaysQ
            || tests[tests.len() - 1].threshold != Threshold::AlwaysP
        {
            return Err(Error::InvalidArgument(
                "first test must always output q and last must always output p".into(),
            ));
        }
        if let Some(t) = tests.iter().find(|t| t.n != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: t.n,
            });
        }
        let stat_lambda = tests[0].lambda;
        if tests.iter().any(|t| t.lambda != stat_lambda) {
            return Err(Error::InvalidArgument(
                "all tests must share one statistic".into(),
            ));
        }
        Ok(LssBattery {
            tests,
            prior,
            lambda,
            n,
            backend,
        })
    }
}

impl OutcomeSource for LssBattery {
    fn tests(&self) -> usize {
        self.tests.len()
    }

    fn draw(&self, arm: Arm, rng: &mut TrialRng) -> Result<Vec<Outcome>> {
        let model_lambda = if arm == Arm::Null { 0.0 } else { self.lambda };
        let h = sample_lss(
            &self.prior,
            model_lambda,
            self.tests[0].lambda,
            self.n,
            self.backend,
            rng,
        )?;
        Ok(self.tests.iter().map(|t| t.decide(h.value)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessEvaluation {
    /// `R̂ = mean_P(f) / √mean_Q(f²)`.
    pub ratio: NormEstimate,
    pub val_conc_v: f64,
    pub mean_f_planted: f64,
    pub mean_f2_null: f64,
    /// Share of trials, both arms, whose outcome vector was monotone.
    pub monotone_fraction: f64,
    pub trials_per_arm: usize,
}

/// Runs `trials` draws per arm through `source` and the witness.
pub fn evaluate_outcomes<S: OutcomeSource + ?Sized>(
    wfn: &WitnessFn,
    source: &S,
    trials: usize,
    seed: u64,
) -> Result<WitnessEvaluation> {
    if source.tests() != wfn.r() + 1 {
        return Err(Error::InvalidArgument(format!(
            "witness expects {} tests, source has {}",
            wfn.r() + 1,
            source.tests()
        )));
    }
    if trials == 0 {
        return Err(Error::EmptySample);
    }
    let run = |arm: Arm, tag: &str| -> Result<Vec<(f64, bool)>> {
        map_trials(seed, tag, trials, |_, rng| -> Result<(f64, bool)> {
            let s = source.draw(arm, rng)?;
            let monotone = sign_pattern(&s)?.is_monotone();
            Ok((wfn.value(&s)?, monotone))
        })
        .into_iter()
        .collect()
    };
    let null = run(Arm::Null, "witness/null")?;
    let planted = run(Arm::Planted, "witness/planted")?;
    let f_q: Vec<f64> = null.iter().map(|x| x.0).collect();
    let f_p: Vec<f64> = planted.iter().map(|x| x.0).collect();
    let monotone = null.iter().chain(&planted).filter(|x| x.1).count();
    let ratio = ratio_estimate(&f_p, &f_q)?;
    Ok(WitnessEvaluation {
        ratio,
        val_conc_v: wfn.polyline().val(),
        mean_f_planted: f_p.iter().sum::<f64>() / trials as f64,
        mean_f2_null: f_q.iter().map(|f| f * f).sum::<f64>() / trials as f64,
        monotone_fraction: monotone as f64 / (2 * trials) as f64,
        trials_per_arm: trials,
    })
}

/// Evaluates the witness on a battery of calibrated LSS tests.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_witness(
    wfn: &WitnessFn,
    tests: &[CalibratedTest],
    prior: &SpikePrior,
    lambda: f64,
    n: usize,
    trials: usize,
    backend: Backend,
    seed: u64,
) -> Result<WitnessEvaluation> {
    let battery = LssBattery::new(tests.to_vec(), prior.clone(), lambda, n, backend)?;
    evaluate_outcomes(wfn, &battery, trials, seed)
}

/// Settings for the end-to-end LSS witness experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveWitness {
    pub prior: SpikePrior,
    pub lambda: f64,
    pub n: usize,
    pub calib_trials: usize,
    pub trials: usize,
    /// Interior sizes; the polyline gets `r = alphas.len() + 1` segments.
    pub alphas: Vec<f64>,
    pub gamma: f64,
    pub choice: WitnessChoice,
    pub backend: Backend,
}

impl LiveWitness {
    /// Five interior sizes (`r = 6`) and `γ = 0.02`.
    pub fn new(lambda: f64, n: usize, trials: usize) -> Self {
        LiveWitness {
            prior: SpikePrior::Rademacher,
            lambda,
            n,
            calib_trials: trials,
            trials,
            alphas: vec![0.05, 0.15, 0.3, 0.5, 0.75],
            gamma: crate::roc::DEFAULT_GAMMA_PERTURB,
            choice: WitnessChoice::Lower,
            backend: Backend::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiveWitnessReport {
    pub lambda: f64,
    pub n: usize,
    pub r: usize,
    pub points_v: Vec<RocPoint>,
    pub evaluation: WitnessEvaluation,
}

/// Places `u` on `φ_λ` at the requested sizes, lowers it to `v`, calibrates
/// one LSS test per size and evaluates the resulting witness.
pub fn live_witness(cfg: &LiveWitness, seed: u64) -> Result<LiveWitnessReport> {
    if !(cfg.lambda > 0.0 && cfg.lambda < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {} must lie in (0, 1)",
            cfg.lambda
        )));
    }
    let mut alphas = cfg.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    let mut u = vec![RocPoint::new(0.0, 0.0)];
    u.extend(
        alphas
            .iter()
            .map(|&a| RocPoint::new(a, phi_eval(cfg.lambda, a))),
    );
    u.push(RocPoint::new(1.0, 1.0));
    let u = RocPolyline::new(u)?;
    let v = perturb_points(&u, cfg.gamma)?;
    let wfn = build_witness(&v, cfg.choice)?;
    let calib = calibrate_null(cfg.lambda, cfg.n, cfg.calib_trials, seed, cfg.backend)?;
    let tests = v
        .points()
        .iter()
        .map(|p| make_test(&calib, p.alpha))
        .collect::<Result<Vec<_>>>()?;
    let evaluation = evaluate_witness(
        &wfn,
        &tests,
        &cfg.prior,
        cfg.lambda,
        cfg.n,
        cfg.trials,
        cfg.backend,
        seed,
    )?;
    Ok(LiveWitnessReport {
        lambda: cfg.lambda,
        n: cfg.n,
        r: wfn.r(),
        points_v: v.points().to_vec(),
        evaluation,
    })
}
