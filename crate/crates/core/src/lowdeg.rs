//! Norms of the (low-degree) likelihood ratio through the overlap formula
//! `‖L^{≤D}‖² = E exp^{≤D}(A)`, `A = λ²n⟨x,x′⟩² / (2‖x‖²‖x′‖²)`, and the
//! ratio functional `R(f) = E_P[f] / √E_Q[f²]`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::prior::{sample_vector, SpikePrior};
use crate::stream::{block_sizes, map_trials};

pub const JACKKNIFE_BLOCKS: usize = 100;
pub const MIN_MC_TRIALS: usize = 1000;
/// Largest `n` accepted by the binomial sum.
pub const MAX_BINOMIAL_N: usize = 1_000_000;
/// Largest number of `(x, x′)` pairs the enumeration oracle will visit.
pub const MAX_ENUM_PAIRS: u64 = 1 << 26;

/// Truncation degree of the Taylor expansion of `exp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Degree {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::Finite(d) => write!(f, "{d}"),
            Degree::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Degree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Degree::Infinite),
            other => other.parse::<u32>().map(Degree::Finite).map_err(|_| {
                Error::InvalidArgument(format!(
                    "degree {other:?} is neither an integer nor \"inf\""
                ))
            }),
        }
    }
}

impl From<Degree> for String {
    fn from(d: Degree) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for Degree {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactEnum,
    BinomialSum,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactEnum => "exact_enum",
            Method::BinomialSum => "binomial_sum",
            Method::MonteCarlo => "monte_carlo",
        })
    }
}

/// A point estimate with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub degree: Option<Degree>,
    pub trials: usize,
}

/// `exp^{≤D}(z) = Σ_{d≤D} zᵈ/d!`, by the running-term recurrence.
///
/// The partial sums are accumulated left to right, so the result is exactly
/// nondecreasing in `D`; it is capped at `exp(z)`.
pub fn exp_trunc(z: f64, degree: Degree) -> f64 {
    let full = z.exp();
    let Degree::Finite(max_d) = degree else {
        return full;
    };
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for d in 0..max_d {
        term *= z / f64::from(d + 1);
        let next = sum + term;
        // past the mode the remaining terms no longer change the sum
        if next == sum && f64::from(d) > z {
            break;
        }
        sum = next;
    }
    sum.min(full)
}

/// `log exp^{≤D}(z)`, finite for any `z ≥ 0`.
pub fn ln_exp_trunc(z: f64, degree: Degree) -> f64 {
    let Degree::Finite(max_d) = degree else {
        return z;
    };
    if z == 0.0 {
        return 0.0;
    }
    let ln_z = z.ln();
    // largest term sits at d = min(D, ⌊z⌋)
    let mode = (z.floor() as u64).min(u64::from(max_d)) as u32;
    let mut ln_term = 0.0f64;
    let mut terms = Vec::with_capacity(max_d.min(100_000) as usize + 1);
    terms.push(0.0);
    for d in 0..max_d {
        ln_term += ln_z - f64::from(d + 1).ln();
        terms.push(ln_term);
        if d > mode && ln_term < terms[mode as usize] - 745.0 {
            break;
        }
    }
    let peak = terms[mode as usize];
    let s: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
    (peak + s.ln()).min(z)
}

/// `A` for a given pair of spikes; `0` when either is the zero vector.
pub fn overlap_statistic(x: &[f64], x_prime: &[f64], lambda: f64) -> f64 {
    let n = x.len() as f64;
    let nx: f64 = x.iter().map(|v| v * v).sum();
    let ny: f64 = x_prime.iter().map(|v| v * v).sum();
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    let dot: f64 = x.iter().zip(x_prime).map(|(a, b)| a * b).sum();
    let cap = lambda * lambda * n / 2.0;
    (cap * dot * dot / (nx * ny)).min(cap)
}

/// One draw of `A` with `x`, `x′` i.i.d. from the prior (in that order).
pub fn sample_overlap_statistic<R: Rng + ?Sized>(
    prior: &SpikePrior,
    n: usize,
    lambda: f64,
    rng: &mut R,
) -> f64 {
    let x = sample_vector(prior, n, rng);
    let x_prime = sample_vector(prior, n, rng);
    overlap_statistic(&x, &x_prime, lambda)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "lambda = {lambda} must lie in [0, 1)"
        )))
    }
}

/// Draws `count` independent values of `A`.
pub fn overlap_draws(
    prior: &SpikePrior,
    n: usize,
    lambda: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    prior.validate()?;
    check_lambda(lambda)?;
    Ok(map_trials(seed, "lowdeg/overlap", count, |_, rng| {
        sample_overlap_statistic(prior, n, lambda, rng)
    }))
}

/// Sample mean with a block-jackknife standard error.
pub fn jackknife_mean(values: &[f64], blocks: usize) -> (f64, f64) {
    let n = values.len();
    let total: f64 = values.iter().sum();
    let mean = total / n as f64;
    let sizes = block_sizes(n, blocks);
    if sizes.len() < 2 {
        return (mean, 0.0);
    }
    let mut start = 0;
    let loo: Vec<f64> = sizes
        .iter()
        .map(|&len| {
            let block: f64 = values[start..start + len].iter().sum();
            start += len;
            (total - block) / (n - len) as f64
        })
        .collect();
    let b = loo.len() as f64;
    let centre = loo.iter().sum::<f64>() / b;
    let var = (b - 1.0) / b * loo.iter().map(|t| (t - centre).powi(2)).sum::<f64>();
    (mean, var.sqrt())
}

/// Monte Carlo `E exp^{≤D}(A)` with a 100-block jackknife standard error.
pub fn ldr_norm_mc(
    prior: &SpikePrior,
    n: usize,
    lambda: f64,
    degree: Degree,
    trials: usize,
    seed: u64,
) -> Result<NormEstimate> {
    if trials < MIN_MC_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_MC_TRIALS} trials, got {trials}"
        )));
    }
    let values: Vec<f64> = overlap_draws(prior, n, lambda, trials, seed)?
        .into_iter()
        .map(|a| exp_trunc(a, degree))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    let (value, stderr) = jackknife_mean(&values, JACKKNIFE_BLOCKS);
    Ok(NormEstimate {
        value,
        stderr,
        method: Method::MonteCarlo,
        degree: Some(degree),
        trials,
    })
}

/// `ln C(n, k) − n ln 2` for all `k`, normalized to sum to one in the
/// linear domain.
fn ln_binomial_half_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0f64; n + 1];
    let mid = n / 2;
    // unnormalized, relative to the central coefficient
    for k in mid..n {
        w[k + 1] = w[k] + ((n - k) as f64).ln() - ((k + 1) as f64).ln();
    }
    for k in (1..=mid).rev() {
        w[k - 1] = w[k] + (k as f64).ln() - ((n - k + 1) as f64).ln();
    }
    let s: f64 = w.iter().map(|v| v.exp()).sum();
    let ln_s = s.ln();
    w.iter_mut().for_each(|v| *v -= ln_s);
    w
}

/// Exact `‖L^{≤D}‖²` for the Rademacher prior, summing over
/// `k ~ Binomial(n, ½)` with `A = λ²(n − 2k)²/(2n)`.
///
/// The sum runs in the log domain, so it stays finite for every `λ < 1`;
/// above the threshold the norm grows like `e^{cn}` and may overflow.
pub fn ldr_norm_exact_rademacher(n: usize, lambda: f64, degree: Degree) -> Result<NormEstimate> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} must be >= 0"
        )));
    }
    if n == 0 || n > MAX_BINOMIAL_N {
        return Err(Error::InvalidArgument(format!(
            "n = {n} outside [1, {MAX_BINOMIAL_N}]"
        )));
    }
    let ln_w = ln_binomial_half_weights(n);
    let nf = n as f64;
    let a_k = |k: usize| {
        let c = nf - 2.0 * k as f64;
        lambda * lambda * c * c / (2.0 * nf)
    };
    // fixed reference scale, independent of D, keeps the sum monotone in D
    let reference = (0..=n)
        .map(|k| ln_w[k] + a_k(k))
        .fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = (0..=n)
        .map(|k| (ln_w[k] + ln_exp_trunc(a_k(k), degree) - reference).exp())
        .sum();
    let value = (reference + scaled.ln()).exp();
    if !value.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(NormEstimate {
        value,
        stderr: 0.0,
        method: Method::BinomialSum,
        degree: Some(degree),
        trials: 0,
    })
}

/// Exact `‖L^{≤D}‖²` for any finite prior by visiting every pair `(x, x′)`.
pub fn ldr_norm_exact_enum(
    prior: &SpikePrior,
    n: usize,
    lambda: f64,
    degree: Degree,
) -> Result<NormEstimate> {
    prior.validate()?;
    check_lambda(lambda)?;
    let atoms: Vec<(f64, f64)> = prior
        .atoms()
        .into_iter()
        .filter(|(_, p)| *p > 0.0)
        .collect();
    let m = atoms.len() as u64;
    let vectors = m
        .checked_pow(n as u32)
        .filter(|v| v.checked_mul(*v).is_some_and(|p| p <= MAX_ENUM_PAIRS));
    let Some(count) = vectors else {
        return Err(Error::InvalidArgument(format!(
            "enumeration of {m}^{n} vectors squared exceeds {MAX_ENUM_PAIRS} pairs"
        )));
    };
    let mut xs: Vec<(Vec<f64>, f64)> = Vec::with_capacity(count as usize);
    for code in 0..count {
        let mut c = code;
        let mut v = Vec::with_capacity(n);
        let mut p = 1.0;
        for _ in 0..n {
            let (value, prob) = atoms[(c % m) as usize];
            v.push(value);
            p *= prob;
            c /= m;
        }
        xs.push((v, p));
    }
    // Neumaier summation: up to 2²⁶ terms of similar size
    let (mut value, mut carry) = (0.0f64, 0.0f64);
    for (x, px) in &xs {
        for (y, py) in &xs {
            let term = px * py * exp_trunc(overlap_statistic(x, y, lambda), degree);
            let t = value + term;
            carry += if value.abs() >= term.abs() {
                (value - t) + term
            } else {
                (term - t) + value
            };
            value = t;
        }
    }
    value += carry;
    if !value.is_finite() {
        return Err(Error::Overflow);
    }
    Ok(NormEstimate {
        value,
        stderr: 0.0,
        method: Method::ExactEnum,
        degree: Some(degree),
        trials: 0,
    })
}

/// `lim ‖L^{≤D}‖ = (1 − λ²)^{−1/4}` for `D = ω(1)`, `D = o(n / log n)`.
pub fn ldr_norm_limit(lambda: f64) -> f64 {
    (1.0 - lambda * lambda).powf(-0.25)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Plug-in `R = mean(f_P) / √mean(f_Q²)` with a delta-method standard error.
pub fn ratio_estimate(f_p: &[f64], f_q: &[f64]) -> Result<NormEstimate> {
    if f_p.is_empty() || f_q.is_empty() {
        return Err(Error::EmptySample);
    }
    let squares: Vec<f64> = f_q.iter().map(|f| f * f).collect();
    let (a, var_a) = mean_var(f_p);
    let (b, var_b) = mean_var(&squares);
    if !(b > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    let se_a2 = var_a / f_p.len() as f64;
    let se_b2 = var_b / f_q.len() as f64;
    let stderr = (se_a2 / b + a * a * se_b2 / (4.0 * b * b * b)).sqrt();
    Ok(NormEstimate {
        value: a / b.sqrt(),
        stderr,
        method: Method::MonteCarlo,
        degree: None,
        trials: f_p.len() + f_q.len(),
    })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// CDF of `λ²χ²₁/2`, the limit law of `A`.
pub fn overlap_limit_cdf(lambda: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let y = 2.0 * a / (lambda * lambda);
    1.0 - 2.0 * normal::sf(y.sqrt())
}

/// Exponential tail fit `log P{|⟨x,x′⟩|/(‖x‖‖x′‖) ≥ u} ≈ log C − rate·nu²/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub n: usize,
    pub rate: f64,
    pub log_c: f64,
    /// `(u, log P)` pairs the fit was computed from.
    pub points: Vec<(f64, f64)>,
}

/// Fits the overlap tail for the Rademacher prior from exact binomial
/// probabilities (`‖x‖² = n`, so the cosine is `(n − 2k)/n`).
pub fn rademacher_overlap_tail(n: usize, us: &[f64]) -> Result<TailFit> {
    if n == 0 || n > MAX_BINOMIAL_N {
        return Err(Error::InvalidArgument(format!(
            "n = {n} outside [1, {MAX_BINOMIAL_N}]"
        )));
    }
    if us.len() < 2 {
        return Err(Error::InvalidArgument("need at least two u values".into()));
    }
    let ln_w = ln_binomial_half_weights(n);
    let nf = n as f64;
    let points: Vec<(f64, f64)> = us
        .iter()
        .map(|&u| {
            let terms: Vec<f64> = (0..=n)
                .filter(|&k| (nf - 2.0 * k as f64).abs() >= u * nf)
                .map(|k| ln_w[k])
                .collect();
            let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ln_p = peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln();
            (u, ln_p)
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|(u, _)| nf * u * u / 2.0).collect();
    let ys: Vec<f64> = points.iter().map(|(_, l)| *l).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(TailFit {
        n,
        rate: -slope,
        log_c: my - slope * mx,
        points,
    })
}
