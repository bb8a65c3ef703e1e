//! Eigenvalues, the LSS statistic, calibrated threshold tests and empirical
//! ROC estimation.

mod tridiag;

pub use tridiag::{sample_goe_tridiagonal, Tridiagonal};

use faer::{Mat, Side};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_spiked_parts, SymMatrix};
use crate::prior::{sample_vector, SpikePrior};
use crate::roc::lss_mu;
use crate::stream::{map_trials, TrialRng};

/// Log-argument floor for `h_λ`.
pub const CLIP_EPS: f64 = 1e-12;

/// Minimum number of null draws behind a calibration.
pub const MIN_CALIB_TRIALS: usize = 100;

/// Eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts `values` descending.
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Spectrum { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn top(&self) -> f64 {
        self.values[0]
    }
}

/// Full spectrum of a dense symmetric matrix.
pub fn eigenvalues(y: &SymMatrix) -> Result<Spectrum> {
    let n = y.dim();
    if n == 0 {
        return Ok(Spectrum { values: vec![] });
    }
    if y.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| y.get(i, j));
    let values = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::ConvergenceFailure)?;
    Ok(Spectrum::from_values(values))
}

/// `Σ h_λ(μᵢ)` together with the number of clipped terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LssValue {
    pub value: f64,
    pub clip_count: usize,
}

#[inline]
fn h_term(lambda: f64, mu: f64) -> (f64, bool) {
    let arg = 1.0 - lambda * mu + lambda * lambda;
    if arg <= CLIP_EPS {
        (-CLIP_EPS.ln(), true)
    } else {
        (-arg.ln(), false)
    }
}

/// The linear spectral statistic with `h_λ(μ) = −log(1 − λμ + λ²)`.
pub fn lss_statistic(spec: &Spectrum, lambda: f64) -> LssValue {
    let mut value = 0.0;
    let mut clip_count = 0;
    for &mu in spec.values() {
        let (h, clipped) = h_term(lambda, mu);
        value += h;
        clip_count += usize::from(clipped);
    }
    LssValue { value, clip_count }
}

/// Same statistic on a tridiagonal matrix, through one LDLᵀ factorization of
/// `σI − T` with `σ = λ + 1/λ`. Falls back to the full spectrum when an
/// eigenvalue is close enough to `σ` to be clipped.
pub fn lss_statistic_tridiagonal(t: &Tridiagonal, lambda: f64) -> Result<LssValue> {
    let sigma = lambda + 1.0 / lambda;
    if t.count_above(sigma - CLIP_EPS / lambda) == 0 {
        if let Some(log_det) = t.log_det_shifted(sigma) {
            let value = -(t.dim() as f64) * lambda.ln() - log_det;
            return Ok(LssValue {
                value,
                clip_count: 0,
            });
        }
    }
    Ok(lss_statistic(
        &Spectrum::from_values(t.eigenvalues()?),
        lambda,
    ))
}

fn check_unit_interval(lambda: f64, what: &str) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} = {lambda} must lie in (0, 1)"
        )))
    }
}

/// How Monte Carlo draws produce spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Sample the full `n × n` matrix and solve it densely.
    Dense,
    /// Sample the equivalent tridiagonal matrix directly.
    #[default]
    Tridiagonal,
}

/// Draws one observation under `P_λ` (or `P₀` when `model_lambda = 0`) and
/// returns its LSS statistic at `statistic_lambda`.
pub fn sample_lss<R: Rng + ?Sized>(
    prior: &SpikePrior,
    model_lambda: f64,
    statistic_lambda: f64,
    n: usize,
    backend: Backend,
    rng: &mut R,
) -> Result<LssValue> {
    check_unit_interval(statistic_lambda, "statistic lambda")?;
    match backend {
        Backend::Dense => {
            let (sample, _) = sample_spiked_parts(prior, model_lambda, n, rng)?;
            Ok(lss_statistic(
                &eigenvalues(sample.observation())?,
                statistic_lambda,
            ))
        }
        Backend::Tridiagonal => {
            let t = sample_tridiagonal_spiked(prior, model_lambda, n, rng)?;
            lss_statistic_tridiagonal(&t, statistic_lambda)
        }
    }
}

/// Tridiagonal analogue of `sample_spiked`: same draw order (spike first,
/// then noise), spike placed on `e₁`.
pub fn sample_tridiagonal_spiked<R: Rng + ?Sized>(
    prior: &SpikePrior,
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<Tridiagonal> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} must be >= 0"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    prior.validate()?;
    let nonzero = lambda > 0.0 && sample_vector(prior, n, rng).iter().any(|v| *v != 0.0);
    let mut t = sample_goe_tridiagonal(n, rng);
    if nonzero {
        t.add_corner(lambda);
    }
    Ok(t)
}

/// Standardized null distribution of the LSS statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct NullCalibration {
    pub lambda: f64,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub trials: usize,
    pub clip_count: usize,
    /// `(H − mean)/sd` over the calibration draws, ascending.
    pub standardized: Vec<f64>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample sd of the statistic over `trials` GOE draws.
pub fn calibrate_null(
    lambda: f64,
    n: usize,
    trials: usize,
    seed: u64,
    backend: Backend,
) -> Result<NullCalibration> {
    check_unit_interval(lambda, "lambda")?;
    if trials < MIN_CALIB_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least {MIN_CALIB_TRIALS} trials, got {trials}"
        )));
    }
    let draws = map_trials(seed, "calibrate", trials, |_, rng| {
        sample_lss(&SpikePrior::Rademacher, 0.0, lambda, n, backend, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = draws.iter().map(|d| d.value).collect();
    let clip_count = draws.iter().map(|d| d.clip_count).sum();
    let (mean, sd) = mean_sd(&values);
    if !(sd > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    let mut standardized: Vec<f64> = values.iter().map(|h| (h - mean) / sd).collect();
    standardized.sort_by(f64::total_cmp);
    Ok(NullCalibration {
        lambda,
        n,
        mean,
        sd,
        trials,
        clip_count,
        standardized,
    })
}

/// Test output: `P` rejects the null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    P,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    AlwaysQ,
    AlwaysP,
    /// Output `P` iff the standardized statistic is `≥` this value.
    Finite(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedTest {
    pub lambda: f64,
    pub n: usize,
    pub threshold: Threshold,
    pub null_mean: f64,
    pub null_sd: f64,
    pub calib_trials: usize,
    pub target_alpha: f64,
}

/// Threshold test whose null rejection count on the calibration sample is
/// `round(α·N)`. The cut sits halfway between adjacent order statistics.
pub fn make_test(calib: &NullCalibration, target_alpha: f64) -> Result<CalibratedTest> {
    if !(0.0..=1.0).contains(&target_alpha) {
        return Err(Error::InvalidArgument(format!(
            "target alpha {target_alpha} outside [0, 1]"
        )));
    }
    let z = &calib.standardized;
    let count = z.len();
    let threshold = if target_alpha == 0.0 {
        Threshold::AlwaysQ
    } else if target_alpha == 1.0 {
        Threshold::AlwaysP
    } else {
        let m = ((target_alpha * count as f64).round() as usize).min(count);
        if m == 0 {
            Threshold::Finite(z[count - 1] + 1.0)
        } else if m == count {
            Threshold::Finite(z[0] - 1.0)
        } else {
            Threshold::Finite(0.5 * (z[count - m - 1] + z[count - m]))
        }
    };
    Ok(CalibratedTest {
        lambda: calib.lambda,
        n: calib.n,
        threshold,
        null_mean: calib.mean,
        null_sd: calib.sd,
        calib_trials: calib.trials,
        target_alpha,
    })
}

impl CalibratedTest {
    /// Decision from an already computed raw statistic `H`.
    pub fn decide(&self, statistic: f64) -> Outcome {
        match self.threshold {
            Threshold::AlwaysQ => Outcome::Q,
            Threshold::AlwaysP => Outcome::P,
            Threshold::Finite(tau) => {
                if (statistic - self.null_mean) / self.null_sd >= tau {
                    Outcome::P
                } else {
                    Outcome::Q
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self.threshold, Threshold::Finite(_))
    }
}

/// Runs the test on an observation.
pub fn run_test(test: &CalibratedTest, y: &SymMatrix) -> Result<Outcome> {
    if y.dim() != test.n {
        return Err(Error::DimensionMismatch {
            expected: test.n,
            found: y.dim(),
        });
    }
    if test.is_constant() {
        return Ok(test.decide(0.0));
    }
    let h = lss_statistic(&eigenvalues(y)?, test.lambda);
    Ok(test.decide(h.value))
}

/// Pool-adjacent-violators fit of a nondecreasing sequence.
pub fn isotonic_nondecreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, l1 + l2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, l)| std::iter::repeat_n(m, l))
        .collect()
}

/// Settings for an empirical ROC run.
#[derive(Debug, Clone, PartialEq)]
pub struct RocExperiment {
    pub prior: SpikePrior,
    /// SNR of the alternative model; `0` makes both arms null.
    pub lambda: f64,
    /// `λ` inside `h_λ`; must lie in `(0, 1)`.
    pub statistic_lambda: f64,
    pub n: usize,
    pub calib_trials: usize,
    /// Fresh draws per arm.
    pub trials: usize,
    pub backend: Backend,
}

impl RocExperiment {
    /// Calibration and both arms of equal size, statistic at the model `λ`.
    pub fn new(prior: SpikePrior, lambda: f64, n: usize, trials: usize) -> Self {
        RocExperiment {
            prior,
            lambda,
            statistic_lambda: lambda,
            n,
            calib_trials: trials,
            trials,
            backend: Backend::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocEstimate {
    pub alpha_target: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub se_alpha: f64,
    pub se_beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRoc {
    pub points: Vec<RocEstimate>,
    pub calibration_mean: f64,
    pub calibration_sd: f64,
    pub null_clips: usize,
    pub alt_clips: usize,
}

fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Draws `trials` statistics under one arm on the `(seed, tag)` streams.
#[allow(clippy::too_many_arguments)]
pub fn lss_draws(
    prior: &SpikePrior,
    model_lambda: f64,
    statistic_lambda: f64,
    n: usize,
    trials: usize,
    backend: Backend,
    seed: u64,
    tag: &str,
) -> Result<Vec<LssValue>> {
    map_trials(seed, tag, trials, |_, rng: &mut TrialRng| {
        sample_lss(prior, model_lambda, statistic_lambda, n, backend, rng)
    })
    .into_iter()
    .collect()
}

/// Size and power of calibrated LSS tests at each target size, from fresh
/// null and alternative draws. Both coordinates are made monotone by PAV.
pub fn empirical_roc(exp: &RocExperiment, alpha_grid: &[f64], seed: u64) -> Result<EmpiricalRoc> {
    if exp.trials < MIN_CALIB_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_CALIB_TRIALS} trials per arm, got {}",
            exp.trials
        )));
    }
    if let Some(a) = alpha_grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "alpha grid value {a} outside (0, 1)"
        )));
    }
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let calib = calibrate_null(
        exp.statistic_lambda,
        exp.n,
        exp.calib_trials,
        seed,
        exp.backend,
    )?;
    let tests = grid
        .iter()
        .map(|&a| make_test(&calib, a))
        .collect::<Result<Vec<_>>>()?;
    let null = lss_draws(
        &exp.prior,
        0.0,
        exp.statistic_lambda,
        exp.n,
        exp.trials,
        exp.backend,
        seed,
        "roc/null",
    )?;
    let alt = lss_draws(
        &exp.prior,
        exp.lambda,
        exp.statistic_lambda,
        exp.n,
        exp.trials,
        exp.backend,
        seed,
        "roc/alt",
    )?;
    let rate = |draws: &[LssValue], test: &CalibratedTest| {
        draws
            .iter()
            .filter(|d| test.decide(d.value) == Outcome::P)
            .count() as f64
            / draws.len() as f64
    };
    let alphas: Vec<f64> = tests.iter().map(|t| rate(&null, t)).collect();
    let betas: Vec<f64> = tests.iter().map(|t| rate(&alt, t)).collect();
    let ones = vec![1.0; grid.len()];
    let alphas = isotonic_nondecreasing(&alphas, &ones);
    let betas = isotonic_nondecreasing(&betas, &ones);
    let points = grid
        .iter()
        .zip(alphas.iter().zip(&betas))
        .map(|(&alpha_target, (&alpha_hat, &beta_hat))| RocEstimate {
            alpha_target,
            alpha_hat,
            beta_hat,
            se_alpha: binomial_se(alpha_hat, exp.trials),
            se_beta: binomial_se(beta_hat, exp.trials),
        })
        .collect();
    Ok(EmpiricalRoc {
        points,
        calibration_mean: calib.mean,
        calibration_sd: calib.sd,
        null_clips: null.iter().map(|d| d.clip_count).sum(),
        alt_clips: alt.iter().map(|d| d.clip_count).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Monte Carlo mean of the top eigenvalue of `Y` under `P_λ`.
pub fn top_eigenvalue_diag(
    prior: &SpikePrior,
    lambda: f64,
    n: usize,
    trials: usize,
    seed: u64,
    backend: Backend,
) -> Result<MeanEstimate> {
    if trials < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 trials, got {trials}"
        )));
    }
    let tops = map_trials(seed, "diag/top", trials, |_, rng| -> Result<f64> {
        match backend {
            Backend::Dense => {
                let (s, _) = sample_spiked_parts(prior, lambda, n, rng)?;
                Ok(eigenvalues(s.observation())?.top())
            }
            Backend::Tridiagonal => {
                Ok(sample_tridiagonal_spiked(prior, lambda, n, rng)?.top_eigenvalue())
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (mean, sd) = mean_sd(&tops);
    Ok(MeanEstimate {
        mean,
        stderr: sd / (trials as f64).sqrt(),
        trials,
    })
}

/// BBP location of the top eigenvalue: `λ + 1/λ` above the transition, `2`
/// below it.
pub fn predicted_top_eigenvalue(lambda: f64) -> f64 {
    if lambda > 1.0 {
        lambda + 1.0 / lambda
    } else {
        2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEstimate {
    /// `(mean H under P_λ − mean H under P₀) / sd(H under P₀)`.
    pub gap: f64,
    pub stderr: f64,
    /// Asymptotic value `√(μ/2)`.
    pub predicted: f64,
    pub null_sd: f64,
    pub trials: usize,
}

/// Standardized mean gap of the LSS statistic between the two arms.
///
/// Each trial evaluates the statistic on `W` and on `W + λvvᵀ` built from the
/// same noise, so the mean shift is estimated with far less variance than
/// from two independent arms.
pub fn standardized_mean_gap(
    prior: &SpikePrior,
    lambda: f64,
    n: usize,
    trials: usize,
    seed: u64,
    backend: Backend,
) -> Result<GapEstimate> {
    check_unit_interval(lambda, "lambda")?;
    if trials < MIN_CALIB_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_CALIB_TRIALS} trials, got {trials}"
        )));
    }
    let pairs = map_trials(seed, "diag/gap", trials, |_, rng| -> Result<(f64, f64)> {
        match backend {
            Backend::Dense => {
                let (s, w) = sample_spiked_parts(prior, lambda, n, rng)?;
                let h1 = lss_statistic(&eigenvalues(s.observation())?, lambda).value;
                let h0 = lss_statistic(&eigenvalues(&w)?, lambda).value;
                Ok((h0, h1))
            }
            Backend::Tridiagonal => {
                let nonzero = sample_vector(prior, n, rng).iter().any(|v| *v != 0.0);
                let mut t = sample_goe_tridiagonal(n, rng);
                let h0 = lss_statistic_tridiagonal(&t, lambda)?.value;
                if nonzero {
                    t.add_corner(lambda);
                }
                let h1 = lss_statistic_tridiagonal(&t, lambda)?.value;
                Ok((h0, h1))
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let h0: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let (_, sd0) = mean_sd(&h0);
    let (shift, sd_diff) = mean_sd(&diff);
    if !(sd0 > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    let nf = trials as f64;
    let gap = shift / sd0;
    // sd(H₀) has relative error ≈ 1/√(2N)
    let stderr = ((sd_diff / sd0).powi(2) / nf + gap * gap / (2.0 * nf)).sqrt();
    Ok(GapEstimate {
        gap,
        stderr,
        predicted: (lss_mu(lambda) / 2.0).sqrt(),
        null_sd: sd0,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_goe;
    use crate::stream::stream_rng;

    #[test]
    fn small_spectra() {
        let s = eigenvalues(&SymMatrix::from_diagonal(&[1.0, 3.0])).unwrap();
        assert_eq!(s.values().len(), 2);
        assert!((s.values()[0] - 3.0).abs() < 1e-14 && (s.values()[1] - 1.0).abs() < 1e-14);
        let swap = SymMatrix::from_upper(2, |i, j| if i == j { 0.0 } else { 1.0 });
        let s = eigenvalues(&swap).unwrap();
        assert!((s.values()[0] - 1.0).abs() < 1e-14 && (s.values()[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn spectrum_sorted_and_sums_to_trace() {
        let w = sample_goe(120, &mut stream_rng(1, "spec", 0));
        let s = eigenvalues(&w).unwrap();
        assert_eq!(s.len(), 120);
        assert!(s.values().windows(2).all(|p| p[0] >= p[1]));
        assert!((s.values().iter().sum::<f64>() - w.trace()).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 1, f64::NAN);
        assert!(eigenvalues(&m).is_err());
    }

    #[test]
    fn lss_reference_values() {
        let zeros = Spectrum::from_values(vec![0.0; 5]);
        let h = lss_statistic(&zeros, 0.6);
        assert!((h.value - 5.0 * -(1.36f64.ln())).abs() < 1e-12);
        assert!((h.value + 1.5375).abs() < 1e-4);
        assert_eq!(h.clip_count, 0);

        let bounded = Spectrum::from_values(vec![1.9, 0.3, -2.0]);
        assert!(lss_statistic(&bounded, 1e-9).value.abs() < 1e-8);

        let lambda = 0.6;
        let at_pole = Spectrum::from_values(vec![lambda + 1.0 / lambda, 0.0]);
        let h = lss_statistic(&at_pole, lambda);
        assert_eq!(h.clip_count, 1);
        assert!((h.value - (-CLIP_EPS.ln() - 1.36f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn tridiagonal_statistic_matches_dense_formula() {
        let mut rng = stream_rng(2, "spec", 0);
        let t = sample_goe_tridiagonal(300, &mut rng);
        let fast = lss_statistic_tridiagonal(&t, 0.6).unwrap();
        let slow = lss_statistic(&Spectrum::from_values(t.eigenvalues().unwrap()), 0.6);
        assert!((fast.value - slow.value).abs() < 1e-9);

        // corner shift pushing one eigenvalue past the pole forces the fallback
        let mut t2 = t.clone();
        t2.add_corner(5.0);
        let fast = lss_statistic_tridiagonal(&t2, 0.6).unwrap();
        assert_eq!(fast.clip_count, 1);
    }

    #[test]
    fn calibration_is_deterministic() {
        let a = calibrate_null(0.6, 100, 200, 5, Backend::Tridiagonal).unwrap();
        let b = calibrate_null(0.6, 100, 200, 5, Backend::Tridiagonal).unwrap();
        assert_eq!((a.mean, a.sd), (b.mean, b.sd));
        assert!(calibrate_null(0.6, 100, 99, 5, Backend::Tridiagonal).is_err());
    }

    #[test]
    fn constant_tests() {
        let calib = calibrate_null(0.6, 50, 100, 1, Backend::Tridiagonal).unwrap();
        let q = make_test(&calib, 0.0).unwrap();
        let p = make_test(&calib, 1.0).unwrap();
        let y = sample_goe(50, &mut stream_rng(1, "y", 0));
        assert_eq!(run_test(&q, &y).unwrap(), Outcome::Q);
        assert_eq!(run_test(&p, &y).unwrap(), Outcome::P);
        assert_eq!(q.decide(1e300), Outcome::Q);
        assert_eq!(p.decide(-1e300), Outcome::P);
    }

    #[test]
    fn calibration_sample_hits_target_count() {
        let calib = calibrate_null(0.6, 50, 400, 2, Backend::Tridiagonal).unwrap();
        for alpha in [0.05, 0.25, 0.5, 0.9] {
            let t = make_test(&calib, alpha).unwrap();
            let Threshold::Finite(tau) = t.threshold else {
                panic!()
            };
            let hits = calib.standardized.iter().filter(|z| **z >= tau).count();
            assert_eq!(hits, (alpha * 400.0).round() as usize);
        }
    }

    #[test]
    fn run_test_checks_dimension() {
        let calib = calibrate_null(0.6, 50, 100, 1, Backend::Tridiagonal).unwrap();
        let t = make_test(&calib, 0.3).unwrap();
        let y = sample_goe(49, &mut stream_rng(1, "y", 0));
        assert_eq!(
            run_test(&t, &y),
            Err(Error::DimensionMismatch {
                expected: 50,
                found: 49
            })
        );
        let y = sample_goe(50, &mut stream_rng(1, "y", 0));
        assert_eq!(run_test(&t, &y).unwrap(), run_test(&t, &y).unwrap());
    }

    #[test]
    fn pav_examples() {
        let ones = [1.0; 5];
        assert_eq!(
            isotonic_nondecreasing(&[1.0, 3.0, 2.0, 4.0, 5.0], &ones),
            vec![1.0, 2.5, 2.5, 4.0, 5.0]
        );
        assert_eq!(
            isotonic_nondecreasing(&[5.0, 4.0, 3.0, 2.0, 1.0], &ones),
            vec![3.0; 5]
        );
        let sorted = [0.1, 0.2, 0.2, 0.7, 0.9];
        assert_eq!(isotonic_nondecreasing(&sorted, &ones), sorted.to_vec());
    }

    #[test]
    fn predicted_top_is_continuous_at_one() {
        assert_eq!(predicted_top_eigenvalue(1.0), 2.0);
        assert!((predicted_top_eigenvalue(1.5) - 2.1666666666666667).abs() < 1e-15);
        assert_eq!(predicted_top_eigenvalue(0.5), 2.0);
    }
}
