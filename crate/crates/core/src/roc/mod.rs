//! ROC-curve geometry: the LSS curve `φ_λ`, the `val` functional, polylines
//! in concave position and the second-moment feasibility bound.

mod envelope;

pub use envelope::{
    discretize_envelope, envelope_chain, perturb_points, pushout_check, shift_boundary_point,
    upper_concave_envelope, EnvelopeChain, EnvelopeCurve, Pushout, DEFAULT_GAMMA_DISCRETIZE,
    DEFAULT_GAMMA_PERTURB, MAX_DISCRETIZATION_POINTS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::quad::integrate;

/// Absolute tolerance for squared `val` integrals.
pub const QUAD_TOL: f64 = 1e-9;

/// Core range of the substituted variable `t = Q⁻¹(α)`.
const T_CORE: f64 = 8.0;
const T_CHUNK: f64 = 4.0;
/// `Q(37.5)` is at the bottom of the double range.
const T_LIMIT: f64 = 37.0;

/// `μ = −log(1 − λ²)`.
pub fn lss_mu(lambda: f64) -> f64 {
    -(-lambda * lambda).ln_1p()
}

fn shift(lambda: f64) -> f64 {
    (lss_mu(lambda) / 2.0).sqrt()
}

/// `φ_λ(α) = Q(Q⁻¹(α) − √(μ/2))`, with `φ(0) = 0` and `φ(1) = 1`.
pub fn phi_eval(lambda: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    if alpha >= 1.0 {
        return 1.0;
    }
    normal::sf(normal::isf(alpha) - shift(lambda))
}

/// `φ′_λ(α) = exp(τ√(μ/2))` with `τ = Q⁻¹(α) − √(μ/8)`.
pub fn phi_deriv(lambda: f64, alpha: f64) -> f64 {
    let c = shift(lambda);
    let tau = normal::isf(alpha) - 0.5 * c;
    (tau * c).exp()
}

/// `val(φ_λ) = (1 − λ²)^{−1/4}`.
pub fn val_closed_form(lambda: f64) -> f64 {
    (1.0 - lambda * lambda).powf(-0.25)
}

/// A nondecreasing curve `[0, 1] → [0, 1]` with an a.e. derivative.
pub trait RocCurve {
    fn eval(&self, alpha: f64) -> f64;

    fn deriv(&self, alpha: f64) -> f64;

    /// Abscissas in `(0, 1)` where the derivative jumps.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `∫ₐᵇ φ′(α)² dα`, `0 ≤ a ≤ b ≤ 1`, to absolute accuracy `tol`.
    ///
    /// Integrates in `t = Q⁻¹(α)`, where `dα = −ϕ(t) dt`; the Gaussian weight
    /// tames the endpoint behaviour of `φ′` at `α ∈ {0, 1}`.
    fn sq_integral(&self, a: f64, b: f64, tol: f64) -> Result<f64> {
        sq_integral_substituted(self, a, b, tol)
    }
}

fn sq_integral_substituted<C: RocCurve + ?Sized>(
    curve: &C,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    if !(0.0 <= a && a <= b && b <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bad integration range [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let g = |t: f64| {
        let alpha = normal::sf(t);
        let d = curve.deriv(alpha);
        d * d * normal::pdf(t)
    };
    let t_hi = normal::isf(a);
    let t_lo = normal::isf(b);
    let mut cuts: Vec<f64> = curve
        .kinks()
        .into_iter()
        .filter(|k| *k > a && *k < b)
        .map(normal::isf)
        .collect();
    let core_lo = t_lo.max(-T_CORE);
    let core_hi = t_hi.min(T_CORE);
    cuts.push(core_lo);
    cuts.push(core_hi);
    cuts.retain(|c| *c >= core_lo && *c <= core_hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let pieces = cuts.len().max(2) + 1;
    let piece_tol = tol / (2.0 * pieces as f64);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(g, w[0], w[1], piece_tol)?;
    }
    total += tail(&g, core_hi, t_hi, 1.0, piece_tol)?;
    total += tail(&g, core_lo, t_lo, -1.0, piece_tol)?;
    Ok(total)
}

/// Integrates from `start` towards `end` in chunks until a chunk is
/// negligible or `end` is reached.
fn tail<G: Fn(f64) -> f64>(g: &G, start: f64, end: f64, dir: f64, tol: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut x = start;
    while (end - x) * dir > 0.0 {
        if x.abs() >= T_LIMIT {
            return Err(Error::DivergentIntegral);
        }
        let next = if dir > 0.0 {
            (x + T_CHUNK).min(end).min(T_LIMIT)
        } else {
            (x - T_CHUNK).max(end).max(-T_LIMIT)
        };
        let (lo, hi) = if dir > 0.0 { (x, next) } else { (next, x) };
        let chunk = integrate(g, lo, hi, tol / 4.0)?;
        total += chunk;
        x = next;
        if chunk.abs() < tol / 10.0 {
            return Ok(total);
        }
    }
    Ok(total)
}

/// `val(φ) = √(∫₀¹ φ′²)` by quadrature.
pub fn val_numeric<C: RocCurve + ?Sized>(curve: &C) -> Result<f64> {
    curve.sq_integral(0.0, 1.0, QUAD_TOL).map(f64::sqrt)
}

/// The LSS curve `φ_λ` as a [`RocCurve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiCurve {
    lambda: f64,
}

impl PhiCurve {
    pub fn new(lambda: f64) -> Result<Self> {
        if (0.0..1.0).contains(&lambda) {
            Ok(PhiCurve { lambda })
        } else {
            Err(Error::InvalidArgument(format!(
                "lambda = {lambda} must lie in [0, 1)"
            )))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The `α` at which `φ′(α) = slope`.
    pub fn deriv_inverse(&self, slope: f64) -> f64 {
        let c = shift(self.lambda);
        normal::sf(slope.ln() / c + 0.5 * c)
    }
}

impl RocCurve for PhiCurve {
    fn eval(&self, alpha: f64) -> f64 {
        phi_eval(self.lambda, alpha)
    }

    fn deriv(&self, alpha: f64) -> f64 {
        phi_deriv(self.lambda, alpha)
    }
}

/// The diagonal `β = α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Diagonal;

impl RocCurve for Diagonal {
    fn eval(&self, alpha: f64) -> f64 {
        alpha
    }

    fn deriv(&self, _alpha: f64) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub alpha: f64,
    pub beta: f64,
}

impl RocPoint {
    pub fn new(alpha: f64, beta: f64) -> Self {
        RocPoint { alpha, beta }
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.alpha) && (0.0..=1.0).contains(&self.beta)
    }

    /// Membership in `Δ = {α ≤ β}`.
    pub fn in_delta(&self) -> bool {
        self.in_unit_square() && self.alpha <= self.beta
    }
}

fn slope(p: &RocPoint, q: &RocPoint) -> f64 {
    (q.beta - p.beta) / (q.alpha - p.alpha)
}

fn check_sequence(points: &[RocPoint]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::MalformedSequence("need at least two points".into()));
    }
    let first = points[0];
    let last = points[points.len() - 1];
    if first != RocPoint::new(0.0, 0.0) {
        return Err(Error::MalformedSequence(format!(
            "first point is {first:?}, not (0, 0)"
        )));
    }
    if last != RocPoint::new(1.0, 1.0) {
        return Err(Error::MalformedSequence(format!(
            "last point is {last:?}, not (1, 1)"
        )));
    }
    if let Some(p) = points.iter().find(|p| !p.in_unit_square()) {
        return Err(Error::MalformedSequence(format!(
            "{p:?} outside the unit square"
        )));
    }
    if let Some(w) = points.windows(2).find(|w| !(w[0].alpha < w[1].alpha)) {
        return Err(Error::MalformedSequence(format!(
            "alpha not strictly ascending at {}",
            w[1].alpha
        )));
    }
    Ok(points.windows(2).map(|w| slope(&w[0], &w[1])).collect())
}

/// True iff the consecutive slopes are strictly positive and strictly
/// decreasing.
pub fn concave_position_check(points: &[RocPoint]) -> Result<bool> {
    let slopes = check_sequence(points)?;
    Ok(slopes.iter().all(|s| *s > 0.0) && slopes.windows(2).all(|w| w[0] > w[1]))
}

/// `√(Σ ℓᵢ² Δaᵢ)` for a piecewise-linear curve through `points`.
///
/// Collinear interior points are allowed (slopes only need to be positive and
/// nonincreasing), so refining a polyline does not change its value.
pub fn val_piecewise(points: &[RocPoint]) -> Result<f64> {
    let slopes = check_sequence(points)?;
    if slopes.iter().any(|s| !(*s > 0.0)) || slopes.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::NotConcavePosition);
    }
    Ok(slopes
        .iter()
        .zip(points.windows(2))
        .map(|(s, w)| s * s * (w[1].alpha - w[0].alpha))
        .sum::<f64>()
        .sqrt())
}

/// Points in concave position together with their segment slopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocPolyline {
    points: Vec<RocPoint>,
    slopes: Vec<f64>,
}

impl RocPolyline {
    pub fn new(points: Vec<RocPoint>) -> Result<Self> {
        if !concave_position_check(&points)? {
            return Err(Error::NotConcavePosition);
        }
        let slopes = points.windows(2).map(|w| slope(&w[0], &w[1])).collect();
        Ok(RocPolyline { points, slopes })
    }

    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    /// `ℓᵢ`, the slope between points `i` and `i + 1`.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Number of segments `r`.
    pub fn segments(&self) -> usize {
        self.slopes.len()
    }

    pub fn val(&self) -> f64 {
        val_piecewise(&self.points).expect("concave position checked at construction")
    }

    fn segment_of(&self, alpha: f64) -> usize {
        let idx = self.points.partition_point(|p| p.alpha <= alpha);
        idx.clamp(1, self.points.len() - 1) - 1
    }
}

impl RocCurve for RocPolyline {
    fn eval(&self, alpha: f64) -> f64 {
        let i = self.segment_of(alpha);
        let p = self.points[i];
        p.beta + self.slopes[i] * (alpha - p.alpha)
    }

    fn deriv(&self, alpha: f64) -> f64 {
        self.slopes[self.segment_of(alpha)]
    }

    fn kinks(&self) -> Vec<f64> {
        self.points[1..self.points.len() - 1]
            .iter()
            .map(|p| p.alpha)
            .collect()
    }

    fn sq_integral(&self, a: f64, b: f64, _tol: f64) -> Result<f64> {
        if !(0.0 <= a && a <= b && b <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bad integration range [{a}, {b}]"
            )));
        }
        Ok(self
            .points
            .windows(2)
            .zip(&self.slopes)
            .map(|(w, s)| {
                let lo = w[0].alpha.max(a);
                let hi = w[1].alpha.min(b);
                if hi > lo {
                    s * s * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum())
    }
}

/// `β²/α + (1 − β)²/(1 − α) ≤ ‖L‖²`, the second-moment constraint every
/// achievable `(α, β)` obeys.
pub fn feasibility_bound_check(point: RocPoint, l2norm_sq: f64) -> Result<bool> {
    let RocPoint { alpha, beta } = point;
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "{point:?} must lie in (0, 1)²"
        )));
    }
    if !(l2norm_sq >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "‖L‖² = {l2norm_sq} must be ≥ 1"
        )));
    }
    Ok(feasibility_lhs(point) <= l2norm_sq)
}

/// Left-hand side `β²/α + (1 − β)²/(1 − α)`.
pub fn feasibility_lhs(point: RocPoint) -> f64 {
    let RocPoint { alpha, beta } = point;
    beta * beta / alpha + (1.0 - beta) * (1.0 - beta) / (1.0 - alpha)
}
