//! The upper concave envelope `ψ` of a base curve and an exterior point, its
//! discretization `u` and the perturbed points `v`.

use serde::Serialize;

use super::{val_numeric, val_piecewise, PhiCurve, RocCurve, RocPoint, RocPolyline, QUAD_TOL};
use crate::error::{Error, Result};

pub const DEFAULT_GAMMA_DISCRETIZE: f64 = 0.05;
pub const DEFAULT_GAMMA_PERTURB: f64 = 0.02;
pub const MAX_DISCRETIZATION_POINTS: usize = 1_000_000;

/// Required `val(ψ)² − val(φ)²`, in units of [`QUAD_TOL`].
const MARGIN_FACTOR: f64 = 10.0;

/// Root of a decreasing function with `f(lo) > 0 ≥ f(hi)`, to float
/// resolution.
fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `ψ`: equal to the base curve outside `[A₁, A₂]`, linear from
/// `(A₁, φ(A₁))` to `(α*, β*)` and from there to `(A₂, φ(A₂))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCurve<C = PhiCurve> {
    base: C,
    exterior: RocPoint,
    a1: f64,
    a2: f64,
    beta1: f64,
    beta2: f64,
    slope1: f64,
    slope2: f64,
}

/// Envelope of `φ_λ` and the exterior point.
pub fn upper_concave_envelope(lambda: f64, exterior: RocPoint) -> Result<EnvelopeCurve<PhiCurve>> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} must lie in (0, 1)"
        )));
    }
    EnvelopeCurve::new(PhiCurve::new(lambda)?, exterior)
}

impl<C: RocCurve> EnvelopeCurve<C> {
    /// `base` must be concave and strictly increasing with `φ′ → ∞` at `0`
    /// and `φ′ → 0` at `1`.
    pub fn new(base: C, exterior: RocPoint) -> Result<Self> {
        let RocPoint {
            alpha: a_star,
            beta: b_star,
        } = exterior;
        if !(a_star > 0.0 && a_star < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "exterior alpha = {a_star} must lie in (0, 1); shift boundary points first"
            )));
        }
        if !(b_star < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "exterior beta = {b_star} must be < 1"
            )));
        }
        if !(b_star > base.eval(a_star)) {
            return Err(Error::NotExterior {
                alpha: a_star,
                beta: b_star,
            });
        }
        let g1 = |a: f64| base.deriv(a) * (a_star - a) - (b_star - base.eval(a));
        let g2 = |a: f64| base.deriv(a) * (a - a_star) - (base.eval(a) - b_star);

        // A tangency closer to an endpoint than float resolution allows is
        // replaced by the endpoint itself.
        let mut lo = 1e-9_f64.min(0.5 * a_star);
        while !(g1(lo) > 0.0) && lo > 0.0 {
            lo *= 1e-3;
            if lo < 1e-300 {
                lo = 0.0;
            }
        }
        let a1 = if lo > 0.0 {
            bisect_decreasing(g1, lo, a_star)
        } else {
            0.0
        };

        let mut gap = 1e-9_f64.min(0.5 * (1.0 - a_star));
        while !(g2(1.0 - gap) <= 0.0) && gap > 0.0 {
            gap *= 1e-2;
            if gap < f64::EPSILON {
                gap = 0.0;
            }
        }
        let a2 = if gap > 0.0 {
            bisect_decreasing(g2, a_star, 1.0 - gap)
        } else {
            1.0
        };
        if !(a1 >= 0.0 && a1 < a_star && a2 > a_star && a2 <= 1.0) {
            return Err(Error::ConvergenceFailure);
        }
        let beta1 = base.eval(a1);
        let beta2 = base.eval(a2);
        Ok(EnvelopeCurve {
            slope1: (b_star - beta1) / (a_star - a1),
            slope2: (beta2 - b_star) / (a2 - a_star),
            base,
            exterior,
            a1,
            a2,
            beta1,
            beta2,
        })
    }

    pub fn base(&self) -> &C {
        &self.base
    }

    pub fn exterior(&self) -> RocPoint {
        self.exterior
    }

    /// Tangency abscissas `(A₁, A₂)`. `A₁ = 0` or `A₂ = 1` when the true
    /// tangency is not representable.
    pub fn tangency(&self) -> (f64, f64) {
        (self.a1, self.a2)
    }

    /// Slopes of the two linear pieces.
    pub fn linear_slopes(&self) -> (f64, f64) {
        (self.slope1, self.slope2)
    }

    /// `φ′(Aᵢ)` minus the slope of the corresponding linear piece.
    pub fn tangency_residuals(&self) -> (f64, f64) {
        (
            self.base.deriv(self.a1) - self.slope1,
            self.base.deriv(self.a2) - self.slope2,
        )
    }

    fn linear_sq(&self, a: f64, b: f64) -> f64 {
        let a_star = self.exterior.alpha;
        let overlap = |lo: f64, hi: f64| (b.min(hi) - a.max(lo)).max(0.0);
        self.slope1 * self.slope1 * overlap(self.a1, a_star)
            + self.slope2 * self.slope2 * overlap(a_star, self.a2)
    }
}

impl<C: RocCurve> RocCurve for EnvelopeCurve<C> {
    fn eval(&self, alpha: f64) -> f64 {
        let a_star = self.exterior.alpha;
        if alpha <= self.a1 || alpha >= self.a2 {
            self.base.eval(alpha)
        } else if alpha == a_star {
            self.exterior.beta
        } else if alpha < a_star {
            self.beta1 + self.slope1 * (alpha - self.a1)
        } else {
            self.exterior.beta + self.slope2 * (alpha - a_star)
        }
    }

    fn deriv(&self, alpha: f64) -> f64 {
        if alpha < self.a1 || alpha > self.a2 {
            self.base.deriv(alpha)
        } else if alpha < self.exterior.alpha {
            self.slope1
        } else {
            self.slope2
        }
    }

    fn kinks(&self) -> Vec<f64> {
        [self.a1, self.exterior.alpha, self.a2]
            .into_iter()
            .filter(|a| *a > 0.0 && *a < 1.0)
            .collect()
    }

    /// Quadrature on the curved parts, exact on the linear ones.
    fn sq_integral(&self, a: f64, b: f64, tol: f64) -> Result<f64> {
        if !(0.0 <= a && a <= b && b <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bad integration range [{a}, {b}]"
            )));
        }
        let left = if a < self.a1 {
            self.base.sq_integral(a, b.min(self.a1), tol / 2.0)?
        } else {
            0.0
        };
        let right = if b > self.a2 {
            self.base.sq_integral(a.max(self.a2), b, tol / 2.0)?
        } else {
            0.0
        };
        Ok(left + self.linear_sq(a, b) + right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pushout {
    pub val_psi: f64,
    pub val_phi: f64,
    /// `val(ψ)² − val(φ)²`, computed on `[A₁, A₂]` only.
    pub gap_sq: f64,
    pub strict: bool,
}

/// Compares `val(ψ)` with `val(φ)`, requiring a squared gap of at least
/// `10 × QUAD_TOL`.
pub fn pushout_check<C: RocCurve>(env: &EnvelopeCurve<C>) -> Result<Pushout> {
    let val_phi = val_numeric(&env.base)?;
    let val_psi = val_numeric(env)?;
    let curved = env.base.sq_integral(env.a1, env.a2, QUAD_TOL)?;
    let gap_sq = env.linear_sq(env.a1, env.a2) - curved;
    let required = MARGIN_FACTOR * QUAD_TOL;
    if !(gap_sq >= required) {
        return Err(Error::MarginTooSmall {
            margin: gap_sq,
            required,
        });
    }
    Ok(Pushout {
        val_psi,
        val_phi,
        gap_sq,
        strict: val_psi > val_phi,
    })
}

/// Largest `α` in `(x, hi]` with `φ′(α) ≥ target`, for decreasing `φ′`.
fn deriv_step<C: RocCurve>(curve: &C, x: f64, hi: f64, target: f64) -> f64 {
    if curve.deriv(hi) >= target {
        return hi;
    }
    bisect_decreasing(|a| curve.deriv(a) - target + f64::MIN_POSITIVE, x, hi)
}

/// Grid on `[lo, hi]` with `φ′(xᵢ) ≤ (1 + γ) φ′(xᵢ₊₁)`.
fn ratio_partition<C: RocCurve>(
    curve: &C,
    lo: f64,
    hi: f64,
    gamma: f64,
    budget: usize,
) -> Result<Vec<f64>> {
    let mut xs = vec![lo];
    let mut x = lo;
    while x < hi {
        let next = deriv_step(curve, x, hi, curve.deriv(x) / (1.0 + gamma));
        if next <= x {
            return Err(Error::BudgetInfeasible {
                limit: MAX_DISCRETIZATION_POINTS,
            });
        }
        xs.push(next);
        x = next;
        if xs.len() > budget {
            return Err(Error::BudgetInfeasible {
                limit: MAX_DISCRETIZATION_POINTS,
            });
        }
    }
    Ok(xs)
}

/// Searches `x = 10^e` for the largest `x ≤ cap` with `mass(x) ≤ target`,
/// where `mass` is nondecreasing in `x`.
fn log_search(mass: impl Fn(f64) -> Result<f64>, cap: f64, floor: f64, target: f64) -> Result<f64> {
    if mass(cap)? <= target {
        return Ok(cap);
    }
    let (mut lo, mut hi) = (floor.log10(), cap.log10());
    if mass(10f64.powf(lo))? > target {
        return Err(Error::BudgetInfeasible {
            limit: MAX_DISCRETIZATION_POINTS,
        });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass(10f64.powf(mid))? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(10f64.powf(lo))
}

/// Points `uᵢ = (aᵢ, ψ(aᵢ))` in concave position with
/// `val(ψ)² − val(conc(u))² ≤ 2ε/3`.
///
/// Tails `[0, a₁]` and `[a_{r−1}, 1]` each carry at most `ε/6` of `∫ψ′²`; the
/// curved stretches `[a₁, A₁]` and `[A₂, a_{r−1}]` are cut so that `ψ′` drops
/// by at most a factor `1 + γ` per segment. `γ` is halved until the deficit
/// bound holds.
pub fn discretize_envelope<C: RocCurve>(
    env: &EnvelopeCurve<C>,
    eps: f64,
    gamma: f64,
) -> Result<RocPolyline> {
    discretize_with_gamma(env, eps, gamma).map(|(u, _)| u)
}

fn discretize_with_gamma<C: RocCurve>(
    env: &EnvelopeCurve<C>,
    eps: f64,
    gamma: f64,
) -> Result<(RocPolyline, f64)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} must be positive"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} must be positive"
        )));
    }
    let (a1_tan, a2_tan) = env.tangency();
    let a_star = env.exterior.alpha;
    let tail = eps / 6.0;
    let tol = (QUAD_TOL).min(eps / 100.0);

    let a_left = if a1_tan > 0.0 {
        log_search(|x| env.sq_integral(0.0, x, tol), 0.5 * a1_tan, 1e-300, tail)?
    } else {
        0.0
    };
    let a_right = if a2_tan < 1.0 {
        let gap = log_search(
            |g| env.sq_integral(1.0 - g, 1.0, tol),
            0.5 * (1.0 - a2_tan),
            f64::EPSILON,
            tail,
        )?;
        1.0 - gap
    } else {
        1.0
    };

    let val_psi_sq = env.sq_integral(0.0, 1.0, tol)?;
    let mut gamma = gamma;
    loop {
        let left = if a1_tan > 0.0 {
            ratio_partition(env.base(), a_left, a1_tan, gamma, MAX_DISCRETIZATION_POINTS)?
        } else {
            Vec::new()
        };
        let right = if a2_tan < 1.0 {
            ratio_partition(
                env.base(),
                a2_tan,
                a_right,
                gamma,
                MAX_DISCRETIZATION_POINTS,
            )?
        } else {
            Vec::new()
        };
        if left.len() + right.len() + 3 > MAX_DISCRETIZATION_POINTS {
            return Err(Error::BudgetInfeasible {
                limit: MAX_DISCRETIZATION_POINTS,
            });
        }
        let mut alphas = vec![0.0];
        alphas.extend(&left);
        alphas.push(a_star);
        alphas.extend(&right);
        alphas.push(1.0);
        let points: Vec<RocPoint> = alphas
            .iter()
            .map(|&a| {
                if a == 0.0 || a == 1.0 {
                    RocPoint::new(a, a)
                } else {
                    RocPoint::new(a, env.eval(a))
                }
            })
            .collect();
        let points = drop_collinear(points);
        let val_u = val_piecewise(&points)?;
        if val_psi_sq - val_u * val_u <= 2.0 * eps / 3.0 {
            return Ok((RocPolyline::new(points)?, gamma));
        }
        gamma *= 0.5;
    }
}

/// Drops interior points whose two adjacent slopes agree to rounding.
fn drop_collinear(points: Vec<RocPoint>) -> Vec<RocPoint> {
    let mut out: Vec<RocPoint> = Vec::with_capacity(points.len());
    for p in points {
        while out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let m0 = (b.beta - a.beta) / (b.alpha - a.alpha);
            let m1 = (p.beta - b.beta) / (p.alpha - b.alpha);
            if (m0 - m1).abs() <= 1e-12 * m0.abs().max(m1.abs()) {
                out.pop();
            } else {
                break;
            }
        }
        out.push(p);
    }
    out
}

/// Lowers every interior point of `u` so that the result `v` is strictly
/// below `u`, still in concave position, and keeps
/// `slope(uᵢ₋₁, vᵢ) ≥ (1 − γ) mᵢ₋₁`.
pub fn perturb_points(u: &RocPolyline, gamma: f64) -> Result<RocPolyline> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} must lie in (0, 1)"
        )));
    }
    let pts = u.points();
    let m = u.slopes();
    let mut out = pts.to_vec();
    for i in 1..pts.len() - 1 {
        let d_prev = pts[i].alpha - pts[i - 1].alpha;
        let d_next = pts[i + 1].alpha - pts[i].alpha;
        let size_cap = gamma * m[i - 1] * d_prev;
        let order_cap = (m[i - 1] - m[i]) / (1.0 / d_prev + 1.0 / d_next);
        let delta = 0.5 * size_cap.min(order_cap);
        out[i].beta = pts[i].beta - delta;
        if !(out[i].beta < pts[i].beta) {
            return Err(Error::NotConcavePosition);
        }
    }
    RocPolyline::new(out)
}

/// Boundary point moved inside by mixing with the always-`p` test: with
/// probability `q` output `p`, otherwise run the original test.
pub fn shift_boundary_point(point: RocPoint, mixture_prob: f64) -> Result<RocPoint> {
    if !(0.0..=1.0).contains(&mixture_prob) {
        return Err(Error::InvalidArgument(format!(
            "mixture probability {mixture_prob} outside [0, 1]"
        )));
    }
    let q = mixture_prob;
    Ok(RocPoint::new(
        q + (1.0 - q) * point.alpha,
        q + (1.0 - q) * point.beta,
    ))
}

/// Every stage from an exterior point to the perturbed polyline `v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeChain {
    pub lambda: f64,
    pub exterior: RocPoint,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    pub val_phi: f64,
    pub val_psi: f64,
    pub val_conc_u: f64,
    pub val_conc_v: f64,
    pub eps: f64,
    pub gamma_u: f64,
    pub gamma_v: f64,
    pub points_u: Vec<RocPoint>,
    pub points_v: Vec<RocPoint>,
}

/// `φ_λ` → `ψ` → `u` → `v`, with `ε = val(ψ)² − val(φ)²`.
pub fn envelope_chain(
    lambda: f64,
    exterior: RocPoint,
    gamma_u: f64,
    gamma_v: f64,
) -> Result<EnvelopeChain> {
    let env = upper_concave_envelope(lambda, exterior)?;
    let push = pushout_check(&env)?;
    let (u, gamma_used) = discretize_with_gamma(&env, push.gap_sq, gamma_u)?;
    let v = perturb_points(&u, gamma_v)?;
    let (a1, a2) = env.tangency();
    Ok(EnvelopeChain {
        lambda,
        exterior,
        a1,
        a2,
        val_phi: push.val_phi,
        val_psi: push.val_psi,
        val_conc_u: u.val(),
        val_conc_v: v.val(),
        eps: push.gap_sq,
        gamma_u: gamma_used,
        gamma_v,
        points_u: u.points().to_vec(),
        points_v: v.points().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roc::{concave_position_check, phi_eval, val_closed_form};

    fn standard() -> EnvelopeCurve {
        upper_concave_envelope(0.6, RocPoint::new(0.3, 0.9)).unwrap()
    }

    #[test]
    fn envelope_structure() {
        assert!((phi_eval(0.6, 0.3) - 0.4793).abs() < 5e-5);
        let env = standard();
        let (a1, a2) = env.tangency();
        assert!(a1 > 0.0 && a1 < 0.3 && a2 > 0.3 && a2 < 1.0);
        let (r1, r2) = env.tangency_residuals();
        assert!(r1.abs() < 1e-8 && r2.abs() < 1e-8, "{r1} {r2}");
        let (s1, s2) = env.linear_slopes();
        assert!(s1 > s2);
        assert_eq!(env.eval(0.3), 0.9);
        for k in 0..=1000 {
            let a = k as f64 / 1000.0;
            assert!(env.eval(a) >= phi_eval(0.6, a) - 1e-15, "{a}");
        }
        assert_eq!(env.eval(0.5 * a1), phi_eval(0.6, 0.5 * a1));
    }

    #[test]
    fn interior_points_are_rejected() {
        let beta = phi_eval(0.6, 0.3) - 0.01;
        assert_eq!(
            upper_concave_envelope(0.6, RocPoint::new(0.3, beta)),
            Err(Error::NotExterior { alpha: 0.3, beta })
        );
        assert!(matches!(
            upper_concave_envelope(0.6, RocPoint::new(0.0, 0.5)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            upper_concave_envelope(0.6, RocPoint::new(0.3, 1.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pushout_is_strict() {
        let p = pushout_check(&standard()).unwrap();
        assert!(p.strict);
        assert!((p.val_phi - val_closed_form(0.6)).abs() < 1e-6);
        assert!((p.val_psi * p.val_psi - p.val_phi * p.val_phi - p.gap_sq).abs() < 1e-7);
    }

    #[test]
    fn near_curve_point_has_too_small_margin() {
        let beta = phi_eval(0.6, 0.3) + 1e-6;
        let env = upper_concave_envelope(0.6, RocPoint::new(0.3, beta)).unwrap();
        assert!(matches!(
            pushout_check(&env),
            Err(Error::MarginTooSmall { .. })
        ));
    }

    #[test]
    fn discretization_beats_phi() {
        let env = standard();
        let p = pushout_check(&env).unwrap();
        let u = discretize_envelope(&env, p.gap_sq, DEFAULT_GAMMA_DISCRETIZE).unwrap();
        assert!(concave_position_check(u.points()).unwrap());
        assert!(u.val() > p.val_phi);
        assert!(u.val() <= p.val_psi + 1e-9);
        let alphas: Vec<f64> = u.points().iter().map(|q| q.alpha).collect();
        let (a1, a2) = env.tangency();
        assert!(alphas.contains(&a1) && alphas.contains(&0.3) && alphas.contains(&a2));
    }

    #[test]
    fn finer_ratio_does_not_lose_value() {
        let env = standard();
        let eps = pushout_check(&env).unwrap().gap_sq;
        let coarse = discretize_envelope(&env, eps, 0.05).unwrap().val();
        let fine = discretize_envelope(&env, eps, 0.025).unwrap().val();
        assert!(fine >= coarse - 1e-9, "{coarse} {fine}");
    }

    #[test]
    fn perturbation_stays_concave_and_below() {
        let env = standard();
        let eps = pushout_check(&env).unwrap().gap_sq;
        let u = discretize_envelope(&env, eps, 0.05).unwrap();
        let v = perturb_points(&u, 0.02).unwrap();
        assert!(concave_position_check(v.points()).unwrap());
        assert!(v.val() > val_closed_form(0.6));
        assert!(v.val() >= 0.98 * u.val());
        let (pu, pv) = (u.points(), v.points());
        assert_eq!(pu[0], pv[0]);
        assert_eq!(pu[pu.len() - 1], pv[pv.len() - 1]);
        for i in 1..pu.len() - 1 {
            assert!(pv[i].beta < pu[i].beta);
            assert_eq!(pv[i].alpha, pu[i].alpha);
        }
    }

    #[test]
    fn perturbation_vanishes_with_gamma() {
        let env = standard();
        let eps = pushout_check(&env).unwrap().gap_sq;
        let u = discretize_envelope(&env, eps, 0.05).unwrap();
        let displacement = |g: f64| {
            let v = perturb_points(&u, g).unwrap();
            u.points()
                .iter()
                .zip(v.points())
                .map(|(a, b)| a.beta - b.beta)
                .fold(0.0, f64::max)
        };
        let d = [displacement(0.1), displacement(0.01), displacement(0.001)];
        assert!(d[0] >= d[1] && d[1] >= d[2]);
        assert!(d[2] < 1e-3);
    }

    #[test]
    fn chain_summary() {
        let c = envelope_chain(0.6, RocPoint::new(0.3, 0.9), 0.05, 0.02).unwrap();
        assert!(c.val_psi > c.val_conc_u && c.val_conc_u > c.val_phi && c.val_conc_v > c.val_phi);
        assert_eq!(c.points_u.len(), c.points_v.len());
    }

    #[test]
    fn boundary_shift() {
        let p = shift_boundary_point(RocPoint::new(0.0, 0.4), 0.1).unwrap();
        assert!((p.alpha - 0.1).abs() < 1e-15 && (p.beta - 0.46).abs() < 1e-15);
        assert!(shift_boundary_point(p, 1.5).is_err());
    }

    #[test]
    fn unrepresentable_tangency_collapses_to_endpoint() {
        // the right tangency sits within 1e-60 of 1
        let env = upper_concave_envelope(0.2, RocPoint::new(0.05, 0.95)).unwrap();
        let (a1, a2) = env.tangency();
        assert!(a1 > 0.0 && a1 < 0.05);
        assert_eq!(a2, 1.0);
        assert_eq!(env.kinks().len(), 2);
        assert_eq!(env.eval(1.0), 1.0);
        let chain = envelope_chain(0.2, RocPoint::new(0.05, 0.95), 0.05, 0.02).unwrap();
        assert!(chain.val_conc_v > chain.val_phi);
        assert_eq!(chain.points_u.last(), Some(&RocPoint::new(1.0, 1.0)));
    }
}
