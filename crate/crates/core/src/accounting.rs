//! Privacy accounting.
//!
//! Rényi-DP curves for the Gaussian mixing (sketch) mechanism and the Gaussian
//! mechanism, their conversion to `(epsilon, delta)`-DP, and the inverse
//! solvers that turn a budget into noise parameters. All logarithms are
//! natural.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

/// Lower limit of the sketch-noise floor for which the mixing bound holds.
pub const GAMMA_FLOOR: f64 = 2.5;

const ALPHA_MIN_OFFSET: f64 = 1e-9;
const ALPHA_CAP: f64 = 1e6;
const SCAN_POINTS: usize = 256;
const GAMMA_REL_WIDTH: f64 = 5e-7;
const GAMMA_START_OFFSET: f64 = 1e-6;
const GAMMA_MAX: f64 = 1e15;

/// Target `(epsilon, delta)` plus the failure probability `rho` of the
/// utility guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub rho: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, rho: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")));
        }
        Ok(Self { epsilon, delta, rho })
    }
}

/// Noise parameters of the iterative mixing estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Sketch noise floor, in units of squared row norm.
    pub gamma: f64,
    /// Gaussian-mechanism scale on the gradient release.
    pub sigma: f64,
    /// Safety margin of the eigenvalue release.
    pub tau: f64,
    /// Scale of the eigenvalue-release noise.
    pub eta: f64,
}

/// A Rényi-DP curve `alpha -> eps(alpha)` on `(1, alpha_max)`.
#[derive(Clone)]
pub struct RdpCurve {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    alpha_max: f64,
}

impl std::fmt::Debug for RdpCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RdpCurve").field("alpha_max", &self.alpha_max).finish()
    }
}

impl RdpCurve {
    pub fn new(alpha_max: f64, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            alpha_max,
        }
    }

    /// `compositions` adaptive uses of a Gaussian mechanism with the given
    /// sensitivity and noise scale: `T * alpha * b^2 / (2 sigma^2)`.
    pub fn gaussian(sensitivity: f64, sigma: f64, compositions: u32) -> Self {
        let c = f64::from(compositions) * sensitivity * sensitivity / (2.0 * sigma * sigma);
        Self::new(f64::INFINITY, move |a| c * a)
    }

    /// `k`-row Gaussian sketch with noise floor `zeta`; the pole sits at `zeta`.
    pub fn mixing(k: f64, zeta: f64) -> Self {
        Self::new(zeta, move |a| phi_unchecked(a, k, zeta))
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha_max
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        (self.eval)(alpha)
    }

    /// RDP composition: curves add pointwise on the common domain.
    pub fn compose(&self, other: &RdpCurve) -> RdpCurve {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self::new(self.alpha_max.min(other.alpha_max), move |x| a(x) + b(x))
    }
}

fn phi_unchecked(alpha: f64, k: f64, zeta: f64) -> f64 {
    let am1 = alpha - 1.0;
    k * alpha / (2.0 * am1) * (-1.0 / zeta).ln_1p() - k / (2.0 * am1) * (-alpha / zeta).ln_1p()
}

/// RDP level of a `k`-row Gaussian sketch whose noise floor is `zeta`.
pub fn phi(alpha: f64, k: u64, zeta: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::invalid(format!("alpha must exceed 1, got {alpha}")));
    }
    if !(zeta > 1.0) || alpha >= zeta {
        return Err(Error::invalid(format!("alpha = {alpha} must lie below the pole zeta = {zeta}")));
    }
    Ok(phi_unchecked(alpha, k as f64, zeta))
}

/// `log(1 - 1/alpha) - log(alpha * delta) / (alpha - 1)`: the RDP to DP
/// conversion penalty at order `alpha`.
pub fn conversion_penalty(alpha: f64, delta: f64) -> f64 {
    (-1.0 / alpha).ln_1p() - (alpha.ln() + delta.ln()) / (alpha - 1.0)
}

/// Minimizes `f` over `alpha in (lo, hi)`.
///
/// A log-spaced scan locates a bracket, refined by golden-section search on
/// `log alpha`. Non-finite values count as `+inf`; ties go to the smaller
/// order. The returned value is `f` at the returned order, so it is a valid
/// bound whether or not the true minimizer was found.
fn minimize_over_alpha(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = |la: f64| {
        let v = f(la.exp());
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (SCAN_POINTS - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..SCAN_POINTS {
        let v = g(llo + step * i as f64);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut best_la = llo + step * best_i as f64;
    if !best_v.is_finite() {
        return (best_la.exp(), best_v);
    }
    let mut a = llo + step * best_i.saturating_sub(1) as f64;
    let mut b = llo + step * (best_i + 1).min(SCAN_POINTS - 1) as f64;
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = g(d);
        }
    }
    for (la, v) in [(c, fc), (d, fd)] {
        if v < best_v || (v == best_v && la < best_la) {
            best_v = v;
            best_la = la;
        }
    }
    (best_la.exp(), best_v)
}

fn alpha_range(alpha_max: f64) -> Result<(f64, f64)> {
    let lo = 1.0 + ALPHA_MIN_OFFSET;
    let hi = alpha_max.min(ALPHA_CAP);
    if !(hi > lo) {
        return Err(Error::Infeasible(format!("empty Rényi order range (1, {alpha_max})")));
    }
    Ok((lo, hi))
}

/// Converts an RDP curve to `(epsilon, delta)`-DP.
///
/// Returns the smallest conversion found and the order that achieved it.
/// Negative conversions are clamped to zero.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (lo, hi) = alpha_range(curve.alpha_max)?;
    let (alpha, eps) = minimize_over_alpha(lo, hi, |a| curve.eval(a) + conversion_penalty(a, delta));
    Ok((eps.max(0.0), alpha))
}

/// Total `(epsilon, delta)`-DP level of the mixing pipeline: private
/// eigenvalue release plus one `k`-row Gaussian sketch with floor `gamma`.
pub fn mixing_epsilon(eta: f64, gamma: f64, k: u64, delta: f64) -> Result<f64> {
    mixing_epsilon_f(eta, gamma, k as f64, delta)
}

fn mixing_epsilon_f(eta: f64, gamma: f64, k: f64, delta: f64) -> Result<f64> {
    if !(gamma > GAMMA_FLOOR) {
        return Err(Error::invalid(format!("gamma must exceed 5/2, got {gamma}")));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let eig_term = (2.0 * (3.75 / delta).ln()).sqrt() / eta;
    let (lo, hi) = alpha_range(gamma)?;
    let sketch_delta = delta / 3.0;
    let (_, sketch_term) = minimize_over_alpha(lo, hi, |a| {
        phi_unchecked(a, k, gamma) + conversion_penalty(a, sketch_delta)
    });
    Ok(eig_term + sketch_term)
}

/// Bisection bracket of the calibrated noise floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBracket {
    /// Violates the budget (or equals the 5/2 floor).
    pub lower: f64,
    /// Satisfies the budget; this is the calibrated value.
    pub upper: f64,
}

/// Smallest `gamma > 5/2` with `mixing_epsilon(gamma/sqrt(k), gamma, k, delta) <= epsilon`,
/// as a bisection bracket.
pub fn calibrate_gamma_bracket(epsilon: f64, delta: f64, k: u64) -> Result<GammaBracket> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if k == 0 {
        return Err(Error::invalid("sketch size must be at least 1"));
    }
    let sk = (k as f64).sqrt();
    let spent = |g: f64| mixing_epsilon_f(g / sk, g, k as f64, delta);
    let start = GAMMA_FLOOR + GAMMA_START_OFFSET;
    if spent(start)? <= epsilon {
        return Ok(GammaBracket { lower: GAMMA_FLOOR, upper: start });
    }
    let mut lo = start;
    let mut hi = 2.0 * start;
    while spent(hi)? > epsilon {
        lo = hi;
        hi *= 2.0;
        if hi > GAMMA_MAX {
            return Err(Error::Infeasible(format!(
                "no noise floor below {GAMMA_MAX:e} meets epsilon = {epsilon}"
            )));
        }
    }
    while hi - lo > GAMMA_REL_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if spent(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GammaBracket { lower: lo, upper: hi })
}

pub fn calibrate_gamma(epsilon: f64, delta: f64, k: u64) -> Result<f64> {
    Ok(calibrate_gamma_bracket(epsilon, delta, k)?.upper)
}

/// Closed-form noise parameters for `T` iterations with sketch size `k` and
/// clipping level `clip_c`.
pub fn theorem1_noise(epsilon: f64, delta: f64, k: u64, iterations: u32, clip_c: f64, rho: f64) -> Result<NoiseParams> {
    PrivacyBudget::new(epsilon, delta, rho)?;
    if k == 0 || iterations == 0 || !(clip_c > 0.0) {
        return Err(Error::invalid("k, T and the clipping level must be positive"));
    }
    let kt = k as f64 * f64::from(iterations);
    let l5 = 8.0 * (5.0 / delta).ln();
    let gamma = kt.sqrt() / (l5.sqrt() * ((1.0 + epsilon / l5).sqrt() - 1.0));
    let l4 = 2.0 * (4.0 / delta).ln();
    let sigma = f64::from(iterations).sqrt() * clip_c / (l4.sqrt() * ((1.0 + epsilon / l4).sqrt() - 1.0));
    Ok(NoiseParams {
        gamma,
        sigma,
        tau: eigen_release_tau(delta, rho),
        eta: gamma / (k as f64).sqrt(),
    })
}

/// `sqrt(2 log(max{4/delta, 4/rho}))`, the eigenvalue-release margin.
pub fn eigen_release_tau(delta: f64, rho: f64) -> f64 {
    (2.0 * (4.0 / delta).max(4.0 / rho).ln()).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `log Phi(x)`, accurate in the far lower tail.
fn log_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        normal_cdf(x).ln()
    } else {
        // Mills-ratio asymptotics: Phi(x) ~ phi(x)/|x| * (1 - 1/x^2 + 3/x^4)
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Privacy loss `delta(sigma)` of a Gaussian mechanism at level `epsilon`.
pub fn gaussian_delta(sensitivity: f64, sigma: f64, epsilon: f64) -> f64 {
    let a = sensitivity / (2.0 * sigma);
    let b = epsilon * sigma / sensitivity;
    let first = normal_cdf(a - b);
    let second = (epsilon + log_normal_cdf(-a - b)).exp();
    first - second
}

/// Smallest Gaussian noise scale meeting `(epsilon, delta)` exactly.
pub fn analytic_gaussian_sigma(sensitivity: f64, epsilon: f64, delta: f64) -> Result<f64> {
    if !(sensitivity > 0.0) {
        return Err(Error::invalid("sensitivity must be positive"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let ok = |s: f64| gaussian_delta(sensitivity, s, epsilon) <= delta;
    let (mut lo, mut hi) = (1e-12 * sensitivity, 1e12 * sensitivity);
    if ok(lo) {
        return Ok(lo);
    }
    if !ok(hi) {
        return Err(Error::Infeasible("no noise scale in range meets the budget".into()));
    }
    while hi - lo > 1e-12 * hi {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// DP level of `T` composed Gaussian releases via RDP conversion.
pub fn composed_gaussian_epsilon(sensitivity: f64, sigma: f64, iterations: u32, delta: f64) -> Result<f64> {
    Ok(rdp_to_dp(&RdpCurve::gaussian(sensitivity, sigma, iterations), delta)?.0)
}

/// Noise scale for `T` composed Gaussian releases, solved by bisection so the
/// RDP-converted level equals `epsilon` within `1e-9`.
pub fn composed_gaussian_sigma(sensitivity: f64, iterations: u32, epsilon: f64, delta: f64) -> Result<f64> {
    if !(sensitivity > 0.0 && epsilon > 0.0) || iterations == 0 {
        return Err(Error::invalid("sensitivity, epsilon and T must be positive"));
    }
    let spent = |s: f64| composed_gaussian_epsilon(sensitivity, s, iterations, delta);
    let (mut lo, mut hi) = (1e-9 * sensitivity, sensitivity);
    while spent(hi)? > epsilon {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 * sensitivity {
            return Err(Error::Infeasible("Gaussian noise scale diverged".into()));
        }
    }
    for _ in 0..400 {
        if spent(hi)? >= epsilon - 1e-9 || hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if spent(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Balances the decaying sketch error against the accumulating privacy error.
pub fn nominal_iterations(epsilon: f64, n: usize, b: f64, d: usize, delta: f64, rho: f64, lambda_min_private: f64) -> u32 {
    let m = (d as f64).max((1.0 / rho).ln());
    let ld = (1.0 / delta).ln();
    let root = (m * ld).sqrt();
    let ratio = epsilon * n as f64 / (b * b);
    if ratio < root {
        return 1;
    }
    let second = if lambda_min_private > 0.0 {
        m * ld / lambda_min_private
    } else {
        f64::INFINITY
    };
    let t = ((ratio / root.min(second)).ln() / (2.0 * LN_2)).ceil();
    if t >= 1.0 {
        t as u32
    } else {
        1
    }
}

/// zCDP-derived noise scale of the DP-GD baseline.
pub fn dpgd_sigma(iterations: u32, clip_c: f64, n: usize, epsilon: f64, delta: f64) -> f64 {
    let l = (1.0 / delta).ln();
    let gap = (epsilon + l).sqrt() - l.sqrt();
    (2.0 * f64::from(iterations)).sqrt() * clip_c / (n as f64 * gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(1.0, 1e-6, 1e-7).is_ok());
        assert!(PrivacyBudget::new(0.0, 1e-6, 1e-7).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0, 1e-7).is_err());
        assert!(PrivacyBudget::new(1.0, 1e-6, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1e-6, 1.0).is_ok());
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(2.0, 0, 10.0).unwrap(), 0.0);
        let direct = 0.9f64.ln() - 0.5 * 0.8f64.ln();
        assert!((phi(2.0, 1, 10.0).unwrap() - direct).abs() < 1e-15);
        assert!((phi(2.0, 1, 10.0).unwrap() - 0.006_211_259_8).abs() < 1e-9);
        let one = phi(3.5, 7, 12.0).unwrap();
        assert!((phi(3.5, 14, 12.0).unwrap() - 2.0 * one).abs() < 1e-14);
    }

    #[test]
    fn phi_errors() {
        assert!(phi(1.0, 1, 10.0).is_err());
        assert!(phi(10.0, 1, 10.0).is_err());
        assert!(phi(11.0, 1, 10.0).is_err());
    }

    #[test]
    fn conversion_clamps_at_zero() {
        let zero = RdpCurve::new(f64::INFINITY, |_| 0.0);
        assert!((conversion_penalty(2.0, 0.5) + LN_2).abs() < 1e-15);
        let (eps, _) = rdp_to_dp(&zero, 0.5).unwrap();
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn conversion_rejects_bad_delta_and_empty_range() {
        let c = RdpCurve::gaussian(1.0, 1.0, 1);
        assert!(rdp_to_dp(&c, 0.0).is_err());
        assert!(rdp_to_dp(&RdpCurve::new(1.0, |_| 0.0), 0.1).is_err());
    }

    #[test]
    fn composition_adds() {
        let a = RdpCurve::gaussian(1.0, 2.0, 1);
        let b = RdpCurve::mixing(3.0, 50.0);
        let c = a.compose(&b);
        assert_eq!(c.alpha_max(), 50.0);
        assert!((c.eval(4.0) - a.eval(4.0) - b.eval(4.0)).abs() < 1e-15);
        let g3 = RdpCurve::gaussian(1.0, 2.0, 3);
        assert!((g3.eval(5.0) - 3.0 * a.eval(5.0)).abs() < 1e-15);
    }

    #[test]
    fn mixing_epsilon_rejects_low_gamma() {
        assert!(mixing_epsilon(1.0, 2.5, 4, 1e-6).is_err());
        assert!(mixing_epsilon(0.0, 10.0, 4, 1e-6).is_err());
    }

    #[test]
    fn mixing_epsilon_vanishes_for_large_gamma() {
        let k = 16u64;
        let v = |g: f64| mixing_epsilon(g / (k as f64).sqrt(), g, k, 1e-6).unwrap();
        assert!(v(1e6) < 1e-3);
        assert!(v(1e4) > v(1e5) && v(1e5) > v(1e6));
    }

    #[test]
    fn mixing_epsilon_below_closed_form_bound() {
        // the closed form is only an upper bound once k is moderately large
        for &(k, g, delta) in &[(16u64, 50.0, 1e-6), (64, 200.0, 1e-6), (32, 40.0, 1e-3), (256, 1e3, 1e-9)] {
            let eta = g / (k as f64).sqrt();
            let lhs = mixing_epsilon(eta, g, k, delta).unwrap();
            let kf = k as f64;
            let rhs = kf / (2.0 * g * g) + 2.0 * (2.0 * kf * (4.0 / delta).ln()).sqrt() / g;
            assert!(lhs <= rhs, "k={k} gamma={g}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn gamma_calibration_monotone_in_budget() {
        let mut prev = f64::INFINITY;
        for &e in &[0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.4] {
            let g = calibrate_gamma(e, 1e-6, 64).unwrap();
            assert!(g <= prev);
            assert!(g > GAMMA_FLOOR);
            prev = g;
        }
    }

    #[test]
    fn gamma_calibration_hits_floor_for_huge_budget() {
        let b = calibrate_gamma_bracket(1e6, 1e-6, 8).unwrap();
        assert!(b.upper > GAMMA_FLOOR && b.upper < GAMMA_FLOOR + 1e-5);
    }

    #[test]
    fn gamma_calibration_errors() {
        assert!(calibrate_gamma(0.0, 1e-6, 8).is_err());
        assert!(calibrate_gamma(1.0, 1e-6, 0).is_err());
    }

    #[test]
    fn theorem1_tau_and_linearity() {
        let p = theorem1_noise(1.0, 1e-6, 64, 3, 1.0, 1e-7).unwrap();
        assert!((p.tau - (2.0 * 4e7f64.ln()).sqrt()).abs() < 1e-12);
        let p2 = theorem1_noise(1.0, 1e-6, 64, 3, 2.5, 1e-7).unwrap();
        assert!((p2.sigma / p.sigma - 2.5).abs() < 1e-12);
        assert!((p.eta - p.gamma / 8.0).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let e = normal_cdf(1.959_963_984_540_054) - 0.975; assert!(e.abs() < 1e-14, "{e:e}");
        assert!((log_normal_cdf(-40.0) - log_normal_cdf(-29.999)).abs() > 100.0);
        // continuity across the asymptotic switch
        let below = log_normal_cdf(-30.0 - 1e-9);
        let above = log_normal_cdf(-30.0 + 1e-9);
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn analytic_sigma_linear_in_sensitivity() {
        let s1 = analytic_gaussian_sigma(1.0, 0.7, 1e-5).unwrap();
        let s3 = analytic_gaussian_sigma(3.0, 0.7, 1e-5).unwrap();
        assert!((s3 / s1 - 3.0).abs() < 1e-9);
        assert!(analytic_gaussian_sigma(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn analytic_sigma_handles_huge_epsilon() {
        let s = analytic_gaussian_sigma(1.0, 1e6, 1e-6).unwrap();
        assert!(s.is_finite() && s > 0.0 && s < 1e-2);
    }

    #[test]
    fn composed_sigma_meets_target() {
        let s = composed_gaussian_sigma(1.0, 3, 0.5, 1e-6).unwrap();
        let e = composed_gaussian_epsilon(1.0, s, 3, 1e-6).unwrap();
        assert!((e - 0.5).abs() < 1e-9, "{e}");
        assert!(e <= 0.5);
    }

    #[test]
    fn nominal_iterations_branches() {
        assert_eq!(nominal_iterations(0.01, 10, 1.0, 8, 1e-6, 1e-7, 0.0), 1);
        let t = nominal_iterations(0.5, 10_000, 1.0, 8, 1e-8, 1e-9, 1e-3);
        assert!(t >= 1);
    }

    #[test]
    fn dpgd_sigma_special_case() {
        let delta: f64 = 1e-5;
        let l = (1.0 / delta).ln();
        let s = dpgd_sigma(1, 1.0, 1, 3.0 * l, delta);
        assert!((s * s - 2.0 / l).abs() < 1e-12);
        let a = dpgd_sigma(4, 1.0, 100, 1.0, delta);
        let b = dpgd_sigma(1, 1.0, 100, 1.0, delta);
        assert!((a / b - 2.0).abs() < 1e-12);
        let c = dpgd_sigma(1, 1.0, 200, 1.0, delta);
        assert!((b / c - 2.0).abs() < 1e-12);
    }
}
