//! Linear mixing: sketch-and-solve on the concatenation `[X, Y]`.
//!
//! The concatenation has row bound `C = sqrt(c_x^2 + c_y^2)`. It is divided by
//! `C` before mixing, so the mechanism always sees unit rows; the estimate is
//! invariant to this common scale. Injected eigenvalues refer to the scaled
//! matrix, while the `eta` recorded in the diagnostics is the standard
//! deviation of the additive noise in the original units.

use super::{require_normalized, solve_sketched, FitResult, IterationRecord, RiskTracker};
use crate::accounting::{calibrate_gamma, mixing_epsilon, PrivacyBudget};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mechanisms::{calibrate_mixing_noise_with, gaussian_mixing_with, gaussian_sketch, Injection};
use crate::rng::{normal_matrix, RngStream};

const TAG_MIX: u64 = 1;
const TAG_SKETCH: u64 = 2;
const TAG_XI: u64 = 3;

/// Smallest sketch-size cap of the dynamic search.
const DYNAMIC_K_CAP: usize = 4096;

/// `ceil(multiplier * max{d, ceil(log(2/rho))})`.
pub fn linmix_default_k(d: usize, rho: f64, multiplier: f64) -> usize {
    let log_term = (2.0 / rho).ln().ceil();
    (multiplier * (d as f64).max(log_term)).ceil().max(1.0) as usize
}

fn scaled_concatenation(ds: &Dataset) -> (nalgebra::DMatrix<f64>, f64) {
    let bound = ds.c_x().hypot(ds.c_y());
    let z = ds.concatenated();
    if bound > 0.0 {
        (z / bound, bound)
    } else {
        (z, 1.0)
    }
}

fn finish(ds: &Dataset, budget: &PrivacyBudget, sketch: &nalgebra::DMatrix<f64>, k: usize, gamma: f64, eta: f64) -> Result<FitResult> {
    let theta = solve_sketched(sketch, ds.d())?;
    let record = IterationRecord {
        iteration: 0,
        clip_count: 0,
        excess_risk: RiskTracker::new(ds).excess(ds, &theta),
        eta,
        sigma: 0.0,
    };
    Ok(FitResult {
        theta: theta.as_slice().to_vec(),
        per_iteration: vec![record],
        privacy_spent: *budget,
        sketch_size: Some(k),
        gamma: Some(gamma),
    })
}

pub fn linmix_fit(ds: &Dataset, budget: &PrivacyBudget, k: usize, rng: &RngStream) -> Result<FitResult> {
    linmix_fit_with(ds, budget, k, rng, &Injection::default())
}

pub fn linmix_fit_with(ds: &Dataset, budget: &PrivacyBudget, k: usize, rng: &RngStream, inj: &Injection) -> Result<FitResult> {
    require_normalized(ds)?;
    if k == 0 {
        return Err(Error::invalid("sketch size must be at least 1"));
    }
    let gamma = calibrate_gamma(budget.epsilon, budget.delta, k as u64)?;
    let eta = gamma / (k as f64).sqrt();
    let tau = (2.0 * (3.0 / budget.delta).max(2.0 / budget.rho).ln()).sqrt();
    let (z, bound) = scaled_concatenation(ds);
    let out = gaussian_mixing_with(&z, 1.0, k, gamma, tau, eta, &rng.substream(TAG_MIX), inj)?;
    let eta_used = if inj.silence_noise { 0.0 } else { out.eta_used * bound };
    finish(ds, budget, &out.matrix, k, gamma, eta_used)
}

/// Largest `k >= k_init` (up to `cap`) with
/// `mixing_epsilon(gamma/sqrt(k), lambda_tilde, k, delta) <= epsilon`.
///
/// Returns `None` if even `k_init` violates the budget.
pub fn largest_sketch_size(gamma: f64, lambda_tilde: f64, k_init: usize, cap: usize, epsilon: f64, delta: f64) -> Result<Option<usize>> {
    if k_init == 0 {
        return Err(Error::invalid("sketch size must be at least 1"));
    }
    let fits = |k: usize| -> Result<bool> {
        Ok(mixing_epsilon(gamma / (k as f64).sqrt(), lambda_tilde, k as u64, delta)? <= epsilon)
    };
    if k_init > cap || !fits(k_init)? {
        return Ok(None);
    }
    let mut lo = k_init;
    let mut hi = loop {
        let next = lo.saturating_mul(2).min(cap);
        if next == lo {
            return Ok(Some(lo));
        }
        if !fits(next)? {
            break next;
        }
        lo = next;
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

pub fn linmix_dynamic_fit(ds: &Dataset, budget: &PrivacyBudget, k_init: usize, rng: &RngStream) -> Result<FitResult> {
    linmix_dynamic_fit_with(ds, budget, k_init, rng, &Injection::default())
}

pub fn linmix_dynamic_fit_with(
    ds: &Dataset,
    budget: &PrivacyBudget,
    k_init: usize,
    rng: &RngStream,
    inj: &Injection,
) -> Result<FitResult> {
    require_normalized(ds)?;
    if k_init == 0 {
        return Err(Error::invalid("sketch size must be at least 1"));
    }
    let (eps, delta) = (budget.epsilon, budget.delta);
    let tau = (8.0 * (3.0 / delta).max(4.0 / budget.rho).ln()).sqrt();
    let gamma = calibrate_gamma(eps, delta, k_init as u64)?;
    let eta = gamma / (k_init as f64).sqrt();
    let (z, bound) = scaled_concatenation(ds);
    let cal = calibrate_mixing_noise_with(&z, 1.0, gamma, tau, eta, &rng.substream(TAG_MIX), inj)?;

    if cal.lambda_tilde >= gamma {
        let cap = ds.n().max(DYNAMIC_K_CAP).max(k_init);
        let k = largest_sketch_size(gamma, cal.lambda_tilde, k_init, cap, eps, delta)?.unwrap_or(k_init);
        let sketch = gaussian_sketch(&z, k, &rng.substream(TAG_SKETCH));
        return finish(ds, budget, &sketch, k, gamma, 0.0);
    }

    let mut sketch = gaussian_sketch(&z, k_init, &rng.substream(TAG_SKETCH));
    let scale = cal.eta_tilde;
    if scale > 0.0 && !inj.silence_noise {
        sketch += normal_matrix(&mut rng.substream(TAG_XI).rng(), k_init, z.ncols()) * scale;
    }
    let eta_used = if inj.silence_noise { 0.0 } else { scale * bound };
    finish(ds, budget, &sketch, k_init, gamma, eta_used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn budget() -> PrivacyBudget {
        PrivacyBudget::new(1.0, 1e-6, 1e-7).unwrap()
    }

    fn ds(seed: u64, zero_y: bool) -> Dataset {
        let mut r = RngStream::new(seed, 7).rng();
        let x = normal_matrix(&mut r, 200, 3);
        let norm = x.row_iter().map(|row| row.norm()).fold(0.0, f64::max);
        let x = x / norm;
        let y = if zero_y {
            DVector::zeros(200)
        } else {
            let y = &x * DVector::from_vec(vec![1.0, -0.5, 0.25]) + normal_matrix(&mut r, 200, 1).column(0) * 0.01;
            let m = y.amax();
            y / m
        };
        Dataset::new(x, y, 1.0, 1.0).unwrap()
    }

    #[test]
    fn default_k_rule() {
        // log(2 / 1e-7) = 16.8 -> 17
        assert_eq!(linmix_default_k(8, 1e-7, 2.5), 43);
        assert_eq!(linmix_default_k(40, 1e-7, 2.5), 100);
        assert_eq!(linmix_default_k(40, 1e-7, 12.5), 500);
    }

    #[test]
    fn zero_response_gives_zero() {
        let d = ds(1, true);
        let fit = linmix_fit_with(&d, &budget(), 60, &RngStream::new(1, 0), &Injection::noiseless()).unwrap();
        assert!(fit.theta.iter().all(|v| *v == 0.0));
        assert_eq!(fit.theta.len(), 3);
        assert_eq!(fit.per_iteration.len(), 1);
        assert_eq!(fit.sketch_size, Some(60));
    }

    #[test]
    fn dynamic_branch_without_noise() {
        let d = ds(2, false);
        let gamma = calibrate_gamma(1.0, 1e-6, 30).unwrap();
        let inj = Injection { lambda_tilde: Some(gamma * 4.0), ..Injection::default() };
        let fit = linmix_dynamic_fit_with(&d, &budget(), 30, &RngStream::new(2, 0), &inj).unwrap();
        assert_eq!(fit.per_iteration[0].eta, 0.0);
        assert!(fit.sketch_size.unwrap() > 30);
    }

    #[test]
    fn dynamic_branch_with_full_noise() {
        let d = ds(3, false);
        let gamma = calibrate_gamma(1.0, 1e-6, 30).unwrap();
        let inj = Injection { lambda_tilde: Some(0.0), ..Injection::default() };
        let fit = linmix_dynamic_fit_with(&d, &budget(), 30, &RngStream::new(3, 0), &inj).unwrap();
        let expected = (gamma * 2.0).sqrt();
        assert!((fit.per_iteration[0].eta - expected).abs() < 1e-12 * expected);
        assert_eq!(fit.sketch_size, Some(30));
    }

    #[test]
    fn largest_k_is_maximal() {
        let gamma = calibrate_gamma(2.0, 1e-5, 10).unwrap();
        let lt = 3.0 * gamma;
        let k = largest_sketch_size(gamma, lt, 10, 100_000, 2.0, 1e-5).unwrap().unwrap();
        let e = |k: usize| mixing_epsilon(gamma / (k as f64).sqrt(), lt, k as u64, 1e-5).unwrap();
        assert!(e(k) <= 2.0);
        assert!(e(k + 1) > 2.0);
        // the cap binds
        assert_eq!(largest_sketch_size(gamma, lt, 10, 12, 2.0, 1e-5).unwrap(), Some(12));
    }

    #[test]
    fn rejects_zero_k() {
        let d = ds(4, false);
        assert!(linmix_fit(&d, &budget(), 0, &RngStream::new(0, 0)).is_err());
        assert!(linmix_dynamic_fit(&d, &budget(), 0, &RngStream::new(0, 0)).is_err());
    }
}
