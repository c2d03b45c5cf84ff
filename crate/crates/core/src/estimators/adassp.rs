//! Adaptive sufficient-statistics perturbation.
//!
//! The budget is split evenly over three releases: the minimal eigenvalue of
//! `X'X`, the Gram matrix `X'X` and the cross term `X'Y`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{require_normalized, FitResult, IterationRecord, RiskTracker};
use crate::accounting::{analytic_gaussian_sigma, PrivacyBudget};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mechanisms::{min_eigenvalue, symmetric_normal_matrix, Injection};
use crate::rng::{normal_vector, RngStream};

const TAG_EIGEN: u64 = 1;
const TAG_XX: u64 = 2;
const TAG_XY: u64 = 3;

/// Noise scales of the three releases and the ridge coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdasspScales {
    /// Scale of the minimal-eigenvalue release.
    pub lambda: f64,
    pub xx: f64,
    pub xy: f64,
    /// High-probability shift subtracted from the released eigenvalue.
    pub shift: f64,
    /// Regularization target before subtracting the released eigenvalue.
    pub ridge_target: f64,
}

impl AdasspScales {
    /// With `exact_noise`, each scale is the analytic Gaussian calibration at
    /// `(eps/3, delta/3)`. Otherwise the classical bound
    /// `sqrt(2 log(6/delta)) * sensitivity / (eps/3)` is used.
    pub fn new(d: usize, budget: &PrivacyBudget, rho: f64, c_x: f64, c_y: f64, exact_noise: bool) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")));
        }
        if !(c_x > 0.0 && c_y > 0.0) {
            return Err(Error::invalid("row bounds must be positive"));
        }
        let (eps3, delta3) = (budget.epsilon / 3.0, budget.delta / 3.0);
        let shift = (2.0 * (6.0 / budget.delta).ln()).sqrt();
        let (lambda, xy) = if exact_noise {
            (
                analytic_gaussian_sigma(c_x * c_x, eps3, delta3)?,
                analytic_gaussian_sigma(c_x * c_y, eps3, delta3)?,
            )
        } else {
            (shift * c_x * c_x / eps3, shift * c_x * c_y / eps3)
        };
        let df = d as f64;
        let ridge_target = (df * (2.0 * df * df / rho).ln()).sqrt() * lambda;
        Ok(Self {
            lambda,
            xx: lambda,
            xy,
            shift,
            ridge_target,
        })
    }
}

pub fn adassp_fit(ds: &Dataset, budget: &PrivacyBudget, rho: f64, rng: &RngStream, exact_noise: bool) -> Result<FitResult> {
    adassp_fit_with(ds, budget, rho, rng, exact_noise, &Injection::default())
}

/// An injected `lambda_tilde` replaces the final ridge coefficient.
pub fn adassp_fit_with(
    ds: &Dataset,
    budget: &PrivacyBudget,
    rho: f64,
    rng: &RngStream,
    exact_noise: bool,
    inj: &Injection,
) -> Result<FitResult> {
    require_normalized(ds)?;
    let (x, y) = (ds.x(), ds.y());
    let d = ds.d();
    let s = AdasspScales::new(d, budget, rho, ds.c_x().max(f64::MIN_POSITIVE), ds.c_y().max(f64::MIN_POSITIVE), exact_noise)?;

    let gram = x.tr_mul(x);
    let ridge = match inj.lambda_tilde {
        Some(l) => l,
        None => {
            let z = inj.z.unwrap_or_else(|| rng.substream(TAG_EIGEN).normal());
            let released = (min_eigenvalue(&gram)? + s.lambda * (z - s.shift)).max(0.0);
            (s.ridge_target - released).max(0.0)
        }
    };

    let mut noisy_gram = gram;
    let mut noisy_xy = x.tr_mul(y);
    if !inj.silence_noise {
        noisy_gram += symmetric_normal_matrix(d, &rng.substream(TAG_XX)) * s.xx;
        noisy_xy += normal_vector(&mut rng.substream(TAG_XY).rng(), d) * s.xy;
    }
    let theta = regularized_solve(noisy_gram, &noisy_xy, ridge)?;

    let record = IterationRecord {
        iteration: 0,
        clip_count: 0,
        excess_risk: RiskTracker::new(ds).excess(ds, &theta),
        eta: if inj.silence_noise { 0.0 } else { s.xx },
        sigma: if inj.silence_noise { 0.0 } else { s.xy },
    };
    Ok(FitResult {
        theta: theta.as_slice().to_vec(),
        per_iteration: vec![record],
        privacy_spent: *budget,
        sketch_size: None,
        gamma: None,
    })
}

/// `(H + ridge I)^{-1} b`. Without a ridge the noiseless Gram may be singular,
/// in which case the minimum-norm solution is returned.
fn regularized_solve(mut h: DMatrix<f64>, b: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    if ridge > 0.0 {
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        return linalg::solve_spd(&h, b);
    }
    match linalg::solve_spd(&h, b) {
        Ok(v) => Ok(v),
        Err(e) if e.is_solver_failure() => Ok(linalg::min_norm_lstsq(&h, b)),
        Err(e) => Err(e),
    }
}
