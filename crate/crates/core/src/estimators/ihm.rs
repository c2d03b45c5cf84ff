//! Iterative Hessian mixing.
//!
//! Each iteration sketches only the Hessian term with a fresh Gaussian
//! mixing sketch and releases the (clipped) gradient with the Gaussian
//! mechanism:
//!
//! ```text
//! X_t   = S_t X + eta xi_t
//! G_t   = X' clip_C(Y - X theta_t) [- eta^2 theta_t] + sigma zeta_t
//! theta_{t+1} = theta_t + ((1/k) X_t' X_t)^{-1} G_t
//! ```
//!
//! The budget is split as (eps/2, delta/2) for the sketches (calibrated at
//! total sketch size kT), (eps/2, delta/4) for the T gradient releases and
//! delta/4 for the event that the released eigenvalue overshoots.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{require_normalized, FitResult, IterationRecord, RiskTracker};
use crate::accounting::{
    analytic_gaussian_sigma, calibrate_gamma, composed_gaussian_sigma, eigen_release_tau, PrivacyBudget,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mechanisms::{calibrate_mixing_noise_with, clip_vector, gaussian_sketch, Injection};
use crate::rng::{combine_ids, normal_matrix, normal_vector, RngStream};

const TAG_EIGEN: u64 = 1;
const TAG_SKETCH: u64 = 2;
const TAG_XI: u64 = 3;
const TAG_ZETA: u64 = 4;

/// Scale passed to the eigenvalue release.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MixingEtaRule {
    /// `gamma / sqrt(k)`.
    #[default]
    PerSketch,
    /// `gamma / sqrt(k T)`, matching the total sketch size used for calibration.
    TotalSketch,
}

/// How the gradient-release noise is solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GaussianCalibration {
    /// T-fold RDP composition converted at delta/4, bisected to eps/2.
    #[default]
    Rdp,
    /// Exact analytic Gaussian mechanism with sensitivity `sqrt(T) C`.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IhmConfig {
    pub iterations: u32,
    /// Explicit sketch size; `None` uses `k_multiplier * max{d, ceil(log(4T/rho))}`.
    pub k: Option<usize>,
    pub k_multiplier: f64,
    /// Clipping level; `None` uses the dataset's `c_y`.
    pub clip_c: Option<f64>,
    /// Whether `-eta^2 theta_t` enters the gradient release.
    pub include_ridge_term: bool,
    pub eta_rule: MixingEtaRule,
    pub gaussian: GaussianCalibration,
}

impl Default for IhmConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            k: None,
            k_multiplier: 6.0,
            clip_c: None,
            include_ridge_term: false,
            eta_rule: MixingEtaRule::default(),
            gaussian: GaussianCalibration::default(),
        }
    }
}

impl IhmConfig {
    pub fn sketch_size(&self, d: usize, rho: f64) -> usize {
        self.k.unwrap_or_else(|| {
            let log_term = (4.0 * f64::from(self.iterations) / rho).ln().ceil();
            (self.k_multiplier * (d as f64).max(log_term)).ceil() as usize
        })
    }
}

/// Noise parameters the estimator will use for a given shape and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IhmNoise {
    pub k: usize,
    pub iterations: u32,
    pub clip_c: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub tau: f64,
    /// Scale handed to the eigenvalue release.
    pub eta: f64,
}

pub fn ihm_noise(d: usize, budget: &PrivacyBudget, cfg: &IhmConfig, clip_c: f64) -> Result<IhmNoise> {
    if cfg.iterations == 0 {
        return Err(Error::invalid("T must be at least 1"));
    }
    if !(clip_c > 0.0) {
        return Err(Error::invalid(format!("clipping level must be positive, got {clip_c}")));
    }
    let k = cfg.sketch_size(d, budget.rho);
    if k == 0 {
        return Err(Error::invalid("sketch size must be at least 1"));
    }
    let t = cfg.iterations;
    let (eps, delta) = (budget.epsilon, budget.delta);
    let total = k as u64 * u64::from(t);
    let gamma = calibrate_gamma(eps / 2.0, delta / 2.0, total)?;
    let sigma = match cfg.gaussian {
        GaussianCalibration::Rdp => composed_gaussian_sigma(clip_c, t, eps / 2.0, delta / 4.0)?,
        GaussianCalibration::Analytic => {
            analytic_gaussian_sigma(f64::from(t).sqrt() * clip_c, eps / 2.0, delta / 4.0)?
        }
    };
    let eta = match cfg.eta_rule {
        MixingEtaRule::PerSketch => gamma / (k as f64).sqrt(),
        MixingEtaRule::TotalSketch => gamma / (total as f64).sqrt(),
    };
    Ok(IhmNoise {
        k,
        iterations: t,
        clip_c,
        gamma,
        sigma,
        tau: eigen_release_tau(delta, budget.rho),
        eta,
    })
}

/// One Newton-sketch step `theta + ((1/k) S'S)^{-1} grad` for a `k`-row sketch
/// `S`: the minimizer of `||S(v - theta)||^2 / (2k) - v' grad`.
pub fn ihm_step(sketch: &DMatrix<f64>, theta: &DVector<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let k = sketch.nrows();
    if k == 0 || sketch.ncols() != theta.len() || grad.len() != theta.len() {
        return Err(Error::Dimension("sketch, iterate and gradient disagree".into()));
    }
    let hessian = sketch.tr_mul(sketch) / k as f64;
    Ok(theta + linalg::solve_spd(&hessian, grad)?)
}

pub fn ihm_fit(ds: &crate::data::Dataset, budget: &PrivacyBudget, cfg: &IhmConfig, rng: &RngStream) -> Result<FitResult> {
    ihm_fit_with(ds, budget, cfg, rng, &Injection::default())
}

pub fn ihm_fit_with(
    ds: &crate::data::Dataset,
    budget: &PrivacyBudget,
    cfg: &IhmConfig,
    rng: &RngStream,
    inj: &Injection,
) -> Result<FitResult> {
    require_normalized(ds)?;
    let clip_c = cfg.clip_c.unwrap_or(ds.c_y());
    let noise = ihm_noise(ds.d(), budget, cfg, clip_c)?;
    let (x, y) = (ds.x(), ds.y());
    let (k, d) = (noise.k, ds.d());

    let cal = calibrate_mixing_noise_with(x, 1.0, noise.gamma, noise.tau, noise.eta, &rng.substream(TAG_EIGEN), inj)?;
    let eta = cal.eta_tilde;
    let sigma = if inj.silence_noise { 0.0 } else { noise.sigma };

    let tracker = RiskTracker::new(ds);
    let mut theta = DVector::zeros(d);
    let mut records = Vec::with_capacity(noise.iterations as usize);
    for t in 0..noise.iterations as usize {
        let step_rng = rng.substream(combine_ids(&[TAG_SKETCH, t as u64]));
        let mut sketch = gaussian_sketch(x, k, &step_rng);
        if eta > 0.0 && !inj.silence_noise {
            let xi = normal_matrix(&mut step_rng.substream(TAG_XI).rng(), k, d);
            sketch += xi * eta;
        }

        let (residual, clip_count) = clip_vector(&(y - x * &theta), clip_c);
        let mut grad = x.tr_mul(&residual);
        if cfg.include_ridge_term {
            grad -= &theta * (eta * eta);
        }
        if sigma > 0.0 {
            grad += normal_vector(&mut step_rng.substream(TAG_ZETA).rng(), d) * sigma;
        }

        theta = ihm_step(&sketch, &theta, &grad)?;
        records.push(IterationRecord {
            iteration: t,
            clip_count,
            excess_risk: tracker.excess(ds, &theta),
            eta,
            sigma,
        });
    }
    Ok(FitResult {
        theta: theta.as_slice().to_vec(),
        per_iteration: records,
        privacy_spent: *budget,
        sketch_size: Some(k),
        gamma: Some(noise.gamma),
    })
}
