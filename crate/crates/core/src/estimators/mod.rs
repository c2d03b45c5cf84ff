//! Private least-squares estimators.
//!
//! Every estimator takes a normalized [`Dataset`], a [`PrivacyBudget`] and an
//! [`RngStream`], and returns a [`FitResult`]. The `*_with` variants accept an
//! [`Injection`](crate::mechanisms::Injection) so tests can pin the random
//! draws; the CLI and harness only call the plain entry points.

mod adassp;
mod dpgd;
mod ihm;
mod linmix;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use adassp::{adassp_fit, adassp_fit_with, AdasspScales};
pub use dpgd::{dpgd_fit, dpgd_fit_with, DpgdConfig};
pub use ihm::{ihm_fit, ihm_fit_with, ihm_noise, ihm_step, GaussianCalibration, IhmConfig, IhmNoise, MixingEtaRule};
pub use linmix::{
    largest_sketch_size, linmix_default_k, linmix_dynamic_fit, linmix_dynamic_fit_with, linmix_fit,
    linmix_fit_with,
};

use crate::accounting::PrivacyBudget;
use crate::data::{loss, ols_fit, Dataset};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::RngStream;

/// Slack allowed on the unit row-norm precondition.
const UNIT_BOUND_SLACK: f64 = 1e-9;

/// Diagnostics of one iteration (or of the single step of a one-shot method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Entries (or samples) changed by clipping. Not private.
    pub clip_count: usize,
    /// `L(theta_t) - L(theta*)` after the step. Not private.
    pub excess_risk: f64,
    pub eta: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub per_iteration: Vec<IterationRecord>,
    pub privacy_spent: PrivacyBudget,
    /// Sketch size actually used, for sketching methods.
    pub sketch_size: Option<usize>,
    /// Calibrated sketch-noise floor, for sketching methods.
    pub gamma: Option<f64>,
}

impl FitResult {
    pub fn theta_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.theta)
    }
}

/// Identifies one of the five estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Ihm,
    LinMix,
    LinMixDyn,
    AdaSsp,
    DpGd,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ihm, Method::LinMix, Method::LinMixDyn, Method::AdaSsp, Method::DpGd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ihm => "ihm",
            Method::LinMix => "linmix",
            Method::LinMixDyn => "linmix-dyn",
            Method::AdaSsp => "adassp",
            Method::DpGd => "dpgd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// User-facing knobs shared by the CLI and the harness. `None` selects each
/// method's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodOptions {
    pub iterations: Option<u32>,
    /// Absolute sketch size.
    pub k: Option<usize>,
    /// Multiplier applied to the default sketch-size rule (e.g. 2.5, 12.5).
    pub k_multiplier: Option<f64>,
    pub clip: Option<f64>,
    pub include_ridge_term: bool,
    pub learning_rate: Option<f64>,
}

/// Runs `method` with the given options.
pub fn fit_method(method: Method, ds: &Dataset, budget: &PrivacyBudget, opts: &MethodOptions, rng: &RngStream) -> Result<FitResult> {
    match method {
        Method::Ihm => {
            let mut cfg = IhmConfig::default();
            if let Some(t) = opts.iterations {
                cfg.iterations = t;
            }
            cfg.k = opts.k;
            if let Some(m) = opts.k_multiplier {
                cfg.k_multiplier = m;
            }
            cfg.clip_c = opts.clip;
            cfg.include_ridge_term = opts.include_ridge_term;
            ihm_fit(ds, budget, &cfg, rng)
        }
        Method::LinMix | Method::LinMixDyn => {
            let k = match opts.k {
                Some(k) => k,
                None => linmix_default_k(ds.d(), budget.rho, opts.k_multiplier.unwrap_or(2.5)),
            };
            if method == Method::LinMix {
                linmix_fit(ds, budget, k, rng)
            } else {
                linmix_dynamic_fit(ds, budget, k, rng)
            }
        }
        Method::AdaSsp => adassp_fit(ds, budget, budget.rho, rng, true),
        Method::DpGd => {
            let mut cfg = DpgdConfig::default();
            if let Some(t) = opts.iterations {
                cfg.iterations = t;
            }
            cfg.clip_c = opts.clip;
            if let Some(lr) = opts.learning_rate {
                cfg.learning_rate = lr;
            }
            dpgd_fit(ds, budget, &cfg, rng)
        }
    }
}

fn require_normalized(ds: &Dataset) -> Result<()> {
    ds.ensure_overdetermined()?;
    if ds.c_x() > 1.0 + UNIT_BOUND_SLACK {
        return Err(Error::invalid(format!(
            "estimators expect covariates normalized to unit row norm, c_x = {}",
            ds.c_x()
        )));
    }
    Ok(())
}

/// Tracks `L(theta) - L(theta*)` for the per-iteration diagnostics.
struct RiskTracker {
    optimum: f64,
}

impl RiskTracker {
    fn new(ds: &Dataset) -> Self {
        let star = ols_fit(ds, 0.0);
        Self {
            optimum: loss(ds.x(), ds.y(), &star),
        }
    }

    fn excess(&self, ds: &Dataset, theta: &DVector<f64>) -> f64 {
        loss(ds.x(), ds.y(), theta) - self.optimum
    }
}

/// `(A'A)^{-1} A'b` from the split columns of a sketched concatenation.
fn solve_sketched(sketch: &DMatrix<f64>, d: usize) -> Result<DVector<f64>> {
    let xs = sketch.columns(0, d);
    let ys = sketch.column(d);
    let h = xs.tr_mul(&xs);
    let rhs = xs.tr_mul(&ys);
    linalg::solve_spd(&h, &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("ols".parse::<Method>(), Err(Error::UnknownMethod(_))));
    }
}
