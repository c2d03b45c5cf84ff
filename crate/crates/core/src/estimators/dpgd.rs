//! Noisy full-batch gradient descent with per-sample clipping.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{require_normalized, FitResult, IterationRecord, RiskTracker};
use crate::accounting::{dpgd_sigma, PrivacyBudget};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mechanisms::Injection;
use crate::rng::{normal_vector, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpgdConfig {
    pub iterations: u32,
    /// Per-sample gradient clipping level; `None` uses the dataset's `c_y`.
    pub clip_c: Option<f64>,
    pub learning_rate: f64,
}

impl Default for DpgdConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            clip_c: None,
            learning_rate: 0.25,
        }
    }
}

pub fn dpgd_fit(ds: &Dataset, budget: &PrivacyBudget, cfg: &DpgdConfig, rng: &RngStream) -> Result<FitResult> {
    dpgd_fit_with(ds, budget, cfg, rng, &Injection::default())
}

pub fn dpgd_fit_with(ds: &Dataset, budget: &PrivacyBudget, cfg: &DpgdConfig, rng: &RngStream, inj: &Injection) -> Result<FitResult> {
    require_normalized(ds)?;
    if cfg.iterations == 0 {
        return Err(Error::invalid("T must be at least 1"));
    }
    let clip_c = cfg.clip_c.unwrap_or(ds.c_y());
    if !(clip_c > 0.0) {
        return Err(Error::invalid(format!("clipping level must be positive, got {clip_c}")));
    }
    if !(cfg.learning_rate >= 0.0) {
        return Err(Error::invalid("learning rate must be nonnegative"));
    }
    let (x, y) = (ds.x(), ds.y());
    let (n, d) = (ds.n(), ds.d());
    let sigma = if inj.silence_noise {
        0.0
    } else {
        dpgd_sigma(cfg.iterations, clip_c, n, budget.epsilon, budget.delta)
    };

    let tracker = RiskTracker::new(ds);
    let mut theta = DVector::zeros(d);
    let mut records = Vec::with_capacity(cfg.iterations as usize);
    for t in 0..cfg.iterations as usize {
        let residual = y - x * &theta;
        let mut grad = DVector::zeros(d);
        let mut clip_count = 0;
        for (i, row) in x.row_iter().enumerate() {
            // -x_i r_i has norm |r_i| ||x_i||
            let norm = residual[i].abs() * row.norm();
            let scale = if norm > clip_c {
                clip_count += 1;
                clip_c / norm
            } else {
                1.0
            };
            grad -= row.transpose() * (residual[i] * scale);
        }
        grad /= n as f64;
        let mut step = -grad;
        if sigma > 0.0 {
            step += normal_vector(&mut rng.substream(t as u64).rng(), d) * sigma;
        }
        theta += step * cfg.learning_rate;
        records.push(IterationRecord {
            iteration: t,
            clip_count,
            excess_risk: tracker.excess(ds, &theta),
            eta: 0.0,
            sigma,
        });
    }
    Ok(FitResult {
        theta: theta.as_slice().to_vec(),
        per_iteration: records,
        privacy_spent: *budget,
        sketch_size: None,
        gamma: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn budget() -> PrivacyBudget {
        PrivacyBudget::new(1.0, 1e-6, 1e-7).unwrap()
    }

    #[test]
    fn zero_learning_rate_stays_at_origin() {
        let ds = Dataset::new(DMatrix::identity(3, 3), DVector::from_element(3, 1.0), 1.0, 1.0).unwrap();
        let cfg = DpgdConfig { iterations: 5, learning_rate: 0.0, ..DpgdConfig::default() };
        let fit = dpgd_fit_with(&ds, &budget(), &cfg, &RngStream::new(0, 0), &Injection::noiseless()).unwrap();
        assert!(fit.theta.iter().all(|v| *v == 0.0));
        assert_eq!(fit.per_iteration.len(), 5);
    }

    #[test]
    fn one_step_hand_computation() {
        let ds = Dataset::new(DMatrix::identity(2, 2), DVector::from_element(2, 1.0), 1.0, 1.0).unwrap();
        let cfg = DpgdConfig { iterations: 1, clip_c: Some(100.0), learning_rate: 1.0 };
        let fit = dpgd_fit_with(&ds, &budget(), &cfg, &RngStream::new(0, 0), &Injection::noiseless()).unwrap();
        assert_eq!(fit.theta, vec![0.5, 0.5]);
        assert_eq!(fit.per_iteration[0].clip_count, 0);
    }

    #[test]
    fn clipping_bounds_each_gradient() {
        let ds = Dataset::new(DMatrix::identity(2, 2), DVector::from_element(2, 1.0), 1.0, 1.0).unwrap();
        let cfg = DpgdConfig { iterations: 1, clip_c: Some(0.25), learning_rate: 1.0 };
        let fit = dpgd_fit_with(&ds, &budget(), &cfg, &RngStream::new(0, 0), &Injection::noiseless()).unwrap();
        assert_eq!(fit.theta, vec![0.125, 0.125]);
        assert_eq!(fit.per_iteration[0].clip_count, 2);
    }
}
