//! Synthetic regression instances.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::data::{normalize, Dataset};
use crate::error::{Error, Result};
use crate::rng::{normal_matrix, normal_vector, RngStream};

const TAG_FEATURES: u64 = 1;
const TAG_ROTATION: u64 = 2;
const TAG_THETA: u64 = 3;
const TAG_NOISE: u64 = 4;
const TAG_LATENT: u64 = 5;
const TAG_W1: u64 = 6;
const TAG_W2: u64 = 7;

/// Initializer of the random perceptron, recorded with generated data.
pub const MLP_INITIALIZER: &str = "weights iid N(0, 1/fan_in), no bias, tanh hidden layer, hidden width = out_dim";

/// Desk-scale default sample size of [`synth_mlp_lowrank`].
pub const MLP_DEFAULT_N: usize = 1 << 14;

fn unit_vector(rng: &mut impl Rng, d: usize) -> DVector<f64> {
    loop {
        let v = normal_vector(rng, d);
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

fn finish(x: DMatrix<f64>, y: DVector<f64>) -> Result<Dataset> {
    let raw = Dataset::from_observed(x, y)?;
    let (ds, _, _) = normalize(&raw, &raw)?;
    Ok(ds)
}

/// Gaussian design with population condition number `cond_target`, random
/// orientation, and a linear response with unit-norm coefficients plus
/// `noise_sd` Gaussian noise. The result is normalized to unit bounds.
pub fn synth_gaussian(n: usize, d: usize, noise_sd: f64, cond_target: f64, seed: u64) -> Result<Dataset> {
    if d == 0 || n < d {
        return Err(Error::Underdetermined { n, d });
    }
    if !(cond_target >= 1.0) || !(noise_sd >= 0.0) {
        return Err(Error::invalid("need cond_target >= 1 and noise_sd >= 0"));
    }
    let root = RngStream::new(seed, 0);
    let z = normal_matrix(&mut root.substream(TAG_FEATURES).rng(), n, d);
    // column scales spanning sqrt(cond_target), so the covariance spans cond_target
    let scales = DVector::from_fn(d, |j, _| {
        if d == 1 {
            1.0
        } else {
            cond_target.powf(-0.5 * j as f64 / (d - 1) as f64)
        }
    });
    let rotation = normal_matrix(&mut root.substream(TAG_ROTATION).rng(), d, d).qr().q();
    let x = (z * DMatrix::from_diagonal(&scales)) * rotation.transpose();
    let theta = unit_vector(&mut root.substream(TAG_THETA).rng(), d);
    let mut y = &x * theta;
    if noise_sd > 0.0 {
        y += normal_vector(&mut root.substream(TAG_NOISE).rng(), n) * noise_sd;
    }
    finish(x, y)
}

/// Features from a random two-layer perceptron applied to one-dimensional
/// Gaussian latents, which makes the design close to low rank.
pub fn synth_mlp_lowrank(n: usize, out_dim: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if out_dim == 0 || n < out_dim {
        return Err(Error::Underdetermined { n, d: out_dim });
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::invalid("noise_sd must be nonnegative"));
    }
    let root = RngStream::new(seed, 1);
    let hidden = out_dim;
    let latent = normal_vector(&mut root.substream(TAG_LATENT).rng(), n);
    // fan_in of the first layer is 1
    let w1 = normal_vector(&mut root.substream(TAG_W1).rng(), hidden);
    let w2 = normal_matrix(&mut root.substream(TAG_W2).rng(), out_dim, hidden) / (hidden as f64).sqrt();
    let h = DMatrix::from_fn(n, hidden, |i, j| (latent[i] * w1[j]).tanh());
    let x = h * w2.transpose();
    let theta = unit_vector(&mut root.substream(TAG_THETA).rng(), out_dim);
    let mut y = &x * theta;
    if noise_sd > 0.0 {
        y += normal_vector(&mut root.substream(TAG_NOISE).rng(), n) * noise_sd;
    }
    finish(x, y)
}
