//! Randomized privacy primitives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::{normal_matrix, normal_vector, RngStream};

pub use crate::linalg::min_eigenvalue;

/// Columns of the sketching matrix generated per block.
const SKETCH_BLOCK: usize = 512;

const TAG_EIGEN: u64 = 0xE16E;
const TAG_SKETCH: u64 = 0x5CE7;
const TAG_XI: u64 = 0x0C51;

/// Deterministic overrides for the random draws of a mechanism or estimator.
///
/// Only tests construct these; the default value injects nothing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Injection {
    /// Normal draw of the eigenvalue release.
    pub z: Option<f64>,
    /// Replaces the released eigenvalue outright.
    pub lambda_tilde: Option<f64>,
    /// Replaces the calibrated mixing-noise scale.
    pub eta_tilde: Option<f64>,
    /// Zeroes every additive noise vector and matrix (xi, zeta, Gaussian
    /// mechanism). Sketch matrices are still drawn.
    pub silence_noise: bool,
}

impl Injection {
    /// No additive noise and zero mixing noise.
    pub fn noiseless() -> Self {
        Self {
            eta_tilde: Some(0.0),
            silence_noise: true,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// Entrywise clip at absolute level `c`, with the number of entries changed.
pub fn clip_vector(v: &DVector<f64>, c: f64) -> (DVector<f64>, usize) {
    let mut clipped = 0;
    let out = v.map(|x| {
        if x.abs() > c {
            clipped += 1;
            c.copysign(x)
        } else {
            x
        }
    });
    (out, clipped)
}

/// Output of the eigenvalue release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingCalibration {
    pub eta_tilde: f64,
    pub lambda_tilde: f64,
}

/// The two clamps of the mixing-noise calibration, given the exact minimal
/// eigenvalue and the normal draw `z`.
pub fn release_mixing_noise(lambda_min: f64, c_x: f64, gamma: f64, tau: f64, eta: f64, z: f64) -> MixingCalibration {
    let c2 = c_x * c_x;
    let lambda_tilde = (lambda_min - eta * c2 * (tau - z)).max(0.0);
    MixingCalibration {
        eta_tilde: (gamma * c2 - lambda_tilde).max(0.0).sqrt(),
        lambda_tilde,
    }
}

fn check_noise_params(gamma: f64, tau: f64, eta: f64) -> Result<()> {
    if gamma < 0.0 || tau < 0.0 || eta < 0.0 {
        return Err(Error::invalid("gamma, tau and eta must be nonnegative"));
    }
    Ok(())
}

/// Privately calibrates the additive noise of a Gaussian sketch from the
/// minimal eigenvalue of `x' x`.
pub fn calibrate_mixing_noise(
    x: &DMatrix<f64>,
    c_x: f64,
    gamma: f64,
    tau: f64,
    eta: f64,
    rng: &RngStream,
) -> Result<MixingCalibration> {
    calibrate_mixing_noise_with(x, c_x, gamma, tau, eta, rng, &Injection::default())
}

pub fn calibrate_mixing_noise_with(
    x: &DMatrix<f64>,
    c_x: f64,
    gamma: f64,
    tau: f64,
    eta: f64,
    rng: &RngStream,
    inj: &Injection,
) -> Result<MixingCalibration> {
    check_noise_params(gamma, tau, eta)?;
    let lambda_min = min_eigenvalue(&x.tr_mul(x))?;
    let z = inj.z.unwrap_or_else(|| rng.substream(TAG_EIGEN).normal());
    let mut cal = release_mixing_noise(lambda_min, c_x, gamma, tau, eta, z);
    if let Some(l) = inj.lambda_tilde {
        cal = release_mixing_noise(l, c_x, gamma, 0.0, 0.0, 0.0);
    }
    if let Some(e) = inj.eta_tilde {
        cal.eta_tilde = e;
    }
    Ok(cal)
}

/// `S x` for `S` with i.i.d. standard-normal entries and `k` rows.
///
/// `S` is generated in column blocks, so memory stays at `O(k * block)`.
pub fn gaussian_sketch(x: &DMatrix<f64>, k: usize, rng: &RngStream) -> DMatrix<f64> {
    let mut r = rng.rng();
    let (n, d) = x.shape();
    let mut out = DMatrix::zeros(k, d);
    let mut start = 0;
    while start < n {
        let width = SKETCH_BLOCK.min(n - start);
        let s = normal_matrix(&mut r, k, width);
        out.gemm(1.0, &s, &x.rows(start, width), 1.0);
        start += width;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SketchOutput {
    /// `S x + eta_used * c_x * xi`, k rows.
    pub matrix: DMatrix<f64>,
    pub eta_used: f64,
    pub lambda_tilde: f64,
}

/// Gaussian mixing mechanism: a `k`-row Gaussian sketch of `x` plus
/// privately calibrated additive noise.
pub fn gaussian_mixing(
    x: &DMatrix<f64>,
    c_x: f64,
    k: usize,
    gamma: f64,
    tau: f64,
    eta: f64,
    rng: &RngStream,
) -> Result<SketchOutput> {
    gaussian_mixing_with(x, c_x, k, gamma, tau, eta, rng, &Injection::default())
}

#[allow(clippy::too_many_arguments)]
pub fn gaussian_mixing_with(
    x: &DMatrix<f64>,
    c_x: f64,
    k: usize,
    gamma: f64,
    tau: f64,
    eta: f64,
    rng: &RngStream,
    inj: &Injection,
) -> Result<SketchOutput> {
    if k == 0 {
        return Err(Error::invalid("sketch size must be at least 1"));
    }
    let cal = calibrate_mixing_noise_with(x, c_x, gamma, tau, eta, rng, inj)?;
    let mut matrix = gaussian_sketch(x, k, &rng.substream(TAG_SKETCH));
    if !inj.silence_noise && cal.eta_tilde > 0.0 {
        let xi = normal_matrix(&mut rng.substream(TAG_XI).rng(), k, x.ncols());
        matrix += xi * (cal.eta_tilde * c_x);
    }
    Ok(SketchOutput {
        matrix,
        eta_used: cal.eta_tilde,
        lambda_tilde: cal.lambda_tilde,
    })
}

/// `v + sigma * zeta` with `zeta` standard normal.
pub fn gaussian_mechanism(v: &DVector<f64>, sigma: f64, rng: &RngStream) -> Result<DVector<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    Ok(v + normal_vector(&mut rng.rng(), v.len()) * sigma)
}

/// Symmetric matrix whose upper triangle (with diagonal) is i.i.d. standard
/// normal, mirrored below.
pub fn symmetric_normal_matrix(d: usize, rng: &RngStream) -> DMatrix<f64> {
    let mut r = rng.rng();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
