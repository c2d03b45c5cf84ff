#![allow(dead_code)]

use std::f64::consts::PI;

use dpols::data::Dataset;
use dpols::rng::{normal_vector, RngStream};
use nalgebra::{DMatrix, DVector};

/// `erfc(x)` for `x >= 0` without libm: a positive-term series below 0.5 and
/// Laplace's continued fraction (modified Lentz) above.
pub fn erfc_oracle(x: f64) -> f64 {
    assert!(x >= 0.0);
    if x < 0.5 {
        // erf(x) = 2/sqrt(pi) exp(-x^2) sum 2^n x^(2n+1) / (1*3*...*(2n+1))
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term > 1e-18 * sum {
            n += 1.0;
            term *= 2.0 * x * x / (2.0 * n + 1.0);
            sum += term;
        }
        return 1.0 - 2.0 / PI.sqrt() * (-x * x).exp() * sum;
    }
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for j in 1..200_000 {
        let a = j as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / PI.sqrt() / f
}

pub fn phi_oracle(x: f64) -> f64 {
    let s = x / 2f64.sqrt();
    if x <= 0.0 {
        0.5 * erfc_oracle(-s)
    } else {
        1.0 - 0.5 * erfc_oracle(s)
    }
}

/// Privacy loss of the Gaussian mechanism, from the oracle CDF.
pub fn gaussian_delta_oracle(sens: f64, sigma: f64, eps: f64) -> f64 {
    let a = sens / (2.0 * sigma) - eps * sigma / sens;
    let b = -sens / (2.0 * sigma) - eps * sigma / sens;
    phi_oracle(a) - eps.exp() * phi_oracle(b)
}

/// Smallest eigenvalue of a symmetric matrix by Jacobi rotations.
pub fn jacobi_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min)
}

/// Rows uniform on the unit sphere (so `X` is well conditioned) and a linear
/// response with modest noise, scaled to `|y| <= 1`. The residual keeps
/// `lambda_min([X, Y])` well below `lambda_min(X)`.
pub fn slump_regime(n: usize, d: usize, noise_sd: f64, seed: u64) -> Dataset {
    let root = RngStream::new(seed, 0x51u64);
    let mut r = root.substream(1).rng();
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        let z = normal_vector(&mut r, d);
        x.set_row(i, &(z.transpose() / z.norm()));
    }
    let theta = normal_vector(&mut root.substream(2).rng(), d);
    let theta = &theta / theta.norm();
    let y: DVector<f64> = &x * theta + normal_vector(&mut root.substream(3).rng(), n) * noise_sd;
    let y = &y / y.amax();
    Dataset::new(x, y, 1.0, 1.0).unwrap()
}

/// Isotropic Gaussian design, normalized to unit bounds.
pub fn gaussian_instance(n: usize, d: usize, noise_sd: f64, seed: u64) -> Dataset {
    dpols::experiments::synth_gaussian(n, d, noise_sd, 1.0, seed).unwrap()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
