//! Differentially private ordinary least squares.
//!
//! The crate implements iterative Hessian mixing together with the
//! baselines it is usually compared against (linear mixing, its dynamic
//! sketch-size variant, AdaSSP and DP-GD), the privacy accounting they rely
//! on, and a small experiment harness.
//!
//! ```no_run
//! use dpols::accounting::PrivacyBudget;
//! use dpols::estimators::{ihm_fit, IhmConfig};
//! use dpols::experiments::synth_gaussian;
//! use dpols::rng::RngStream;
//!
//! let ds = synth_gaussian(2000, 8, 0.1, 2.0, 7).unwrap();
//! let budget = PrivacyBudget::new(1.0, 1e-6, 1e-7).unwrap();
//! let fit = ihm_fit(&ds, &budget, &IhmConfig::default(), &RngStream::new(7, 0)).unwrap();
//! println!("{:?}", fit.theta);
//! ```

pub mod accounting;
pub mod data;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod mechanisms;
pub mod rng;

pub use error::{Error, Result};
