//! Generalizing randomized-trial treatment effects to a target population
//! with categorical covariates.
//!
//! The crate has four layers:
//!
//! - [`domain`] — the data-generating process ([`DgpSpec`]), sampled
//!   datasets, and the trial/target estimands.
//! - [`estimators`] — Horvitz-Thompson, difference-in-means,
//!   post-stratification, and the inverse-propensity-of-sampling-weighting
//!   (IPSW) family: oracle, semi-oracle, and estimated weights, each with
//!   either a known or a per-stratum estimated treatment probability.
//! - [`theory`] — exact finite-sample bias and variance of every IPSW
//!   variant, risk bounds, asymptotic variances per sample-size regime, and
//!   the variance effect of extra adjustment covariates.
//! - [`simulate`] — a seeded, replicable Monte Carlo harness that compares
//!   empirical estimator behavior against the exact formulas.
//!
//! [`scenarios`] builds the ready-made setups (two-stratum toy problem, its
//! extended-covariate variants, and a semi-synthetic critical-care model).
//!
//! The crate is `no_std`-compatible (requires `alloc`); the `std` feature is
//! on by default and `parallel` adds a rayon-backed Monte Carlo driver.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod domain;
pub mod estimators;
mod math;
pub mod scenarios;
pub mod simulate;
pub mod theory;

pub use domain::{DgpSpec, DgpViolation, ExtendedDgpSpec, Stratum, StratumId, TargetSample, TrialSample};
pub use estimators::{Estimate, EstimatorError, EstimatorTag};
pub use simulate::{McConfig, McReport};
pub use theory::{AsymptoticRegime, TargetSize, TheoryError, TheoryReport};
