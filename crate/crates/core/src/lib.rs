//! Trust-adaptive differential privacy with a reverse manifold embedding.
//!
//! Rows are clipped to an L2 ball, perturbed with Gaussian noise calibrated
//! to a trust-dependent budget, then mapped coordinate-wise through
//! `v -> (v cos av, v sin av)`. The crate also ships comparison baselines,
//! a membership/attribute/reconstruction attack suite, utility metrics,
//! exact inversion combinatorics and an experiment runner.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar to `f64`, which is what the CLI uses.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod baselines;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod learners;
pub mod mechanism;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod theory;

pub use attacks::{full_attack_suite, AttackConfig, AttackReport};
pub use baselines::{apply_baseline, BaselineKind, BaselineParams, BaselineSpec};
pub use dataset::{clip_l2, ClipConfig, RawDataset};
pub use error::{Error, Result};
pub use mechanism::{
    gaussian_perturb, noise_sigma, protect, protect_per_record, rme_embed, trust_budget, AlphaSchedule,
    BudgetConfig, ProtectedData, TrustScore,
};
pub use scalar::Real;

pub type Matrix = ndarray::Array2<f64>;
pub type Dataset = RawDataset<f64>;
pub type Budget = BudgetConfig<f64>;
pub type Trust = TrustScore<f64>;
pub type Protected = ProtectedData<f64>;
pub type Baseline = BaselineSpec<f64>;
