//! Locally differentially private estimation of discrete distributions.
//!
//! The crate covers the full pipeline for the `ℓ₂²` minimax problem under
//! ε-local differential privacy:
//!
//! - [`mechanisms`]: subset-selection, k-RR and k-RAPPOR constructions, LDP
//!   verification and output-alphabet reduction;
//! - [`estimation`]: seeded privatized sampling and the unbiased estimators;
//! - [`risk`]: closed-form risk, the optimal subset size `d*`, the constant
//!   `M(k, ε)` and Monte Carlo risk estimation;
//! - [`lower_bound`]: the Fisher-information matrix Φ, its trace functional,
//!   the separation constant δ(Q) and the two-point testing bound;
//! - [`bayes_lab`]: exact grid posteriors near the uniform distribution, used
//!   to check the Gaussian approximation and the Bayes-risk identity at small k.

// NaN-rejecting comparisons and index loops are deliberate in the numerical code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bayes_lab;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod lower_bound;
pub mod mechanisms;
pub mod numeric;
pub mod risk;

pub use error::{Error, Result};
pub use mechanisms::{Distribution, Mechanism, MechanismLabel, ReducedMechanism};
