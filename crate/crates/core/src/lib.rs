//! Bayesian optimization over hybrid (mixed discrete/continuous) search spaces.
//!
//! The surrogate is a Gaussian process whose covariance is an additive
//! diffusion kernel: each input dimension gets its own base kernel (RBF for
//! continuous dimensions, a closed-form graph diffusion kernel for discrete
//! ones) and all orders of interaction between them are summed, weighted by
//! per-order strengths. Kernel hyper-parameters are marginalized with slice
//! sampling, and the expected-improvement acquisition is optimized by
//! alternating CMA-ES over the continuous block with restarted hill climbing
//! over the discrete block.
//!
//! Module map:
//!
//! - [`space`]: hybrid search spaces, normalization, sampling, neighborhoods
//! - [`kernel`]: base kernels, the additive kernel, Gram matrices, test oracles
//! - [`gp`]: exact GP regression
//! - [`hyper`]: hyper-parameter priors, slice sampling, MAP estimation
//! - [`acq`]: expected improvement and its marginalized form
//! - [`afo`]: acquisition-function optimization
//! - [`bench`]: benchmark objectives
//! - [`runner`]: the BO loop, baselines, ablations, and result files

pub mod acq;
pub mod afo;
pub mod bench;
mod error;
pub mod gp;
pub mod hyper;
pub mod kernel;
pub mod rng;
pub mod runner;
pub mod space;

pub use error::{Error, Result};
pub use space::{HybridPoint, SpaceSpec};
