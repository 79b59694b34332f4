//! Bayesian inference for finite-state hidden Markov models with an unknown
//! number of hidden states.
//!
//! The crate covers exact likelihood evaluation, posterior sampling under
//! Dirichlet-type and exponential-type transition priors, Monte-Carlo
//! distances between finite-dimensional marginals and a posterior estimator
//! of the number of states based on merging and emptying.
//!
//! ```
//! use hmmob::hmm::{log_likelihood, simulate, EmissionModel, HmmParams, InitSpec};
//!
//! let theta = HmmParams::two_state(EmissionModel::gaussian(1.0), 0.3, 0.4, -2.0, 2.0).unwrap();
//! let data = simulate(&theta, 200, 7).unwrap();
//! let ll = log_likelihood(&theta, &data.y, &InitSpec::Stationary).unwrap();
//! assert!(ll.is_finite());
//! ```

pub mod error;
pub mod exec;
pub mod hmm;
pub mod marginals;
pub mod numeric;
pub mod order;
pub mod priors;
pub mod sampler;
pub mod seed;

pub use error::{Error, Result};
pub use exec::Exec;
