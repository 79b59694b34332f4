//! Finite-state hidden Markov models: parameters, stationary analysis,
//! exact likelihood, simulation and filtering.

mod emission;
mod jacobian;
mod likelihood;
mod params;
mod simulate;
mod stationary;

pub use emission::EmissionModel;
pub use jacobian::stationary_jacobian_fd;
pub use likelihood::{
    forward, init_robustness_bound, init_robustness_bound_minorization, initial_law, log_likelihood,
    log_likelihood_from_predictions, prediction_filter, ForwardPass, InitSpec,
};
pub use params::{all_permutations, HmmParams, ObservationSequence, ROW_SUM_TOL};
pub use simulate::{simulate, simulate_with};
pub use stationary::{mixing_profile, residual, stationary_distribution, two_state_mixing, MixingProfile, StationaryDist};

pub(crate) use simulate::sample_categorical;
