//! Posterior sampling by data augmentation over the hidden path.

mod chain;
mod emissions;
mod ffbs;
mod rows;
mod trace_io;

pub use chain::{
    chain_seed, run_chain, run_chains, sweep, AcceptRates, ChainInit, PosteriorModel, PosteriorTrace, SamplerConfig,
    ROW_ACCEPT_BAND,
};
pub use emissions::{emission_posterior, gibbs_emissions, EmissionPosterior};
pub use ffbs::{ffbs_states, transition_counts};
pub use rows::{exponential_row_step, gibbs_rows, mh_row_log_ratio, mh_rows_exponential, update_rows, update_rows_dirichlet};
pub use trace_io::{
    csv_header, fmt_f64, load_trace, read_trace_csv, save_trace, sidecar_for, write_trace_csv, TraceSidecar, HASH_PREFIX,
};
