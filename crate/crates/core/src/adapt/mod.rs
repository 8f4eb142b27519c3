//! Instance-specific replacement pmfs and their quantized signaling.

mod center;
mod gmm;
mod quant;
mod select;

pub use center::{center_bin_pmf, center_delta, compute_center_beta, rebuild_center_bin_freqs, CenterBinParam};
pub use gmm::{fit_gmm, fit_zero_mean_gaussian, log_likelihood, truncated_gmm_pmf, Component, GmmFit, GmmParams};
pub use quant::{QuantGrid, QuantGrids, Spacing, CENTER_RANGE, DEFAULT_BITS, SIGMA_MAX, SIGMA_MIN};
pub use select::{
    adapted_freqs, adapted_pmf, fit_table, rank_targets, select_tables, AdaptationRecord, Method, MethodConfig,
    TableDecision,
};
