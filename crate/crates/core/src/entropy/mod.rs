//! Test-time entropy models.
//!
//! A factorized model keeps one [`PmfTable`] per channel and applies it at
//! every spatial position. The hyperprior model keeps a [`ScaleTable`] of
//! zero-mean discretized Gaussians; each latent point is coded with the
//! table whose scale wins for the point's predicted sigma.

mod pmf;
mod pmft;
mod scale;

pub(crate) use pmf::lookup_offset;
pub use pmf::{
    default_support, HasSupport, discretized_gaussian_pmf, ideal_bits, pmf_from_cdf, ModelKind, PmfTable,
    SymbolStream, TableLabel, PMF_FLOOR,
};
pub use pmft::{load_tables, save_tables, tables_from_bytes, tables_to_bytes};
pub use scale::{assign_scales, ScaleTable};
