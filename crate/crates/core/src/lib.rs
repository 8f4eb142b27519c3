//! Test-time entropy pipeline for learned image compression latents.
//!
//! The crate covers the pieces a learned codec uses after training:
//!
//! - [`latent`]: latent/side-info containers, the `LATB` file format and a
//!   seeded synthetic generator with controllable prior mismatch.
//! - [`entropy`]: factorized pmf tables, the scale-indexed discretized
//!   Gaussian tables of the hyperprior model, and ideal bit accounting.
//! - [`range_coder`]: pmf quantization to integer frequencies and a
//!   carry-propagating range coder.
//! - [`gap`]: histograms, amortization gap measurement and reports.
//! - [`adapt`]: instance-adaptive re-parameterization (truncated GMM,
//!   zero-mean Gaussian, center-bin difference), parameter quantization and
//!   per-table selection.
//! - [`container`]: the `EGAP` container and bit-exact decoder-side table
//!   reconstruction.
//! - [`codec`]: end-to-end analysis, encoding and decoding of an instance.
//! - [`bench`]: mismatch sweeps over synthetic instances.

pub mod adapt;
pub mod bench;
pub mod codec;
pub mod container;
pub mod entropy;
mod error;
mod wire;
pub mod gap;
pub mod latent;
pub mod math;
pub mod range_coder;

pub use error::{Error, Result};
