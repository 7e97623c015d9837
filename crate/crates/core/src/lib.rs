//! Mean-field Monte-Carlo simulation of dipole-dipole interacting thermal
//! atoms near a slot waveguide, with exact small-N oracles and the lineshape
//! and Kerr analysis chain.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod greens;
pub mod ingest;
pub mod mode;
pub mod oracle;
pub mod params;
pub mod scenario;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};
pub use spectrum::{Spectrum, SpectrumMeta};

/// Crate version, with the git revision when the build recorded one.
pub fn version_string() -> String {
    match option_env!("SLOTQED_GIT_DESCRIBE") {
        Some(rev) if !rev.is_empty() => format!("{} ({rev})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}
