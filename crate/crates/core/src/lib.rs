//! Parallel MRI reconstruction with an unrolled proximal-gradient network that
//! never sees coil sensitivities.
//!
//! The crate covers the whole pipeline: synthetic multi-coil data
//! ([`mri`]), the phase-wise network ([`network`]), reverse-mode training
//! ([`training`]), image-quality metrics ([`metrics`]) and the file formats and
//! commands behind the `pmri` binary ([`io`], [`cli`]).

pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mri;
pub mod network;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
