//! Evaluation toolkit for binary grain-boundary segmentation.
//!
//! Everything in this crate is pure computation over in-memory rasters and
//! only needs `alloc`. File formats, PNG decoding and the command line live in
//! the `gbeval` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chac;
pub mod cm2;
pub mod dataprep;
mod error;
pub mod metrics;
pub mod raster;
pub mod synth;
pub mod toynet;
pub mod xval;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use raster::{BinaryMask, Grid, LabelMap, ProbabilityMap, Rgb, RgbImage};
