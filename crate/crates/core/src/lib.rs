//! Per-class low-pass graph filtering of labeled feature vectors.
//!
//! Each class's features become the vertices of a similarity graph; the
//! features are then smoothed by keeping mostly the low frequencies of that
//! graph's normalized Laplacian. The crate also ships the evaluation harnesses
//! (few-shot episodes, standard train/test classification) and a Monte Carlo
//! lab for the statistics of filtered class centroids.

pub mod classify;
pub mod denoise;
pub mod episodes;
pub mod error;
pub mod features;
pub mod graph;
pub mod io;
pub mod spectral;
pub mod standard;
pub mod stats;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use features::LabeledFeatures;
