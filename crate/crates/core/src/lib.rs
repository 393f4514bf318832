//! Analysis toolkit for interpreting and evaluating the controllability of
//! an expressive-speech latent space.
//!
//! - [`features`]: frame descriptors (F0, voicing, mel cepstrum, spectral
//!   balance) and utterance functionals.
//! - [`table`]: feature tables and embedding files.
//! - [`latent`]: PCA to 2-D, per-feature plane trends, correlation-based
//!   feature selection and trend-map export.
//! - [`distortion`]: MCD, VDE and F0 errors under DTW or best-shift
//!   alignment.
//! - [`experiment`]: sampling grid, controllability scoring, random
//!   baselines, slope tests and synthetic stimuli.

pub mod audio;
pub mod distortion;
pub mod error;
pub mod experiment;
pub mod features;
pub mod latent;
pub mod stats;
pub mod table;

pub use error::{Error, Result};
