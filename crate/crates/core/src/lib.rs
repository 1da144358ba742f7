//! Singing technique conversion toolkit.
//!
//! The pipeline runs audio through a WORLD-style vocoder ([`vocoder`]),
//! compresses each 5 ms frame into 56 mel-cepstral coefficients plus 4
//! band aperiodicities ([`features`]), converts the feature map with a
//! StarGAN generator whose autoencoder bottleneck depth is configurable
//! ([`stargan`]), and resynthesizes with the original F0 track.
//!
//! [`nn`] is the small reverse-mode autodiff engine the networks run on,
//! [`trainer`] holds the training loop and the synthetic four-technique
//! corpus, and [`toolkit`] wires conversion, objective metrics and the
//! bottleneck grid experiment together.

pub mod audio;
pub mod error;
pub mod features;
pub mod nn;
pub mod stargan;
pub mod toolkit;
pub mod trainer;
pub mod vocoder;

mod technique;

pub use error::{Result, StcError};
pub use technique::Technique;
