//! Multi-domain converter: convolutional autoencoder generator with
//! attribute channels at the bottleneck, patch discriminator with a domain
//! classifier, and the adversarial, classification and reconstruction losses.

mod config;
mod losses;
mod nets;

pub use config::{
    GeneratorConfig, StageGeom, CROP_WIDTH, DISC_DOWN, DISC_HEAD, DISC_STEM, DOWN, FULL_STAGES, FULL_STEM, HEAD, STEM,
};
pub use losses::{compute_losses, LossParts, LossVars, LossWeights};
pub use nets::{load_params, Discriminator, Generator};
