//! Training loop, learning-rate schedule, update ratio, checkpoints, and the
//! synthetic four-technique corpus.

pub mod corpus;
mod schedule;
mod train;

pub use corpus::{make_synthetic_corpus, Corpus, CorpusIndex, CorpusSpec, Crop, Split};
pub use schedule::{lr_schedule, TrainConfig, UpdateRatio, DESK_BATCH, DESK_DISC_BASE, DESK_ITERATIONS, DESK_WIDTH_DIVISOR};
pub use train::{
    iteration_rng, read_metrics, sample_batch, train, train_step, Manifest, Metrics, RunDir, TrainState, MANIFEST_FILE,
    METRICS_FILE, METRICS_HEADER, MODEL_FILE, NORM_FILE,
};
