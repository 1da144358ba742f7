//! Conversion pipeline, objective metrics, the technique classifier used as
//! an evaluation proxy, and the bottleneck-grid experiment.

mod classifier;
mod convert;
mod eval;
mod grid;
mod metrics;

pub use classifier::{crop_tensor, eval_crops, ClassifierConfig, DomainClassifier};
pub use convert::{convert_file, pad_to_multiple_of_4, Conversion, ConversionRequest, Converter};
pub use eval::{eval_conversion, EvalOptions, EvalReport, PairMetrics};
pub use grid::{median, run_bottleneck_grid, run_cell, GridConfig, GridReport, GridRow};
pub use metrics::{mcd, mcd_rows, mcd_scale, MCD_LAST_COEF};
