//! 60-dimensional network features: 56 mel-cepstral coefficients of the
//! envelope followed by the 4 band aperiodicities.

mod mcc;

pub use mcc::{mcc_to_sp, sp_to_mcc, warp, ALPHA, MCC_ORDER};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result, StcError};
use crate::vocoder::stcf::FeatureChunk;
use crate::vocoder::{VocoderFrames, AP_BANDS, SP_BINS};
use crate::Technique;

pub const FEATURE_DIM: usize = MCC_ORDER + AP_BANDS;
pub const MIN_STD: f64 = 1e-6;

/// `frames x 60` feature matrix with its technique label and the F0 track
/// carried alongside untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    /// Row-major `frames x FEATURE_DIM`.
    pub data: Vec<f64>,
    pub domain: Option<Technique>,
    pub f0: Vec<f64>,
}

impl FeatureTensor {
    pub fn from_rows(data: Vec<f64>, columns: usize, domain: Option<Technique>, f0: Vec<f64>) -> Result<Self> {
        if columns != FEATURE_DIM {
            return arg(format!("feature tensor needs {FEATURE_DIM} columns, got {columns}"));
        }
        if data.len() != f0.len() * FEATURE_DIM {
            return arg(format!(
                "{} values do not fill {} frames x {FEATURE_DIM}",
                data.len(),
                f0.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return arg("non-finite feature value");
        }
        Ok(Self { data, domain, f0 })
    }

    pub fn frames(&self) -> usize {
        self.f0.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * FEATURE_DIM..(t + 1) * FEATURE_DIM]
    }

    pub fn to_chunk(&self) -> FeatureChunk {
        FeatureChunk {
            domain: self.domain.map_or(u32::MAX, |d| d.index() as u32),
            columns: FEATURE_DIM as u32,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_chunk(chunk: &FeatureChunk, f0: Vec<f64>) -> Result<Self> {
        let domain = match chunk.domain {
            u32::MAX => None,
            d => Some(Technique::from_index(d as usize).ok_or_else(|| {
                StcError::Format(format!("feature chunk domain id {d} out of range"))
            })?),
        };
        Self::from_rows(
            chunk.data.iter().map(|&v| v as f64).collect(),
            chunk.columns as usize,
            domain,
            f0,
        )
    }
}

/// Converts vocoder frames into network features.
pub fn encode(frames: &VocoderFrames, domain: Option<Technique>) -> Result<FeatureTensor> {
    frames.validate()?;
    let mut data = Vec::with_capacity(frames.len() * FEATURE_DIM);
    for t in 0..frames.len() {
        data.extend(sp_to_mcc(frames.sp_row(t))?);
        data.extend_from_slice(frames.ap_row(t));
    }
    Ok(FeatureTensor {
        data,
        domain,
        f0: frames.f0.clone(),
    })
}

/// Rebuilds vocoder frames; aperiodicity is clamped to [0, 1] and F0 is the sidecar verbatim.
pub fn decode(features: &FeatureTensor) -> Result<VocoderFrames> {
    if features.data.len() != features.frames() * FEATURE_DIM {
        return arg(format!(
            "feature data is not {} x {FEATURE_DIM}",
            features.frames()
        ));
    }
    let n = features.frames();
    let mut sp = Vec::with_capacity(n * SP_BINS);
    let mut ap = Vec::with_capacity(n * AP_BANDS);
    for t in 0..n {
        let row = features.row(t);
        sp.extend(
            mcc_to_sp(&row[..MCC_ORDER])?
                .into_iter()
                .map(|v| v.max(crate::vocoder::SP_FLOOR)),
        );
        ap.extend(row[MCC_ORDER..].iter().map(|v| v.clamp(0.0, 1.0)));
    }
    VocoderFrames::new(features.f0.clone(), sp, ap)
}

/// Per-column z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population mean and standard deviation over every frame of `set`.
    /// Standard deviations below [`MIN_STD`] are clamped with a warning.
    pub fn fit<'a>(set: impl IntoIterator<Item = &'a FeatureTensor>) -> Result<Self> {
        let mut count = 0usize;
        let mut sum = vec![0.0; FEATURE_DIM];
        let mut sum_sq = vec![0.0; FEATURE_DIM];
        let tensors: Vec<&FeatureTensor> = set.into_iter().collect();
        for f in &tensors {
            for t in 0..f.frames() {
                for (d, v) in f.row(t).iter().enumerate() {
                    sum[d] += v;
                }
            }
            count += f.frames();
        }
        if count == 0 {
            return Err(StcError::Data("cannot fit normalization on zero frames".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        for f in &tensors {
            for t in 0..f.frames() {
                for (d, v) in f.row(t).iter().enumerate() {
                    sum_sq[d] += (v - mean[d]).powi(2);
                }
            }
        }
        let std = sum_sq
            .iter()
            .enumerate()
            .map(|(d, s)| {
                let sd = (s / count as f64).sqrt();
                if sd < MIN_STD {
                    log::warn!("feature column {d} has std {sd:e}; clamping to {MIN_STD:e}");
                    MIN_STD
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; FEATURE_DIM],
            std: vec![1.0; FEATURE_DIM],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != FEATURE_DIM || self.std.len() != FEATURE_DIM {
            return arg("normalization stats must have 60 entries each");
        }
        if self.std.iter().any(|s| !(*s >= MIN_STD)) {
            return arg("normalization std below 1e-6");
        }
        Ok(())
    }

    pub fn apply(&self, f: &FeatureTensor) -> FeatureTensor {
        self.map(f, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, f: &FeatureTensor) -> FeatureTensor {
        self.map(f, |v, m, s| v * s + m)
    }

    fn map(&self, f: &FeatureTensor, op: impl Fn(f64, f64, f64) -> f64) -> FeatureTensor {
        let data = f
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let d = i % FEATURE_DIM;
                op(v, self.mean[d], self.std[d])
            })
            .collect();
        FeatureTensor {
            data,
            domain: f.domain,
            f0: f.f0.clone(),
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let stats: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        stats.validate()?;
        Ok(stats)
    }
}
