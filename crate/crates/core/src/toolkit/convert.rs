use std::path::PathBuf;

use crate::audio::{self, AudioClip};
use crate::error::{Result, StcError};
use crate::features::{self, FeatureTensor, FEATURE_DIM};
use crate::nn::{Graph, Tensor};
use crate::trainer::corpus::{from_network_layout, to_network_layout};
use crate::trainer::TrainState;
use crate::vocoder::{self, VocoderFrames};
use crate::Technique;

#[derive(Debug, Clone, PartialEq)]
pub struct ConversionRequest {
    pub input: PathBuf,
    pub output: PathBuf,
    pub target: Technique,
    pub checkpoint: PathBuf,
    pub pitch_shift_semitones: f64,
}

/// Everything a conversion produced.
#[derive(Debug, Clone)]
pub struct Conversion {
    pub input_frames: VocoderFrames,
    /// Frames handed to the synthesizer.
    pub output_frames: VocoderFrames,
    pub audio: AudioClip,
}

/// A trained generator ready for inference.
#[derive(Debug, Clone)]
pub struct Converter {
    pub state: TrainState,
}

/// Right-pads a `FEATURE_DIM x frames` map to a multiple of 4 columns by
/// repeating the last column.
pub fn pad_to_multiple_of_4(data: &[f32], frames: usize) -> (Vec<f32>, usize) {
    let width = frames.div_ceil(4).max(1) * 4;
    let mut out = Vec::with_capacity(FEATURE_DIM * width);
    for d in 0..FEATURE_DIM {
        let row = &data[d * frames..(d + 1) * frames];
        out.extend_from_slice(row);
        let last = row.last().copied().unwrap_or(0.0);
        out.extend(std::iter::repeat(last).take(width - frames));
    }
    (out, width)
}

impl Converter {
    pub fn load(checkpoint: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = checkpoint.as_ref();
        let state = TrainState::load(path)
            .map_err(|e| StcError::Format(format!("cannot load checkpoint {}: {e}", path.display())))?;
        if state.config.generator.num_domains != Technique::COUNT {
            return Err(StcError::Config(format!(
                "checkpoint has {} domains, expected {}",
                state.config.generator.num_domains,
                Technique::COUNT
            )));
        }
        Ok(Self { state })
    }

    /// Converts unnormalized features; the F0 sidecar is copied verbatim.
    pub fn convert_features(&self, feats: &FeatureTensor, target: Technique) -> Result<FeatureTensor> {
        let frames = feats.frames();
        if frames == 0 {
            return Err(StcError::Argument("cannot convert zero frames".into()));
        }
        let net = to_network_layout(feats, &self.state.norm);
        let (padded, width) = pad_to_multiple_of_4(&net, frames);
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![1, 1, FEATURE_DIM, width], padded)?);
        let y = self.state.gen.generate(&mut g, x, &[target.index()])?;
        let out = g.value(y).data();
        let mut trimmed = Vec::with_capacity(FEATURE_DIM * frames);
        for d in 0..FEATURE_DIM {
            trimmed.extend_from_slice(&out[d * width..d * width + frames]);
        }
        from_network_layout(&trimmed, frames, &self.state.norm, Some(target), feats.f0.clone())
    }

    /// analyze, encode, generate, decode, shift F0, synthesize.
    pub fn convert_clip(&self, clip: &AudioClip, target: Technique, semitones: f64) -> Result<Conversion> {
        let clip = clip.to_analysis_rate()?;
        let input_frames = vocoder::analyze(&clip)?;
        let feats = features::encode(&input_frames, None)?;
        let converted = self.convert_features(&feats, target)?;
        let output_frames = features::decode(&converted)?.pitch_shifted(semitones);
        let audio = vocoder::synthesize(&output_frames)?;
        Ok(Conversion {
            input_frames,
            output_frames,
            audio,
        })
    }
}

pub fn convert_file(req: &ConversionRequest) -> Result<Conversion> {
    let converter = Converter::load(&req.checkpoint)?;
    let clip = audio::read_wav(&req.input)?;
    let conversion = converter.convert_clip(&clip, req.target, req.pitch_shift_semitones)?;
    audio::write_wav(&conversion.audio, &req.output)?;
    Ok(conversion)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_padding() {
        let frames = 5;
        let data: Vec<f32> = (0..FEATURE_DIM * frames).map(|v| v as f32).collect();
        let (out, width) = pad_to_multiple_of_4(&data, frames);
        assert_eq!(width, 8);
        assert_eq!(&out[..8], &[0.0, 1.0, 2.0, 3.0, 4.0, 4.0, 4.0, 4.0]);
        let (same, w) = pad_to_multiple_of_4(&data[..FEATURE_DIM * 4], 4);
        assert_eq!((same.len(), w), (FEATURE_DIM * 4, 4));
    }
}
