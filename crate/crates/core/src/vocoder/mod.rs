//! WORLD-style vocoder: F0, spectral envelope and band aperiodicity every
//! 5 ms, and a pitch-synchronous minimum-phase synthesizer.

mod aperiodicity;
pub(crate) mod dsp;
mod envelope;
mod f0;
pub mod stcf;
mod synthesis;

pub use aperiodicity::estimate_aperiodicity;
pub use envelope::estimate_envelope;
pub use f0::{estimate_f0, PitchTrack, VOICING_THRESHOLD};
pub use synthesis::{synthesize, synthesize_with_seed};

use crate::audio::{AudioClip, ANALYSIS_RATE};
use crate::error::{arg, Result};

pub const SAMPLE_RATE: u32 = ANALYSIS_RATE;
/// 5 ms at 16 kHz.
pub const HOP: usize = 80;
pub const HOP_SECONDS: f64 = 0.005;
pub const FFT_SIZE: usize = 1024;
pub const SP_BINS: usize = FFT_SIZE / 2 + 1;
pub const AP_BANDS: usize = 4;
pub const BAND_HZ: f64 = 2000.0;
pub const F0_MIN: f64 = 55.0;
pub const F0_MAX: f64 = 4000.0;
pub const SP_FLOOR: f64 = 1e-12;

/// Number of analysis frames for a clip of `samples` samples.
pub fn frame_count(samples: usize) -> usize {
    samples / HOP + 1
}

/// Per-frame F0 (0 = unvoiced), power envelope and band aperiodicity.
#[derive(Debug, Clone, PartialEq)]
pub struct VocoderFrames {
    pub f0: Vec<f64>,
    /// Row-major `frames x SP_BINS`.
    pub sp: Vec<f64>,
    /// Row-major `frames x AP_BANDS`.
    pub ap: Vec<f64>,
}

impl VocoderFrames {
    pub fn new(f0: Vec<f64>, sp: Vec<f64>, ap: Vec<f64>) -> Result<Self> {
        let frames = Self { f0, sp, ap };
        frames.validate()?;
        Ok(frames)
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn sp_row(&self, t: usize) -> &[f64] {
        &self.sp[t * SP_BINS..(t + 1) * SP_BINS]
    }

    pub fn ap_row(&self, t: usize) -> &[f64] {
        &self.ap[t * AP_BANDS..(t + 1) * AP_BANDS]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.f0.len();
        if self.sp.len() != n * SP_BINS || self.ap.len() != n * AP_BANDS {
            return arg(format!(
                "frame arrays disagree: {} f0, {} sp values, {} ap values",
                n,
                self.sp.len(),
                self.ap.len()
            ));
        }
        for (t, &f) in self.f0.iter().enumerate() {
            if !(f == 0.0 || (F0_MIN..=F0_MAX).contains(&f)) {
                return arg(format!("frame {t}: f0 {f} outside {{0}} U [55, 4000]"));
            }
        }
        if let Some(i) = self.sp.iter().position(|&v| !v.is_finite() || v < SP_FLOOR) {
            return arg(format!("sp value {} at {i} below floor", self.sp[i]));
        }
        if let Some(i) = self
            .ap
            .iter()
            .position(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v))
        {
            return arg(format!("ap value {} at {i} outside [0, 1]", self.ap[i]));
        }
        Ok(())
    }

    /// Multiplies every voiced F0 by `2^(semitones / 12)`, clamped to the valid range.
    pub fn pitch_shifted(&self, semitones: f64) -> Self {
        let ratio = (semitones / 12.0).exp2();
        let mut out = self.clone();
        for f in out.f0.iter_mut().filter(|f| **f > 0.0) {
            *f = (*f * ratio).clamp(F0_MIN, F0_MAX);
        }
        out
    }
}

pub(crate) fn require_analysis_rate(clip: &AudioClip) -> Result<()> {
    if clip.sample_rate() != SAMPLE_RATE {
        return arg(format!(
            "vocoder expects {SAMPLE_RATE} Hz audio, got {} Hz",
            clip.sample_rate()
        ));
    }
    Ok(())
}

/// Full analysis: F0, envelope and aperiodicity on a shared 5 ms grid.
pub fn analyze(clip: &AudioClip) -> Result<VocoderFrames> {
    let pitch = estimate_f0(clip)?;
    let sp = estimate_envelope(clip, &pitch.f0)?;
    let ap = estimate_aperiodicity(clip, &pitch.f0)?;
    VocoderFrames::new(pitch.f0, sp, ap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(f: f64, secs: f64) -> AudioClip {
        let n = (secs * SAMPLE_RATE as f64).round() as usize;
        AudioClip::new(
            (0..n)
                .map(|i| 0.5 * (2.0 * std::f64::consts::PI * f * i as f64 / 16_000.0).sin())
                .collect(),
            SAMPLE_RATE,
        )
        .unwrap()
    }

    #[test]
    fn two_seconds_give_401_frames() {
        let frames = analyze(&sine(220.0, 2.0)).unwrap();
        assert_eq!(frames.len(), 401);
        assert_eq!(frames.sp.len(), 401 * SP_BINS);
        assert_eq!(frames.ap.len(), 401 * AP_BANDS);
    }

    #[test]
    fn frame_count_boundaries() {
        assert_eq!(frame_count(80), 2);
        assert_eq!(frame_count(79), 1);
        assert_eq!(frame_count(32_000), 401);
    }

    #[test]
    fn short_clip_rejected() {
        assert!(analyze(&sine(220.0, 0.005)).is_err());
        let wrong_rate = AudioClip::silence(48_000, 48_000);
        assert!(analyze(&wrong_rate).is_err());
    }

    #[test]
    fn validation_catches_bad_frames() {
        let ok = VocoderFrames::new(vec![0.0], vec![1.0; SP_BINS], vec![1.0; AP_BANDS]);
        assert!(ok.is_ok());
        assert!(VocoderFrames::new(vec![30.0], vec![1.0; SP_BINS], vec![1.0; 4]).is_err());
        assert!(VocoderFrames::new(vec![0.0], vec![0.0; SP_BINS], vec![1.0; 4]).is_err());
        assert!(VocoderFrames::new(vec![0.0], vec![1.0; SP_BINS], vec![1.5; 4]).is_err());
        assert!(VocoderFrames::new(vec![0.0, 0.0], vec![1.0; SP_BINS], vec![1.0; 4]).is_err());
    }

    #[test]
    fn octave_shift_doubles_voiced_f0_only() {
        let frames =
            VocoderFrames::new(vec![0.0, 220.0], vec![1.0; 2 * SP_BINS], vec![1.0; 8]).unwrap();
        let up = frames.pitch_shifted(12.0);
        assert_eq!(up.f0, vec![0.0, 440.0]);
    }
}
