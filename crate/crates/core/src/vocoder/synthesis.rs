//! Pitch-synchronous overlap-add synthesis from vocoder frames.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use super::dsp::{min_phase, RealFft};
use super::{VocoderFrames, AP_BANDS, BAND_HZ, FFT_SIZE, HOP, SAMPLE_RATE, SP_BINS};
use crate::audio::AudioClip;
use crate::error::Result;

const DEFAULT_NOISE_SEED: u64 = 0x5eed_f00d;
const TINY_POWER: f64 = 1e-30;
/// Samples reserved ahead of each event for the non-causal tail of the
/// fractional-delay interpolator.
const PRE_ROLL: usize = 64;

/// Synthesizes audio with the default noise seed.
pub fn synthesize(frames: &VocoderFrames) -> Result<AudioClip> {
    synthesize_with_seed(frames, DEFAULT_NOISE_SEED)
}

#[derive(Debug, Clone, Copy)]
struct Event {
    /// Fractional sample position.
    time: f64,
    /// Pulse period in samples; `None` for a noise-only event.
    period: Option<f64>,
}

/// Voiced stretches get one minimum-phase pulse per pitch period plus a
/// noise segment shaped by `sp * ap`; unvoiced stretches get hop-spaced
/// noise segments shaped by `sp` alone. Output length is `(frames - 1) * hop`.
pub fn synthesize_with_seed(frames: &VocoderFrames, seed: u64) -> Result<AudioClip> {
    frames.validate()?;
    let n_frames = frames.len();
    let out_len = n_frames.saturating_sub(1) * HOP;
    let mut out = vec![0.0; PRE_ROLL + out_len + FFT_SIZE];
    if out_len == 0 {
        return AudioClip::new(Vec::new(), SAMPLE_RATE);
    }

    let fft = RealFft::new(FFT_SIZE);
    let (periodic, aperiodic) = frame_spectra(&fft, frames);
    let events = schedule(&frames.f0, out_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Signed bin frequency keeps the delayed pulse spectrum Hermitian.
    let omega = |k: usize| {
        let k = if k > FFT_SIZE / 2 { k as f64 - FFT_SIZE as f64 } else { k as f64 };
        2.0 * std::f64::consts::PI * k / FFT_SIZE as f64
    };

    for (i, ev) in events.iter().enumerate() {
        let start = ev.time.floor() as usize;
        let next = events.get(i + 1).map_or(out_len as f64, |e| e.time);
        let seg_len = (next.floor() as usize).saturating_sub(start).clamp(1, FFT_SIZE / 2);
        let pos = ev.time / HOP as f64;
        let fa = (pos.floor() as usize).min(n_frames - 1);
        let fb = (fa + 1).min(n_frames - 1);
        let wb = (pos - fa as f64).clamp(0.0, 1.0);
        let wa = 1.0 - wb;
        let mut spec = vec![Complex64::new(0.0, 0.0); FFT_SIZE];

        if let Some(period) = ev.period {
            let delta = ev.time - start as f64 + PRE_ROLL as f64;
            let gain = period.sqrt();
            for (k, s) in spec.iter_mut().enumerate() {
                let p = periodic[fa][k] * wa + periodic[fb][k] * wb;
                *s = if k == FFT_SIZE / 2 {
                    p * gain * (omega(k) * delta).cos()
                } else {
                    p * gain * Complex64::from_polar(1.0, -omega(k) * delta)
                };
            }
        }

        let mut noise = vec![0.0; PRE_ROLL + seg_len];
        for v in &mut noise[PRE_ROLL..] {
            *v = StandardNormal.sample(&mut rng);
        }
        let noise_spec = fft.forward(&noise);
        for (k, s) in spec.iter_mut().enumerate() {
            *s += noise_spec[k] * (aperiodic[fa][k] * wa + aperiodic[fb][k] * wb);
        }

        let response = fft.inverse_real(&spec);
        for (o, r) in out[start..].iter_mut().zip(&response) {
            *o += r;
        }
    }
    out.drain(..PRE_ROLL);
    out.truncate(out_len);
    AudioClip::new(out, SAMPLE_RATE)
}

/// Periodic and aperiodic minimum-phase spectra for every frame.
fn frame_spectra(
    fft: &RealFft,
    frames: &VocoderFrames,
) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let mut periodic = Vec::with_capacity(frames.len());
    let mut aperiodic = Vec::with_capacity(frames.len());
    for t in 0..frames.len() {
        let sp = frames.sp_row(t);
        if frames.f0[t] > 0.0 {
            let ap = per_bin_aperiodicity(frames.ap_row(t));
            let log_p: Vec<f64> = (0..SP_BINS)
                .map(|k| 0.5 * (sp[k] * (1.0 - ap[k])).max(TINY_POWER).ln())
                .collect();
            let log_a: Vec<f64> = (0..SP_BINS)
                .map(|k| 0.5 * (sp[k] * ap[k]).max(TINY_POWER).ln())
                .collect();
            periodic.push(min_phase(fft, &log_p));
            aperiodic.push(min_phase(fft, &log_a));
        } else {
            let log_a: Vec<f64> = sp.iter().map(|&v| 0.5 * v.ln()).collect();
            periodic.push(vec![Complex64::new(0.0, 0.0); FFT_SIZE]);
            aperiodic.push(min_phase(fft, &log_a));
        }
    }
    (periodic, aperiodic)
}

/// Linear interpolation of band values between band centres, flat outside.
fn per_bin_aperiodicity(bands: &[f64]) -> Vec<f64> {
    let bin_hz = SAMPLE_RATE as f64 / FFT_SIZE as f64;
    (0..SP_BINS)
        .map(|k| {
            let pos = (k as f64 * bin_hz / BAND_HZ - 0.5).clamp(0.0, (AP_BANDS - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(AP_BANDS - 1);
            let w = pos - lo as f64;
            (bands[lo] * (1.0 - w) + bands[hi] * w).clamp(0.0, 1.0)
        })
        .collect()
}

/// Places excitation events: pulses by phase accumulation over voiced
/// samples, noise events on hop boundaries over unvoiced samples.
fn schedule(f0: &[f64], out_len: usize) -> Vec<Event> {
    let n_frames = f0.len();
    let fs = SAMPLE_RATE as f64;
    let f0_at = |n: usize| -> f64 {
        let pos = n as f64 / HOP as f64;
        let a = (pos.floor() as usize).min(n_frames - 1);
        let b = (a + 1).min(n_frames - 1);
        let w = pos - a as f64;
        match (f0[a] > 0.0, f0[b] > 0.0) {
            (true, true) => f0[a] * (1.0 - w) + f0[b] * w,
            (true, false) if w < 0.5 => f0[a],
            (false, true) if w >= 0.5 => f0[b],
            _ => 0.0,
        }
    };
    let mut events = Vec::new();
    let mut phase = 0.0;
    let mut voiced_prev = false;
    for n in 0..out_len {
        let f = f0_at(n);
        if f > 0.0 {
            let inc = f / fs;
            if !voiced_prev {
                phase = 1.0 - inc;
            }
            phase += inc;
            if phase >= 1.0 {
                phase -= 1.0;
                let time = (n as f64 - phase / inc).max(0.0);
                events.push(Event {
                    time,
                    period: Some(fs / f),
                });
            }
            voiced_prev = true;
        } else {
            if n % HOP == 0 || voiced_prev {
                events.push(Event {
                    time: n as f64,
                    period: None,
                });
            }
            voiced_prev = false;
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocoder::{estimate_f0, SP_FLOOR};

    fn flat_frames(n: usize, f0: f64, level: f64, ap: f64) -> VocoderFrames {
        VocoderFrames::new(
            vec![f0; n],
            vec![level; n * SP_BINS],
            vec![ap; n * AP_BANDS],
        )
        .unwrap()
    }

    #[test]
    fn output_length_is_frames_minus_one_hops() {
        let clip = synthesize(&flat_frames(101, 200.0, 1e-3, 0.2)).unwrap();
        assert_eq!(clip.len(), 100 * HOP);
        assert!(synthesize(&flat_frames(1, 0.0, 1.0, 1.0)).unwrap().is_empty());
    }

    #[test]
    fn unvoiced_floor_is_near_silent() {
        let clip = synthesize(&flat_frames(200, 0.0, SP_FLOOR, 1.0)).unwrap();
        assert!(clip.rms() < 1e-4);
    }

    #[test]
    fn constant_pitch_gives_autocorrelation_peak_at_period() {
        let clip = synthesize(&flat_frames(201, 220.0, 1e-3, 0.0)).unwrap();
        let x = &clip.samples()[2000..14_000];
        // Oracle: direct autocorrelation over plausible lags.
        let acf = |lag: usize| -> f64 { (0..x.len() - lag).map(|i| x[i] * x[i + lag]).sum() };
        let best = (40..120).max_by(|&a, &b| acf(a).total_cmp(&acf(b))).unwrap();
        let expected = SAMPLE_RATE as f64 / 220.0;
        assert!((best as f64 - expected).abs() <= 1.0, "{best} vs {expected}");
    }

    #[test]
    fn envelope_gain_scales_rms_by_sqrt() {
        let base = synthesize(&flat_frames(200, 180.0, 1e-4, 0.3)).unwrap();
        let loud = synthesize(&flat_frames(200, 180.0, 4e-4, 0.3)).unwrap();
        let ratio = loud.rms() / base.rms();
        assert!((ratio / 2.0 - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn resynthesized_pitch_is_recovered() {
        let clip = synthesize(&flat_frames(201, 330.0, 1e-3, 0.05)).unwrap();
        let track = estimate_f0(&clip).unwrap();
        let mut cents: Vec<f64> = track.f0[8..track.f0.len() - 8]
            .iter()
            .filter(|&&f| f > 0.0)
            .map(|&f| 1200.0 * (f / 330.0).log2().abs())
            .collect();
        cents.sort_by(|a, b| a.total_cmp(b));
        assert!(cents[cents.len() / 2] < 15.0);
    }

    #[test]
    fn flat_noise_level_matches_envelope() {
        let level = 1e-3;
        let clip = synthesize(&flat_frames(400, 0.0, level, 1.0)).unwrap();
        let power = clip.rms().powi(2);
        assert!((power / level - 1.0).abs() < 0.1, "{power}");
    }

    #[test]
    fn band_interpolation_is_bounded() {
        let ap = per_bin_aperiodicity(&[0.0, 1.0, 0.5, 0.25]);
        assert_eq!(ap[0], 0.0);
        assert!(ap.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(*ap.last().unwrap(), 0.25);
    }
}
