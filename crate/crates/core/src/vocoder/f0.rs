//! Normalized-autocorrelation F0 tracker.

use super::dsp::{acf_at, hann, windowed, RealFft};
use super::{frame_count, require_analysis_rate, F0_MAX, F0_MIN, HOP, SAMPLE_RATE};
use crate::audio::AudioClip;
use crate::error::{arg, Result};

/// Periodicity at or above this marks a frame voiced.
pub const VOICING_THRESHOLD: f64 = 0.45;

/// Half-length of the 40 ms analysis window.
pub(crate) const F0_WINDOW_HALF: usize = 320;
pub(crate) const F0_FFT: usize = 2048;
/// Lag-domain oversampling of the candidate search.
const LAG_OVERSAMPLE: usize = 4;
const OCTAVE_COST: f64 = 0.02;
const MEDIAN_SPAN: usize = 5;
const SILENCE_ENERGY: f64 = 1e-10;

/// F0 in Hz (0 for unvoiced) and periodicity in [0, 1], one per 5 ms frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    pub f0: Vec<f64>,
    pub periodicity: Vec<f64>,
}

/// The 40 ms Hann frame analysis shared by the F0 and aperiodicity
/// estimators: the power spectrum of a windowed frame and the window's own
/// autocorrelation for normalization.
pub(crate) struct AcfAnalyzer {
    pub fft: RealFft,
    pub window: Vec<f64>,
    window_power: Vec<f64>,
    window_acf: Vec<f64>,
    fine_fft: RealFft,
    /// Window autocorrelation on the oversampled lag grid, 1 at lag 0.
    window_fine: Vec<f64>,
}

impl AcfAnalyzer {
    pub fn new() -> Self {
        let fft = RealFft::new(F0_FFT);
        let window = hann(F0_WINDOW_HALF);
        let window_power = fft.power(&window);
        let window_acf = fft.inverse_even(&window_power);
        let fine_fft = RealFft::new(F0_FFT * LAG_OVERSAMPLE);
        let mut window_fine = fine_acf(&fine_fft, &window_power);
        let w0 = window_fine[0];
        window_fine.iter_mut().for_each(|v| *v /= w0);
        Self {
            fft,
            window,
            window_power,
            window_acf,
            fine_fft,
            window_fine,
        }
    }

    pub fn frame_power(&self, x: &[f64], center: usize) -> Vec<f64> {
        self.fft.power(&windowed(x, center, &self.window))
    }

    /// Window autocorrelation normalized to 1 at lag 0, at a fractional lag.
    pub fn window_acf_at(&self, tau: f64) -> f64 {
        let n = self.fft.len();
        acf_at(&self.window_power, 0, n / 2 + 1, n, tau) / n as f64 / self.window_acf[0]
    }
}

/// Band-limited autocorrelation sampled every `1 / LAG_OVERSAMPLE` lags,
/// obtained by zero-extending the power spectrum.
fn fine_acf(fine: &RealFft, power: &[f64]) -> Vec<f64> {
    let nyq = power.len() - 1;
    let mut half = vec![0.0; fine.len() / 2 + 1];
    half[..nyq].copy_from_slice(&power[..nyq]);
    half[nyq] = 0.5 * power[nyq];
    fine.inverse_even(&half)
}

fn min_lag() -> usize {
    (SAMPLE_RATE as f64 / F0_MAX).ceil() as usize
}

fn max_lag() -> usize {
    (SAMPLE_RATE as f64 / F0_MIN).floor() as usize
}

/// Tracks F0 with normalized autocorrelation on 40 ms Hann windows,
/// band-limited peak refinement, a 0.45 voicing threshold and a 5-frame
/// median filter.
pub fn estimate_f0(clip: &AudioClip) -> Result<PitchTrack> {
    require_analysis_rate(clip)?;
    if clip.len() < 2 * F0_WINDOW_HALF {
        return arg(format!(
            "clip of {} samples is shorter than one 40 ms analysis window",
            clip.len()
        ));
    }
    let analyzer = AcfAnalyzer::new();
    let x = clip.samples();
    let frames = frame_count(x.len());
    let mut raw = Vec::with_capacity(frames);
    let mut periodicity = Vec::with_capacity(frames);
    for t in 0..frames {
        let (f, p) = frame_pitch(&analyzer, x, t * HOP);
        raw.push(f);
        periodicity.push(p);
    }
    Ok(PitchTrack {
        f0: median_filter(&raw),
        periodicity,
    })
}

fn frame_pitch(an: &AcfAnalyzer, x: &[f64], center: usize) -> (f64, f64) {
    let power = an.frame_power(x, center);
    let n = an.fft.len();
    let acf = fine_acf(&an.fine_fft, &power);
    let energy = acf[0];
    if energy * (LAG_OVERSAMPLE as f64) <= SILENCE_ENERGY {
        return (0.0, 0.0);
    }
    let os = LAG_OVERSAMPLE;
    let (lo, hi) = (min_lag() * os, max_lag() * os);
    let norm: Vec<f64> = (lo - 1..=hi + 1)
        .map(|m| acf[m] / energy / an.window_fine[m])
        .collect();
    let at = |m: usize| norm[m + 1 - lo];

    let mut best: Option<(f64, f64)> = None;
    for m in lo..=hi {
        let (prev, cur, next) = (at(m - 1), at(m), at(m + 1));
        if cur <= 0.0 || cur < prev || cur <= next {
            continue;
        }
        let (pos, value) = parabolic(m as f64, prev, cur, next);
        let tau = pos / os as f64;
        let score = value - OCTAVE_COST * (tau / min_lag() as f64).log2();
        if best.map_or(true, |(s, _)| score > s) {
            best = Some((score, tau));
        }
    }
    let Some((_, start)) = best else {
        return (0.0, 0.0);
    };
    let energy = energy * os as f64;

    // Refine on the band-limited autocorrelation around the oversampled peak.
    let q = |tau: f64| acf_at(&power, 0, n / 2 + 1, n, tau) / n as f64 / energy / an.window_acf_at(tau);
    let mut tau = start;
    let mut value = q(tau);
    let mut step = 0.125;
    for _ in 0..3 {
        let (a, b, c) = (q(tau - step), q(tau), q(tau + step));
        if b >= a && b >= c {
            let (offset, v) = parabolic(0.0, a, b, c);
            tau += offset * step;
            value = v;
        } else {
            tau += if a > c { -step } else { step };
            value = b.max(a).max(c);
        }
        step *= 0.5;
    }
    let p = value.clamp(0.0, 1.0);
    let f = SAMPLE_RATE as f64 / tau;
    if p >= VOICING_THRESHOLD && (F0_MIN..=F0_MAX).contains(&f) {
        (f, p)
    } else {
        (0.0, p)
    }
}

/// Vertex of the parabola through (x-1, a), (x, b), (x+1, c).
fn parabolic(x: f64, a: f64, b: f64, c: f64) -> (f64, f64) {
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-18 {
        return (x, b);
    }
    let d = (0.5 * (a - c) / denom).clamp(-1.0, 1.0);
    (x + d, b - 0.25 * (a - c) * d)
}

fn median_filter(raw: &[f64]) -> Vec<f64> {
    let half = MEDIAN_SPAN / 2;
    (0..raw.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(raw.len());
            let mut w: Vec<f64> = raw[lo..hi].to_vec();
            w.sort_by(|a, b| a.total_cmp(b));
            w[w.len() / 2]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, SAMPLE_RATE).unwrap()
    }

    fn cents(a: f64, b: f64) -> f64 {
        1200.0 * (a / b).log2().abs()
    }

    #[test]
    fn sine_440_is_tracked() {
        let x: Vec<f64> = (0..16_000)
            .map(|n| 0.5 * (2.0 * PI * 440.0 * n as f64 / 16_000.0).sin())
            .collect();
        let track = estimate_f0(&clip(x)).unwrap();
        let interior = &track.f0[5..track.f0.len() - 5];
        let voiced = interior.iter().filter(|&&f| f > 0.0).count();
        assert!(voiced as f64 >= 0.95 * interior.len() as f64);
        let mut errs: Vec<f64> = interior
            .iter()
            .filter(|&&f| f > 0.0)
            .map(|&f| cents(f, 440.0))
            .collect();
        errs.sort_by(|a, b| a.total_cmp(b));
        assert!(errs[errs.len() / 2] < 10.0, "median {}", errs[errs.len() / 2]);
    }

    #[test]
    fn white_noise_is_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..16_000)
            .map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let track = estimate_f0(&clip(x)).unwrap();
        let unvoiced = track.f0.iter().filter(|&&f| f == 0.0).count();
        assert!(
            unvoiced as f64 >= 0.9 * track.f0.len() as f64,
            "{unvoiced}/{}",
            track.f0.len()
        );
    }

    #[test]
    fn silence_is_unvoiced() {
        let track = estimate_f0(&clip(vec![0.0; 4000])).unwrap();
        assert!(track.f0.iter().all(|&f| f == 0.0));
        assert!(track.periodicity.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn too_short_is_an_argument_error() {
        assert!(estimate_f0(&clip(vec![0.0; 600])).is_err());
    }

    #[test]
    fn median_removes_isolated_glitches() {
        let raw = [100.0, 100.0, 200.0, 100.0, 100.0, 0.0, 0.0, 150.0, 0.0, 0.0];
        let m = median_filter(&raw);
        assert_eq!(m[2], 100.0);
        assert_eq!(m[7], 0.0);
    }
}
