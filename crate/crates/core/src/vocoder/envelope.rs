//! Pitch-adaptive cepstral envelope estimator.

use super::dsp::{hann, windowed, RealFft};
use super::{frame_count, require_analysis_rate, FFT_SIZE, HOP, SAMPLE_RATE, SP_BINS, SP_FLOOR};
use crate::audio::AudioClip;
use crate::error::{arg, Result};

/// Period (samples) assumed for unvoiced frames; gives the fixed 6 ms lifter.
const UNVOICED_PERIOD: f64 = 120.0;
const WINDOW_PERIODS: f64 = 2.5;
const LIFTER_PERIODS: f64 = 0.8;

/// Estimates a 513-bin power envelope per frame.
///
/// Each frame is a Hann window spanning 2.5 pitch periods. Its power
/// spectrum (normalized by window energy, so white noise of variance s^2
/// reads s^2) is averaged over one harmonic spacing, and the log spectrum
/// is liftered at 0.8 pitch periods of quefrency.
pub fn estimate_envelope(clip: &AudioClip, f0: &[f64]) -> Result<Vec<f64>> {
    require_analysis_rate(clip)?;
    let frames = frame_count(clip.len());
    if f0.len() != frames {
        return arg(format!(
            "f0 track has {} frames, clip needs {frames}",
            f0.len()
        ));
    }
    let fft = RealFft::new(FFT_SIZE);
    let x = clip.samples();
    let mut sp = Vec::with_capacity(frames * SP_BINS);
    for (t, &f) in f0.iter().enumerate() {
        sp.extend(frame_envelope(&fft, x, t * HOP, f));
    }
    Ok(sp)
}

fn frame_envelope(fft: &RealFft, x: &[f64], center: usize, f0: f64) -> Vec<f64> {
    let period = if f0 > 0.0 {
        SAMPLE_RATE as f64 / f0
    } else {
        UNVOICED_PERIOD
    };
    let half = ((WINDOW_PERIODS * period / 2.0).round() as usize).clamp(2, FFT_SIZE / 2 - 1);
    let window = hann(half);
    let frame = windowed(x, center, &window);
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let mut power: Vec<f64> = fft.power(&frame).iter().map(|p| p / energy).collect();
    if power.iter().all(|&p| p <= SP_FLOOR) {
        return vec![SP_FLOOR; SP_BINS];
    }

    // Linear average across one harmonic spacing flattens the comb.
    let width_bins = FFT_SIZE as f64 / period;
    power = smooth_rect(&power, width_bins);

    let log: Vec<f64> = power.iter().map(|&p| p.max(SP_FLOOR).ln()).collect();
    let mut cep = fft.inverse_even(&log);
    let cutoff = LIFTER_PERIODS * period;
    for (q, c) in cep.iter_mut().enumerate().take(FFT_SIZE / 2 + 1) {
        if q as f64 > cutoff {
            *c = 0.0;
        }
    }
    fft.forward_even(&cep[..=FFT_SIZE / 2])
        .into_iter()
        .map(|l| l.exp().max(SP_FLOOR))
        .collect()
}

/// Moving average of width `width` bins over the half spectrum, mirrored at
/// DC and Nyquist, with fractional edge handling via a cumulative sum.
fn smooth_rect(p: &[f64], width: f64) -> Vec<f64> {
    if width <= 1.0 {
        return p.to_vec();
    }
    let n = p.len() as isize;
    let pad = width.ceil() as isize + 2;
    let at = |i: isize| -> f64 {
        let mut j = i;
        if j < 0 {
            j = -j;
        }
        if j >= n {
            j = 2 * (n - 1) - j;
        }
        p[j.clamp(0, n - 1) as usize]
    };
    // cum[i] = sum of bins (-pad .. -pad + i), treating bin k as covering [k - 0.5, k + 0.5).
    let total = (n + 2 * pad) as usize;
    let mut cum = vec![0.0; total + 1];
    for i in 0..total {
        cum[i + 1] = cum[i] + at(i as isize - pad);
    }
    let integral = |x: f64| -> f64 {
        // Integral of the piecewise-constant spectrum from -pad - 0.5 to x.
        let u = x + 0.5 + pad as f64;
        let i = u.floor() as usize;
        let frac = u - i as f64;
        cum[i] + frac * at(i as isize - pad)
    };
    (0..n)
        .map(|k| {
            let c = k as f64;
            (integral(c + width / 2.0) - integral(c - width / 2.0)) / width
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn db(v: f64) -> f64 {
        10.0 * v.log10()
    }

    fn bin_hz(k: usize) -> f64 {
        k as f64 * SAMPLE_RATE as f64 / FFT_SIZE as f64
    }

    #[test]
    fn pulse_train_through_one_pole_filter() {
        // y[n] = x[n] + a y[n-1]; |H|^2 = 1 / (1 - 2a cos w + a^2).
        let a = 0.9;
        let period = 80;
        let mut y = vec![0.0; 16_000];
        for n in 0..y.len() {
            let x = if n % period == 0 { 1.0 } else { 0.0 };
            y[n] = x + if n > 0 { a * y[n - 1] } else { 0.0 };
        }
        let clip = AudioClip::new(y, SAMPLE_RATE).unwrap();
        let frames = frame_count(clip.len());
        let sp = estimate_envelope(&clip, &vec![200.0; frames]).unwrap();
        let t = frames / 2;
        let row = &sp[t * SP_BINS..(t + 1) * SP_BINS];
        let mut sq = 0.0;
        let mut count = 0;
        for k in 0..SP_BINS {
            let hz = bin_hz(k);
            if !(300.0..=6000.0).contains(&hz) {
                continue;
            }
            let w = 2.0 * std::f64::consts::PI * hz / SAMPLE_RATE as f64;
            // Oracle: closed-form response scaled by the pulse rate.
            let expected = 1.0 / (1.0 - 2.0 * a * w.cos() + a * a) / period as f64;
            sq += (db(row[k]) - db(expected)).powi(2);
            count += 1;
        }
        let rms = (sq / count as f64).sqrt();
        assert!(rms < 2.0, "rms {rms} dB");
    }

    #[test]
    fn harmonic_ripple_is_shallow() {
        // Flat-spectrum pulse train at 250 Hz: adjacent harmonic/valley gap under 3 dB.
        let period = 64;
        let y: Vec<f64> = (0..16_000)
            .map(|n| if n % period == 0 { 1.0 } else { 0.0 })
            .collect();
        let clip = AudioClip::new(y, SAMPLE_RATE).unwrap();
        let frames = frame_count(clip.len());
        let sp = estimate_envelope(&clip, &vec![250.0; frames]).unwrap();
        for t in [50, 51, 52, 53] {
            let row = &sp[t * SP_BINS..(t + 1) * SP_BINS];
            let band: Vec<f64> = row[16..480].iter().map(|&v| db(v)).collect();
            let max = band.iter().cloned().fold(f64::MIN, f64::max);
            let min = band.iter().cloned().fold(f64::MAX, f64::min);
            assert!(max - min < 3.0, "frame {t}: ripple {}", max - min);
        }
    }

    #[test]
    fn white_noise_long_average_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma: f64 = 0.1;
        let y: Vec<f64> = (0..64_000)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let clip = AudioClip::new(y, SAMPLE_RATE).unwrap();
        let frames = frame_count(clip.len());
        let sp = estimate_envelope(&clip, &vec![0.0; frames]).unwrap();
        let mut mean = vec![0.0; SP_BINS];
        for t in 5..frames - 5 {
            for k in 0..SP_BINS {
                mean[k] += sp[t * SP_BINS + k] / (frames - 10) as f64;
            }
        }
        for k in 0..SP_BINS {
            let hz = bin_hz(k);
            if (500.0..=7000.0).contains(&hz) {
                let dev = db(mean[k]) - db(sigma * sigma);
                assert!(dev.abs() < 3.0, "{hz} Hz: {dev} dB");
            }
        }
    }

    #[test]
    fn silence_gives_floor() {
        let clip = AudioClip::new(vec![0.0; 2000], SAMPLE_RATE).unwrap();
        let sp = estimate_envelope(&clip, &vec![0.0; frame_count(2000)]).unwrap();
        assert!(sp.iter().all(|&v| v == SP_FLOOR));
    }

    #[test]
    fn misaligned_track_is_rejected() {
        let clip = AudioClip::new(vec![0.0; 2000], SAMPLE_RATE).unwrap();
        assert!(estimate_envelope(&clip, &[0.0; 3]).is_err());
    }

    #[test]
    fn rect_smoothing_preserves_constants() {
        let p = vec![2.0; 40];
        for v in smooth_rect(&p, 6.4) {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }
}
