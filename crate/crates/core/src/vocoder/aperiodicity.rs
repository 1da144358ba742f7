//! Band aperiodicity from band-limited normalized autocorrelation at the pitch lag.

use super::dsp::acf_at;
use super::f0::AcfAnalyzer;
use super::{frame_count, require_analysis_rate, AP_BANDS, BAND_HZ, HOP, SAMPLE_RATE};
use crate::audio::AudioClip;
use crate::error::{arg, Result};

/// Bands holding less than this fraction of frame energy count as aperiodic.
const EMPTY_BAND: f64 = 1e-9;

/// Returns a row-major `frames x 4` matrix. Each voiced band value is
/// `1 - r`, where `r` is the band-limited autocorrelation at the pitch lag
/// normalized by lag 0 and by the window's own autocorrelation. Unvoiced
/// frames are 1 in every band.
pub fn estimate_aperiodicity(clip: &AudioClip, f0: &[f64]) -> Result<Vec<f64>> {
    require_analysis_rate(clip)?;
    let frames = frame_count(clip.len());
    if f0.len() != frames {
        return arg(format!(
            "f0 track has {} frames, clip needs {frames}",
            f0.len()
        ));
    }
    let analyzer = AcfAnalyzer::new();
    let n = analyzer.fft.len();
    let bin_hz = SAMPLE_RATE as f64 / n as f64;
    let edges: Vec<usize> = (0..=AP_BANDS)
        .map(|b| ((b as f64 * BAND_HZ / bin_hz).round() as usize).min(n / 2 + 1))
        .collect();
    let x = clip.samples();
    let mut ap = vec![1.0; frames * AP_BANDS];
    for (t, &f) in f0.iter().enumerate() {
        if f <= 0.0 {
            continue;
        }
        let power = analyzer.frame_power(x, t * HOP);
        let total: f64 = power.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let lag = SAMPLE_RATE as f64 / f;
        let window_norm = analyzer.window_acf_at(lag);
        for b in 0..AP_BANDS {
            // The last band includes the Nyquist bin.
            let (lo, hi) = (edges[b].max(1), if b + 1 == AP_BANDS { n / 2 + 1 } else { edges[b + 1] });
            let band_energy = acf_at(&power, lo, hi, n, 0.0);
            if band_energy <= EMPTY_BAND * total {
                continue;
            }
            let r = acf_at(&power, lo, hi, n, lag) / band_energy / window_norm;
            ap[t * AP_BANDS + b] = (1.0 - r.clamp(0.0, 1.0)).clamp(0.0, 1.0);
        }
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocoder::estimate_f0;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::PI;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, SAMPLE_RATE).unwrap()
    }

    #[test]
    fn pure_tone_is_periodic_in_its_band() {
        let c = clip(
            (0..16_000)
                .map(|n| 0.5 * (2.0 * PI * 300.0 * n as f64 / 16_000.0).sin())
                .collect(),
        );
        let frames = frame_count(c.len());
        let ap = estimate_aperiodicity(&c, &vec![300.0; frames]).unwrap();
        for t in 10..frames - 10 {
            assert!(ap[t * AP_BANDS] < 0.2, "frame {t}: {}", ap[t * AP_BANDS]);
        }
    }

    #[test]
    fn white_noise_is_aperiodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = clip(
            (0..16_000)
                .map(|_| 0.2 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        let pitch = estimate_f0(&c).unwrap();
        let ap = estimate_aperiodicity(&c, &pitch.f0).unwrap();
        assert!(ap.iter().all(|&v| v > 0.8));
        // Even when forced voiced, bandpassed noise barely correlates at a pitch lag.
        let forced = estimate_aperiodicity(&c, &vec![150.0; pitch.f0.len()]).unwrap();
        let mean = forced.iter().sum::<f64>() / forced.len() as f64;
        assert!(mean > 0.8, "{mean}");
    }

    #[test]
    fn unvoiced_frames_are_all_ones() {
        let c = clip(vec![0.1; 1600]);
        let ap = estimate_aperiodicity(&c, &vec![0.0; frame_count(1600)]).unwrap();
        assert!(ap.iter().all(|&v| v == 1.0));
        assert!(estimate_aperiodicity(&c, &[0.0; 2]).is_err());
    }
}
