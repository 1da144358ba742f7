//! Mono audio clips, WAV I/O and band-limited resampling.

use std::path::Path;

use crate::error::{arg, Result, StcError};

/// Rate every analysis stage expects.
pub const ANALYSIS_RATE: u32 = 16_000;

const RESAMPLE_TAPS: usize = 64;
const KAISER_BETA: f64 = 8.6;

/// A mono buffer of samples in [-1, 1] with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return arg("sample rate must be positive");
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return arg(format!("sample {i} is not finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Scales so the largest magnitude is `peak`. Silent clips are returned unchanged.
    pub fn peak_normalized(&self, peak: f64) -> Self {
        let max = self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if max == 0.0 {
            return self.clone();
        }
        let g = peak / max;
        Self {
            samples: self.samples.iter().map(|s| s * g).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Resamples to [`ANALYSIS_RATE`] when needed.
    pub fn to_analysis_rate(&self) -> Result<Self> {
        resample(self, ANALYSIS_RATE)
    }
}

/// Reads a PCM16 or float32 WAV file, averaging stereo channels to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path.as_ref()).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(StcError::Unsupported(format!(
            "{channels} channels; only mono and stereo are accepted"
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (fmt, bits) => {
            return Err(StcError::Unsupported(format!(
                "{bits}-bit {fmt:?} samples; expected PCM16 or float32"
            )))
        }
    };
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    AudioClip::new(samples, spec.sample_rate).map_err(|e| StcError::Format(e.to_string()))
}

/// Writes a mono IEEE-float32 WAV file.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(map_hound)?;
    for &s in &clip.samples {
        writer.write_sample(s as f32).map_err(map_hound)?;
    }
    writer.finalize().map_err(map_hound)
}

fn map_hound(e: hound::Error) -> StcError {
    match e {
        hound::Error::IoError(io) => StcError::Io(io),
        hound::Error::Unsupported => StcError::Unsupported("WAV encoding".into()),
        other => StcError::Format(other.to_string()),
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Windowed-sinc resampling with a 64-tap Kaiser window and the cutoff at
/// the lower of the two Nyquist frequencies.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return arg("target rate must be positive");
    }
    let src_rate = clip.sample_rate;
    if src_rate == target_rate {
        return Ok(clip.clone());
    }
    let g = gcd(src_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = src_rate as u64 / g;
    let n_in = clip.samples.len();
    let n_out = ((n_in as u128 * up as u128 + down as u128 / 2) / down as u128) as usize;

    // Cutoff relative to the source Nyquist.
    let cutoff = (target_rate as f64 / src_rate as f64).min(1.0);
    let half = (RESAMPLE_TAPS / 2) as f64;
    let i0_beta = bessel_i0(KAISER_BETA);
    // Support of the kernel in input samples grows when the cutoff drops.
    let reach = half / cutoff;
    let x = &clip.samples;

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        // Exact rational position of the output sample on the input grid.
        let num = n as u64 * down;
        let base = (num / up) as i64;
        let frac = (num % up) as f64 / up as f64;
        let pos = base as f64 + frac;
        let lo = (pos - reach).ceil() as i64;
        let hi = (pos + reach).floor() as i64;
        let mut acc = 0.0;
        for k in lo.max(0)..=hi.min(n_in as i64 - 1) {
            let t = pos - k as f64;
            let u = t / reach;
            if u.abs() > 1.0 {
                continue;
            }
            let window = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / i0_beta;
            acc += x[k as usize] * cutoff * sinc(cutoff * t) * window;
        }
        out.push(acc);
    }
    AudioClip::new(out, target_rate)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn write_pcm16(path: &Path, rate: u32, channels: u16, frames: &[Vec<i16>]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for f in frames {
            for &s in f {
                w.write_sample(s).unwrap();
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_header_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_pcm16(&p, 48_000, 1, &vec![vec![0i16]; 48_000]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.len(), 48_000);
        assert_eq!(clip.sample_rate(), 48_000);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_downmix_averages() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_pcm16(&p, 16_000, 2, &vec![vec![16384, -16384]; 100]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.len(), 100);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn float_round_trip_and_edge_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut samples: Vec<f64> = (0..5000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        samples[7] = 1.0;
        let clip = AudioClip::new(samples, 16_000).unwrap();
        write_wav(&clip, &p).unwrap();
        let back = read_wav(&p).unwrap();
        let max_err = clip
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-6, "{max_err}");
        assert_eq!(back.samples()[7], 1.0);

        let empty = AudioClip::new(vec![], 16_000).unwrap();
        write_wav(&empty, &p).unwrap();
        assert!(read_wav(&p).unwrap().is_empty());
    }

    #[test]
    fn garbage_header_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"RIFF\x00\x00\x00\x00JUNKJUNK").unwrap();
        assert!(matches!(read_wav(&p), Err(StcError::Format(_))));
    }

    #[test]
    fn pcm24_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("24.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(StcError::Unsupported(_))));
    }

    #[test]
    fn resample_length_and_identity() {
        let clip = AudioClip::silence(48_000, 48_000);
        let out = resample(&clip, 16_000).unwrap();
        assert_eq!(out.len(), 16_000);
        assert_eq!(out.sample_rate(), 16_000);
        let same = resample(&clip, 48_000).unwrap();
        assert_eq!(same, clip);
        assert!(resample(&clip, 0).is_err());
    }

    #[test]
    fn resampled_tone_keeps_frequency_and_amplitude() {
        let src: Vec<f64> = (0..48_000)
            .map(|n| 0.5 * (2.0 * PI * 1000.0 * n as f64 / 48_000.0).sin())
            .collect();
        let out = resample(&AudioClip::new(src, 48_000).unwrap(), 16_000).unwrap();
        // Oracle: the same tone synthesized directly at 16 kHz; compare the
        // DFT magnitude of the interior second at the 1 kHz bin.
        let x = &out.samples()[2000..14_000];
        let direct: Vec<f64> = (2000..14_000)
            .map(|n| 0.5 * (2.0 * PI * 1000.0 * n as f64 / 16_000.0).sin())
            .collect();
        let dft = |s: &[f64], f: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in s.iter().enumerate() {
                let ph = 2.0 * PI * f * n as f64 / 16_000.0;
                re += v * ph.cos();
                im -= v * ph.sin();
            }
            (re * re + im * im).sqrt()
        };
        let peak = dft(x, 1000.0);
        let reference = dft(&direct, 1000.0);
        assert!((peak / reference - 1.0).abs() < 0.01, "{peak} vs {reference}");
        // Dominant bin: the tone bin beats its neighbours at the 1.33 Hz grid.
        for f in [900.0, 990.0, 1010.0, 1100.0, 3000.0] {
            assert!(dft(x, f) < 0.1 * peak);
        }
    }

    #[test]
    fn peak_normalization_is_opt_in() {
        let clip = AudioClip::new(vec![0.1, -0.25, 0.2], 16_000).unwrap();
        let n = clip.peak_normalized(1.0);
        assert!((n.samples()[1] + 1.0).abs() < 1e-12);
        assert_eq!(AudioClip::silence(4, 16_000).peak_normalized(1.0).rms(), 0.0);
    }
}
