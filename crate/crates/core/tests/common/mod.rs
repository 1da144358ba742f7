//! Reference signals for the integration suites. Everything here is built
//! from closed-form expressions so the tests never lean on library code to
//! produce their own ground truth.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stc_core::audio::AudioClip;

pub const FS: f64 = 16_000.0;
pub const HOP: usize = 80;

pub fn clip(samples: Vec<f64>) -> AudioClip {
    AudioClip::new(samples, FS as u32).unwrap()
}

/// Instantaneous frequency of a tone with optional sinusoidal vibrato
/// `(rate_hz, depth_cents)`.
pub fn inst_freq(f0: f64, vibrato: Option<(f64, f64)>, n: usize) -> f64 {
    match vibrato {
        Some((rate, cents)) => f0 * (cents / 1200.0 * (2.0 * PI * rate * n as f64 / FS).sin()).exp2(),
        None => f0,
    }
}

/// Band-limited sawtooth (harmonics below 7.8 kHz) with 1/k amplitudes.
/// Harmonic count follows the highest instantaneous frequency so nothing aliases.
pub fn sawtooth(f0: f64, vibrato: Option<(f64, f64)>, secs: f64, amp: f64) -> Vec<f64> {
    let n = (secs * FS).round() as usize;
    let top = f0 * vibrato.map_or(1.0, |(_, c)| (c / 1200.0).exp2());
    let harmonics = ((7800.0 / top).floor() as usize).max(1);
    let norm: f64 = (1..=harmonics).map(|k| 1.0 / k as f64).sum();
    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let v: f64 = (1..=harmonics)
                .map(|k| (k as f64 * phase).sin() / k as f64)
                .sum();
            phase += 2.0 * PI * inst_freq(f0, vibrato, i) / FS;
            amp * v / norm
        })
        .collect()
}

pub fn sine(f0: f64, vibrato: Option<(f64, f64)>, secs: f64, amp: f64) -> Vec<f64> {
    let n = (secs * FS).round() as usize;
    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let v = amp * phase.sin();
            phase += 2.0 * PI * inst_freq(f0, vibrato, i) / FS;
            v
        })
        .collect()
}

pub fn white_noise(secs: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (secs * FS).round() as usize;
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn cents(a: f64, b: f64) -> f64 {
    1200.0 * (a / b).log2().abs()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// Natural-log power envelope made of a spectral tilt plus Gaussian
/// formant bumps, evaluated at any frequency in Hz.
#[derive(Debug, Clone)]
pub struct SmoothEnvelope {
    pub level: f64,
    pub tilt: f64,
    /// (centre Hz, height in nats, width Hz)
    pub bumps: Vec<(f64, f64, f64)>,
}

impl SmoothEnvelope {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let count = rng.gen_range(2..=5);
        Self {
            level: rng.gen_range(-12.0..-2.0),
            tilt: rng.gen_range(-6.0..0.0),
            bumps: (0..count)
                .map(|_| {
                    (
                        rng.gen_range(200.0..7500.0),
                        rng.gen_range(0.5..3.5),
                        rng.gen_range(180.0..600.0),
                    )
                })
                .collect(),
        }
    }

    pub fn vowel(formants: &[(f64, f64, f64)]) -> Self {
        Self {
            level: -9.0,
            tilt: -3.0,
            bumps: formants.to_vec(),
        }
    }

    pub fn log_power(&self, hz: f64) -> f64 {
        self.level
            + self.tilt * hz / 8000.0
            + self
                .bumps
                .iter()
                .map(|&(c, h, w)| h * (-0.5 * ((hz - c) / w).powi(2)).exp())
                .sum::<f64>()
    }

    /// Power on the 513-bin grid.
    pub fn bins(&self) -> Vec<f64> {
        (0..513)
            .map(|k| self.log_power(k as f64 * 8000.0 / 512.0).exp())
            .collect()
    }
}

/// Harmonic voice whose harmonic powers follow `env`, with light vibrato.
pub fn sung_vowel(f0: f64, env: &SmoothEnvelope, secs: f64, seed: u64) -> Vec<f64> {
    let n = (secs * FS).round() as usize;
    let vib = Some((5.0, 30.0));
    let harmonics = (7800.0 / (f0 * 1.02)).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<f64> = (0..harmonics).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = inst_freq(f0, vib, i);
        let mut v = 0.0;
        for k in 1..=harmonics {
            let amp = env.log_power(k as f64 * f).exp().sqrt();
            v += amp * (k as f64 * phase + offsets[k - 1]).sin();
        }
        out.push(v);
        phase += 2.0 * PI * f / FS;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.iter().map(|v| 0.5 * v / peak).collect()
}

/// Warped cepstrum computed by direct quadrature of the analytic log
/// envelope on the warped axis: `c_n = (1/pi) * int_0^pi L(w(u)) cos(n u) du`.
/// The inverse warp is the same all-pass map with `-alpha`.
pub fn reference_warped_cepstrum(env: &SmoothEnvelope, alpha: f64, order: usize) -> Vec<f64> {
    let grid = 8192;
    let unwarp = |u: f64| u + 2.0 * (-alpha * u.sin() / (1.0 + alpha * u.cos())).atan();
    let samples: Vec<f64> = (0..=grid)
        .map(|j| {
            let u = PI * j as f64 / grid as f64;
            env.log_power(unwarp(u) / PI * 8000.0)
        })
        .collect();
    (0..order)
        .map(|n| {
            let sum: f64 = samples
                .iter()
                .enumerate()
                .map(|(j, l)| {
                    let w = if j == 0 || j == grid { 0.5 } else { 1.0 };
                    w * l * (n as f64 * PI * j as f64 / grid as f64).cos()
                })
                .sum();
            sum / grid as f64
        })
        .collect()
}

/// Five sung vowels at three pitches, one second each. Formants are
/// `(centre Hz, height nats, width Hz)`.
pub fn vowel_suite() -> Vec<(String, Vec<f64>)> {
    let vowels: [(&str, [(f64, f64, f64); 3]); 5] = [
        ("a", [(730.0, 3.0, 140.0), (1090.0, 2.5, 160.0), (2440.0, 1.5, 220.0)]),
        ("e", [(530.0, 3.0, 120.0), (1840.0, 2.5, 180.0), (2480.0, 1.5, 220.0)]),
        ("i", [(270.0, 3.0, 100.0), (2290.0, 2.5, 200.0), (3010.0, 1.5, 260.0)]),
        ("o", [(570.0, 3.0, 120.0), (840.0, 2.5, 140.0), (2410.0, 1.5, 220.0)]),
        ("u", [(300.0, 3.0, 100.0), (870.0, 2.5, 140.0), (2240.0, 1.5, 220.0)]),
    ];
    let mut out = Vec::new();
    for (i, (name, formants)) in vowels.iter().enumerate() {
        let env = SmoothEnvelope::vowel(formants);
        for (j, f0) in [196.0, 392.0, 784.0].into_iter().enumerate() {
            out.push((format!("{name}@{f0}"), sung_vowel(f0, &env, 1.0, (i * 3 + j) as u64)));
        }
    }
    out
}

/// Mel-cepstral distortion in dB over rows of `frames x 60` features,
/// using coefficients 1..=55.
pub fn mcd_db(a: &[f64], b: &[f64], frames: usize) -> f64 {
    let k = 10.0 / std::f64::consts::LN_10 * 2f64.sqrt();
    let mut total = 0.0;
    for t in 0..frames {
        let sq: f64 = (1..=55).map(|d| (a[t * 60 + d] - b[t * 60 + d]).powi(2)).sum();
        total += sq.sqrt();
    }
    k * total / frames as f64
}

/// A four-domain corpus of short clips, rendered once per test binary.
pub fn small_corpus() -> &'static stc_core::trainer::Corpus {
    use std::sync::OnceLock;
    use stc_core::trainer::{make_synthetic_corpus, Corpus, CorpusSpec};
    static CORPUS: OnceLock<(tempfile::TempDir, Corpus)> = OnceLock::new();
    &CORPUS
        .get_or_init(|| {
            let dir = tempfile::tempdir().unwrap();
            let spec = CorpusSpec {
                clips_per_domain: 3,
                holdout_per_domain: 1,
                min_secs: 2.2,
                max_secs: 3.0,
            };
            make_synthetic_corpus(&spec, 11, dir.path()).unwrap();
            let corpus = Corpus::load(dir.path()).unwrap();
            (dir, corpus)
        })
        .1
}
