//! Synthetic four-technique corpus and the crop sampler.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioClip};
use crate::error::{Result, StcError};
use crate::features::{self, FeatureTensor, NormStats, FEATURE_DIM};
use crate::vocoder::{self, stcf, VocoderFrames, AP_BANDS, F0_MAX, HOP_SECONDS, SAMPLE_RATE, SP_BINS};
use crate::Technique;

pub const INDEX_FILE: &str = "corpus.json";
pub const NORM_FILE: &str = "norm.json";

/// Corpus size and clip lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    /// Clips per domain, holdout included.
    pub clips_per_domain: usize,
    /// Clips per domain reserved for evaluation.
    pub holdout_per_domain: usize,
    pub min_secs: f64,
    pub max_secs: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            clips_per_domain: 24,
            holdout_per_domain: 4,
            min_secs: 5.0,
            max_secs: 12.0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clips_per_domain == 0 || self.holdout_per_domain >= self.clips_per_domain {
            return Err(StcError::Config("need at least one training clip per domain".into()));
        }
        if !(self.min_secs >= 0.1 && self.max_secs >= self.min_secs && self.max_secs <= 60.0) {
            return Err(StcError::Config(format!(
                "clip length range {}..{} s is invalid",
                self.min_secs, self.max_secs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    /// Paths relative to the corpus directory.
    pub wav: String,
    pub features: String,
    pub domain: Technique,
    pub frames: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub spec: CorpusSpec,
    pub seed: u64,
    pub clips: Vec<ClipEntry>,
}

impl CorpusIndex {
    pub fn validate(&self) -> Result<()> {
        for d in Technique::ALL {
            if !self.clips.iter().any(|c| c.domain == d && c.split == Split::Train) {
                return Err(StcError::Data(format!("domain {d} has no training clips")));
            }
        }
        Ok(())
    }
}

/// Per-domain synthesis recipe.
#[derive(Debug, Clone, Copy)]
struct Recipe {
    f0_range: (f64, f64),
    /// Envelope roll-off in dB per octave above 500 Hz.
    tilt_db_per_octave: f64,
    /// Relative weight of the second and third formants.
    upper_formants: f64,
    /// Whistle: a single resonance riding just above F0.
    single_band: bool,
    ap: [f64; AP_BANDS],
    /// Relative per-frame F0 perturbation.
    jitter: f64,
    /// Per-frame level perturbation in dB.
    shimmer_db: f64,
    vibrato_cents: f64,
}

fn recipe(d: Technique) -> Recipe {
    match d {
        Technique::Chest => Recipe {
            f0_range: (110.0, 220.0),
            tilt_db_per_octave: 4.0,
            upper_formants: 1.0,
            single_band: false,
            ap: [0.04, 0.1, 0.2, 0.3],
            jitter: 0.0,
            shimmer_db: 0.0,
            vibrato_cents: 25.0,
        },
        Technique::Falsetto => Recipe {
            f0_range: (300.0, 600.0),
            tilt_db_per_octave: 12.0,
            upper_formants: 0.4,
            single_band: false,
            ap: [0.08, 0.2, 0.55, 0.5],
            jitter: 0.0,
            shimmer_db: 0.0,
            vibrato_cents: 35.0,
        },
        Technique::Whistle => Recipe {
            f0_range: (1000.0, 2500.0),
            tilt_db_per_octave: 18.0,
            upper_formants: 0.0,
            single_band: true,
            ap: [0.05, 0.15, 0.3, 0.85],
            jitter: 0.0,
            shimmer_db: 0.0,
            vibrato_cents: 15.0,
        },
        Technique::Raspy => Recipe {
            f0_range: (110.0, 220.0),
            tilt_db_per_octave: 4.0,
            upper_formants: 1.0,
            single_band: false,
            ap: [0.6, 0.4, 0.35, 0.45],
            jitter: 0.03,
            shimmer_db: 3.0,
            vibrato_cents: 10.0,
        },
    }
}

const VOWELS: [[f64; 3]; 5] = [
    [730.0, 1090.0, 2440.0],
    [530.0, 1840.0, 2480.0],
    [270.0, 2290.0, 3010.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
];
const BANDWIDTHS: [f64; 3] = [90.0, 110.0, 160.0];

fn resonance(f: f64, center: f64, bw: f64) -> f64 {
    1.0 / (1.0 + ((f - center) / (0.5 * bw)).powi(2))
}

/// Power envelope on the analysis grid for one frame.
fn envelope(r: &Recipe, vowel: &[f64; 3], f0: f64, level_db: f64, out: &mut [f64]) {
    let bin_hz = SAMPLE_RATE as f64 / ((SP_BINS - 1) * 2) as f64;
    for (k, v) in out.iter_mut().enumerate() {
        let f = k as f64 * bin_hz;
        let amp = if r.single_band {
            resonance(f, f0 * 1.05, 500.0) + 0.01
        } else {
            resonance(f, vowel[0], BANDWIDTHS[0])
                + r.upper_formants * (0.5 * resonance(f, vowel[1], BANDWIDTHS[1]) + 0.25 * resonance(f, vowel[2], BANDWIDTHS[2]))
                + 0.02
        };
        let tilt_db = -r.tilt_db_per_octave * (1.0 + f / 500.0).log2();
        *v = (amp * amp * 10f64.powf((tilt_db + level_db) / 10.0) * 1e-3).max(1e-10);
    }
}

fn semitones(ratio: f64) -> f64 {
    12.0 * ratio.log2()
}

/// Vocoder frames for one synthetic phrase: a sequence of held notes with
/// portamento, vibrato, and occasional breaths.
fn phrase_frames(d: Technique, secs: f64, rng: &mut ChaCha8Rng) -> Result<VocoderFrames> {
    let r = recipe(d);
    let n = vocoder::frame_count((secs * SAMPLE_RATE as f64) as usize);
    let span = semitones(r.f0_range.1 / r.f0_range.0);
    let mut target = vec![0.0; n];
    let mut voiced = vec![true; n];
    let mut vowel_of = vec![0usize; n];
    let mut t = 0;
    while t < n {
        let len = ((rng.gen_range(0.25..0.8) / HOP_SECONDS) as usize).max(1);
        let note = r.f0_range.0 * (rng.gen_range(0..=span.floor() as i32) as f64 / 12.0).exp2();
        let vowel = rng.gen_range(0..VOWELS.len());
        for i in t..(t + len).min(n) {
            target[i] = note;
            vowel_of[i] = vowel;
        }
        t += len;
        if rng.gen_bool(0.12) {
            let gap = ((rng.gen_range(0.06..0.15) / HOP_SECONDS) as usize).max(1);
            for (i, v) in voiced.iter_mut().enumerate().take((t + gap).min(n)).skip(t) {
                *v = false;
                target[i] = note;
                vowel_of[i] = vowel;
            }
            t += gap;
        }
    }
    let rate = rng.gen_range(5.0..6.5);
    let phase0 = rng.gen_range(0.0..2.0 * PI);
    let mut log_f0 = target[0].ln();
    let glide = (-HOP_SECONDS / 0.03f64).exp();
    let mut f0 = vec![0.0; n];
    let mut sp = vec![0.0; n * SP_BINS];
    let mut ap = vec![0.0; n * AP_BANDS];
    for i in 0..n {
        log_f0 = glide * log_f0 + (1.0 - glide) * target[i].ln();
        let vib = r.vibrato_cents / 1200.0 * (2.0 * PI * rate * i as f64 * HOP_SECONDS + phase0).sin();
        let jitter = if r.jitter > 0.0 { rng.gen_range(-r.jitter..r.jitter) } else { 0.0 };
        let hz = (log_f0.exp() * vib.exp2() * (1.0 + jitter)).clamp(r.f0_range.0 * 0.9, F0_MAX);
        let shimmer = if r.shimmer_db > 0.0 { rng.gen_range(-r.shimmer_db..r.shimmer_db) } else { 0.0 };
        let row = &mut sp[i * SP_BINS..(i + 1) * SP_BINS];
        if voiced[i] {
            f0[i] = hz;
            envelope(&r, &VOWELS[vowel_of[i]], hz, shimmer, row);
            ap[i * AP_BANDS..(i + 1) * AP_BANDS].copy_from_slice(&r.ap);
        } else {
            envelope(&r, &VOWELS[vowel_of[i]], hz, -25.0, row);
            ap[i * AP_BANDS..(i + 1) * AP_BANDS].fill(1.0);
        }
    }
    VocoderFrames::new(f0, sp, ap)
}

/// Renders one clip to audio.
pub fn synth_clip(d: Technique, secs: f64, seed: u64) -> Result<AudioClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = phrase_frames(d, secs, &mut rng)?;
    let clip = vocoder::synthesize_with_seed(&frames, seed ^ 0x9e37_79b9)?;
    Ok(clip.peak_normalized(0.5))
}

fn clip_seed(seed: u64, domain: Technique, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain.index() * 100_000 + i) as u64);
    rng.gen()
}

/// Writes WAVs, analyzed STCF files with feature chunks, `corpus.json` and
/// `norm.json` (fit on the training split) into `dir`.
pub fn make_synthetic_corpus(spec: &CorpusSpec, seed: u64, dir: impl AsRef<Path>) -> Result<CorpusIndex> {
    spec.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("wav"))?;
    fs::create_dir_all(dir.join("features"))?;
    let mut clips = Vec::new();
    let mut train_features = Vec::new();
    for d in Technique::ALL {
        for i in 0..spec.clips_per_domain {
            let s = clip_seed(seed, d, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let secs = rng.gen_range(spec.min_secs..=spec.max_secs);
            let audio = synth_clip(d, secs, s)?;
            let name = format!("{}_{i:03}", d.name());
            let wav = format!("wav/{name}.wav");
            audio::write_wav(&audio, dir.join(&wav))?;
            // Analyze what a reader of the WAV would see.
            let frames = vocoder::analyze(&audio::read_wav(dir.join(&wav))?)?;
            let feats = features::encode(&frames, Some(d))?;
            let path = format!("features/{name}.stcf");
            stcf::write(
                dir.join(&path),
                &stcf::StcfFile {
                    frames,
                    features: Some(feats.to_chunk()),
                },
            )?;
            let split = if i + spec.holdout_per_domain >= spec.clips_per_domain {
                Split::Holdout
            } else {
                Split::Train
            };
            log::info!("corpus clip {name}: {:.2} s, {} frames", secs, feats.frames());
            clips.push(ClipEntry {
                wav,
                features: path,
                domain: d,
                frames: feats.frames(),
                split,
            });
            if split == Split::Train {
                train_features.push(feats);
            }
        }
    }
    let index = CorpusIndex {
        spec: spec.clone(),
        seed,
        clips,
    };
    NormStats::fit(&train_features)?.save_json(dir.join(NORM_FILE))?;
    fs::write(dir.join(INDEX_FILE), serde_json::to_vec_pretty(&index)?)?;
    Ok(index)
}

/// One clip in network layout: `FEATURE_DIM x frames`, normalized.
#[derive(Debug, Clone)]
pub struct LoadedClip {
    pub domain: Technique,
    pub split: Split,
    pub frames: usize,
    /// Row `d` holds feature `d` over time.
    pub data: Vec<f32>,
    /// Unnormalized features with the F0 sidecar.
    pub raw: FeatureTensor,
}

/// Feature map `(FEATURE_DIM, frames)` for the network.
pub fn to_network_layout(f: &FeatureTensor, norm: &NormStats) -> Vec<f32> {
    let n = f.frames();
    let mut data = vec![0.0f32; FEATURE_DIM * n];
    for t in 0..n {
        for (d, &v) in f.row(t).iter().enumerate() {
            data[d * n + t] = ((v - norm.mean[d]) / norm.std[d]) as f32;
        }
    }
    data
}

/// Inverse of [`to_network_layout`]; the F0 sidecar and domain are supplied.
pub fn from_network_layout(
    data: &[f32],
    frames: usize,
    norm: &NormStats,
    domain: Option<Technique>,
    f0: Vec<f64>,
) -> Result<FeatureTensor> {
    let mut rows = vec![0.0; frames * FEATURE_DIM];
    for d in 0..FEATURE_DIM {
        for t in 0..frames {
            rows[t * FEATURE_DIM + d] = data[d * frames + t] as f64 * norm.std[d] + norm.mean[d];
        }
    }
    FeatureTensor::from_rows(rows, FEATURE_DIM, domain, f0)
}

/// A corpus loaded for training and evaluation.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub index: CorpusIndex,
    pub norm: NormStats,
    pub clips: Vec<LoadedClip>,
}

/// A training example: `FEATURE_DIM x width` slice of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Crop {
    pub data: Vec<f32>,
    pub src: Technique,
    pub tgt: Technique,
    pub clip: usize,
    pub start: usize,
}

impl Corpus {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let root = dir.as_ref().to_path_buf();
        let index: CorpusIndex = serde_json::from_slice(&fs::read(root.join(INDEX_FILE)).map_err(|e| {
            StcError::Data(format!("cannot read {}: {e}", root.join(INDEX_FILE).display()))
        })?)?;
        index.validate()?;
        let norm = NormStats::load_json(root.join(NORM_FILE))?;
        let mut clips = Vec::with_capacity(index.clips.len());
        for entry in &index.clips {
            let file = stcf::read(root.join(&entry.features))?;
            let chunk = file
                .features
                .ok_or_else(|| StcError::Data(format!("{} has no feature chunk", entry.features)))?;
            let raw = FeatureTensor::from_chunk(&chunk, file.frames.f0.clone())?;
            if raw.domain != Some(entry.domain) {
                return Err(StcError::Data(format!("{} is labeled differently from the index", entry.features)));
            }
            clips.push(LoadedClip {
                domain: entry.domain,
                split: entry.split,
                frames: raw.frames(),
                data: to_network_layout(&raw, &norm),
                raw,
            });
        }
        Ok(Self {
            root,
            index,
            norm,
            clips,
        })
    }

    /// Clip indices of one domain within one split.
    pub fn domain_clips(&self, domain: Technique, split: Split) -> Vec<usize> {
        (0..self.clips.len())
            .filter(|&i| self.clips[i].domain == domain && self.clips[i].split == split)
            .collect()
    }

    /// Uniform source domain, uniform clip within it, uniform start, and a
    /// target drawn from the other three domains.
    pub fn sample_crop(&self, rng: &mut impl Rng, width: usize, split: Split) -> Result<Crop> {
        let src = Technique::ALL[rng.gen_range(0..Technique::COUNT)];
        let mut tgt = rng.gen_range(0..Technique::COUNT - 1);
        if tgt >= src.index() {
            tgt += 1;
        }
        let mut crop = self.crop_from_domain(rng, src, width, split)?;
        crop.tgt = Technique::ALL[tgt];
        Ok(crop)
    }

    /// Crop from a given domain; the target equals the source.
    pub fn crop_from_domain(&self, rng: &mut impl Rng, src: Technique, width: usize, split: Split) -> Result<Crop> {
        let candidates = self.domain_clips(src, split);
        if candidates.is_empty() {
            return Err(StcError::Data(format!("domain {src} has no {split:?} clips")));
        }
        let clip = candidates[rng.gen_range(0..candidates.len())];
        let frames = self.clips[clip].frames;
        let start = if frames > width { rng.gen_range(0..=frames - width) } else { 0 };
        Ok(Crop {
            data: slice_columns(&self.clips[clip].data, frames, start, width),
            src,
            tgt: src,
            clip,
            start,
        })
    }
}

/// Columns `start..start + width` of a `FEATURE_DIM x frames` map, wrapping
/// around when the clip is shorter than the crop.
pub fn slice_columns(data: &[f32], frames: usize, start: usize, width: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(FEATURE_DIM * width);
    for d in 0..FEATURE_DIM {
        let row = &data[d * frames..(d + 1) * frames];
        out.extend((0..width).map(|j| row[(start + j) % frames]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapped_slice_loops_short_clips() {
        let frames = 3;
        let data: Vec<f32> = (0..FEATURE_DIM * frames).map(|v| v as f32).collect();
        let out = slice_columns(&data, frames, 2, 5);
        assert_eq!(&out[..5], &[2.0, 0.0, 1.0, 2.0, 0.0]);
    }

    #[test]
    fn layout_round_trip() {
        let raw: Vec<f64> = (0..FEATURE_DIM * 4).map(|v| v as f64 * 0.5).collect();
        let f = FeatureTensor::from_rows(raw, FEATURE_DIM, None, vec![100.0, 0.0, 0.0, 200.0]).unwrap();
        let norm = NormStats::fit([&f]).unwrap();
        let net = to_network_layout(&f, &norm);
        let back = from_network_layout(&net, 4, &norm, None, f.f0.clone()).unwrap();
        for (a, b) in back.data.iter().zip(&f.data) {
            assert!((a - b).abs() < 1e-4 * b.abs().max(1.0));
        }
    }

    #[test]
    fn recipes_are_valid_frames() {
        for d in Technique::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(d.index() as u64);
            let frames = phrase_frames(d, 1.0, &mut rng).unwrap();
            let voiced: Vec<f64> = frames.f0.iter().copied().filter(|&f| f > 0.0).collect();
            assert!(!voiced.is_empty());
            let r = recipe(d);
            assert!(voiced.iter().all(|&f| f >= r.f0_range.0 * 0.85 && f <= r.f0_range.1 * 1.15), "{d}");
        }
    }

    #[test]
    fn bad_specs_rejected() {
        let spec = CorpusSpec {
            holdout_per_domain: 24,
            ..CorpusSpec::default()
        };
        assert!(spec.validate().is_err());
        let spec = CorpusSpec {
            min_secs: 3.0,
            max_secs: 2.0,
            ..CorpusSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
