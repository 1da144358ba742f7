use serde::{Deserialize, Serialize};

use super::classifier::{crop_tensor, eval_crops, DomainClassifier};
use super::metrics::mcd_rows;
use crate::error::Result;
use crate::features::FEATURE_DIM;
use crate::nn::{Graph, Tensor};
use crate::trainer::{Corpus, Crop, Split, TrainState};
use crate::Technique;

/// Objective scores for one source/target pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub src: Technique,
    pub tgt: Technique,
    /// Mel-cepstral distortion of the converted features to the source, dB.
    pub mcd: f64,
    /// Fraction of converted crops the classifier assigns to `tgt`.
    pub cls_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean l1 between `G(x, src)` and `x` in normalized feature space.
    pub recon_l1: f64,
    /// Every ordered pair with `src != tgt`.
    pub pairs: Vec<PairMetrics>,
}

impl EvalReport {
    /// Classifier target accuracy averaged over pairs.
    pub fn mean_cls_acc(&self) -> f64 {
        self.pairs.iter().map(|p| p.cls_acc).sum::<f64>() / self.pairs.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub per_domain: usize,
    pub seed: u64,
    pub width: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            per_domain: 8,
            seed: 2024,
            width: crate::stargan::CROP_WIDTH,
        }
    }
}

/// Row-major `frames x 60` unnormalized features of item `i` of a network batch.
fn denormalized_rows(t: &Tensor<f32>, i: usize, width: usize, corpus: &Corpus) -> Vec<f64> {
    let item = &t.data()[i * FEATURE_DIM * width..(i + 1) * FEATURE_DIM * width];
    let mut rows = vec![0.0; width * FEATURE_DIM];
    for d in 0..FEATURE_DIM {
        for j in 0..width {
            rows[j * FEATURE_DIM + d] = item[d * width + j] as f64 * corpus.norm.std[d] + corpus.norm.mean[d];
        }
    }
    rows
}

/// Reconstruction, conversion-to-target accuracy and MCD on holdout crops.
/// Identity conversions feed only the reconstruction score.
pub fn eval_conversion(
    state: &TrainState,
    corpus: &Corpus,
    classifier: &DomainClassifier,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let crops = eval_crops(corpus, opts.per_domain, opts.width, opts.seed, Split::Holdout)?;
    let gen = &state.gen;
    let mut recon_sum = 0.0;
    let mut recon_n = 0usize;
    let mut pairs = Vec::new();
    for src in Technique::ALL {
        let group: Vec<&Crop> = crops.iter().filter(|c| c.src == src).collect();
        let x = crop_tensor(&group, opts.width)?;
        let n = group.len();
        let source_rows: Vec<Vec<f64>> = (0..n).map(|i| denormalized_rows(&x, i, opts.width, corpus)).collect();
        let mut g = Graph::new();
        let xv = g.constant(x);
        let latent = gen.encode(&mut g, xv)?;
        for tgt in Technique::ALL {
            let z = gen.inject_attribute(&mut g, latent, &vec![tgt.index(); n])?;
            let y = gen.decode(&mut g, z, opts.width)?;
            if tgt == src {
                let l1 = g.l1(y, xv)?;
                recon_sum += g.value(l1).item() as f64 * n as f64;
                recon_n += n;
                continue;
            }
            let out = g.value(y).clone();
            let pred = classifier.predict(&out)?;
            let hits = pred.iter().filter(|&&p| p == tgt.index()).count();
            let mut mcd = 0.0;
            for (i, src_rows) in source_rows.iter().enumerate() {
                mcd += mcd_rows(&denormalized_rows(&out, i, opts.width, corpus), src_rows, opts.width)?;
            }
            pairs.push(PairMetrics {
                src,
                tgt,
                mcd: mcd / n as f64,
                cls_acc: hits as f64 / n as f64,
            });
        }
    }
    Ok(EvalReport {
        recon_l1: recon_sum / recon_n as f64,
        pairs,
    })
}
