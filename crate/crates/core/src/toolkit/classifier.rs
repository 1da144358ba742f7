use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StcError};
use crate::features::FEATURE_DIM;
use crate::nn::checkpoint::{self, StckFile};
use crate::nn::{Adam, Graph, Tensor};
use crate::stargan::{load_params, Discriminator};
use crate::trainer::{iteration_rng, Corpus, Crop, Split};
use crate::Technique;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Channel width of the first layer.
    pub base: usize,
    pub iterations: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub width: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            base: 8,
            iterations: 400,
            batch_size: 4,
            lr: 1e-3,
            width: crate::stargan::CROP_WIDTH,
            seed: 11,
        }
    }
}

/// Technique classifier on normalized feature maps, sharing the
/// discriminator's convolution stack and trained with cross-entropy alone.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainClassifier {
    pub config: ClassifierConfig,
    pub net: Discriminator<f32>,
}

/// Deterministic evaluation crops: `per_domain` from each domain.
pub fn eval_crops(corpus: &Corpus, per_domain: usize, width: usize, seed: u64, split: Split) -> Result<Vec<Crop>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut crops = Vec::with_capacity(per_domain * Technique::COUNT);
    for d in Technique::ALL {
        for _ in 0..per_domain {
            crops.push(corpus.crop_from_domain(&mut rng, d, width, split)?);
        }
    }
    Ok(crops)
}

pub fn crop_tensor(crops: &[&Crop], width: usize) -> Result<Tensor<f32>> {
    let data = crops.iter().flat_map(|c| c.data.iter().copied()).collect();
    Tensor::new(vec![crops.len(), 1, FEATURE_DIM, width], data)
}

impl DomainClassifier {
    pub fn train(corpus: &Corpus, config: ClassifierConfig) -> Result<Self> {
        corpus.index.validate()?;
        let mut net = Discriminator::new(config.base, Technique::COUNT, config.seed);
        let adam = Adam::default();
        for k in 1..=config.iterations {
            let mut rng = iteration_rng(config.seed, k);
            let crops: Vec<Crop> = (0..config.batch_size)
                .map(|_| corpus.sample_crop(&mut rng, config.width, Split::Train))
                .collect::<Result<_>>()?;
            let refs: Vec<&Crop> = crops.iter().collect();
            let labels: Vec<usize> = crops.iter().map(|c| c.src.index()).collect();
            let mut g = Graph::new();
            let x = g.constant(crop_tensor(&refs, config.width)?);
            let logits = net.classify(&mut g, x)?;
            let loss = g.cross_entropy(logits, &labels)?;
            if !g.value(loss).item().is_finite() {
                return Err(StcError::Training(format!("classifier loss diverged at iteration {k}")));
            }
            g.backward(loss)?;
            let grads = g.param_grads(&net.params);
            adam.step(&mut net.params, &grads, config.lr)?;
            if k % 100 == 0 {
                log::info!("classifier iter {k} ce {:.4}", g.value(loss).item());
            }
        }
        Ok(Self { config, net })
    }

    /// Argmax technique index per batch item.
    pub fn predict(&self, x: &Tensor<f32>) -> Result<Vec<usize>> {
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let logits = self.net.classify(&mut g, xv)?;
        let k = Technique::COUNT;
        Ok(g.value(logits)
            .data()
            .chunks(k)
            .map(|row| {
                (0..k)
                    .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                    .expect("non-empty row")
            })
            .collect())
    }

    /// Fraction of crops labeled with their source domain.
    pub fn accuracy(&self, crops: &[Crop]) -> Result<f64> {
        if crops.is_empty() {
            return Err(StcError::Argument("accuracy of zero crops".into()));
        }
        let mut correct = 0;
        for chunk in crops.chunks(8) {
            let refs: Vec<&Crop> = chunk.iter().collect();
            let width = chunk[0].data.len() / FEATURE_DIM;
            let pred = self.predict(&crop_tensor(&refs, width)?)?;
            correct += pred.iter().zip(chunk).filter(|(p, c)| **p == c.src.index()).count();
        }
        Ok(correct as f64 / crops.len() as f64)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        checkpoint::write(
            path,
            &StckFile {
                meta: serde_json::json!({ "kind": "classifier", "config": self.config }),
                params: self.net.params.clone(),
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = checkpoint::read(path)?;
        if file.meta.get("kind").and_then(|k| k.as_str()) != Some("classifier") {
            return Err(StcError::Format("not a classifier checkpoint".into()));
        }
        let config: ClassifierConfig = serde_json::from_value(file.meta["config"].clone())?;
        let mut net = Discriminator::new(config.base, Technique::COUNT, config.seed);
        load_params(&mut net.params, &file.params)?;
        Ok(Self { config, net })
    }
}
