use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, Split};
use super::schedule::{lr_schedule, TrainConfig};
use crate::error::{Result, StcError};
use crate::features::{NormStats, FEATURE_DIM};
use crate::nn::checkpoint::{self, StckFile};
use crate::nn::{Adam, Graph, Parameter, Tensor};
use crate::stargan::{compute_losses, load_params, Discriminator, Generator, LossParts};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MODEL_FILE: &str = "model.stck";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const NORM_FILE: &str = "norm.json";
pub const METRICS_HEADER: &str = "iter,lr,g_adv,g_cls,g_rec,d_adv,d_cls,g_updates,d_updates";

const DISC_SEED_SALT: u64 = 0xd15c_0000_0000_0001;

/// One metric-log row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub iter: u64,
    pub lr: f64,
    pub g_adv: f64,
    pub g_cls: f64,
    pub g_rec: f64,
    pub d_adv: f64,
    pub d_cls: f64,
    /// Cumulative update counts after this iteration.
    pub g_updates: u64,
    pub d_updates: u64,
}

impl Metrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iter, self.lr, self.g_adv, self.g_cls, self.g_rec, self.d_adv, self.d_cls, self.g_updates, self.d_updates
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(StcError::Format(format!("metric row has {} fields", f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse().map_err(|_| StcError::Format(format!("bad metric value {:?}", f[i])))
        };
        let int = |i: usize| -> Result<u64> {
            f[i].parse().map_err(|_| StcError::Format(format!("bad metric count {:?}", f[i])))
        };
        Ok(Self {
            iter: int(0)?,
            lr: num(1)?,
            g_adv: num(2)?,
            g_cls: num(3)?,
            g_rec: num(4)?,
            d_adv: num(5)?,
            d_cls: num(6)?,
            g_updates: int(7)?,
            d_updates: int(8)?,
        })
    }
}

/// Reads a metric log written by [`train`].
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<Metrics>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(StcError::Format("metric log header mismatch".into()));
    }
    lines.filter(|l| !l.is_empty()).map(Metrics::parse_csv_row).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    iteration: u64,
    g_updates: u64,
    d_updates: u64,
    config: TrainConfig,
    norm: NormStats,
}

/// JSON manifest written next to every final checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub depth: usize,
    pub channels: Vec<usize>,
    pub num_domains: usize,
    pub norm_stats_ref: String,
    pub lambda_cls: f64,
    pub lambda_rec: f64,
}

/// Networks, optimizer moments and counters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: TrainConfig,
    pub gen: Generator<f32>,
    pub disc: Discriminator<f32>,
    pub norm: NormStats,
    /// Completed iterations.
    pub iteration: u64,
    pub g_updates: u64,
    pub d_updates: u64,
}

impl TrainState {
    pub fn new(config: TrainConfig, norm: NormStats) -> Result<Self> {
        config.validate()?;
        norm.validate()?;
        let gen = Generator::new(config.generator.clone(), config.seed)?;
        let disc = Discriminator::new(config.disc_base, config.generator.num_domains, config.seed ^ DISC_SEED_SALT);
        Ok(Self {
            config,
            gen,
            disc,
            norm,
            iteration: 0,
            g_updates: 0,
            d_updates: 0,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = CheckpointMeta {
            iteration: self.iteration,
            g_updates: self.g_updates,
            d_updates: self.d_updates,
            config: self.config.clone(),
            norm: self.norm.clone(),
        };
        let params: Vec<Parameter<f32>> = self.gen.params.iter().chain(&self.disc.params).cloned().collect();
        checkpoint::write(
            path,
            &StckFile {
                meta: serde_json::to_value(meta)?,
                params,
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = checkpoint::read(path.as_ref())?;
        let meta: CheckpointMeta = serde_json::from_value(file.meta)
            .map_err(|e| StcError::Format(format!("checkpoint metadata: {e}")))?;
        let mut state = Self::new(meta.config, meta.norm)?;
        load_params(&mut state.gen.params, &file.params)?;
        load_params(&mut state.disc.params, &file.params)?;
        state.iteration = meta.iteration;
        state.g_updates = meta.g_updates;
        state.d_updates = meta.d_updates;
        Ok(state)
    }

    pub fn manifest(&self) -> Manifest {
        let g = &self.config.generator;
        let mut channels = vec![g.stem_channels];
        channels.extend_from_slice(&g.stage_channels[..g.depth]);
        Manifest {
            depth: g.depth,
            channels,
            num_domains: g.num_domains,
            norm_stats_ref: NORM_FILE.to_string(),
            lambda_cls: self.config.weights.lambda_cls,
            lambda_rec: self.config.weights.lambda_rec,
        }
    }

    fn adam(&self) -> Adam {
        Adam {
            beta1: self.config.beta1,
            beta2: self.config.beta2,
            ..Adam::default()
        }
    }
}

/// RNG for iteration `k`; independent of every other iteration so a
/// resumed run draws the same batches.
pub fn iteration_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Batch tensor `(n, 1, 60, width)` with source and target labels.
pub fn sample_batch(corpus: &Corpus, cfg: &TrainConfig, k: u64) -> Result<(Tensor<f32>, Vec<usize>, Vec<usize>)> {
    let mut rng = iteration_rng(cfg.seed, k);
    let mut data = Vec::with_capacity(cfg.batch_size * FEATURE_DIM * cfg.crop_frames);
    let (mut src, mut tgt) = (Vec::new(), Vec::new());
    for _ in 0..cfg.batch_size {
        let crop = corpus.sample_crop(&mut rng, cfg.crop_frames, Split::Train)?;
        data.extend_from_slice(&crop.data);
        src.push(crop.src.index());
        tgt.push(crop.tgt.index());
    }
    let x = Tensor::new(vec![cfg.batch_size, 1, FEATURE_DIM, cfg.crop_frames], data)?;
    Ok((x, src, tgt))
}

fn finite(p: &LossParts) -> bool {
    [p.g_adv, p.g_cls, p.g_rec, p.d_adv, p.d_cls, p.g_total, p.d_total]
        .iter()
        .all(|v| v.is_finite())
}

/// Runs iteration `state.iteration + 1`: one generator update and, at
/// cycle boundaries, one discriminator update on the same batch (roles
/// swap under the inverted ratio).
pub fn train_step(state: &mut TrainState, corpus: &Corpus) -> Result<Metrics> {
    let k = state.iteration + 1;
    let lr = lr_schedule(state.iteration, &state.config);
    let (x, src, tgt) = sample_batch(corpus, &state.config, k)?;
    let (update_g, update_d) = state.config.updates(k);
    let mut g = Graph::new();
    let xv = g.constant(x);
    let vars = compute_losses(&mut g, &state.gen, &state.disc, xv, &src, &tgt, &state.config.weights)?;
    let parts = vars.parts(&g);
    if !finite(&parts) {
        let msg = format!("non-finite loss at iteration {k}: {parts:?}; sources {src:?}, targets {tgt:?}, lr {lr}");
        log::error!("{msg}");
        return Err(StcError::Training(msg));
    }
    let adam = state.adam();
    let g_grads = if update_g {
        g.backward(vars.g_total)?;
        Some(g.param_grads(&state.gen.params))
    } else {
        None
    };
    let d_grads = if update_d {
        g.backward(vars.d_total)?;
        Some(g.param_grads(&state.disc.params))
    } else {
        None
    };
    drop(g);
    if let Some(grads) = g_grads {
        adam.step(&mut state.gen.params, &grads, lr)?;
        state.g_updates += 1;
    }
    if let Some(grads) = d_grads {
        adam.step(&mut state.disc.params, &grads, lr)?;
        state.d_updates += 1;
    }
    state.iteration = k;
    Ok(Metrics {
        iter: k,
        lr,
        g_adv: parts.g_adv,
        g_cls: parts.g_cls,
        g_rec: parts.g_rec,
        d_adv: parts.d_adv,
        d_cls: parts.d_cls,
        g_updates: state.g_updates,
        d_updates: state.d_updates,
    })
}

/// Where a run writes its artifacts.
#[derive(Debug, Clone)]
pub struct RunDir(pub PathBuf);

impl RunDir {
    pub fn snapshot(&self, iter: u64) -> PathBuf {
        self.0.join(format!("snapshot_{iter:07}.stck"))
    }

    pub fn model(&self) -> PathBuf {
        self.0.join(MODEL_FILE)
    }

    pub fn metrics(&self) -> PathBuf {
        self.0.join(METRICS_FILE)
    }
}

/// Trains until `state.config.iterations`, appending rows to the metric log
/// and writing snapshots, the final checkpoint, manifest and norm stats.
pub fn train(mut state: TrainState, corpus: &Corpus, out: Option<&RunDir>) -> Result<(TrainState, Vec<Metrics>)> {
    corpus.index.validate()?;
    let mut log = match out {
        Some(dir) => {
            fs::create_dir_all(&dir.0)?;
            let path = dir.metrics();
            let fresh = state.iteration == 0 || !path.exists();
            let file = if fresh {
                File::create(&path)?
            } else {
                OpenOptions::new().append(true).open(&path)?
            };
            let mut w = BufWriter::new(file);
            if fresh {
                writeln!(w, "{METRICS_HEADER}")?;
            }
            Some(w)
        }
        None => None,
    };
    let mut rows = Vec::new();
    while state.iteration < state.config.iterations {
        let m = train_step(&mut state, corpus)?;
        if let Some(w) = log.as_mut() {
            writeln!(w, "{}", m.csv_row())?;
        }
        if m.iter % 100 == 0 || m.iter == state.config.iterations {
            log::info!(
                "iter {} lr {:.2e} g_adv {:.4} g_cls {:.4} g_rec {:.4} d_adv {:.4} d_cls {:.4}",
                m.iter, m.lr, m.g_adv, m.g_cls, m.g_rec, m.d_adv, m.d_cls
            );
        }
        rows.push(m);
        if let Some(dir) = out {
            let every = state.config.snapshot_every;
            if every > 0 && m.iter % every == 0 && m.iter < state.config.iterations {
                if let Some(w) = log.as_mut() {
                    w.flush()?;
                }
                state.save(dir.snapshot(m.iter))?;
            }
        }
    }
    if let (Some(dir), Some(mut w)) = (out, log) {
        w.flush()?;
        state.save(dir.model())?;
        state.norm.save_json(dir.0.join(NORM_FILE))?;
        fs::write(dir.0.join(MANIFEST_FILE), serde_json::to_vec_pretty(&state.manifest())?)?;
    }
    Ok((state, rows))
}
