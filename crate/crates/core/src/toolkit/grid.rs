use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::classifier::DomainClassifier;
use super::eval::{eval_conversion, EvalOptions, EvalReport, PairMetrics};
use crate::error::Result;
use crate::stargan::GeneratorConfig;
use crate::trainer::{train, Corpus, RunDir, TrainConfig, TrainState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Shared by every cell; depth and seed are overridden per cell.
    pub base: TrainConfig,
    /// Width divisor applied to the full channel schedule.
    pub width_divisor: usize,
    pub eval: EvalOptions,
}

impl GridConfig {
    pub fn desk(iterations: u64, seeds: Vec<u64>) -> Result<Self> {
        Ok(Self {
            depths: vec![2, 3, 4],
            seeds,
            base: TrainConfig::desk(3, iterations)?,
            width_divisor: crate::trainer::DESK_WIDTH_DIVISOR,
            eval: EvalOptions::default(),
        })
    }

    fn cell_config(&self, depth: usize, seed: u64) -> Result<TrainConfig> {
        let mut cfg = self.base.clone();
        cfg.generator = GeneratorConfig::scaled(depth, self.width_divisor)?;
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One depth, aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    /// Full-width label such as "5x512".
    pub bottleneck: String,
    pub depth: usize,
    /// Median over seeds of the final reconstruction l1.
    pub recon_l1: f64,
    pub seed_recon_l1: Vec<f64>,
    /// Pair metrics averaged over seeds.
    pub pairs: Vec<PairMetrics>,
    pub runtime_s: f64,
    /// Set when any seed of this depth failed; the remaining fields then
    /// summarize the seeds that finished.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub config: GridConfig,
    pub rows: Vec<GridRow>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn mean_pairs(reports: &[EvalReport]) -> Vec<PairMetrics> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    let n = reports.len() as f64;
    first
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| PairMetrics {
            src: p.src,
            tgt: p.tgt,
            mcd: reports.iter().map(|r| r.pairs[i].mcd).sum::<f64>() / n,
            cls_acc: reports.iter().map(|r| r.pairs[i].cls_acc).sum::<f64>() / n,
        })
        .collect()
}

/// Trains and evaluates one cell. With `out`, the run directory is
/// `out/d{depth}_s{seed}`.
pub fn run_cell(
    corpus: &Corpus,
    cfg: &GridConfig,
    depth: usize,
    seed: u64,
    classifier: &DomainClassifier,
    out: Option<&Path>,
) -> Result<(TrainState, EvalReport)> {
    let state = TrainState::new(cfg.cell_config(depth, seed)?, corpus.norm.clone())?;
    let dir = out.map(|o| RunDir(o.join(format!("d{depth}_s{seed}"))));
    let (state, _) = train(state, corpus, dir.as_ref())?;
    let report = eval_conversion(&state, corpus, classifier, &cfg.eval)?;
    Ok((state, report))
}

/// Trains every depth under every seed with identical budgets and reports
/// one row per depth. A failing cell is recorded in its row.
pub fn run_bottleneck_grid(
    corpus: &Corpus,
    cfg: &GridConfig,
    classifier: &DomainClassifier,
    out: Option<&Path>,
) -> GridReport {
    let mut rows = Vec::new();
    for &depth in &cfg.depths {
        let started = Instant::now();
        let label = GeneratorConfig::scaled(depth, cfg.width_divisor)
            .map(|g| g.bottleneck_label())
            .unwrap_or_else(|_| format!("depth{depth}"));
        let mut reports = Vec::new();
        let mut failures = Vec::new();
        for &seed in &cfg.seeds {
            match run_cell(corpus, cfg, depth, seed, classifier, out) {
                Ok((_, report)) => {
                    log::info!("grid {label} seed {seed}: recon {:.5}", report.recon_l1);
                    reports.push(report);
                }
                Err(e) => {
                    log::error!("grid {label} seed {seed} failed: {e}");
                    failures.push(format!("seed {seed}: {e}"));
                }
            }
        }
        let seed_recon: Vec<f64> = reports.iter().map(|r| r.recon_l1).collect();
        rows.push(GridRow {
            bottleneck: label,
            depth,
            recon_l1: median(&seed_recon),
            seed_recon_l1: seed_recon,
            pairs: mean_pairs(&reports),
            runtime_s: started.elapsed().as_secs_f64(),
            failure: (!failures.is_empty()).then(|| failures.join("; ")),
        });
    }
    GridReport {
        config: cfg.clone(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn cell_configs_follow_depth_and_seed() {
        let cfg = GridConfig::desk(10, vec![1, 2]).unwrap();
        let c = cfg.cell_config(4, 2).unwrap();
        assert_eq!((c.generator.depth, c.seed, c.iterations), (4, 2, 10));
        assert_eq!(c.generator.bottleneck_label(), "1x1024");
    }
}
