use serde::{Deserialize, Serialize};

use crate::error::{Result, StcError};
use crate::stargan::{GeneratorConfig, LossWeights, CROP_WIDTH, FULL_STEM};

/// Which network is updated less often.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRatio {
    /// Generator every iteration, discriminator once per cycle.
    DiscriminatorOncePerCycle,
    /// Discriminator every iteration, generator once per cycle.
    GeneratorOncePerCycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: u64,
    pub lr0: f64,
    /// Iterations over which the rate falls linearly to zero.
    pub decay_span: u64,
    pub beta1: f64,
    pub beta2: f64,
    /// Iterations per update cycle.
    pub cycle: u64,
    pub ratio: UpdateRatio,
    pub crop_frames: usize,
    pub batch_size: usize,
    pub weights: LossWeights,
    pub seed: u64,
    pub generator: GeneratorConfig,
    /// Discriminator base width.
    pub disc_base: usize,
    /// Snapshot interval in iterations; 0 disables snapshots.
    pub snapshot_every: u64,
}

/// Width divisor of the desk-scale networks.
pub const DESK_WIDTH_DIVISOR: usize = 16;
pub const DESK_ITERATIONS: u64 = 2000;
pub const DESK_BATCH: usize = 1;
pub const DESK_DISC_BASE: usize = 16;

impl TrainConfig {
    /// Full-width networks, 250k iterations, decay over the last 100k.
    pub fn paper_scale(depth: usize) -> Result<Self> {
        Ok(Self {
            iterations: 250_000,
            decay_span: 100_000,
            batch_size: 4,
            generator: GeneratorConfig::full(depth)?,
            disc_base: FULL_STEM / 2,
            ..Self::desk(depth, DESK_ITERATIONS)?
        })
    }

    /// Narrow networks; the rate decays over the last 40% of the budget.
    pub fn desk(depth: usize, iterations: u64) -> Result<Self> {
        let cfg = Self {
            iterations,
            lr0: 1e-4,
            decay_span: (iterations * 2 / 5).max(1),
            beta1: 0.5,
            beta2: 0.999,
            cycle: 3,
            ratio: UpdateRatio::DiscriminatorOncePerCycle,
            crop_frames: CROP_WIDTH,
            batch_size: DESK_BATCH,
            weights: LossWeights::default(),
            seed: 0,
            generator: GeneratorConfig::scaled(depth, DESK_WIDTH_DIVISOR)?,
            disc_base: DESK_DISC_BASE,
            snapshot_every: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn decay_start(&self) -> u64 {
        self.iterations - self.decay_span
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(StcError::Config(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if self.decay_span == 0 || self.decay_span > self.iterations {
            return bad("decay span must lie in 1..=iterations");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.cycle == 0 || self.batch_size == 0 || self.disc_base == 0 {
            return bad("cycle length, batch size and discriminator width must be positive");
        }
        if self.crop_frames % 4 != 0 || self.crop_frames == 0 {
            return bad("crop width must be a positive multiple of 4");
        }
        self.generator.validate()
    }

    /// Whether iteration `k` (1-based) updates the generator and the
    /// discriminator.
    pub fn updates(&self, k: u64) -> (bool, bool) {
        let boundary = k % self.cycle == 0;
        match self.ratio {
            UpdateRatio::DiscriminatorOncePerCycle => (true, boundary),
            UpdateRatio::GeneratorOncePerCycle => (boundary, true),
        }
    }
}

/// Constant `lr0` up to the knee, then linear to zero at `iterations`.
pub fn lr_schedule(iter: u64, cfg: &TrainConfig) -> f64 {
    let start = cfg.decay_start();
    if iter <= start {
        cfg.lr0
    } else if iter >= cfg.iterations {
        0.0
    } else {
        cfg.lr0 * (cfg.iterations - iter) as f64 / cfg.decay_span as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_schedule_points() {
        let cfg = TrainConfig::paper_scale(3).unwrap();
        assert_eq!(cfg.decay_start(), 150_000);
        assert_eq!(lr_schedule(0, &cfg), 1e-4);
        assert_eq!(lr_schedule(149_999, &cfg), 1e-4);
        assert!((lr_schedule(200_000, &cfg) - 5e-5).abs() < 1e-18);
        assert_eq!(lr_schedule(250_000, &cfg), 0.0);
    }

    #[test]
    fn schedule_has_one_knee_and_never_rises() {
        let cfg = TrainConfig::desk(2, 100).unwrap();
        let lrs: Vec<f64> = (0..=100).map(|i| lr_schedule(i, &cfg)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        let slopes: Vec<f64> = lrs.windows(2).map(|w| w[1] - w[0]).collect();
        let knees = slopes.windows(2).filter(|s| (s[1] - s[0]).abs() > 1e-12).count();
        assert_eq!(knees, 1);
    }

    #[test]
    fn update_pattern() {
        let mut cfg = TrainConfig::desk(2, 12).unwrap();
        let d: Vec<u64> = (1..=12).filter(|&k| cfg.updates(k).1).collect();
        assert_eq!(d, vec![3, 6, 9, 12]);
        assert!((1..=12).all(|k| cfg.updates(k).0));
        cfg.ratio = UpdateRatio::GeneratorOncePerCycle;
        assert_eq!((1..=12).filter(|&k| cfg.updates(k).0).count(), 4);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = TrainConfig::desk(3, 10).unwrap();
        cfg.decay_span = 11;
        assert!(cfg.validate().is_err());
        cfg.decay_span = 4;
        cfg.crop_frames = 402;
        assert!(cfg.validate().is_err());
    }
}
