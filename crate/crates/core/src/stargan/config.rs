use serde::{Deserialize, Serialize};

use crate::error::{Result, StcError};
use crate::features::FEATURE_DIM;
use crate::nn::{conv_out, conv_transpose_out};
use crate::technique::Technique;

/// One convolution stage: kernel, stride, padding as (height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageGeom {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
}

const fn stage(kernel: (usize, usize), stride: (usize, usize), pad: (usize, usize)) -> StageGeom {
    StageGeom { kernel, stride, pad }
}

pub const STEM: StageGeom = stage((3, 9), (1, 1), (1, 4));
/// Encoder stages; the decoder mirrors them with transposed convolutions.
pub const DOWN: [StageGeom; 4] = [
    stage((4, 8), (2, 2), (1, 3)),
    stage((4, 8), (2, 2), (1, 3)),
    stage((4, 7), (3, 1), (1, 3)),
    stage((5, 7), (1, 1), (0, 3)),
];
pub const HEAD: StageGeom = stage((7, 7), (1, 1), (3, 3));

pub const DISC_STEM: StageGeom = stage((3, 9), (1, 1), (1, 4));
pub const DISC_DOWN: StageGeom = stage((3, 8), (2, 2), (1, 3));
pub const DISC_HEAD: StageGeom = stage((3, 3), (1, 1), (1, 1));

pub const FULL_STEM: usize = 64;
pub const FULL_STAGES: [usize; 4] = [128, 256, 512, 1024];
pub const CROP_WIDTH: usize = 400;

/// Generator geometry and widths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Number of down/upsampling stages, 2 to 4.
    pub depth: usize,
    pub stem_channels: usize,
    /// Channels after each stage; only the first `depth` are used.
    pub stage_channels: Vec<usize>,
    pub input_height: usize,
    pub crop_width: usize,
    pub num_domains: usize,
}

impl GeneratorConfig {
    /// Full-width network: stem 64, stages 128/256/512/1024.
    pub fn full(depth: usize) -> Result<Self> {
        Self::scaled(depth, 1)
    }

    /// Full widths divided by `divisor`.
    pub fn scaled(depth: usize, divisor: usize) -> Result<Self> {
        if divisor == 0 || FULL_STEM % divisor != 0 {
            return Err(StcError::Config(format!("width divisor {divisor} must divide {FULL_STEM}")));
        }
        let cfg = Self {
            depth,
            stem_channels: FULL_STEM / divisor,
            stage_channels: FULL_STAGES.iter().map(|c| c / divisor).collect(),
            input_height: FEATURE_DIM,
            crop_width: CROP_WIDTH,
            num_domains: Technique::COUNT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.depth) {
            return Err(StcError::Config(format!("depth must be 2, 3 or 4, got {}", self.depth)));
        }
        if self.stage_channels.len() < self.depth || self.stem_channels == 0 {
            return Err(StcError::Config("too few stage channel entries for depth".into()));
        }
        if self.stage_channels[..self.depth].iter().any(|&c| c == 0) {
            return Err(StcError::Config("stage channels must be positive".into()));
        }
        if self.num_domains != Technique::COUNT {
            return Err(StcError::Config(format!("num_domains must be {}", Technique::COUNT)));
        }
        if self.input_height != FEATURE_DIM {
            return Err(StcError::Config(format!("input height must be {FEATURE_DIM}")));
        }
        self.encoder_shapes(self.crop_width)?;
        Ok(())
    }

    /// `(channels, height, width)` after the stem and after every encoder
    /// stage, for an input of the given width. Pure arithmetic.
    pub fn encoder_shapes(&self, width: usize) -> Result<Vec<(usize, usize, usize)>> {
        if width == 0 || width % 4 != 0 {
            return Err(StcError::Argument(format!("width {width} is not a positive multiple of 4")));
        }
        let mut shapes = Vec::with_capacity(self.depth + 1);
        let (mut h, mut w) = (self.input_height, width);
        let out = |len, k, s, p| conv_out(len, k, s, p).filter(|&o| o > 0);
        let stem_h = out(h, STEM.kernel.0, STEM.stride.0, STEM.pad.0);
        let stem_w = out(w, STEM.kernel.1, STEM.stride.1, STEM.pad.1);
        let (Some(sh), Some(sw)) = (stem_h, stem_w) else {
            return Err(StcError::Argument("input too small for the stem".into()));
        };
        (h, w) = (sh, sw);
        shapes.push((self.stem_channels, h, w));
        for (i, g) in DOWN.iter().take(self.depth).enumerate() {
            match (out(h, g.kernel.0, g.stride.0, g.pad.0), out(w, g.kernel.1, g.stride.1, g.pad.1)) {
                (Some(nh), Some(nw)) => (h, w) = (nh, nw),
                _ => return Err(StcError::Argument(format!("stage {} does not fit {h}x{w}", i + 1))),
            }
            shapes.push((self.stage_channels[i], h, w));
        }
        Ok(shapes)
    }

    /// `(height, channels)` of the bottleneck at the configured crop width.
    pub fn bottleneck(&self) -> (usize, usize) {
        let shapes = self.encoder_shapes(self.crop_width).expect("validated config");
        let (c, h, _) = shapes[self.depth];
        (h, c)
    }

    /// Latent values per frame column: bottleneck height times channels.
    pub fn bottleneck_size(&self) -> usize {
        let (h, c) = self.bottleneck();
        h * c
    }

    /// Label such as "15x256" using full-width channel counts.
    pub fn bottleneck_label(&self) -> String {
        let (h, _) = self.bottleneck();
        format!("{h}x{}", FULL_STAGES[self.depth - 1])
    }

    /// Output padding that makes decoder stage `i` restore `target`.
    pub fn output_padding(i: usize, input: (usize, usize), target: (usize, usize)) -> Result<(usize, usize)> {
        let g = DOWN[i];
        let base_h = conv_transpose_out(input.0, g.kernel.0, g.stride.0, g.pad.0, 0);
        let base_w = conv_transpose_out(input.1, g.kernel.1, g.stride.1, g.pad.1, 0);
        match (base_h, base_w) {
            (Some(bh), Some(bw)) if bh <= target.0 && bw <= target.1 => {
                let op = (target.0 - bh, target.1 - bw);
                if op.0 >= g.stride.0.max(1) || op.1 >= g.stride.1.max(1) {
                    return Err(StcError::Argument(format!("stage {} cannot mirror {target:?}", i + 1)));
                }
                Ok(op)
            }
            _ => Err(StcError::Argument(format!("stage {} cannot mirror {target:?}", i + 1))),
        }
    }
}
