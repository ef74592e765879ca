use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Spectral input bands: NIR, R, G, B.
pub const SPECTRAL_CHANNELS: usize = 4;
pub const DSM_CHANNELS: usize = 1;
/// Number of encoder stages; stages 2..=6 halve the resolution.
pub const NUM_STAGES: usize = 6;
/// Input height and width must be multiples of this.
pub const SPATIAL_MULTIPLE: usize = 32;

/// Architecture hyper-parameters of [`RobustDenseNet`](super::RobustDenseNet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_classes: usize,
    /// Output channels of the six encoder stages at full scale.
    pub channel_schedule: Vec<usize>,
    /// Divides every entry of the schedule; used to shrink the network for CPU runs.
    pub depth_scale: f64,
    pub se_reduction: usize,
    /// Dense-layer growth rate. `None` means a quarter of the stage's output channels.
    pub growth_rate: Option<usize>,
    pub layers_per_dense_block: usize,
    /// Requested group count. Each norm uses `gcd(channels, norm_groups)` groups.
    pub norm_groups: usize,
    pub upscale_factor: usize,
    /// Fuse DSM features into the bottleneck. Disabling drops the DSM branch entirely.
    pub semix: bool,
    /// Use the fusing Up block. Disabling pixel-shuffles `concat(deep, skip)` directly.
    pub up_fusion: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_classes: 6,
            channel_schedule: vec![64, 128, 256, 512, 1024, 1024],
            depth_scale: 1.0,
            se_reduction: 16,
            growth_rate: None,
            layers_per_dense_block: 4,
            norm_groups: 8,
            upscale_factor: 2,
            semix: true,
            up_fusion: true,
        }
    }
}

impl ModelConfig {
    /// Desk-scale network (channels 8..128) that trains on a CPU in minutes.
    pub fn tiny() -> Self {
        ModelConfig {
            depth_scale: 8.0,
            se_reduction: 4,
            ..Default::default()
        }
    }

    /// Smallest useful network (channels 4..16), used for gradient checks.
    pub fn micro(num_classes: usize) -> Self {
        ModelConfig {
            num_classes,
            channel_schedule: vec![4, 8, 16, 16, 16, 16],
            depth_scale: 1.0,
            se_reduction: 2,
            norm_groups: 2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(config_err!("num_classes must be >= 2, got {}", self.num_classes));
        }
        if self.num_classes > 255 {
            return Err(config_err!("num_classes must fit below the ignore label 255"));
        }
        if self.channel_schedule.len() != NUM_STAGES {
            return Err(config_err!(
                "channel_schedule needs exactly {NUM_STAGES} entries, got {}",
                self.channel_schedule.len()
            ));
        }
        for pair in self.channel_schedule.windows(2) {
            if pair[1] != pair[0] && pair[1] != 2 * pair[0] {
                return Err(config_err!(
                    "consecutive schedule entries must repeat or double, got {} -> {}",
                    pair[0],
                    pair[1]
                ));
            }
        }
        if !(self.depth_scale.is_finite() && self.depth_scale > 0.0) {
            return Err(config_err!("depth_scale must be positive, got {}", self.depth_scale));
        }
        if self.upscale_factor != 2 {
            return Err(config_err!("upscale_factor is fixed at 2, got {}", self.upscale_factor));
        }
        if self.norm_groups == 0 || self.se_reduction == 0 || self.layers_per_dense_block == 0 {
            return Err(config_err!(
                "norm_groups, se_reduction and layers_per_dense_block must be >= 1"
            ));
        }
        let r2 = self.upscale_factor * self.upscale_factor;
        for &raw in &self.channel_schedule {
            let scaled = raw as f64 / self.depth_scale;
            if scaled.fract() != 0.0 || scaled < 1.0 {
                return Err(config_err!(
                    "channel count {raw} / depth_scale {} is not a positive integer",
                    self.depth_scale
                ));
            }
            let scaled = scaled as usize;
            if scaled % self.norm_groups != 0 || scaled % r2 != 0 {
                return Err(config_err!(
                    "scaled channel count {scaled} must be divisible by norm_groups {} and by {r2}",
                    self.norm_groups
                ));
            }
        }
        let smallest = self.stage_channels().into_iter().min().unwrap_or(0);
        if self.se_reduction > smallest {
            return Err(config_err!(
                "se_reduction {} exceeds the smallest channel count {smallest}",
                self.se_reduction
            ));
        }
        if let Some(g) = self.growth_rate {
            if g == 0 {
                return Err(config_err!("growth_rate must be >= 1"));
            }
        }
        Ok(())
    }

    /// Scaled output channels of every encoder stage.
    pub fn stage_channels(&self) -> [usize; NUM_STAGES] {
        let mut out = [0; NUM_STAGES];
        for (o, &raw) in out.iter_mut().zip(&self.channel_schedule) {
            *o = (raw as f64 / self.depth_scale) as usize;
        }
        out
    }

    /// Input channels of stage `index` (1-based). Stage 1 starts from the stem output.
    pub fn stage_input_channels(&self, index: usize) -> usize {
        let ch = self.stage_channels();
        if index <= 1 {
            ch[0]
        } else {
            ch[index - 2]
        }
    }

    pub fn growth(&self, index: usize) -> usize {
        self.growth_rate
            .unwrap_or_else(|| (self.stage_channels()[index - 1] / 4).max(1))
    }

    /// Per Up block `(deep, skip/fused, out)` channel widths, from the
    /// bottleneck outwards. Block `j` (1-based) upsamples to the resolution
    /// of encoder stage `6 - j` and emits that stage's channel count.
    pub fn decoder_widths(&self) -> Vec<(usize, usize, usize)> {
        let ch = self.stage_channels();
        let r2 = self.upscale_factor * self.upscale_factor;
        (1..NUM_STAGES)
            .map(|j| {
                let deep = ch[NUM_STAGES - j];
                let out = ch[NUM_STAGES - 1 - j];
                (deep, r2 * out - deep, out)
            })
            .collect()
    }

    /// Group count used by a norm over `channels` channels.
    pub fn groups_for(&self, channels: usize) -> usize {
        gcd(channels, self.norm_groups).max(1)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
