//! DenseNet-style encoder stages and the lightweight DSM branch.

use crate::autograd::{Graph, Real, Var};
use crate::error::{shape_err, Result};

use super::config::{ModelConfig, DSM_CHANNELS, NUM_STAGES, SPECTRAL_CHANNELS};
use super::layers::{Conv, Norm, PreActConv};
use super::params::{ParamBuilder, ParamStore};

/// One encoder stage.
///
/// Stage 1 runs a 3x3 stem on the spectral input and keeps the resolution;
/// stages 2..=6 average-pool by 2 first. Each stage then stacks
/// `layers_per_dense_block` norm-ReLU-conv3x3 layers whose inputs are the
/// concatenation of everything before them, and closes with a norm-ReLU-1x1
/// transition to the scheduled channel count.
#[derive(Debug, Clone)]
pub struct DenseStage {
    pub index: usize,
    pub stem: Option<Conv>,
    pub layers: Vec<PreActConv>,
    pub transition: PreActConv,
    pub in_channels: usize,
    pub out_channels: usize,
    pub growth: usize,
}

/// Output of a stage; `stem` is set for stage 1 only.
#[derive(Debug, Clone, Copy)]
pub struct StageOutput {
    pub features: Var,
    pub stem: Option<Var>,
}

impl DenseStage {
    pub fn new<T: Real>(b: &mut ParamBuilder<'_, T>, index: usize, cfg: &ModelConfig) -> Result<Self> {
        assert!((1..=NUM_STAGES).contains(&index), "stage index {index} out of range");
        let in_channels = cfg.stage_input_channels(index);
        let out_channels = cfg.stage_channels()[index - 1];
        let growth = cfg.growth(index);
        let stem = if index == 1 {
            Some(Conv::new(&mut b.pp("stem"), SPECTRAL_CHANNELS, in_channels, 3, false)?)
        } else {
            None
        };
        let mut layers = Vec::with_capacity(cfg.layers_per_dense_block);
        for t in 0..cfg.layers_per_dense_block {
            let c = in_channels + t * growth;
            layers.push(PreActConv::new(
                &mut b.pp(format!("layer{t}")),
                c,
                growth,
                3,
                cfg.groups_for(c),
            )?);
        }
        let concat = in_channels + cfg.layers_per_dense_block * growth;
        let transition = PreActConv::new(
            &mut b.pp("transition"),
            concat,
            out_channels,
            1,
            cfg.groups_for(concat),
        )?;
        Ok(DenseStage {
            index,
            stem,
            layers,
            transition,
            in_channels,
            out_channels,
            growth,
        })
    }

    /// Channels seen by each dense layer: `in_channels + t * growth`.
    pub fn layer_input_channels(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.conv.in_channels).collect()
    }

    pub fn expected_input_channels(&self) -> usize {
        if self.stem.is_some() {
            SPECTRAL_CHANNELS
        } else {
            self.in_channels
        }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<StageOutput> {
        let shape = g.shape(x).to_vec();
        if shape.len() != 4 || shape[1] != self.expected_input_channels() {
            return Err(shape_err!(
                "stage {} expects {} input channels, got {:?}",
                self.index,
                self.expected_input_channels(),
                shape
            ));
        }
        let (mut h, stem) = match &self.stem {
            Some(stem) => {
                let s = stem.forward(g, p, x)?;
                (s, Some(s))
            }
            None => {
                if shape[2] % 2 != 0 || shape[3] % 2 != 0 {
                    return Err(shape_err!(
                        "stage {} halves the resolution and needs spatial dims divisible by 2, got {}x{}",
                        self.index,
                        shape[2],
                        shape[3]
                    ));
                }
                (g.avg_pool2(x)?, None)
            }
        };
        let mut features = vec![h];
        for layer in &self.layers {
            let new = layer.forward(g, p, h)?;
            features.push(new);
            h = g.concat(&features)?;
        }
        let features = self.transition.forward(g, p, h)?;
        Ok(StageOutput { features, stem })
    }
}

/// conv3x3 -> norm -> ReLU
#[derive(Debug, Clone)]
pub struct ConvNormAct {
    pub conv: Conv,
    pub norm: Norm,
}

impl ConvNormAct {
    pub fn new<T: Real>(
        b: &mut ParamBuilder<'_, T>,
        in_channels: usize,
        out_channels: usize,
        groups: usize,
    ) -> Result<Self> {
        Ok(ConvNormAct {
            conv: Conv::new(&mut b.pp("conv"), in_channels, out_channels, 3, false)?,
            norm: Norm::new(&mut b.pp("norm"), out_channels, groups)?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let c = self.conv.forward(g, p, x)?;
        let n = self.norm.forward(g, p, c)?;
        Ok(g.relu(n))
    }
}

/// DSM feature extractor: a stem plus five pool-conv stages, producing a map
/// with the bottleneck's shape.
#[derive(Debug, Clone)]
pub struct DsmBranch {
    pub stem: ConvNormAct,
    pub stages: Vec<ConvNormAct>,
}

impl DsmBranch {
    pub fn new<T: Real>(b: &mut ParamBuilder<'_, T>, cfg: &ModelConfig) -> Result<Self> {
        let ch = cfg.stage_channels();
        let stem = ConvNormAct::new(&mut b.pp("stem"), DSM_CHANNELS, ch[0], cfg.groups_for(ch[0]))?;
        let mut stages = Vec::with_capacity(NUM_STAGES - 1);
        for k in 1..NUM_STAGES {
            stages.push(ConvNormAct::new(
                &mut b.pp(format!("stage{}", k + 1)),
                ch[k - 1],
                ch[k],
                cfg.groups_for(ch[k]),
            )?);
        }
        Ok(DsmBranch { stem, stages })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, dsm: Var) -> Result<Var> {
        let mut h = self.stem.forward(g, p, dsm)?;
        for stage in &self.stages {
            let pooled = g.avg_pool2(h)?;
            h = stage.forward(g, p, pooled)?;
        }
        Ok(h)
    }
}
