//! Per-category SConv head.

use crate::autograd::{Graph, Real, Var};
use crate::error::{config_err, shape_err, Result};

use super::layers::Conv;
use super::params::{ParamBuilder, ParamStore};
use super::se::SeLayer;

/// One branch per class `i`: an SE gate produces `w_i` from the shared
/// feature `C`, and a 3x3 conv maps `C * w_i + S` to that class's score map.
#[derive(Debug, Clone)]
pub struct SConvHead {
    pub branches: Vec<ClassBranch>,
    pub channels: usize,
}

#[derive(Debug, Clone)]
pub struct ClassBranch {
    pub se: SeLayer,
    pub conv: Conv,
}

#[derive(Debug, Clone)]
pub struct SConvOutput {
    /// `(batch, num_classes, H, W)`.
    pub logits: Var,
    /// Per-class `(batch, channels)` gates.
    pub weights: Vec<Var>,
}

impl SConvHead {
    pub fn new<T: Real>(
        b: &mut ParamBuilder<'_, T>,
        channels: usize,
        num_classes: usize,
        se_reduction: usize,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(config_err!("SConv head needs >= 2 classes, got {num_classes}"));
        }
        let reduction = se_reduction.min(channels);
        let branches = (0..num_classes)
            .map(|i| {
                let mut cb = b.pp(format!("class{i}"));
                Ok(ClassBranch {
                    se: SeLayer::new(&mut cb.pp("se"), channels, reduction)?,
                    conv: Conv::new(&mut cb.pp("conv"), channels, 1, 3, true)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SConvHead { branches, channels })
    }

    pub fn num_classes(&self) -> usize {
        self.branches.len()
    }

    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        p: &ParamStore<T>,
        shared: Var,
        shallow: Var,
    ) -> Result<SConvOutput> {
        if g.shape(shared) != g.shape(shallow) {
            return Err(shape_err!(
                "SConv needs C and S of equal shape, got {:?} and {:?}",
                g.shape(shared),
                g.shape(shallow)
            ));
        }
        let mut scores = Vec::with_capacity(self.branches.len());
        let mut weights = Vec::with_capacity(self.branches.len());
        for branch in &self.branches {
            let gated = branch.se.forward(g, p, shared)?;
            let mixed = g.add(gated.reweighted, shallow)?;
            scores.push(branch.conv.forward(g, p, mixed)?);
            weights.push(gated.weights);
        }
        Ok(SConvOutput {
            logits: g.concat(&scores)?,
            weights,
        })
    }
}
