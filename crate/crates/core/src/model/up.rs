//! Decoder Up block: skip fusion followed by pixel-shuffle upsampling.

use crate::autograd::{Graph, ParamId, Real, Var};
use crate::error::{shape_err, Result};

use super::layers::Conv;
use super::params::{ParamBuilder, ParamStore};

/// Parameters of the fusing variant.
#[derive(Debug, Clone)]
pub struct Fusion {
    /// 3x3 conv over `concat(deep, shallow)`.
    pub fuse: Conv,
    /// 1x1 projection of `deep` to the fused width.
    pub proj: Conv,
    /// Unconstrained logit of the blend weight; `alpha = sigmoid(logit)`.
    pub alpha_logit: ParamId,
}

/// Upsamples `deep` by 2.
///
/// With fusion:
/// `fused = a * conv3x3(concat(deep, shallow)) + (1 - a) * proj1x1(deep)` and
/// `out = pixel_shuffle(concat(deep, fused), 2)`.
/// Without fusion (`plain`): `out = pixel_shuffle(concat(deep, shallow), 2)`.
#[derive(Debug, Clone)]
pub struct UpBlock {
    pub deep_channels: usize,
    pub shallow_channels: usize,
    pub fused_channels: usize,
    pub fusion: Option<Fusion>,
    pub factor: usize,
}

impl UpBlock {
    pub fn new<T: Real>(
        b: &mut ParamBuilder<'_, T>,
        deep_channels: usize,
        shallow_channels: usize,
        fused_channels: usize,
        with_fusion: bool,
    ) -> Result<Self> {
        let factor = 2;
        let pre_shuffle = if with_fusion {
            deep_channels + fused_channels
        } else {
            deep_channels + shallow_channels
        };
        if pre_shuffle % (factor * factor) != 0 {
            return Err(shape_err!(
                "Up block input width {pre_shuffle} is not divisible by {}",
                factor * factor
            ));
        }
        let fusion = if with_fusion {
            Some(Fusion {
                fuse: Conv::new(
                    &mut b.pp("fuse"),
                    deep_channels + shallow_channels,
                    fused_channels,
                    3,
                    true,
                )?,
                proj: Conv::new(&mut b.pp("proj"), deep_channels, fused_channels, 1, true)?,
                alpha_logit: b.constant("alpha", &[1], 0.0)?,
            })
        } else {
            None
        };
        Ok(UpBlock {
            deep_channels,
            shallow_channels,
            fused_channels,
            fusion,
            factor,
        })
    }

    pub fn out_channels(&self) -> usize {
        let pre = if self.fusion.is_some() {
            self.deep_channels + self.fused_channels
        } else {
            self.deep_channels + self.shallow_channels
        };
        pre / (self.factor * self.factor)
    }

    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        p: &ParamStore<T>,
        deep: Var,
        shallow: Var,
    ) -> Result<Var> {
        check_pair(g, deep, shallow)?;
        match &self.fusion {
            Some(f) => {
                let logit = g.param(f.alpha_logit, p.get(f.alpha_logit));
                let alpha = g.sigmoid(logit);
                let fused = fuse(g, p, f, deep, shallow, alpha)?;
                let cat = g.concat(&[deep, fused])?;
                g.pixel_shuffle(cat, self.factor)
            }
            None => {
                let cat = g.concat(&[deep, shallow])?;
                g.pixel_shuffle(cat, self.factor)
            }
        }
    }
}

fn check_pair<T: Real>(g: &Graph<T>, deep: Var, shallow: Var) -> Result<()> {
    let (d, s) = (g.shape(deep), g.shape(shallow));
    if d.len() != 4 || s.len() != 4 || d[0] != s[0] || d[2..] != s[2..] {
        return Err(shape_err!(
            "Up block needs deep and shallow maps with equal batch and spatial dims, got {d:?} and {s:?}"
        ));
    }
    Ok(())
}

/// The weighted fusion term for an explicit blend weight `alpha` (a
/// one-element tape value).
pub fn fuse<T: Real>(
    g: &mut Graph<T>,
    p: &ParamStore<T>,
    f: &Fusion,
    deep: Var,
    shallow: Var,
    alpha: Var,
) -> Result<Var> {
    check_pair(g, deep, shallow)?;
    let cat = g.concat(&[deep, shallow])?;
    let conv = f.fuse.forward(g, p, cat)?;
    let projected = f.proj.forward(g, p, deep)?;
    let a = g.scale_by(conv, alpha)?;
    let one_minus = g.one_minus(alpha);
    let b = g.scale_by(projected, one_minus)?;
    g.add(a, b)
}

/// Up block forward with a caller-supplied blend weight instead of the learned one.
pub fn up_block_with_alpha<T: Real>(
    g: &mut Graph<T>,
    p: &ParamStore<T>,
    block: &UpBlock,
    deep: Var,
    shallow: Var,
    alpha: Var,
) -> Result<Var> {
    let f = block
        .fusion
        .as_ref()
        .ok_or_else(|| shape_err!("plain Up block has no fusion weight"))?;
    let fused = fuse(g, p, f, deep, shallow, alpha)?;
    let cat = g.concat(&[deep, fused])?;
    g.pixel_shuffle(cat, block.factor)
}
