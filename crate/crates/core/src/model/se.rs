//! Squeeze-and-excitation gating and the SEMix DSM fusion built on it.

use crate::autograd::{Graph, Real, Var};
use crate::error::{config_err, shape_err, Error, Result};

use super::layers::Linear;
use super::params::{ParamBuilder, ParamStore};

/// Channel gate: global average pool, a `channels / reduction` bottleneck
/// with ReLU, and a sigmoid producing one weight per channel.
#[derive(Debug, Clone)]
pub struct SeLayer {
    pub squeeze: Linear,
    pub excite: Linear,
    pub channels: usize,
    pub hidden: usize,
}

/// Tape handles produced by [`SeLayer::forward`].
#[derive(Debug, Clone, Copy)]
pub struct SeOutput {
    /// `(batch, channels)` gate values in (0, 1).
    pub weights: Var,
    /// Input scaled channel-wise by `weights`.
    pub reweighted: Var,
}

impl SeLayer {
    pub fn new<T: Real>(b: &mut ParamBuilder<'_, T>, channels: usize, reduction: usize) -> Result<Self> {
        if reduction == 0 || reduction > channels {
            return Err(config_err!(
                "SE reduction {reduction} must be in [1, {channels}] for {channels} channels"
            ));
        }
        let hidden = channels / reduction;
        Ok(SeLayer {
            squeeze: Linear::new(&mut b.pp("fc1"), channels, hidden)?,
            excite: Linear::new(&mut b.pp("fc2"), hidden, channels)?,
            channels,
            hidden,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<SeOutput> {
        if g.shape(x).get(1) != Some(&self.channels) {
            return Err(shape_err!(
                "SE layer built for {} channels received {:?}",
                self.channels,
                g.shape(x)
            ));
        }
        if g.value(x).iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("SE layer input contains NaN or infinity".into()));
        }
        let pooled = g.global_avg_pool(x)?;
        let hidden = self.squeeze.forward(g, p, pooled)?;
        let hidden = g.relu(hidden);
        let logits = self.excite.forward(g, p, hidden)?;
        let weights = g.sigmoid(logits);
        let reweighted = g.channel_scale(x, weights)?;
        Ok(SeOutput {
            weights,
            reweighted,
        })
    }
}

/// Adds SE-reweighted DSM features to the trunk features.
pub fn semix<T: Real>(
    g: &mut Graph<T>,
    p: &ParamStore<T>,
    se: &SeLayer,
    dsm_feat: Var,
    trunk_feat: Var,
) -> Result<Var> {
    if g.shape(dsm_feat) != g.shape(trunk_feat) {
        return Err(shape_err!(
            "SEMix needs matching shapes: dsm {:?} vs trunk {:?}",
            g.shape(dsm_feat),
            g.shape(trunk_feat)
        ));
    }
    let gated = se.forward(g, p, dsm_feat)?;
    g.add(trunk_feat, gated.reweighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    fn layer(channels: usize, reduction: usize) -> (ParamStore<f64>, SeLayer) {
        let mut store = ParamStore::new();
        let se = SeLayer::new(&mut ParamBuilder::new(&mut store, 11).pp("se"), channels, reduction).unwrap();
        (store, se)
    }

    #[test]
    fn zero_input_gives_half_gates() {
        let (store, se) = layer(8, 2);
        let mut g = Graph::new();
        let x = g.constant(ArrayD::zeros(IxDyn(&[1, 8, 3, 3])));
        let out = se.forward(&mut g, &store, x).unwrap();
        assert!(g.value(out.weights).iter().all(|&w| w == 0.5));
        assert!(g.value(out.reweighted).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reduction_larger_than_channels_is_config_error() {
        let mut store = ParamStore::<f64>::new();
        let err = SeLayer::new(&mut ParamBuilder::new(&mut store, 0), 4, 8).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn non_finite_input_is_numeric_error() {
        let (store, se) = layer(4, 2);
        let mut g = Graph::new();
        let mut data = ArrayD::zeros(IxDyn(&[1, 4, 2, 2]));
        data[[0, 1, 0, 0]] = f64::NAN;
        let x = g.constant(data);
        assert!(matches!(se.forward(&mut g, &store, x), Err(Error::Numeric(_))));
    }

    #[test]
    fn semix_shape_mismatch_names_both_shapes() {
        let (store, se) = layer(4, 2);
        let mut g = Graph::new();
        let a = g.constant(ArrayD::zeros(IxDyn(&[1, 4, 2, 2])));
        let b = g.constant(ArrayD::zeros(IxDyn(&[1, 4, 4, 4])));
        let msg = semix(&mut g, &store, &se, a, b).unwrap_err().to_string();
        assert!(msg.contains("[1, 4, 2, 2]") && msg.contains("[1, 4, 4, 4]"), "{msg}");
    }
}
