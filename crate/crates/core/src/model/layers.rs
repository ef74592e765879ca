//! Parameterized building blocks shared by the network stages.

use crate::autograd::{Graph, ParamId, Real, Var};
use crate::error::Result;

use super::params::{ParamBuilder, ParamStore};

/// Same-size convolution with an odd square kernel.
#[derive(Debug, Clone)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl Conv {
    pub fn new<T: Real>(
        b: &mut ParamBuilder<'_, T>,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        bias: bool,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel * kernel;
        let weight = b.kaiming("weight", &[out_channels, in_channels, kernel, kernel], fan_in)?;
        let bias = if bias {
            Some(b.constant("bias", &[out_channels], 0.0)?)
        } else {
            None
        };
        Ok(Conv {
            weight,
            bias,
            in_channels,
            out_channels,
            kernel,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = g.param(self.weight, p.get(self.weight));
        let b = self.bias.map(|id| g.param(id, p.get(id)));
        g.conv2d(x, w, b)
    }
}

#[derive(Debug, Clone)]
pub struct Norm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub groups: usize,
}

impl Norm {
    pub fn new<T: Real>(b: &mut ParamBuilder<'_, T>, channels: usize, groups: usize) -> Result<Self> {
        Ok(Norm {
            gamma: b.constant("gamma", &[channels], 1.0)?,
            beta: b.constant("beta", &[channels], 0.0)?,
            groups,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let gamma = g.param(self.gamma, p.get(self.gamma));
        let beta = g.param(self.beta, p.get(self.beta));
        g.group_norm(x, gamma, beta, self.groups)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<T: Real>(b: &mut ParamBuilder<'_, T>, fan_in: usize, fan_out: usize) -> Result<Self> {
        Ok(Linear {
            weight: b.kaiming("weight", &[fan_out, fan_in], fan_in)?,
            bias: b.constant("bias", &[fan_out], 0.0)?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let w = g.param(self.weight, p.get(self.weight));
        let b = g.param(self.bias, p.get(self.bias));
        g.linear(x, w, b)
    }
}

/// norm -> ReLU -> conv
#[derive(Debug, Clone)]
pub struct PreActConv {
    pub norm: Norm,
    pub conv: Conv,
}

impl PreActConv {
    pub fn new<T: Real>(
        b: &mut ParamBuilder<'_, T>,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        groups: usize,
    ) -> Result<Self> {
        Ok(PreActConv {
            norm: Norm::new(&mut b.pp("norm"), in_channels, groups)?,
            conv: Conv::new(&mut b.pp("conv"), in_channels, out_channels, kernel, false)?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &ParamStore<T>, x: Var) -> Result<Var> {
        let n = self.norm.forward(g, p, x)?;
        let a = g.relu(n);
        self.conv.forward(g, p, a)
    }
}
