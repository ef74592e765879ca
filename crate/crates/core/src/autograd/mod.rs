//! A small reverse-mode automatic differentiation tape over `ndarray` buffers.
//!
//! Every forward call records one node. [`Graph::backward`] walks the tape in
//! reverse and returns a [`Gradients`] table. Feature maps are always laid out
//! as `(batch, channels, height, width)` in standard (row-major) order, which
//! lets the kernels work on plain slices.
//!
//! The element type is generic over [`Real`] so the same model code runs in
//! `f32` for training and in `f64` for gradient checks.

mod conv;
mod norm;
mod shuffle;

use std::collections::HashMap;
use std::iter::Sum;

use ndarray::{ArrayD, IxDyn, NdFloat};

use crate::error::{shape_err, validation_err, Error, Result};

pub use conv::{conv2d_forward, im2col};
pub use norm::group_norm_forward;
pub use shuffle::{pixel_shuffle, pixel_unshuffle, shuffle_index};

/// Floating point element type used by tensors and models.
pub trait Real: NdFloat + Sum + Default {
    const DTYPE: &'static str;

    fn of(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 is representable")
    }

    fn to_f64(self) -> f64 {
        <Self as num_traits::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const DTYPE: &'static str = "f32";
}

impl Real for f64 {
    const DTYPE: &'static str = "f64";
}

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Identifier of a trainable parameter inside a parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

enum Op<T> {
    Constant,
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
    },
    GroupNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        groups: usize,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Relu(Var),
    Sigmoid(Var),
    AvgPool2(Var),
    Concat(Vec<Var>),
    PixelShuffle {
        input: Var,
        r: usize,
    },
    Add(Var, Var),
    ScaleBy {
        input: Var,
        scale: Var,
    },
    OneMinus(Var),
    GlobalAvgPool(Var),
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    ChannelScale {
        input: Var,
        weights: Var,
    },
    CrossEntropy {
        logits: Var,
        /// Softmax probabilities minus the one-hot target, already divided by
        /// the scored pixel count. Zero at ignored pixels.
        dlogits: Vec<T>,
    },
    WeightedSum {
        input: Var,
        weights: ArrayD<T>,
    },
}

struct Node<T> {
    value: ArrayD<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Result of a cross-entropy node: the tape handle plus the number of pixels
/// that contributed to the mean.
#[derive(Debug, Clone, Copy)]
pub struct LossNode {
    pub var: Var,
    pub scored_pixels: usize,
}

impl LossNode {
    /// True when every pixel carried the ignore label and the loss was defined as 0.
    pub fn all_ignored(&self) -> bool {
        self.scored_pixels == 0
    }
}

pub struct Graph<T: Real> {
    nodes: Vec<Node<T>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn dims4<T>(a: &ArrayD<T>) -> Result<[usize; 4]> {
    match a.shape() {
        &[b, c, h, w] => Ok([b, c, h, w]),
        s => Err(shape_err!("expected a 4-D (batch, channels, height, width) tensor, got {s:?}")),
    }
}

pub(crate) fn from_vec<T>(shape: &[usize], data: Vec<T>) -> ArrayD<T> {
    ArrayD::from_shape_vec(IxDyn(shape), data).expect("buffer length matches shape")
}

fn standard<T: Real>(a: ArrayD<T>) -> ArrayD<T> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn slice<T>(a: &ArrayD<T>) -> &[T] {
    a.as_slice().expect("tape tensors are contiguous")
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &ArrayD<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: ArrayD<T>, op: Op<T>) -> Var {
        let requires_grad = match &op {
            Op::Constant => false,
            Op::Leaf => true,
            op => op_inputs(op).iter().any(|v| self.nodes[v.0].requires_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value that does not receive gradients (network inputs, masks).
    pub fn constant(&mut self, value: ArrayD<T>) -> Var {
        self.push(standard(value), Op::Constant)
    }

    /// A free variable whose gradient is tracked.
    pub fn variable(&mut self, value: ArrayD<T>) -> Var {
        self.push(standard(value), Op::Leaf)
    }

    /// Registers a parameter. Repeated calls with the same id reuse the node.
    pub fn param(&mut self, id: ParamId, value: &ArrayD<T>) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(standard(value.clone()), Op::Leaf);
        self.params.insert(id, v);
        v
    }

    pub fn scalar(&mut self, x: T) -> Var {
        self.constant(from_vec(&[1], vec![x]))
    }

    /// Same-size convolution (stride 1, zero padding `(k - 1) / 2`) with an odd square kernel.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let out = conv::conv2d_forward(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
        )?;
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
            },
        ))
    }

    /// Group normalization over `groups` channel groups. `groups` must divide the channel count.
    pub fn group_norm(&mut self, input: Var, gamma: Var, beta: Var, groups: usize) -> Result<Var> {
        let (out, xhat, rstd) = norm::group_norm_forward(
            self.value(input),
            self.value(gamma),
            self.value(beta),
            groups,
        )?;
        Ok(self.push(
            out,
            Op::GroupNorm {
                input,
                gamma,
                beta,
                groups,
                xhat,
                rstd,
            },
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| if v > T::zero() { v } else { T::zero() });
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    /// 2x2 average pooling with stride 2.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let [b, c, h, w] = dims4(self.value(x))?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(shape_err!(
                "average pooling needs even spatial dims, got {h}x{w}"
            ));
        }
        let (ho, wo) = (h / 2, w / 2);
        let src = slice(self.value(x));
        let quarter = T::of(0.25);
        let mut out = vec![T::zero(); b * c * ho * wo];
        for p in 0..b * c {
            let plane = &src[p * h * w..(p + 1) * h * w];
            let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
            for i in 0..ho {
                for j in 0..wo {
                    let top = 2 * i * w + 2 * j;
                    dst[i * wo + j] =
                        (plane[top] + plane[top + 1] + plane[top + w] + plane[top + w + 1]) * quarter;
                }
            }
        }
        Ok(self.push(from_vec(&[b, c, ho, wo], out), Op::AvgPool2(x)))
    }

    /// Concatenation along the channel axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| shape_err!("concat of zero tensors"))?;
        let [b, _, h, w] = dims4(self.value(first))?;
        let mut channels = 0;
        for &p in parts {
            let [pb, pc, ph, pw] = dims4(self.value(p))?;
            if (pb, ph, pw) != (b, h, w) {
                return Err(shape_err!(
                    "concat operands disagree: {:?} vs {:?}",
                    self.shape(first),
                    self.shape(p)
                ));
            }
            channels += pc;
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(b * channels * plane);
        for bi in 0..b {
            for &p in parts {
                let pc = self.shape(p)[1];
                let src = slice(self.value(p));
                out.extend_from_slice(&src[bi * pc * plane..(bi + 1) * pc * plane]);
            }
        }
        Ok(self.push(
            from_vec(&[b, channels, h, w], out),
            Op::Concat(parts.to_vec()),
        ))
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let out = shuffle::pixel_shuffle(self.value(x), r)?;
        Ok(self.push(out, Op::PixelShuffle { input: x, r }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err!(
                "add operands disagree: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            ));
        }
        let out = self.value(a) + self.value(b);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Multiplies every element of `x` by the single element of `scale`.
    pub fn scale_by(&mut self, x: Var, scale: Var) -> Result<Var> {
        if self.value(scale).len() != 1 {
            return Err(shape_err!(
                "scale must hold one element, got shape {:?}",
                self.shape(scale)
            ));
        }
        let s = slice(self.value(scale))[0];
        let out = self.value(x).mapv(|v| v * s);
        Ok(self.push(out, Op::ScaleBy { input: x, scale }))
    }

    pub fn one_minus(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| T::one() - v);
        self.push(out, Op::OneMinus(x))
    }

    /// Mean over the spatial axes: `(B, C, H, W) -> (B, C)`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let [b, c, h, w] = dims4(self.value(x))?;
        let plane = h * w;
        let inv = T::one() / T::of(plane as f64);
        let out: Vec<T> = slice(self.value(x))
            .chunks_exact(plane)
            .map(|p| p.iter().copied().sum::<T>() * inv)
            .collect();
        Ok(self.push(from_vec(&[b, c], out), Op::GlobalAvgPool(x)))
    }

    /// Fully connected map: `(B, In) x (Out, In)^T + (Out) -> (B, Out)`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(weight), self.shape(bias));
        let (&[batch, fan_in], &[fan_out, w_in], &[b_out]) = (xs, ws, bs) else {
            return Err(shape_err!("linear expects (B,In), (Out,In), (Out); got {xs:?}, {ws:?}, {bs:?}"));
        };
        if w_in != fan_in || b_out != fan_out {
            return Err(shape_err!("linear expects (B,In), (Out,In), (Out); got {xs:?}, {ws:?}, {bs:?}"));
        }
        let xv = self.value(x).view().into_shape_with_order((batch, fan_in)).unwrap();
        let wv = self.value(weight).view().into_shape_with_order((fan_out, fan_in)).unwrap();
        let bv = self.value(bias).view().into_shape_with_order(fan_out).unwrap();
        let mut out = xv.dot(&wv.t());
        out += &bv;
        let out = standard(out.into_dyn());
        Ok(self.push(out, Op::Linear { input: x, weight, bias }))
    }

    /// `out[b, c, h, w] = x[b, c, h, w] * weights[b, c]`.
    pub fn channel_scale(&mut self, x: Var, weights: Var) -> Result<Var> {
        let [b, c, h, w] = dims4(self.value(x))?;
        if self.shape(weights) != [b, c] {
            return Err(shape_err!(
                "channel weights {:?} do not match feature map {:?}",
                self.shape(weights),
                self.shape(x)
            ));
        }
        let plane = h * w;
        let wts = slice(self.value(weights));
        let mut out = slice(self.value(x)).to_vec();
        for (p, chunk) in out.chunks_exact_mut(plane).enumerate() {
            let s = wts[p];
            chunk.iter_mut().for_each(|v| *v = *v * s);
        }
        Ok(self.push(
            from_vec(&[b, c, h, w], out),
            Op::ChannelScale { input: x, weights },
        ))
    }

    /// Mean pixelwise cross-entropy of `logits` (B, K, H, W) against integer
    /// `labels` (B, H, W). Pixels equal to `ignore_index` are skipped; if all
    /// pixels are ignored the loss is 0.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        labels: &ndarray::Array3<u8>,
        ignore_index: u8,
    ) -> Result<LossNode> {
        let [b, k, h, w] = dims4(self.value(logits))?;
        if labels.shape() != [b, h, w] {
            return Err(shape_err!(
                "labels {:?} do not align with logits {:?}",
                labels.shape(),
                self.shape(logits)
            ));
        }
        let x = slice(self.value(logits));
        let plane = h * w;
        let mut dlogits = vec![T::zero(); x.len()];
        let mut total = 0.0f64;
        let mut count = 0usize;
        for (bi, lab) in labels.outer_iter().enumerate() {
            for (p, &label) in lab.iter().enumerate() {
                if label == ignore_index {
                    continue;
                }
                let label = label as usize;
                if label >= k {
                    return Err(validation_err!(
                        "label {label} outside [0, {k}) and not the ignore index {ignore_index}"
                    ));
                }
                let base = bi * k * plane + p;
                let at = |j: usize| x[base + j * plane];
                let top = (0..k).fold(0, |a, j| if at(j) > at(a) { j } else { a });
                let max = at(top);
                // ln(sum_j e^(x_j - max)) = ln_1p(rest) stays accurate when the loss is near 0.
                let rest: T = (0..k).filter(|&j| j != top).map(|j| (at(j) - max).exp()).sum();
                total += ((max - at(label)) + rest.ln_1p()).to_f64();
                let denom = T::one() + rest;
                for j in 0..k {
                    dlogits[base + j * plane] = (at(j) - max).exp() / denom;
                }
                dlogits[base + label * plane] = dlogits[base + label * plane] - T::one();
                count += 1;
            }
        }
        let value = if count == 0 {
            log::warn!("cross-entropy: every pixel carries the ignore label; loss defined as 0");
            T::zero()
        } else {
            let inv = T::one() / T::of(count as f64);
            dlogits.iter_mut().for_each(|d| *d = *d * inv);
            T::of(total / count as f64)
        };
        if !value.is_finite() {
            return Err(Error::Numeric(format!("cross-entropy is {value}")));
        }
        let var = self.push(from_vec(&[1], vec![value]), Op::CrossEntropy { logits, dlogits });
        Ok(LossNode {
            var,
            scored_pixels: count,
        })
    }

    /// `sum(x * weights)` as a one-element tensor.
    pub fn weighted_sum(&mut self, x: Var, weights: ArrayD<T>) -> Result<Var> {
        if self.shape(x) != weights.shape() {
            return Err(shape_err!(
                "weights {:?} do not match input {:?}",
                weights.shape(),
                self.shape(x)
            ));
        }
        let weights = standard(weights);
        let s: T = slice(self.value(x))
            .iter()
            .zip(slice(&weights))
            .map(|(&a, &b)| a * b)
            .sum();
        Ok(self.push(from_vec(&[1], vec![s]), Op::WeightedSum { input: x, weights }))
    }

    /// Reverse pass from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(shape_err!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            ));
        }
        let mut grads: Vec<Option<ArrayD<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(ArrayD::from_elem(self.shape(loss), T::one()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, &dy, &mut grads)?;
            grads[i] = Some(dy);
        }

        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<ArrayD<T>>], v: Var, g: ArrayD<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => *acc += &g,
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(
        &self,
        op: &Op<T>,
        out: &ArrayD<T>,
        dy: &ArrayD<T>,
        grads: &mut [Option<ArrayD<T>>],
    ) -> Result<()> {
        match op {
            Op::Constant | Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
            } => {
                let (dx, dw, db) = conv::conv2d_backward(
                    self.value(*input),
                    self.value(*weight),
                    dy,
                    self.nodes[input.0].requires_grad,
                    bias.is_some(),
                )?;
                if let Some(dx) = dx {
                    self.accumulate(grads, *input, dx);
                }
                self.accumulate(grads, *weight, dw);
                if let (Some(b), Some(db)) = (bias, db) {
                    self.accumulate(grads, *b, db);
                }
            }
            Op::GroupNorm {
                input,
                gamma,
                beta,
                groups,
                xhat,
                rstd,
            } => {
                let (dx, dgamma, dbeta) =
                    norm::group_norm_backward(dy, self.value(*gamma), xhat, rstd, *groups)?;
                self.accumulate(grads, *input, dx);
                self.accumulate(grads, *gamma, dgamma);
                self.accumulate(grads, *beta, dbeta);
            }
            Op::Relu(x) => {
                let mut g = dy.clone();
                g.zip_mut_with(out, |d, &o| {
                    if o <= T::zero() {
                        *d = T::zero()
                    }
                });
                self.accumulate(grads, *x, g);
            }
            Op::Sigmoid(x) => {
                let mut g = dy.clone();
                g.zip_mut_with(out, |d, &s| *d = *d * s * (T::one() - s));
                self.accumulate(grads, *x, g);
            }
            Op::AvgPool2(x) => {
                let [b, c, h, w] = dims4(self.value(*x))?;
                let (ho, wo) = (h / 2, w / 2);
                let src = slice(dy);
                let quarter = T::of(0.25);
                let mut g = vec![T::zero(); b * c * h * w];
                for p in 0..b * c {
                    let plane = &mut g[p * h * w..(p + 1) * h * w];
                    for i in 0..h {
                        for j in 0..w {
                            plane[i * w + j] = src[p * ho * wo + (i / 2) * wo + j / 2] * quarter;
                        }
                    }
                }
                self.accumulate(grads, *x, from_vec(&[b, c, h, w], g));
            }
            Op::Concat(parts) => {
                let [b, _, h, w] = dims4(dy)?;
                let plane = h * w;
                let total_c = dy.shape()[1];
                let src = slice(dy);
                let mut offset = 0;
                for &p in parts {
                    let pc = self.shape(p)[1];
                    if self.nodes[p.0].requires_grad {
                        let mut g = Vec::with_capacity(b * pc * plane);
                        for bi in 0..b {
                            let start = (bi * total_c + offset) * plane;
                            g.extend_from_slice(&src[start..start + pc * plane]);
                        }
                        self.accumulate(grads, p, from_vec(&[b, pc, h, w], g));
                    }
                    offset += pc;
                }
            }
            Op::PixelShuffle { input, r } => {
                self.accumulate(grads, *input, shuffle::pixel_unshuffle(dy, *r)?);
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, dy.clone());
                self.accumulate(grads, *b, dy.clone());
            }
            Op::ScaleBy { input, scale } => {
                let s = slice(self.value(*scale))[0];
                self.accumulate(grads, *input, dy.mapv(|d| d * s));
                let ds: T = slice(dy)
                    .iter()
                    .zip(slice(self.value(*input)))
                    .map(|(&d, &x)| d * x)
                    .sum();
                let shape = self.shape(*scale).to_vec();
                self.accumulate(grads, *scale, from_vec(&shape, vec![ds]));
            }
            Op::OneMinus(x) => {
                self.accumulate(grads, *x, dy.mapv(|d| -d));
            }
            Op::GlobalAvgPool(x) => {
                let [b, c, h, w] = dims4(self.value(*x))?;
                let plane = h * w;
                let inv = T::one() / T::of(plane as f64);
                let src = slice(dy);
                let mut g = Vec::with_capacity(b * c * plane);
                for &d in src {
                    g.extend(std::iter::repeat(d * inv).take(plane));
                }
                self.accumulate(grads, *x, from_vec(&[b, c, h, w], g));
            }
            Op::Linear {
                input,
                weight,
                bias,
            } => {
                let xs = self.shape(*input);
                let (batch, fan_in) = (xs[0], xs[1]);
                let fan_out = self.shape(*weight)[0];
                let dyv = dy.view().into_shape_with_order((batch, fan_out)).unwrap();
                let xv = self.value(*input).view().into_shape_with_order((batch, fan_in)).unwrap();
                let wv = self.value(*weight).view().into_shape_with_order((fan_out, fan_in)).unwrap();
                if self.nodes[input.0].requires_grad {
                    self.accumulate(grads, *input, standard(dyv.dot(&wv).into_dyn()));
                }
                self.accumulate(grads, *weight, standard(dyv.t().dot(&xv).into_dyn()));
                let db = dyv.sum_axis(ndarray::Axis(0)).into_dyn();
                self.accumulate(grads, *bias, db);
            }
            Op::ChannelScale { input, weights } => {
                let [b, c, h, w] = dims4(self.value(*input))?;
                let plane = h * w;
                let wts = slice(self.value(*weights));
                let xs = slice(self.value(*input));
                let dys = slice(dy);
                let mut dx = dys.to_vec();
                let mut dw = vec![T::zero(); b * c];
                for p in 0..b * c {
                    let range = p * plane..(p + 1) * plane;
                    dx[range.clone()].iter_mut().for_each(|d| *d = *d * wts[p]);
                    dw[p] = dys[range.clone()]
                        .iter()
                        .zip(&xs[range])
                        .map(|(&d, &x)| d * x)
                        .sum();
                }
                self.accumulate(grads, *input, from_vec(&[b, c, h, w], dx));
                self.accumulate(grads, *weights, from_vec(&[b, c], dw));
            }
            Op::CrossEntropy { logits, dlogits } => {
                let d = slice(dy)[0];
                let g: Vec<T> = dlogits.iter().map(|&v| v * d).collect();
                let shape = self.shape(*logits).to_vec();
                self.accumulate(grads, *logits, from_vec(&shape, g));
            }
            Op::WeightedSum { input, weights } => {
                let d = slice(dy)[0];
                self.accumulate(grads, *input, weights.mapv(|w| w * d));
            }
        }
        Ok(())
    }
}

fn op_inputs<T>(op: &Op<T>) -> Vec<Var> {
    match op {
        Op::Constant | Op::Leaf => vec![],
        Op::Conv2d {
            input,
            weight,
            bias,
        } => {
            let mut v = vec![*input, *weight];
            v.extend(bias);
            v
        }
        Op::GroupNorm {
            input, gamma, beta, ..
        } => vec![*input, *gamma, *beta],
        Op::Relu(x) | Op::Sigmoid(x) | Op::AvgPool2(x) | Op::OneMinus(x) | Op::GlobalAvgPool(x) => {
            vec![*x]
        }
        Op::Concat(parts) => parts.clone(),
        Op::PixelShuffle { input, .. } => vec![*input],
        Op::Add(a, b) => vec![*a, *b],
        Op::ScaleBy { input, scale } => vec![*input, *scale],
        Op::Linear {
            input,
            weight,
            bias,
        } => vec![*input, *weight, *bias],
        Op::ChannelScale { input, weights } => vec![*input, *weights],
        Op::CrossEntropy { logits, .. } => vec![*logits],
        Op::WeightedSum { input, .. } => vec![*input],
    }
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<ArrayD<T>>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Real> Gradients<T> {
    pub fn wrt(&self, v: Var) -> Option<&ArrayD<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for a parameter registered through [`Graph::param`]. `None`
    /// means the parameter was not used or did not influence the loss.
    pub fn param(&self, id: ParamId) -> Option<&ArrayD<T>> {
        self.params.get(&id).and_then(|&v| self.wrt(v))
    }
}
