use ndarray::ArrayD;

use super::{dims4, from_vec, slice, Real};
use crate::error::{shape_err, Result};

pub(crate) const GROUP_NORM_EPS: f64 = 1e-5;

/// Group normalization forward pass.
///
/// Returns the output together with the normalized activations and the
/// per-(batch, group) reciprocal standard deviations needed by the backward pass.
pub fn group_norm_forward<T: Real>(
    x: &ArrayD<T>,
    gamma: &ArrayD<T>,
    beta: &ArrayD<T>,
    groups: usize,
) -> Result<(ArrayD<T>, Vec<T>, Vec<T>)> {
    let [b, c, h, w] = dims4(x)?;
    if groups == 0 || c % groups != 0 {
        return Err(shape_err!("{groups} groups do not divide {c} channels"));
    }
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(shape_err!(
            "norm affine parameters {:?}/{:?} do not match {c} channels",
            gamma.shape(),
            beta.shape()
        ));
    }
    let plane = h * w;
    let group_len = c / groups * plane;
    let n = T::of(group_len as f64);
    let eps = T::of(GROUP_NORM_EPS);
    let xs = slice(x);
    let (gs, bs) = (slice(gamma), slice(beta));
    let mut xhat = vec![T::zero(); xs.len()];
    let mut out = vec![T::zero(); xs.len()];
    let mut rstd = Vec::with_capacity(b * groups);
    for (gi, chunk) in xs.chunks_exact(group_len).enumerate() {
        let mean = chunk.iter().copied().sum::<T>() / n;
        let var = chunk.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let r = T::one() / (var + eps).sqrt();
        rstd.push(r);
        let base = gi * group_len;
        for (i, &v) in chunk.iter().enumerate() {
            let ch = (base + i) / plane % c;
            let xh = (v - mean) * r;
            xhat[base + i] = xh;
            out[base + i] = xh * gs[ch] + bs[ch];
        }
    }
    Ok((from_vec(&[b, c, h, w], out), xhat, rstd))
}

pub(super) fn group_norm_backward<T: Real>(
    dy: &ArrayD<T>,
    gamma: &ArrayD<T>,
    xhat: &[T],
    rstd: &[T],
    groups: usize,
) -> Result<(ArrayD<T>, ArrayD<T>, ArrayD<T>)> {
    let [b, c, h, w] = dims4(dy)?;
    let plane = h * w;
    let group_len = c / groups * plane;
    let n = T::of(group_len as f64);
    let dys = slice(dy);
    let gs = slice(gamma);
    let mut dx = vec![T::zero(); dys.len()];
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for gi in 0..b * groups {
        let base = gi * group_len;
        let mut sum_dxh = T::zero();
        let mut sum_dxh_xh = T::zero();
        for i in 0..group_len {
            let ch = (base + i) / plane % c;
            let d = dys[base + i];
            let xh = xhat[base + i];
            dgamma[ch] = dgamma[ch] + d * xh;
            dbeta[ch] = dbeta[ch] + d;
            let dxh = d * gs[ch];
            sum_dxh = sum_dxh + dxh;
            sum_dxh_xh = sum_dxh_xh + dxh * xh;
        }
        let scale = rstd[gi] / n;
        for i in 0..group_len {
            let ch = (base + i) / plane % c;
            let dxh = dys[base + i] * gs[ch];
            dx[base + i] = scale * (n * dxh - sum_dxh - xhat[base + i] * sum_dxh_xh);
        }
    }
    Ok((
        from_vec(&[b, c, h, w], dx),
        from_vec(&[c], dgamma),
        from_vec(&[c], dbeta),
    ))
}
