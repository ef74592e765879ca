use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayD, ArrayView2, ArrayViewMut2};

use super::{dims4, from_vec, slice, Real};
use crate::error::{shape_err, Result};

/// Unfolds one `(C, H, W)` plane stack into a `(C * k * k, H * W)` column
/// matrix for a same-size convolution with zero padding `(k - 1) / 2`.
pub fn im2col<T: Real>(x: &[T], c: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let pad = (k / 2) as isize;
    let plane = h * w;
    let mut col = vec![T::zero(); c * k * k * plane];
    for ci in 0..c {
        let src = &x[ci * plane..(ci + 1) * plane];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let dst = &mut col[row * plane..(row + 1) * plane];
                let dy = ki as isize - pad;
                let dx = kj as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let (x_lo, x_hi) = (
                        (-dx).max(0) as usize,
                        ((w as isize) - dx).min(w as isize) as usize,
                    );
                    let src_row = sy as usize * w;
                    for xo in x_lo..x_hi {
                        dst[y * w + xo] = src[src_row + (xo as isize + dx) as usize];
                    }
                }
            }
        }
    }
    col
}

fn col2im_add<T: Real>(col: &[T], dx: &mut [T], c: usize, h: usize, w: usize, k: usize) {
    let pad = (k / 2) as isize;
    let plane = h * w;
    for ci in 0..c {
        let dst = &mut dx[ci * plane..(ci + 1) * plane];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let src = &col[row * plane..(row + 1) * plane];
                let dy = ki as isize - pad;
                let dxo = kj as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let (x_lo, x_hi) = (
                        (-dxo).max(0) as usize,
                        ((w as isize) - dxo).min(w as isize) as usize,
                    );
                    let dst_row = sy as usize * w;
                    for xo in x_lo..x_hi {
                        let t = dst_row + (xo as isize + dxo) as usize;
                        dst[t] = dst[t] + src[y * w + xo];
                    }
                }
            }
        }
    }
}

fn kernel_dims<T>(x: &ArrayD<T>, weight: &ArrayD<T>) -> Result<([usize; 4], usize, usize)> {
    let [b, c, h, w] = dims4(x)?;
    let [cout, cin, kh, kw] = dims4(weight)?;
    if cin != c {
        return Err(shape_err!(
            "convolution weight expects {cin} input channels, feature map has {c}"
        ));
    }
    if kh != kw || kh % 2 == 0 {
        return Err(shape_err!("convolution kernel must be odd and square, got {kh}x{kw}"));
    }
    Ok(([b, c, h, w], cout, kh))
}

/// Same-size, stride-1 convolution. `x` is `(B, Cin, H, W)`, `weight` is
/// `(Cout, Cin, k, k)`, `bias` is `(Cout)`.
pub fn conv2d_forward<T: Real>(
    x: &ArrayD<T>,
    weight: &ArrayD<T>,
    bias: Option<&ArrayD<T>>,
) -> Result<ArrayD<T>> {
    let ([b, c, h, w], cout, k) = kernel_dims(x, weight)?;
    if let Some(bias) = bias {
        if bias.shape() != [cout] {
            return Err(shape_err!("bias shape {:?} != [{cout}]", bias.shape()));
        }
    }
    let plane = h * w;
    let rows = c * k * k;
    let xs = slice(x);
    let wmat = ArrayView2::from_shape((cout, rows), slice(weight)).unwrap();
    let mut out = vec![T::zero(); b * cout * plane];
    for bi in 0..b {
        let xb = &xs[bi * c * plane..(bi + 1) * c * plane];
        let owned;
        let col: &[T] = if k == 1 {
            xb
        } else {
            owned = im2col(xb, c, h, w, k);
            &owned
        };
        let colv = ArrayView2::from_shape((rows, plane), col).unwrap();
        let ob = &mut out[bi * cout * plane..(bi + 1) * cout * plane];
        if let Some(bias) = bias {
            for (co, chunk) in ob.chunks_exact_mut(plane).enumerate() {
                chunk.fill(slice(bias)[co]);
            }
        }
        let mut ov = ArrayViewMut2::from_shape((cout, plane), ob).unwrap();
        general_mat_mul(T::one(), &wmat, &colv, T::one(), &mut ov);
    }
    Ok(from_vec(&[b, cout, h, w], out))
}

pub(super) type ConvGrads<T> = (Option<ArrayD<T>>, ArrayD<T>, Option<ArrayD<T>>);

pub(super) fn conv2d_backward<T: Real>(
    x: &ArrayD<T>,
    weight: &ArrayD<T>,
    dy: &ArrayD<T>,
    need_dx: bool,
    need_db: bool,
) -> Result<ConvGrads<T>> {
    let ([b, c, h, w], cout, k) = kernel_dims(x, weight)?;
    let plane = h * w;
    let rows = c * k * k;
    let xs = slice(x);
    let dys = slice(dy);
    let wmat = ArrayView2::from_shape((cout, rows), slice(weight)).unwrap();
    let mut dw = vec![T::zero(); cout * rows];
    let mut dx = if need_dx {
        vec![T::zero(); b * c * plane]
    } else {
        Vec::new()
    };
    let mut db = vec![T::zero(); cout];
    for bi in 0..b {
        let xb = &xs[bi * c * plane..(bi + 1) * c * plane];
        let owned;
        let col: &[T] = if k == 1 {
            xb
        } else {
            owned = im2col(xb, c, h, w, k);
            &owned
        };
        let colv = ArrayView2::from_shape((rows, plane), col).unwrap();
        let dyb = &dys[bi * cout * plane..(bi + 1) * cout * plane];
        let dyv = ArrayView2::from_shape((cout, plane), dyb).unwrap();
        {
            let mut dwv = ArrayViewMut2::from_shape((cout, rows), &mut dw[..]).unwrap();
            general_mat_mul(T::one(), &dyv, &colv.t(), T::one(), &mut dwv);
        }
        if need_db {
            for (co, chunk) in dyb.chunks_exact(plane).enumerate() {
                db[co] = db[co] + chunk.iter().copied().sum::<T>();
            }
        }
        if need_dx {
            let dxb = &mut dx[bi * c * plane..(bi + 1) * c * plane];
            if k == 1 {
                let mut dxv = ArrayViewMut2::from_shape((rows, plane), dxb).unwrap();
                general_mat_mul(T::one(), &wmat.t(), &dyv, T::zero(), &mut dxv);
            } else {
                let mut dcol = vec![T::zero(); rows * plane];
                let mut dcolv = ArrayViewMut2::from_shape((rows, plane), &mut dcol[..]).unwrap();
                general_mat_mul(T::one(), &wmat.t(), &dyv, T::zero(), &mut dcolv);
                col2im_add(&dcol, dxb, c, h, w, k);
            }
        }
    }
    let dx = need_dx.then(|| from_vec(&[b, c, h, w], dx));
    let db = need_db.then(|| from_vec(&[cout], db));
    Ok((dx, from_vec(weight.shape(), dw), db))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct nested-loop convolution used as an oracle.
    fn naive(x: &ArrayD<f64>, wt: &ArrayD<f64>, bias: &[f64]) -> ArrayD<f64> {
        let [b, c, h, w] = dims4(x).unwrap();
        let [co, _, k, _] = dims4(wt).unwrap();
        let p = (k / 2) as isize;
        let mut out = ArrayD::zeros(ndarray::IxDyn(&[b, co, h, w]));
        for bi in 0..b {
            for o in 0..co {
                for y in 0..h {
                    for xx in 0..w {
                        let mut s = bias[o];
                        for ci in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let sy = y as isize + ki as isize - p;
                                    let sx = xx as isize + kj as isize - p;
                                    if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                        s += wt[[o, ci, ki, kj]] * x[[bi, ci, sy as usize, sx as usize]];
                                    }
                                }
                            }
                        }
                        out[[bi, o, y, xx]] = s;
                    }
                }
            }
        }
        out
    }

    fn ramp(shape: &[usize], scale: f64) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        from_vec(
            shape,
            (0..n).map(|i| ((i * 7919 % 97) as f64 / 97.0 - 0.5) * scale).collect(),
        )
    }

    #[test]
    fn matches_naive_convolution() {
        for k in [1usize, 3, 5] {
            let x = ramp(&[2, 3, 5, 4], 2.0);
            let wt = ramp(&[4, 3, k, k], 1.0);
            let bias = [0.1, -0.2, 0.3, 0.0];
            let got = conv2d_forward(&x, &wt, Some(&from_vec(&[4], bias.to_vec()))).unwrap();
            let want = naive(&x, &wt, &bias);
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn input_gradient_is_adjoint() {
        // <conv(x), dy> == <x, conv^T(dy)> for the linear part.
        let x = ramp(&[1, 2, 4, 5], 1.0);
        let wt = ramp(&[3, 2, 3, 3], 1.0);
        let dy = ramp(&[1, 3, 4, 5], 0.7);
        let y = conv2d_forward(&x, &wt, None).unwrap();
        let (dx, _, _) = conv2d_backward(&x, &wt, &dy, true, false).unwrap();
        let lhs: f64 = y.iter().zip(dy.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(dx.unwrap().iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn rejects_channel_mismatch_and_even_kernels() {
        let x = ramp(&[1, 2, 4, 4], 1.0);
        assert!(conv2d_forward(&x, &ramp(&[1, 3, 3, 3], 1.0), None).is_err());
        assert!(conv2d_forward(&x, &ramp(&[1, 2, 2, 2], 1.0), None).is_err());
    }
}
