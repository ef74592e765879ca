//! Sub-pixel rearrangement between channels and space.

use ndarray::ArrayD;

use super::{dims4, from_vec, slice, Real};
use crate::error::{shape_err, Result};

/// Source channel for output pixel offset `(i, j)` inside an `r x r` block:
/// `out[b, c, h*r + i, w*r + j] = in[b, c*r*r + i*r + j, h, w]`.
pub fn shuffle_index(c: usize, i: usize, j: usize, r: usize) -> usize {
    c * r * r + i * r + j
}

/// `(B, C*r*r, H, W) -> (B, C, H*r, W*r)`.
pub fn pixel_shuffle<T: Real>(x: &ArrayD<T>, r: usize) -> Result<ArrayD<T>> {
    let [b, c, h, w] = dims4(x)?;
    if r == 0 || c % (r * r) != 0 {
        return Err(shape_err!(
            "pixel shuffle with factor {r} needs channels divisible by {}, got {c}",
            r * r
        ));
    }
    let co = c / (r * r);
    let (ho, wo) = (h * r, w * r);
    let src = slice(x);
    let mut out = vec![T::zero(); src.len()];
    for bi in 0..b {
        for ci in 0..co {
            for i in 0..r {
                for j in 0..r {
                    let sc = shuffle_index(ci, i, j, r);
                    let plane = &src[(bi * c + sc) * h * w..(bi * c + sc + 1) * h * w];
                    let dst = &mut out[(bi * co + ci) * ho * wo..(bi * co + ci + 1) * ho * wo];
                    for y in 0..h {
                        for xx in 0..w {
                            dst[(y * r + i) * wo + xx * r + j] = plane[y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Ok(from_vec(&[b, co, ho, wo], out))
}

/// Inverse of [`pixel_shuffle`]: `(B, C, H*r, W*r) -> (B, C*r*r, H, W)`.
pub fn pixel_unshuffle<T: Real>(x: &ArrayD<T>, r: usize) -> Result<ArrayD<T>> {
    let [b, c, ho, wo] = dims4(x)?;
    if r == 0 || ho % r != 0 || wo % r != 0 {
        return Err(shape_err!(
            "pixel unshuffle with factor {r} needs spatial dims divisible by {r}, got {ho}x{wo}"
        ));
    }
    let (h, w) = (ho / r, wo / r);
    let ci_total = c * r * r;
    let src = slice(x);
    let mut out = vec![T::zero(); src.len()];
    for bi in 0..b {
        for ci in 0..c {
            let plane = &src[(bi * c + ci) * ho * wo..(bi * c + ci + 1) * ho * wo];
            for i in 0..r {
                for j in 0..r {
                    let sc = shuffle_index(ci, i, j, r);
                    let dst = &mut out[(bi * ci_total + sc) * h * w..(bi * ci_total + sc + 1) * h * w];
                    for y in 0..h {
                        for xx in 0..w {
                            dst[y * w + xx] = plane[(y * r + i) * wo + xx * r + j];
                        }
                    }
                }
            }
        }
    }
    Ok(from_vec(&[b, ci_total, h, w], out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_one_is_identity() {
        let x = from_vec(&[1, 3, 2, 2], (0..12).map(f64::from).collect());
        assert_eq!(pixel_shuffle(&x, 1).unwrap(), x);
    }

    #[test]
    fn four_channels_make_one_block() {
        let x = from_vec(&[1, 4, 1, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.as_slice().unwrap(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_indivisible_channels() {
        let x = from_vec(&[1, 6, 1, 1], vec![0.0f64; 6]);
        assert!(pixel_shuffle(&x, 2).is_err());
    }
}
