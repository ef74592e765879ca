use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;
use robustdense::autograd::{pixel_shuffle, pixel_unshuffle, shuffle_index};
use robustdense::data::{synth_tile, tile_raster, window_starts, windows};

proptest! {
    #[test]
    fn shuffle_round_trips(n in 1usize..3, c in 1usize..4, r in 1usize..4, h in 1usize..5, w in 1usize..5) {
        let shape = [n, c * r * r, h, w];
        let len: usize = shape.iter().product();
        let x = ArrayD::from_shape_vec(IxDyn(&shape), (0..len).map(|v| v as f64).collect()).unwrap();
        let y = pixel_shuffle(&x, r).unwrap();
        prop_assert_eq!(y.shape(), &[n, c, h * r, w * r]);
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    prop_assert_eq!(y[[0, ch, i, j]], x[[0, shuffle_index(ch, i, j, r), 0, 0]]);
                }
            }
        }
        prop_assert_eq!(pixel_unshuffle(&y, r).unwrap(), x);
    }

    #[test]
    fn windows_cover_every_pixel(h in 32usize..200, w in 32usize..200, k in 1usize..3, stride in 8usize..80) {
        let patch = 32 * k;
        prop_assume!(patch <= h && patch <= w && stride <= patch);
        let wins = windows(h, w, patch, stride).unwrap();
        let mut covered = vec![false; h * w];
        for win in &wins {
            prop_assert!(win.top + patch <= h && win.left + patch <= w);
            for y in win.top..win.top + patch {
                for x in win.left..win.left + patch {
                    covered[y * w + x] = true;
                }
            }
        }
        prop_assert!(covered.iter().all(|&c| c));
        let starts = window_starts(h, patch, stride);
        prop_assert!(starts.windows(2).all(|s| s[1] > s[0] && s[1] - s[0] <= stride));
    }
}

#[test]
fn shuffle_rejects_bad_channels() {
    let x = ArrayD::<f32>::zeros(IxDyn(&[1, 6, 2, 2]));
    assert!(pixel_shuffle(&x, 2).is_err());
}

#[test]
fn tiling_extracts_matching_patches() {
    let tile = synth_tile(96, 1, "t");
    let patches = tile_raster(&tile, 64, 32).unwrap();
    assert_eq!(patches.len(), 4);
    let last = &patches[3];
    assert_eq!(last.labels, tile.labels.slice(ndarray::s![32.., 32..]));
    assert_eq!(last.spectral, tile.spectral.slice(ndarray::s![.., 32.., 32..]));
    assert!(tile_raster(&tile, 48, 32).is_err());
    assert!(tile_raster(&tile, 128, 32).is_err());
}
