//! Sub-pixel rearrangement: 4 channels of a 2x2 map become one 4x4 channel.

use ndarray::{ArrayD, IxDyn};
use robustdense::autograd::{pixel_shuffle, pixel_unshuffle};

fn main() -> robustdense::Result<()> {
    let x = ArrayD::from_shape_fn(IxDyn(&[1, 4, 2, 2]), |d| (d[1] * 10 + d[2] * 2 + d[3]) as f32);
    let y = pixel_shuffle(&x, 2)?;
    println!("input {:?} -> output {:?}", x.shape(), y.shape());
    for row in y.index_axis(ndarray::Axis(0), 0).index_axis(ndarray::Axis(0), 0).outer_iter() {
        println!("{:?}", row.iter().collect::<Vec<_>>());
    }
    assert_eq!(pixel_unshuffle(&y, 2)?, x);
    println!("unshuffle restores the input");
    Ok(())
}
