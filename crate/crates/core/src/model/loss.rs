use ndarray::{Array3, Array4};

use crate::autograd::{Graph, Real};
use crate::error::Result;

/// Label value excluded from the loss and from metrics.
pub const IGNORE_INDEX: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    /// Set when every pixel carried the ignore label; `value` is then 0.
    pub all_ignored: bool,
}

/// Mean over non-ignored pixels of `-x[label] + ln(sum_j exp(x[j]))`,
/// evaluated with max subtraction.
pub fn cross_entropy_loss<T: Real>(
    logits: &Array4<T>,
    labels: &Array3<u8>,
    ignore_index: u8,
) -> Result<LossValue> {
    let mut g = Graph::new();
    let x = g.constant(logits.clone().into_dyn());
    let loss = g.cross_entropy(x, labels, ignore_index)?;
    Ok(LossValue {
        value: g.value(loss.var)[[0]].to_f64(),
        all_ignored: loss.all_ignored(),
    })
}
