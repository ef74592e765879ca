use ndarray::Array4;
use serde::{Deserialize, Serialize};

use crate::autograd::Real;
use crate::error::{Error, Result};

/// Where a feature map sits in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    SpectralInput,
    DsmInput,
    /// Output of encoder stage `k` (1-based).
    Encoder(usize),
    /// Output of Up block `k` (1-based, from the bottleneck outwards).
    Decoder(usize),
    Logits,
}

/// A `(batch, channels, height, width)` array tagged with its role.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    pub data: Array4<T>,
    pub kind: FeatureKind,
}

impl<T: Real> FeatureMap<T> {
    pub fn new(data: Array4<T>, kind: FeatureKind) -> Self {
        FeatureMap { data, kind }
    }

    pub fn shape(&self) -> [usize; 4] {
        let d = self.data.dim();
        [d.0, d.1, d.2, d.3]
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric(format!("{:?} feature map contains NaN or infinity", self.kind)))
        }
    }
}
