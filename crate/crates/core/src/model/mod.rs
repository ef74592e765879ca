//! The segmentation network: dense encoder stages, SEMix DSM fusion, Up-block
//! decoder and the per-class SConv head.

pub mod checkpoint;
mod config;
mod dense;
mod feature;
mod layers;
mod loss;
mod net;
mod params;
mod sconv;
mod se;
mod up;

pub use config::{ModelConfig, DSM_CHANNELS, NUM_STAGES, SPATIAL_MULTIPLE, SPECTRAL_CHANNELS};
pub use dense::{ConvNormAct, DenseStage, DsmBranch, StageOutput};
pub use feature::{FeatureKind, FeatureMap};
pub use layers::{Conv, Linear, Norm, PreActConv};
pub use loss::{cross_entropy_loss, LossValue, IGNORE_INDEX};
pub use net::{argmax_classes, ForwardTrace, ParamGrads, RobustDenseNet};
pub use params::{ParamBuilder, ParamStore};
pub use sconv::{ClassBranch, SConvHead, SConvOutput};
pub use se::{semix, SeLayer, SeOutput};
pub use up::{fuse, up_block_with_alpha, Fusion, UpBlock};
