//! Robust multimodal semantic segmentation of very-high-resolution aerial tiles.
//!
//! The crate bundles:
//!
//! * [`model`]: the dense hourglass network over NIR/R/G/B + DSM inputs, built
//!   on a small reverse-mode tape in [`autograd`];
//! * [`corruption`]: deterministic motion-blur and area-deletion damage;
//! * [`data`]: tiles, manifests, tiling, rotation and a synthetic scene generator;
//! * [`metrics`]: confusion matrices, per-class F1, overall accuracy;
//! * [`harness`]: training, robustness sweeps, reports and the CLI driver.

pub mod autograd;
pub mod corruption;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod seeding;

pub use error::{Error, Result};
