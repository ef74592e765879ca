use std::path::Path;

use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::to_real;
use crate::autograd::Real;
use crate::corruption::{corrupt, CorruptionSpec};
use crate::data::{extract, stack_batch, windows, Dataset, MultiModalTile, Split, NUM_CLASSES};
use crate::error::{validation_err, Result};
use crate::metrics::{ConfusionMatrix, MetricsReport};
use crate::model::{checkpoint, RobustDenseNet, IGNORE_INDEX, SPATIAL_MULTIPLE};
use crate::seeding::derive_seed;

/// Predicts a whole tile by running `patch`-sized windows and stitching
/// their arg-max maps. Overlapping edge windows overwrite earlier ones.
pub fn predict_tile<T: Real>(model: &RobustDenseNet<T>, tile: &MultiModalTile, patch: usize) -> Result<Array2<u8>> {
    let p = patch.min(tile.height()).min(tile.width());
    if p % SPATIAL_MULTIPLE != 0 {
        return Err(validation_err!(
            "tile {} ({}x{}) cannot be covered by windows that are multiples of {SPATIAL_MULTIPLE}",
            tile.tile_id,
            tile.height(),
            tile.width()
        ));
    }
    let mut out = Array2::zeros((tile.height(), tile.width()));
    for w in windows(tile.height(), tile.width(), p, p)? {
        let piece = extract(tile, &w);
        let (sp, dsm, _) = stack_batch(&[&piece])?;
        let pred = model.predict(&to_real(&sp), &to_real(&dsm))?;
        out.slice_mut(s![w.top..w.top + p, w.left..w.left + p])
            .assign(&pred.index_axis(Axis(0), 0));
    }
    Ok(out)
}

/// Confusion matrix over `tiles`, each optionally corrupted first. The
/// corruption seed is shared; tile ids make the damage differ per tile.
pub fn evaluate_tiles<T: Real>(
    model: &RobustDenseNet<T>,
    tiles: &[MultiModalTile],
    patch: usize,
    corruption: Option<&CorruptionSpec>,
) -> Result<ConfusionMatrix> {
    let k = model.config().num_classes;
    let parts = tiles
        .par_iter()
        .map(|tile| {
            let input = match corruption {
                Some(spec) => corrupt(tile, spec)?,
                None => tile.clone(),
            };
            let pred = predict_tile(model, &input, patch)?;
            let mut cm = ConfusionMatrix::new(k);
            cm.accumulate(pred.view(), tile.labels.view(), IGNORE_INDEX)?;
            Ok(cm)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = ConfusionMatrix::new(k);
    for cm in &parts {
        total.merge(cm)?;
    }
    Ok(total)
}

/// Metrics at a series of damage fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub checkpoint_id: String,
    pub dataset_id: String,
    pub seed: u64,
    pub rows: Vec<MetricsReport>,
}

impl RobustnessReport {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(validation_err!("empty robustness report"));
        }
        if self.rows.windows(2).any(|w| w[0].damage_fraction >= w[1].damage_fraction) {
            return Err(validation_err!("damage fractions must be strictly increasing"));
        }
        self.rows.iter().try_for_each(|r| r.check_consistency(1e-9))
    }

    pub fn row(&self, fraction: f64) -> Option<&MetricsReport> {
        self.rows.iter().find(|r| r.damage_fraction == fraction)
    }
}

/// Where a sweep's model and data came from, for the report header.
#[derive(Debug, Clone, Default)]
pub struct SweepIds {
    pub checkpoint_id: String,
    pub dataset_id: String,
}

/// Corruption used for one sweep row.
pub fn sweep_spec(template: &CorruptionSpec, fraction: f64, seed: u64) -> CorruptionSpec {
    CorruptionSpec {
        damage_fraction: fraction,
        seed: derive_seed(seed, "sweep"),
        ..template.clone()
    }
}

pub fn evaluate_sweep<T: Real>(
    model: &RobustDenseNet<T>,
    test_tiles: &[MultiModalTile],
    fractions: &[f64],
    seed: u64,
    patch: usize,
    ids: SweepIds,
) -> Result<RobustnessReport> {
    if test_tiles.is_empty() {
        return Err(validation_err!("no test tiles to evaluate"));
    }
    if model.config().num_classes != NUM_CLASSES {
        return Err(validation_err!(
            "sweeps report the {NUM_CLASSES} dataset classes, model has {}",
            model.config().num_classes
        ));
    }
    if fractions.is_empty() || fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(validation_err!("fractions must be non-empty and strictly increasing"));
    }
    let template = CorruptionSpec::default();
    let mut rows = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let spec = sweep_spec(&template, f, seed);
        spec.validate()?;
        let cm = evaluate_tiles(model, test_tiles, patch, (f > 0.0).then_some(&spec))?;
        let r = MetricsReport::from_confusion(&cm, f)?;
        log::info!("fraction {f}: OA {:.4}, mean F1 {:.4}", r.oa, r.mean_f1);
        rows.push(r);
    }
    let report = RobustnessReport {
        checkpoint_id: ids.checkpoint_id,
        dataset_id: ids.dataset_id,
        seed,
        rows,
    };
    report.validate()?;
    Ok(report)
}

/// [`evaluate_sweep`] from files: a checkpoint and the test split of a dataset.
pub fn evaluate_sweep_files(
    checkpoint_path: &Path,
    manifest_path: &Path,
    fractions: &[f64],
    seed: u64,
    patch: usize,
) -> Result<RobustnessReport> {
    let (model, _) = checkpoint::load::<f32>(checkpoint_path)?;
    let dataset = Dataset::open(manifest_path)?;
    if !dataset.manifest.has_split(Split::Test) {
        return Err(validation_err!("dataset {} has no test split", dataset.manifest.dataset_id));
    }
    let tiles = dataset.load_split(Split::Test)?;
    evaluate_sweep(
        &model,
        &tiles,
        fractions,
        seed,
        patch,
        SweepIds {
            checkpoint_id: checkpoint_path.display().to_string(),
            dataset_id: dataset.manifest.dataset_id.clone(),
        },
    )
}
