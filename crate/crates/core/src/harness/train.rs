use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array3, Array4};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::evaluate_tiles;
use super::optim::Optimizer;
use crate::autograd::Real;
use crate::corruption::corrupt;
use crate::data::{augment_rotate, extract, stack_batch, Dataset, MultiModalTile, Split, Window};
use crate::error::{validation_err, Error, Result};
use crate::metrics::MetricsReport;
use crate::model::{checkpoint, RobustDenseNet, IGNORE_INDEX};
use crate::seeding::{derive_seed, rng_for};

pub const FINAL_CHECKPOINT: &str = "model.ckpt";
pub const LAST_GOOD_CHECKPOINT: &str = "last_good.ckpt";
pub const HISTORY_FILE: &str = "history.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub step: usize,
    pub oa: f64,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Loss of each step, before that step's update.
    pub losses: Vec<f64>,
    pub validation: Vec<ValidationRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: RobustDenseNet<T>,
    pub history: TrainHistory,
    /// Final checkpoint, when an output directory was given.
    pub checkpoint: Option<PathBuf>,
}

/// The patches of one step, as network inputs.
pub struct Batch<T> {
    pub spectral: Array4<T>,
    pub dsm: Array4<T>,
    pub labels: Array3<u8>,
}

/// Deterministic data order: one seeded permutation of the tiles per epoch.
fn tile_index(seed: u64, position: usize, n: usize) -> usize {
    let epoch = position / n;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_for(seed, &format!("epoch{epoch}")));
    perm[position % n]
}

/// Crop, rotation and optional corruption of the `b`-th patch of `step`.
pub fn sample_patch(cfg: &TrainConfig, tiles: &[MultiModalTile], step: usize, b: usize) -> Result<MultiModalTile> {
    let tile = &tiles[tile_index(cfg.seed, step * cfg.batch_size + b, tiles.len())];
    let p = cfg.patch_size;
    let mut rng = rng_for(cfg.seed, &format!("patch{step}.{b}"));
    let win = Window {
        row: 0,
        col: 0,
        top: rng.gen_range(0..=tile.height() - p),
        left: rng.gen_range(0..=tile.width() - p),
        size: p,
    };
    let mut patch = extract(tile, &win);
    patch.tile_id = format!("{}@{},{}", tile.tile_id, win.top, win.left);
    if cfg.augmentation {
        patch = augment_rotate(&patch, rng.gen_range(0..4))?;
    }
    if let Some(aug) = &cfg.corruption_augmentation {
        if rng.gen_bool(aug.probability) {
            let mut spec = aug.spec.clone();
            spec.damage_fraction = rng.gen_range(0.0..=aug.max_fraction);
            spec.seed = rng.gen();
            patch = corrupt(&patch, &spec)?;
        }
    }
    Ok(patch)
}

pub fn to_real<T: Real>(a: &Array4<f32>) -> Array4<T> {
    a.mapv(|v| T::of(f64::from(v)))
}

pub fn sample_batch<T: Real>(cfg: &TrainConfig, tiles: &[MultiModalTile], step: usize) -> Result<Batch<T>> {
    let patches = (0..cfg.batch_size)
        .map(|b| sample_patch(cfg, tiles, step, b))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&MultiModalTile> = patches.iter().collect();
    let (s, d, labels) = stack_batch(&refs)?;
    Ok(Batch {
        spectral: to_real(&s),
        dsm: to_real(&d),
        labels,
    })
}

fn metadata(cfg: &TrainConfig, step: usize, loss: Option<f64>) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("step".into(), step.into());
    m.insert("seed".into(), cfg.seed.into());
    if let Some(l) = loss.filter(|l| l.is_finite()) {
        m.insert("loss".into(), l.into());
    }
    m
}

fn all_finite<T: Real>(grads: &[Option<ndarray::ArrayD<T>>]) -> bool {
    grads.iter().flatten().all(|g| g.iter().all(|v| v.is_finite()))
}

/// Trains from scratch on `train_tiles`, validating on `val_tiles` every
/// `cfg.validate_every` steps. With `out_dir`, writes the final checkpoint
/// and the loss history there. On a non-finite loss or gradient the update
/// is skipped, the current (last good) parameters are saved as
/// `last_good.ckpt` and [`Error::Diverged`] is returned.
pub fn train<T: Real>(
    cfg: &TrainConfig,
    train_tiles: &[MultiModalTile],
    val_tiles: &[MultiModalTile],
    out_dir: Option<&Path>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_tiles.is_empty() {
        return Err(validation_err!("no training tiles"));
    }
    if let Some(t) = train_tiles
        .iter()
        .find(|t| t.height() < cfg.patch_size || t.width() < cfg.patch_size)
    {
        return Err(validation_err!(
            "tile {} ({}x{}) is smaller than patch_size {}",
            t.tile_id,
            t.height(),
            t.width(),
            cfg.patch_size
        ));
    }
    let mut model = RobustDenseNet::<T>::new(cfg.model.clone(), derive_seed(cfg.seed, "init"))?;
    let mut opt = Optimizer::new(cfg.optimizer.clone(), model.params().len());
    let mut history = TrainHistory::default();
    log::info!(
        "training {} parameters on {} tiles for {} steps",
        model.params().num_scalars(),
        train_tiles.len(),
        cfg.max_steps
    );

    for step in 0..cfg.max_steps {
        let batch = sample_batch::<T>(cfg, train_tiles, step)?;
        let (loss, grads) = match model.loss_and_grads(&batch.spectral, &batch.dsm, &batch.labels, IGNORE_INDEX) {
            Ok(r) => r,
            Err(Error::Numeric(msg)) => {
                log::error!("step {step}: {msg}");
                (f64::NAN, Vec::new())
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() || !all_finite(&grads) {
            log::error!("non-finite loss or gradient at step {step} (loss {loss}); keeping last good parameters");
            if let Some(dir) = out_dir {
                let path = dir.join(LAST_GOOD_CHECKPOINT);
                checkpoint::save(&model, &path, metadata(cfg, step, history.losses.last().copied()))?;
                log::error!("wrote {}", path.display());
            }
            return Err(Error::Diverged { step, loss });
        }
        opt.step(model.params_mut(), &grads);
        history.losses.push(loss);
        log::debug!("step {step}: loss {loss:.6}");

        let done = step + 1;
        let due = cfg.validate_every > 0 && (done % cfg.validate_every == 0 || done == cfg.max_steps);
        if due && !val_tiles.is_empty() {
            let cm = evaluate_tiles(&model, val_tiles, cfg.patch_size, None)?;
            let r = MetricsReport::from_confusion(&cm, 0.0)?;
            log::info!("step {done}: loss {loss:.4}, val OA {:.4}, mean F1 {:.4}", r.oa, r.mean_f1);
            history.validation.push(ValidationRecord {
                step: done,
                oa: r.oa,
                mean_f1: r.mean_f1,
            });
        }
    }

    let checkpoint = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(FINAL_CHECKPOINT);
            checkpoint::save(&model, &path, metadata(cfg, cfg.max_steps, history.losses.last().copied()))?;
            let hist = dir.join(HISTORY_FILE);
            fs::write(&hist, serde_json::to_string_pretty(&history)?).map_err(|e| Error::io(&hist, e))?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutcome {
        model,
        history,
        checkpoint,
    })
}

/// [`train`] on the train and validation splits of a dataset on disk.
pub fn train_on_dataset<T: Real>(cfg: &TrainConfig, dataset: &Dataset, out_dir: Option<&Path>) -> Result<TrainOutcome<T>> {
    if !dataset.manifest.has_split(Split::Train) {
        return Err(validation_err!("dataset {} has no train split", dataset.manifest.dataset_id));
    }
    let train_tiles = dataset.load_split(Split::Train)?;
    let val_tiles = dataset.load_split(Split::Val)?;
    train(cfg, &train_tiles, &val_tiles, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_tile;
    use crate::model::ModelConfig;

    fn tiny_cfg(steps: usize) -> TrainConfig {
        TrainConfig {
            model: ModelConfig::micro(6),
            max_steps: steps,
            patch_size: 32,
            validate_every: 0,
            ..Default::default()
        }
    }

    #[test]
    fn data_order_is_a_permutation_per_epoch() {
        let mut seen: Vec<usize> = (0..5).map(|p| tile_index(3, p, 5)).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn one_step_changes_parameters() {
        let tiles = vec![synth_tile(64, 1, "a")];
        let cfg = tiny_cfg(1);
        let init = RobustDenseNet::<f64>::new(cfg.model.clone(), derive_seed(cfg.seed, "init")).unwrap();
        let out = train::<f64>(&cfg, &tiles, &[], None).unwrap();
        assert_eq!(out.history.losses.len(), 1);
        let changed = init
            .params()
            .iter()
            .zip(out.model.params().iter())
            .any(|((_, a), (_, b))| a != b);
        assert!(changed);
    }

    #[test]
    fn same_seed_gives_identical_losses() {
        let tiles = vec![synth_tile(64, 1, "a"), synth_tile(64, 1, "b")];
        let mut cfg = tiny_cfg(3);
        cfg.corruption_augmentation = Some(Default::default());
        let a = train::<f64>(&cfg, &tiles, &[], None).unwrap();
        let b = train::<f64>(&cfg, &tiles, &[], None).unwrap();
        assert_eq!(a.history.losses, b.history.losses);
    }

    #[test]
    fn divergence_writes_last_good() {
        let mut tiles = vec![synth_tile(32, 1, "a")];
        tiles[0].spectral[[0, 0, 0]] = f32::NAN;
        let dir = tempfile::tempdir().unwrap();
        let err = train::<f64>(&tiny_cfg(2), &tiles, &[], Some(dir.path())).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 0, .. }));
        assert!(dir.path().join(LAST_GOOD_CHECKPOINT).exists());
    }
}
