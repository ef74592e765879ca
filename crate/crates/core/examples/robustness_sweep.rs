//! Trains on a synthetic dataset with corruption augmentation, sweeps the
//! damage fraction over {0, 0.2, 0.5} and writes the report files.
//!
//! ```text
//! cargo run --release --example robustness_sweep -- [out_dir] [steps] [--no-semix]
//! ```

use std::path::PathBuf;

use robustdense::data::{synth_dataset, Split};
use robustdense::harness::{emit_report, evaluate_sweep, train, CorruptionAugment, SweepIds, TrainConfig};
use robustdense::model::ModelConfig;

fn main() -> robustdense::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let no_semix = args.iter().any(|a| a == "--no-semix");
    let pos: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();
    let out = PathBuf::from(pos.first().map_or("sweep_out", |s| s.as_str()));
    let steps: usize = pos.get(1).map_or(300, |s| s.parse().expect("steps"));

    let data = synth_dataset(16, 128, 3)?;
    let train_tiles: Vec<_> = data.split(Split::Train).into_iter().cloned().collect();
    let val_tiles: Vec<_> = data.split(Split::Val).into_iter().cloned().collect();
    let test_tiles: Vec<_> = data.split(Split::Test).into_iter().cloned().collect();

    let cfg = TrainConfig {
        model: ModelConfig { semix: !no_semix, ..ModelConfig::tiny() },
        max_steps: steps,
        patch_size: 128,
        corruption_augmentation: Some(CorruptionAugment::default()),
        validate_every: 100,
        seed: 1,
        ..Default::default()
    };
    let trained = train::<f32>(&cfg, &train_tiles, &val_tiles, None)?;
    let report = evaluate_sweep(
        &trained.model,
        &test_tiles,
        &[0.0, 0.2, 0.5],
        cfg.seed,
        cfg.patch_size,
        SweepIds {
            checkpoint_id: format!("synthetic-seed{}", cfg.seed),
            dataset_id: data.manifest.dataset_id.clone(),
        },
    )?;
    for r in &report.rows {
        println!("damage {:>4.0}%  OA {:.4}  mean F1 {:.4}", r.damage_fraction * 100.0, r.oa, r.mean_f1);
    }
    for p in emit_report(&report, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
