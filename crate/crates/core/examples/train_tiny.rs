//! Overfits the tiny network on four synthetic 64x64 patches.
//!
//! ```text
//! cargo run --release --example train_tiny -- [steps] [sgd|adam] [learning_rate]
//! ```

use robustdense::data::synth_dataset;
use robustdense::harness::{evaluate_tiles, train, OptimizerKind, TrainConfig};
use robustdense::metrics::overall_accuracy;
use robustdense::model::ModelConfig;

fn main() -> robustdense::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: usize = args.first().map_or(200, |s| s.parse().expect("steps"));
    let mut cfg = TrainConfig {
        model: ModelConfig::tiny(),
        batch_size: 4,
        max_steps: steps,
        patch_size: 64,
        augmentation: false,
        validate_every: 0,
        seed: 7,
        ..Default::default()
    };
    if args.get(1).map(String::as_str) == Some("adam") {
        cfg.optimizer.name = OptimizerKind::Adam;
        cfg.optimizer.learning_rate = 1e-3;
    }
    if let Some(lr) = args.get(2) {
        cfg.optimizer.learning_rate = lr.parse().expect("learning rate");
    }

    let data = synth_dataset(4, 64, 11)?;
    let start = std::time::Instant::now();
    let out = train::<f32>(&cfg, &data.tiles, &[], None)?;
    for (i, l) in out.history.losses.iter().enumerate().step_by(20) {
        println!("step {i:4}  loss {l:.4}");
    }
    let cm = evaluate_tiles(&out.model, &data.tiles, 64, None)?;
    println!(
        "train pixel accuracy after {steps} steps: {:.4} ({:.1}s)",
        overall_accuracy(&cm)?,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
