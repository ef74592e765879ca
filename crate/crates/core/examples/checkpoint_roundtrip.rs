//! Saves a model, reloads it and checks predictions are unchanged.

use robustdense::data::{stack_batch, synth_tile};
use robustdense::model::{checkpoint, ModelConfig, RobustDenseNet};

fn main() -> robustdense::Result<()> {
    let dir = std::env::temp_dir().join("robustdense_ckpt_demo");
    let path = dir.join("model.ckpt");
    let net = RobustDenseNet::<f32>::new(ModelConfig::tiny(), 9)?;
    let mut meta = serde_json::Map::new();
    meta.insert("note".into(), "demo".into());
    checkpoint::save(&net, &path, meta)?;
    let (back, header) = checkpoint::load::<f32>(&path)?;
    println!(
        "{}: format {}, {} tensors, {} bytes",
        path.display(),
        header.format_version,
        header.params.len(),
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );
    let tile = synth_tile(64, 1, "ck");
    let (s, d, _) = stack_batch(&[&tile])?;
    assert_eq!(net.predict(&s, &d)?, back.predict(&s, &d)?);
    println!("predictions identical after reload");
    Ok(())
}
