//! Builds the tiny network, prints its layout and runs one prediction.
//!
//! `cargo run --release --example forward_pass -- [--no-semix] [--plain-pixelshuffle]`

use robustdense::data::{stack_batch, synth_tile};
use robustdense::model::{FeatureKind, FeatureMap, ModelConfig, RobustDenseNet};

fn main() -> robustdense::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let cfg = ModelConfig {
        semix: !args.iter().any(|a| a == "--no-semix"),
        up_fusion: !args.iter().any(|a| a == "--plain-pixelshuffle"),
        ..ModelConfig::tiny()
    };
    let net = RobustDenseNet::<f32>::new(cfg.clone(), 0)?;
    println!("encoder widths {:?}", cfg.stage_channels());
    for (j, (deep, fused, out)) in cfg.decoder_widths().iter().enumerate() {
        let up = net.up_block(j + 1);
        assert_eq!(up.out_channels(), *out);
        println!("up{}: deep {deep}, skip/fused {fused} -> {out}", j + 1);
    }
    println!("{} parameter tensors, {} scalars", net.params().len(), net.params().num_scalars());

    let tile = synth_tile(64, 1, "demo");
    let (spectral, dsm, labels) = stack_batch(&[&tile])?;
    let logits = net.forward(
        &FeatureMap::new(spectral.clone(), FeatureKind::SpectralInput),
        &FeatureMap::new(dsm.clone(), FeatureKind::DsmInput),
    )?;
    println!("logits {:?}", logits.shape());
    let pred = net.predict(&spectral, &dsm)?;
    let agree = pred.iter().zip(labels.iter()).filter(|(p, l)| p == l).count();
    println!("untrained agreement with labels: {:.3}", agree as f64 / labels.len() as f64);
    Ok(())
}
