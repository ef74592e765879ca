//! Finite-difference check of the tape gradients of the whole micro network.

use ndarray::{Array3, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustdense::gradcheck::{check_params, random_probes, DEFAULT_STEP};
use robustdense::model::{ModelConfig, RobustDenseNet};

fn main() -> robustdense::Result<()> {
    let cfg = ModelConfig::micro(6);
    let net = RobustDenseNet::<f64>::new(cfg.clone(), 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spectral = ArrayD::from_shape_fn(IxDyn(&[1, 4, 32, 32]), |_| rng.gen::<f64>());
    let dsm = ArrayD::from_shape_fn(IxDyn(&[1, 1, 32, 32]), |_| rng.gen::<f64>());
    let labels = Array3::from_shape_fn((1, 32, 32), |_| rng.gen_range(0..6u8));

    let mut store = net.params().clone();
    let probes = random_probes(&store, 10, &mut rng);
    let results = check_params(&mut store, &probes, DEFAULT_STEP, |g, p| {
        let model = RobustDenseNet::from_params(cfg.clone(), p.clone())?;
        let s = g.constant(spectral.clone());
        let d = g.constant(dsm.clone());
        let trace = model.forward_graph(g, s, d)?;
        Ok(g.cross_entropy(trace.logits, &labels, 255)?.var)
    })?;
    for p in &results {
        println!("{:40} [{:5}]  tape {:+.6e}  numeric {:+.6e}  rel {:.1e}", p.param, p.index, p.analytic, p.numeric, p.rel_error);
    }
    Ok(())
}
