#![allow(dead_code)]

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robustdense::autograd::{Graph, Var};
use robustdense::gradcheck::{check_params, random_probes, Probe, DEFAULT_STEP};
use robustdense::model::{
    DenseStage, DsmBranch, ModelConfig, ParamBuilder, ParamStore, RobustDenseNet, SConvHead, SeLayer, UpBlock,
};
use robustdense::model::semix;
use robustdense::Result;

pub fn uniform(shape: &[usize], seed: u64) -> ArrayD<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ArrayD::from_shape_fn(IxDyn(shape), |_| rng.gen_range(-1.0..1.0))
}

pub fn max_rel(probes: &[Probe]) -> f64 {
    probes.iter().map(|p| p.rel_error).fold(0.0, f64::max)
}

/// Scalar objective: a fixed random linear read-out of `x`.
fn readout(g: &mut Graph<f64>, x: Var, seed: u64) -> Result<Var> {
    let w = uniform(g.shape(x), seed);
    g.weighted_sum(x, w)
}

fn probes(store: &ParamStore<f64>, n: usize, seed: u64) -> Vec<(robustdense::autograd::ParamId, usize)> {
    random_probes(store, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn check_se_layer(n: usize, seed: u64) -> Result<Vec<Probe>> {
    let mut store = ParamStore::new();
    let se = SeLayer::new(&mut ParamBuilder::new(&mut store, seed).pp("se"), 8, 2)?;
    let x = uniform(&[2, 8, 5, 5], seed + 1);
    let pr = probes(&store, n, seed + 2);
    check_params(&mut store, &pr, DEFAULT_STEP, |g, p| {
        let xv = g.constant(x.clone());
        let out = se.forward(g, p, xv)?;
        readout(g, out.reweighted, seed + 3)
    })
}

pub fn check_semix(n: usize, seed: u64) -> Result<Vec<Probe>> {
    let mut store = ParamStore::new();
    let se = SeLayer::new(&mut ParamBuilder::new(&mut store, seed).pp("semix"), 8, 4)?;
    let dsm = uniform(&[1, 8, 4, 4], seed + 1);
    let trunk = uniform(&[1, 8, 4, 4], seed + 2);
    let pr = probes(&store, n, seed + 3);
    check_params(&mut store, &pr, DEFAULT_STEP, |g, p| {
        let d = g.constant(dsm.clone());
        let t = g.constant(trunk.clone());
        let out = semix(g, p, &se, d, t)?;
        readout(g, out, seed + 4)
    })
}

/// Random probes plus one on the blend weight's logit.
pub fn check_up_block(n: usize, seed: u64) -> Result<Vec<Probe>> {
    let mut store = ParamStore::new();
    let up = UpBlock::new(&mut ParamBuilder::new(&mut store, seed).pp("up"), 8, 6, 8, true)?;
    let deep = uniform(&[1, 8, 4, 4], seed + 1);
    let shallow = uniform(&[1, 6, 4, 4], seed + 2);
    let mut pr = probes(&store, n, seed + 3);
    pr.push((up.fusion.as_ref().unwrap().alpha_logit, 0));
    check_params(&mut store, &pr, DEFAULT_STEP, |g, p| {
        let d = g.constant(deep.clone());
        let s = g.constant(shallow.clone());
        let out = up.forward(g, p, d, s)?;
        readout(g, out, seed + 4)
    })
}

pub fn check_sconv_head(n: usize, seed: u64) -> Result<Vec<Probe>> {
    let mut store = ParamStore::new();
    let head = SConvHead::new(&mut ParamBuilder::new(&mut store, seed).pp("head"), 6, 3, 2)?;
    let shared = uniform(&[1, 6, 6, 6], seed + 1);
    let shallow = uniform(&[1, 6, 6, 6], seed + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
    let labels = ndarray::Array3::from_shape_fn((1, 6, 6), |_| rng.gen_range(0..3u8));
    let pr = probes(&store, n, seed + 4);
    check_params(&mut store, &pr, DEFAULT_STEP, |g, p| {
        let c = g.constant(shared.clone());
        let s = g.constant(shallow.clone());
        let out = head.forward(g, p, c, s)?;
        Ok(g.cross_entropy(out.logits, &labels, 255)?.var)
    })
}

/// Stage 1 takes spectral input through its stem; later stages pool first.
pub fn check_dense_stage(index: usize, n: usize, seed: u64) -> Result<Vec<Probe>> {
    let cfg = ModelConfig::micro(6);
    let mut store = ParamStore::new();
    let stage = DenseStage::new(&mut ParamBuilder::new(&mut store, seed).pp("stage"), index, &cfg)?;
    let size = if index == 1 { 6 } else { 8 };
    let x = uniform(&[1, stage.expected_input_channels(), size, size], seed + 1);
    let pr = probes(&store, n, seed + 2);
    check_params(&mut store, &pr, DEFAULT_STEP, |g, p| {
        let xv = g.constant(x.clone());
        let out = stage.forward(g, p, xv)?;
        readout(g, out.features, seed + 3)
    })
}

pub fn check_dsm_branch(n: usize, seed: u64) -> Result<Vec<Probe>> {
    let cfg = ModelConfig::micro(6);
    let mut store = ParamStore::new();
    let branch = DsmBranch::new(&mut ParamBuilder::new(&mut store, seed).pp("dsm"), &cfg)?;
    let x = uniform(&[1, 1, 32, 32], seed + 1);
    let pr = probes(&store, n, seed + 2);
    check_params(&mut store, &pr, DEFAULT_STEP, |g, p| {
        let xv = g.constant(x.clone());
        let out = branch.forward(g, p, xv)?;
        readout(g, out, seed + 3)
    })
}

/// Cross-entropy of the whole network on a random 32x32 input.
pub fn check_full_forward(cfg: ModelConfig, n: usize, seed: u64) -> Result<Vec<Probe>> {
    let net = RobustDenseNet::<f64>::new(cfg.clone(), seed)?;
    let spectral = uniform(&[1, 4, 32, 32], seed + 1).mapv(|v| 0.5 + 0.5 * v);
    let dsm = uniform(&[1, 1, 32, 32], seed + 2).mapv(|v| 0.5 + 0.5 * v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
    let k = cfg.num_classes as u8;
    let labels = ndarray::Array3::from_shape_fn((1, 32, 32), |_| rng.gen_range(0..k));
    let mut store = net.params().clone();
    let pr = probes(&store, n, seed + 4);
    check_params(&mut store, &pr, DEFAULT_STEP, |g, p| {
        let model = RobustDenseNet::from_params(cfg.clone(), p.clone())?;
        let s = g.constant(spectral.clone());
        let d = g.constant(dsm.clone());
        let trace = model.forward_graph(g, s, d)?;
        Ok(g.cross_entropy(trace.logits, &labels, 255)?.var)
    })
}
