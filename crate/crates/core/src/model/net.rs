use ndarray::{Array3, Array4, ArrayD, Ix4};

use crate::autograd::{Graph, Real, Var};
use crate::error::{shape_err, Error, Result};

use super::config::{ModelConfig, DSM_CHANNELS, NUM_STAGES, SPATIAL_MULTIPLE, SPECTRAL_CHANNELS};
use super::dense::{DenseStage, DsmBranch};
use super::feature::{FeatureKind, FeatureMap};
use super::layers::Conv;
use super::params::{ParamBuilder, ParamStore};
use super::sconv::SConvHead;
use super::se::{semix, SeLayer};
use super::up::UpBlock;

/// Dense hourglass segmentation network over spectral (NIR, R, G, B) and DSM inputs.
///
/// ```text
/// spectral -> stage1 (stem) -> stage2 ... stage6 ──(+ SE(dsm branch))──> up1 ... up5 -> SConv head
///                 │             skips from stages 5..1 ──────────────────────┘            ↑
///                 └── stem features (S) ─────────────────────────────────────────────────┘
/// ```
#[derive(Debug, Clone)]
pub struct RobustDenseNet<T> {
    cfg: ModelConfig,
    params: ParamStore<T>,
    encoder: Vec<DenseStage>,
    dsm_branch: Option<DsmBranch>,
    semix: Option<SeLayer>,
    skips: Vec<Conv>,
    ups: Vec<UpBlock>,
    shallow_proj: Conv,
    head: SConvHead,
}

/// Tape handles of the intermediate maps of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub stem: Var,
    pub encoder: Vec<Var>,
    pub bottleneck: Var,
    pub decoder: Vec<Var>,
    pub logits: Var,
    pub class_weights: Vec<Var>,
}

/// Gradient of every parameter, indexed like the parameter store. `None`
/// means the parameter did not influence the loss.
pub type ParamGrads<T> = Vec<Option<ArrayD<T>>>;

impl<T: Real> RobustDenseNet<T> {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::new();
        let net = Self::build(cfg, &mut params, seed)?;
        Ok(RobustDenseNet { params, ..net })
    }

    /// Rebuilds the module structure for `cfg` and adopts `params`, which
    /// must carry exactly the expected names and shapes.
    pub fn from_params(cfg: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        cfg.validate()?;
        let mut scratch = ParamStore::new();
        let net = Self::build(cfg, &mut scratch, 0)?;
        if scratch.manifest() != params.manifest() {
            let expected = scratch.manifest();
            let got = params.manifest();
            let first = expected
                .iter()
                .zip(&got)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("expected {a:?}, found {b:?}"))
                .unwrap_or_else(|| format!("expected {} tensors, found {}", expected.len(), got.len()));
            return Err(Error::Checkpoint(format!("parameter manifest mismatch: {first}")));
        }
        Ok(RobustDenseNet { params, ..net })
    }

    fn build(cfg: ModelConfig, store: &mut ParamStore<T>, seed: u64) -> Result<Self> {
        let mut root = ParamBuilder::new(store, seed);
        let ch = cfg.stage_channels();

        let mut encoder = Vec::with_capacity(NUM_STAGES);
        for k in 1..=NUM_STAGES {
            encoder.push(DenseStage::new(&mut root.pp(format!("encoder.stage{k}")), k, &cfg)?);
        }

        let (dsm_branch, semix_layer) = if cfg.semix {
            let branch = DsmBranch::new(&mut root.pp("dsm"), &cfg)?;
            let reduction = cfg.se_reduction.min(ch[NUM_STAGES - 1]);
            let se = SeLayer::new(&mut root.pp("semix.se"), ch[NUM_STAGES - 1], reduction)?;
            (Some(branch), Some(se))
        } else {
            (None, None)
        };

        let mut skips = Vec::new();
        let mut ups = Vec::new();
        for (j, (deep, fused, out)) in cfg.decoder_widths().into_iter().enumerate() {
            let j = j + 1;
            let skip_source = ch[NUM_STAGES - 1 - j];
            skips.push(Conv::new(
                &mut root.pp(format!("decoder.skip{j}")),
                skip_source,
                fused,
                1,
                false,
            )?);
            let up = UpBlock::new(&mut root.pp(format!("decoder.up{j}")), deep, fused, fused, cfg.up_fusion)?;
            debug_assert_eq!(up.out_channels(), out);
            ups.push(up);
        }

        let c = ch[0];
        let shallow_proj = Conv::new(&mut root.pp("head.shallow_proj"), c, c, 1, false)?;
        let head = SConvHead::new(&mut root.pp("head"), c, cfg.num_classes, cfg.se_reduction)?;

        Ok(RobustDenseNet {
            cfg,
            params: ParamStore::new(),
            encoder,
            dsm_branch,
            semix: semix_layer,
            skips,
            ups,
            shallow_proj,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn encoder_stage(&self, index: usize) -> &DenseStage {
        &self.encoder[index - 1]
    }

    pub fn head(&self) -> &SConvHead {
        &self.head
    }

    pub fn up_block(&self, index: usize) -> &UpBlock {
        &self.ups[index - 1]
    }

    pub fn semix_layer(&self) -> Option<&SeLayer> {
        self.semix.as_ref()
    }

    /// Same network with parameters converted to another element type.
    pub fn cast<U: Real>(&self) -> RobustDenseNet<U> {
        RobustDenseNet {
            cfg: self.cfg.clone(),
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            dsm_branch: self.dsm_branch.clone(),
            semix: self.semix.clone(),
            skips: self.skips.clone(),
            ups: self.ups.clone(),
            shallow_proj: self.shallow_proj.clone(),
            head: self.head.clone(),
        }
    }

    fn check_inputs(&self, spectral: &[usize], dsm: &[usize]) -> Result<()> {
        let &[b, c, h, w] = spectral else {
            return Err(shape_err!("spectral input must be 4-D, got {spectral:?}"));
        };
        if c != SPECTRAL_CHANNELS {
            return Err(shape_err!(
                "spectral input needs {SPECTRAL_CHANNELS} channels (NIR, R, G, B), got {c}"
            ));
        }
        if h % SPATIAL_MULTIPLE != 0 || w % SPATIAL_MULTIPLE != 0 || h == 0 || w == 0 {
            return Err(shape_err!(
                "input height and width must be positive multiples of {SPATIAL_MULTIPLE}, got {h}x{w}"
            ));
        }
        if dsm != [b, DSM_CHANNELS, h, w] {
            return Err(shape_err!(
                "DSM input {dsm:?} does not match spectral input {spectral:?} (expected [{b}, 1, {h}, {w}])"
            ));
        }
        Ok(())
    }

    /// Records the full forward pass on `g`.
    pub fn forward_graph(&self, g: &mut Graph<T>, spectral: Var, dsm: Var) -> Result<ForwardTrace> {
        self.check_inputs(g.shape(spectral), g.shape(dsm))?;
        let p = &self.params;

        let mut encoder = Vec::with_capacity(NUM_STAGES);
        let mut stem = None;
        let mut h = spectral;
        for stage in &self.encoder {
            let out = stage.forward(g, p, h)?;
            if out.stem.is_some() {
                stem = out.stem;
            }
            h = out.features;
            encoder.push(h);
        }
        let stem = stem.expect("stage 1 has a stem");

        let bottleneck = match (&self.dsm_branch, &self.semix) {
            (Some(branch), Some(se)) => {
                let dsm_feat = branch.forward(g, p, dsm)?;
                semix(g, p, se, dsm_feat, h)?
            }
            _ => h,
        };

        let mut deep = bottleneck;
        let mut decoder = Vec::with_capacity(self.ups.len());
        for (j, (up, skip)) in self.ups.iter().zip(&self.skips).enumerate() {
            let source = encoder[NUM_STAGES - 2 - j];
            let pooled = g.avg_pool2(source)?;
            let shallow = skip.forward(g, p, pooled)?;
            deep = up.forward(g, p, deep, shallow)?;
            decoder.push(deep);
        }

        let shallow = self.shallow_proj.forward(g, p, stem)?;
        let head = self.head.forward(g, p, deep, shallow)?;
        Ok(ForwardTrace {
            stem,
            encoder,
            bottleneck,
            decoder,
            logits: head.logits,
            class_weights: head.weights,
        })
    }

    /// Inference: logits of shape `(B, num_classes, H, W)`.
    pub fn forward(&self, spectral: &FeatureMap<T>, dsm: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        spectral.ensure_finite()?;
        dsm.ensure_finite()?;
        let mut g = Graph::new();
        let s = g.constant(spectral.data.clone().into_dyn());
        let d = g.constant(dsm.data.clone().into_dyn());
        let trace = self.forward_graph(&mut g, s, d)?;
        let logits = g
            .value(trace.logits)
            .clone()
            .into_dimensionality::<Ix4>()
            .map_err(|e| shape_err!("{e}"))?;
        let out = FeatureMap::new(logits, FeatureKind::Logits);
        out.ensure_finite()?;
        Ok(out)
    }

    /// Per-pixel arg-max class, shape `(B, H, W)`.
    pub fn predict(&self, spectral: &Array4<T>, dsm: &Array4<T>) -> Result<Array3<u8>> {
        let logits = self.forward(
            &FeatureMap::new(spectral.clone(), FeatureKind::SpectralInput),
            &FeatureMap::new(dsm.clone(), FeatureKind::DsmInput),
        )?;
        Ok(argmax_classes(&logits.data))
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_grads(
        &self,
        spectral: &Array4<T>,
        dsm: &Array4<T>,
        labels: &Array3<u8>,
        ignore_index: u8,
    ) -> Result<(f64, ParamGrads<T>)> {
        let mut g = Graph::new();
        let s = g.constant(spectral.clone().into_dyn());
        let d = g.constant(dsm.clone().into_dyn());
        let trace = self.forward_graph(&mut g, s, d)?;
        let loss = g.cross_entropy(trace.logits, labels, ignore_index)?;
        let value = g.value(loss.var)[[0]].to_f64();
        let grads = g.backward(loss.var)?;
        let per_param = self
            .params
            .ids()
            .map(|id| grads.param(id).cloned())
            .collect();
        Ok((value, per_param))
    }
}

/// Arg-max over the channel axis of `(B, K, H, W)` logits. Ties pick the lower class.
pub fn argmax_classes<T: Real>(logits: &Array4<T>) -> Array3<u8> {
    let (b, k, h, w) = logits.dim();
    let mut out = Array3::zeros((b, h, w));
    for ((bi, y, x), o) in out.indexed_iter_mut() {
        let mut best = 0usize;
        let mut best_v = T::neg_infinity();
        for c in 0..k {
            let v = logits[[bi, c, y, x]];
            if v > best_v {
                best_v = v;
                best = c;
            }
        }
        *o = best as u8;
    }
    out
}
