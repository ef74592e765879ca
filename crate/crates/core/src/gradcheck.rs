//! Central finite-difference checks of tape gradients.
//!
//! The numeric side only ever evaluates forward passes, so it stays
//! independent of the backward kernels it is checking.

use rand::Rng;

use crate::autograd::{Graph, ParamId, Var};
use crate::error::{validation_err, Result};
use crate::model::ParamStore;

/// Step used by the checks in this crate.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Denominator floor for [`relative_error`] so that gradients that are zero
/// up to round-off compare as equal instead of as 100% off.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Probe {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Picks `count` uniformly random `(parameter, flat index)` positions,
/// weighting parameters by their size.
pub fn random_probes<R: Rng>(store: &ParamStore<f64>, count: usize, rng: &mut R) -> Vec<(ParamId, usize)> {
    let total = store.num_scalars();
    if total == 0 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let mut k = rng.gen_range(0..total);
            for id in store.ids() {
                let n = store.get(id).len();
                if k < n {
                    return (id, k);
                }
                k -= n;
            }
            unreachable!("index within total")
        })
        .collect()
}

/// Compares the tape gradient of the scalar produced by `build` against
/// central differences `(f(p + h) - f(p - h)) / 2h` at every probe.
pub fn check_params<F>(
    store: &mut ParamStore<f64>,
    probes: &[(ParamId, usize)],
    step: f64,
    build: F,
) -> Result<Vec<Probe>>
where
    F: Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let mut g = Graph::new();
    let loss = build(&mut g, store)?;
    if g.value(loss).len() != 1 {
        return Err(validation_err!("gradient check needs a scalar objective"));
    }
    let grads = g.backward(loss)?;

    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let v = build(&mut g, store)?;
        Ok(g.value(v).iter().copied().next().unwrap_or(f64::NAN))
    };

    let mut out = Vec::with_capacity(probes.len());
    for &(id, index) in probes {
        let analytic = grads.param(id).map(|a| a.as_slice().unwrap()[index]).unwrap_or(0.0);
        let original = store.get(id).as_slice().unwrap()[index];
        store.get_mut(id).as_slice_mut().unwrap()[index] = original + step;
        let plus = eval(store)?;
        store.get_mut(id).as_slice_mut().unwrap()[index] = original - step;
        let minus = eval(store)?;
        store.get_mut(id).as_slice_mut().unwrap()[index] = original;
        let numeric = (plus - minus) / (2.0 * step);
        out.push(Probe {
            param: store.name(id).to_string(),
            index,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    #[test]
    fn quadratic_gradient_matches() {
        let mut store = ParamStore::<f64>::new();
        let id = store
            .insert("w", ArrayD::from_shape_vec(IxDyn(&[3]), vec![0.5, -1.0, 2.0]).unwrap())
            .unwrap();
        let probes: Vec<_> = (0..3).map(|i| (id, i)).collect();
        // sum(sigmoid(w) * c) has a non-trivial derivative.
        let res = check_params(&mut store, &probes, DEFAULT_STEP, |g, p| {
            let w = g.param(id, p.get(id));
            let s = g.sigmoid(w);
            g.weighted_sum(s, ArrayD::from_shape_vec(IxDyn(&[3]), vec![1.0, 2.0, 3.0]).unwrap())
        })
        .unwrap();
        for p in res {
            assert!(p.rel_error < 1e-8, "{p:?}");
        }
    }

    #[test]
    fn relative_error_uses_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1e-12, 0.0) < 1e-5);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-12);
    }
}
