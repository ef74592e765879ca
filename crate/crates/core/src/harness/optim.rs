use ndarray::{ArrayD, Zip};

use super::config::{OptimizerConfig, OptimizerKind};
use crate::autograd::Real;
use crate::model::{ParamGrads, ParamStore};

/// Per-parameter optimizer state. Parameters without a gradient are left untouched.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    cfg: OptimizerConfig,
    first: Vec<Option<ArrayD<T>>>,
    second: Vec<Option<ArrayD<T>>>,
    steps: u64,
}

impl<T: Real> Optimizer<T> {
    pub fn new(cfg: OptimizerConfig, num_params: usize) -> Self {
        Optimizer {
            cfg,
            first: vec![None; num_params],
            second: vec![None; num_params],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamGrads<T>) {
        self.steps += 1;
        let lr = T::of(self.cfg.learning_rate);
        let wd = T::of(self.cfg.weight_decay);
        let b1 = T::of(self.cfg.momentum);
        let b2 = T::of(self.cfg.beta2);
        let eps = T::of(self.cfg.eps);
        let t = self.steps as i32;
        let bias1 = T::one() - b1.powi(t);
        let bias2 = T::one() - b2.powi(t);
        for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let Some(g) = grads[i].as_ref() else { continue };
            let w = params.get_mut(id);
            let m = self.first[i].get_or_insert_with(|| ArrayD::zeros(g.raw_dim()));
            match self.cfg.name {
                OptimizerKind::Sgd => {
                    Zip::from(&mut *w).and(m).and(g).for_each(|w, m, &g| {
                        *m = b1 * *m + g + wd * *w;
                        *w -= lr * *m;
                    });
                }
                OptimizerKind::Adam => {
                    let v = self.second[i].get_or_insert_with(|| ArrayD::zeros(g.raw_dim()));
                    Zip::from(&mut *w).and(m).and(v).and(g).for_each(|w, m, v, &g| {
                        let g = g + wd * *w;
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        *w -= lr * (*m / bias1) / ((*v / bias2).sqrt() + eps);
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;

    fn store(v: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("w", arr1(&[v]).into_dyn()).unwrap();
        s
    }

    #[test]
    fn sgd_momentum_matches_hand_computation() {
        let cfg = OptimizerConfig { learning_rate: 0.1, weight_decay: 0.0, momentum: 0.5, ..Default::default() };
        let mut s = store(1.0);
        let mut opt = Optimizer::new(cfg, 1);
        let g = vec![Some(arr1(&[2.0]).into_dyn())];
        opt.step(&mut s, &g);
        // m = 2, w = 1 - 0.2
        assert!((s.iter().next().unwrap().1[[0]] - 0.8).abs() < 1e-15);
        opt.step(&mut s, &g);
        // m = 0.5 * 2 + 2 = 3, w = 0.8 - 0.3
        assert!((s.iter().next().unwrap().1[[0]] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let cfg = OptimizerConfig { name: OptimizerKind::Adam, learning_rate: 0.01, weight_decay: 0.0, ..Default::default() };
        let mut s = store(1.0);
        let mut opt = Optimizer::new(cfg, 1);
        opt.step(&mut s, &vec![Some(arr1(&[-5.0]).into_dyn())]);
        assert!((s.iter().next().unwrap().1[[0]] - 1.01).abs() < 1e-8);
    }

    #[test]
    fn missing_gradient_leaves_parameter() {
        let mut s = store(3.0);
        let mut opt = Optimizer::new(OptimizerConfig::default(), 1);
        opt.step(&mut s, &vec![None]);
        assert_eq!(s.iter().next().unwrap().1[[0]], 3.0);
    }
}
