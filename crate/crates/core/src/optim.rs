//! Adam optimizer.

use alloc::vec::Vec;

use crate::params::{ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state for a fixed list of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    pub step: u64,
    ids: Vec<ParamId>,
    first: Vec<Tensor<F>>,
    second: Vec<Tensor<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(config: AdamConfig, store: &ParamStore<F>, ids: Vec<ParamId>) -> Self {
        let first = ids
            .iter()
            .map(|&id| Tensor::zeros(store.value(id).shape()))
            .collect();
        let second = ids
            .iter()
            .map(|&id| Tensor::zeros(store.value(id).shape()))
            .collect();
        Adam {
            config,
            step: 0,
            ids,
            first,
            second,
        }
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    /// First and second moment estimates, in [`Adam::ids`] order.
    pub fn moments(&self) -> (&[Tensor<F>], &[Tensor<F>]) {
        (&self.first, &self.second)
    }

    pub fn moments_mut(&mut self) -> (&mut [Tensor<F>], &mut [Tensor<F>]) {
        (&mut self.first, &mut self.second)
    }

    /// Applies one update. `grads[i]` belongs to `self.ids()[i]`; a missing
    /// gradient counts as zero.
    pub fn update(&mut self, store: &mut ParamStore<F>, grads: &[Option<Tensor<F>>]) {
        assert_eq!(grads.len(), self.ids.len());
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (F::of(c.beta1), F::of(c.beta2));
        let lr = F::of(c.lr);
        let eps = F::of(c.eps);
        let bc1 = F::one() - F::of(libm::pow(c.beta1, self.step as f64));
        let bc2 = F::one() - F::of(libm::pow(c.beta2, self.step as f64));
        for (i, &id) in self.ids.iter().enumerate() {
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            let p = store.value_mut(id).data_mut();
            match &grads[i] {
                Some(g) => {
                    for (((pj, mj), vj), &gj) in p.iter_mut().zip(m).zip(v).zip(g.data()) {
                        *mj = b1 * *mj + (F::one() - b1) * gj;
                        *vj = b2 * *vj + (F::one() - b2) * gj * gj;
                        let mhat = *mj / bc1;
                        let vhat = *vj / bc2;
                        *pj -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
                None => {
                    for ((pj, mj), vj) in p.iter_mut().zip(m).zip(v) {
                        *mj = b1 * *mj;
                        *vj = b2 * *vj;
                        let mhat = *mj / bc1;
                        let vhat = *vj / bc2;
                        *pj -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Group;

    #[test]
    fn zero_learning_rate_leaves_parameters_bitwise_unchanged() {
        let mut store = ParamStore::<f32>::new();
        let id = store.add("w", Group::Generator, Tensor::new(&[3], vec![0.1, -2.0, 3.5]).unwrap());
        let before = store.clone();
        let cfg = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        let mut opt = Adam::new(cfg, &store, vec![id]);
        let g = Tensor::new(&[3], vec![1.0, -1.0, 0.25]).unwrap();
        opt.update(&mut store, &[Some(g)]);
        assert_eq!(store, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Group::Generator, Tensor::new(&[2], vec![1.0, 1.0]).unwrap());
        let mut opt = Adam::new(AdamConfig::default(), &store, vec![id]);
        let g = Tensor::new(&[2], vec![0.3, -5.0]).unwrap();
        opt.update(&mut store, &[Some(g)]);
        let p = store.value(id).data();
        assert!((p[0] - (1.0 - 2e-4)).abs() < 1e-9);
        assert!((p[1] - (1.0 + 2e-4)).abs() < 1e-9);
    }
}
