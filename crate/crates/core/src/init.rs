//! Seeded parameter initialization.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::real::Real;
use crate::tensor::Tensor;

pub(crate) fn standard_normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform He initialization for layers followed by a leaky rectifier.
pub fn kaiming_uniform<F: Real>(shape: &[usize], fan_in: usize, slope: f64, rng: &mut impl Rng) -> Tensor<F> {
    let gain = libm::sqrt(2.0 / (1.0 + slope * slope));
    let bound = gain * libm::sqrt(3.0 / fan_in.max(1) as f64);
    let dist = Uniform::new_inclusive(-bound, bound);
    Tensor::from_fn(shape, |_| F::of(dist.sample(rng)))
}
