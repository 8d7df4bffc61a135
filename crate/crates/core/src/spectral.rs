//! Spectral normalization by power iteration.
//!
//! A weight of shape `(out, ...)` is viewed as an `out x rest` matrix `W`.
//! The power vectors `u` (length `out`) and `v` (length `rest`) approximate
//! the leading singular pair; the normalized weight is `W / (u^T W v)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::graph::SPECTRAL_EPS;
use crate::real::Real;
use crate::tensor::Tensor;

/// Power-iteration vectors for one weight matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerState<F> {
    pub u: Vec<F>,
    pub v: Vec<F>,
}

impl<F: Real> PowerState<F> {
    /// Random unit `u`, then `v` aligned with `W^T u`.
    pub fn init(weight: &Tensor<F>, rng: &mut impl Rng) -> Self {
        let rows = weight.shape()[0];
        let cols = weight.numel() / rows.max(1);
        let mut u: Vec<F> = (0..rows)
            .map(|_| F::of(crate::init::standard_normal(rng)))
            .collect();
        normalize(&mut u);
        let mut v = vec![F::zero(); cols];
        mat_t_vec(weight.data(), rows, cols, &u, &mut v);
        normalize(&mut v);
        PowerState { u, v }
    }

    pub fn rows(&self) -> usize {
        self.u.len()
    }

    pub fn cols(&self) -> usize {
        self.v.len()
    }

    /// One power step: `v <- W^T u / |W^T u|`, `u <- W v / |W v|`.
    pub fn iterate(&mut self, w: &[F]) {
        let (rows, cols) = (self.rows(), self.cols());
        mat_t_vec(w, rows, cols, &self.u, &mut self.v);
        normalize(&mut self.v);
        mat_vec(w, rows, cols, &self.v, &mut self.u);
        normalize(&mut self.u);
    }

    /// Current singular value estimate `u^T W v`.
    pub fn sigma(&self, w: &[F]) -> F {
        bilinear(w, &self.u, &self.v)
    }

    pub fn cast<G: Real>(&self) -> PowerState<G> {
        PowerState {
            u: self.u.iter().map(|x| G::of(x.as_f64())).collect(),
            v: self.v.iter().map(|x| G::of(x.as_f64())).collect(),
        }
    }
}

/// Divides `weight` by its estimated top singular value. When `update` is set
/// one power iteration is applied to `state` first. Weights whose estimate is
/// below `1e-12` are returned unchanged.
pub fn spectral_normalize<F: Real>(
    weight: &Tensor<F>,
    state: &mut PowerState<F>,
    update: bool,
) -> Tensor<F> {
    if update {
        state.iterate(weight.data());
    }
    let sigma = state.sigma(weight.data());
    if sigma.abs().as_f64() < SPECTRAL_EPS {
        weight.clone()
    } else {
        weight.map(|x| x / sigma)
    }
}

/// `u^T W v` for a row-major `W`.
pub fn bilinear<F: Real>(w: &[F], u: &[F], v: &[F]) -> F {
    let cols = v.len();
    u.iter()
        .enumerate()
        .map(|(i, &ui)| {
            let row = &w[i * cols..(i + 1) * cols];
            ui * row.iter().zip(v).map(|(&a, &b)| a * b).sum::<F>()
        })
        .sum()
}

fn mat_vec<F: Real>(w: &[F], rows: usize, cols: usize, x: &[F], out: &mut [F]) {
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        *o = w[i * cols..(i + 1) * cols]
            .iter()
            .zip(x)
            .map(|(&a, &b)| a * b)
            .sum();
    }
}

fn mat_t_vec<F: Real>(w: &[F], rows: usize, cols: usize, x: &[F], out: &mut [F]) {
    out.fill(F::zero());
    for i in 0..rows {
        let xi = x[i];
        for (o, &a) in out.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
            *o += a * xi;
        }
    }
}

fn normalize<F: Real>(x: &mut [F]) {
    let norm = x.iter().map(|&a| a * a).sum::<F>().sqrt();
    if norm.as_f64() > SPECTRAL_EPS {
        for a in x {
            *a /= norm;
        }
    }
}
