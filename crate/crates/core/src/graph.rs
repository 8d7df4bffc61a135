//! Reverse-mode automatic differentiation over a per-step tape.
//!
//! A [`Graph`] records every operation applied during a forward pass. Values
//! are computed eagerly; [`Graph::backward`] walks the tape in reverse and
//! returns the gradients of a scalar with respect to every node that needs one.

use alloc::vec;
use alloc::vec::Vec;

use crate::kernels::{self, ConvGeom};
use crate::params::{ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<F> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    LeakyRelu {
        x: Var,
        slope: F,
    },
    Sigmoid {
        x: Var,
    },
    HardSigmoid {
        x: Var,
    },
    Tanh {
        x: Var,
    },
    Concat {
        parts: Vec<Var>,
    },
    Upsample {
        x: Var,
        factor: usize,
    },
    Reshape {
        x: Var,
    },
    SpectralNorm {
        w: Var,
        u: Vec<F>,
        v: Vec<F>,
        sigma: F,
    },
    Mse {
        a: Var,
        b: Var,
    },
    NegLog {
        p: Var,
        complement: bool,
        eps: F,
    },
    Combine {
        terms: Vec<(Var, F)>,
    },
}

struct Node<F> {
    value: Tensor<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Gradients produced by [`Graph::backward`].
pub struct Grads<F> {
    grads: Vec<Option<Tensor<F>>>,
}

impl<F: Real> Grads<F> {
    pub fn get(&self, v: Var) -> Option<&Tensor<F>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<F>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

/// Singular values below this are treated as zero by spectral normalization.
pub const SPECTRAL_EPS: f64 = 1e-12;

/// Operation tape.
pub struct Graph<F: Real> {
    nodes: Vec<Node<F>>,
    params: Vec<Option<Var>>,
    normalized: Vec<Option<Var>>,
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: Vec::new(),
            normalized: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<F>, op: Op<F>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<F> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.needs(v)
    }

    /// A leaf holding `value`; gradients are tracked when `requires_grad`.
    pub fn input(&mut self, value: Tensor<F>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor<F>) -> Var {
        self.input(value, false)
    }

    /// Copies `v`'s value into a fresh constant, cutting gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    /// Leaf for a stored parameter. Each parameter gets one leaf per graph, so
    /// repeated uses share (and accumulate) a single gradient.
    pub fn param(&mut self, store: &ParamStore<F>, id: ParamId, trainable: bool) -> Var {
        if self.params.len() <= id.index() {
            self.params.resize(id.index() + 1, None);
        }
        if let Some(v) = self.params[id.index()] {
            return v;
        }
        let v = self.input(store.value(id).clone(), trainable);
        self.params[id.index()] = Some(v);
        v
    }

    /// The graph leaf of a parameter, if it was used.
    pub fn param_var(&self, id: ParamId) -> Option<Var> {
        self.params.get(id.index()).copied().flatten()
    }

    /// Spectrally normalized view of a parameter using its stored power
    /// vectors (which are not modified here).
    pub fn spectral_param(&mut self, store: &ParamStore<F>, id: ParamId, trainable: bool) -> Var {
        if self.normalized.len() <= id.index() {
            self.normalized.resize(id.index() + 1, None);
        }
        if let Some(v) = self.normalized[id.index()] {
            return v;
        }
        let w = self.param(store, id, trainable);
        let out = match store.power_state(id) {
            Some(state) => self.spectral_norm(w, state.u.clone(), state.v.clone()),
            None => w,
        };
        self.normalized[id.index()] = Some(out);
        out
    }

    /// `w / sigma` with `sigma = u^T W v` for fixed power vectors `u`, `v`;
    /// `w` is viewed as a matrix of `u.len()` rows.
    pub fn spectral_norm(&mut self, w: Var, u: Vec<F>, v: Vec<F>) -> Var {
        let wt = &self.nodes[w.0].value;
        let cols = v.len();
        assert_eq!(u.len() * cols, wt.numel(), "power vectors do not match weight");
        let sigma = crate::spectral::bilinear(wt.data(), &u, &v);
        let value = if sigma.abs().as_f64() < SPECTRAL_EPS {
            wt.clone()
        } else {
            wt.map(|x| x / sigma)
        };
        let needs = self.needs(w);
        self.push(value, Op::SpectralNorm { w, u, v, sigma }, needs)
    }

    /// 2D convolution, `x: (N, C, H, W)`, `w: (Co, C, k, k)`, `b: (Co)`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let (n, c, h, wd) = self.nodes[x.0].value.dims4()?;
        let (co, ci, k, k2) = self.nodes[w.0].value.dims4()?;
        if ci != c || k != k2 {
            return Err(Error::Config(alloc::format!(
                "conv weight {:?} does not fit input {:?}",
                self.nodes[w.0].value.shape(),
                self.nodes[x.0].value.shape()
            )));
        }
        if h + 2 * pad < k || wd + 2 * pad < k || stride == 0 {
            return Err(Error::Config(alloc::format!(
                "input {}x{} too small for kernel {} (pad {})",
                h,
                wd,
                k,
                pad
            )));
        }
        let geom = ConvGeom {
            channels: c,
            height: h,
            width: wd,
            kernel: k,
            stride,
            pad,
        };
        let out = {
            let bias = b.map(|b| self.nodes[b.0].value.data());
            kernels::conv2d_forward(
                self.nodes[x.0].value.data(),
                n,
                &geom,
                self.nodes[w.0].value.data(),
                co,
                bias,
            )
        };
        let value = Tensor::new(&[n, co, geom.out_height(), geom.out_width()], out)?;
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(value, Op::Conv2d { x, w, b, geom }, needs))
    }

    /// Transposed 2D convolution, `x: (N, Ci, Hi, Wi)`, `w: (Ci, Co, k, k)`.
    /// Output extent is `(Hi - 1) * stride - 2 * pad + k`.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let (n, ci, hi, wi) = self.nodes[x.0].value.dims4()?;
        let (wci, co, k, k2) = self.nodes[w.0].value.dims4()?;
        if wci != ci || k != k2 || stride == 0 {
            return Err(Error::Config(alloc::format!(
                "transposed conv weight {:?} does not fit input {:?}",
                self.nodes[w.0].value.shape(),
                self.nodes[x.0].value.shape()
            )));
        }
        let ho = ((hi - 1) * stride + k)
            .checked_sub(2 * pad)
            .ok_or_else(|| Error::Config("transposed conv padding too large".into()))?;
        let wo = ((wi - 1) * stride + k)
            .checked_sub(2 * pad)
            .ok_or_else(|| Error::Config("transposed conv padding too large".into()))?;
        let geom = ConvGeom {
            channels: co,
            height: ho,
            width: wo,
            kernel: k,
            stride,
            pad,
        };
        debug_assert_eq!(geom.out_height(), hi);
        let out = {
            let bias = b.map(|b| self.nodes[b.0].value.data());
            kernels::conv_transpose2d_forward(
                self.nodes[x.0].value.data(),
                n,
                ci,
                &geom,
                self.nodes[w.0].value.data(),
                bias,
            )
        };
        let value = Tensor::new(&[n, co, ho, wo], out)?;
        let needs = self.needs(x) || self.needs(w) || b.is_some_and(|b| self.needs(b));
        Ok(self.push(value, Op::ConvTranspose2d { x, w, b, geom }, needs))
    }

    /// Leaky rectifier; `slope = 0` gives a plain rectifier.
    pub fn leaky_relu(&mut self, x: Var, slope: F) -> Var {
        let value = self.nodes[x.0]
            .value
            .map(|v| if v > F::zero() { v } else { v * slope });
        let needs = self.needs(x);
        self.push(value, Op::LeakyRelu { x, slope }, needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.map(sigmoid);
        let needs = self.needs(x);
        self.push(value, Op::Sigmoid { x }, needs)
    }

    /// `clamp(x + 1/2, 0, 1)`; reaches both ends of the unit interval exactly.
    pub fn hard_sigmoid(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.map(hard_sigmoid);
        let needs = self.needs(x);
        self.push(value, Op::HardSigmoid { x }, needs)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.map(|v| v.tanh());
        let needs = self.needs(x);
        self.push(value, Op::Tanh { x }, needs)
    }

    /// Concatenates rank-4 tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let (n, _, h, w) = self.nodes[parts[0].0].value.dims4()?;
        let mut channels = 0;
        for p in parts {
            let (pn, pc, ph, pw) = self.nodes[p.0].value.dims4()?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(Error::Config(alloc::format!(
                    "cannot concatenate {:?} with {:?}",
                    self.nodes[parts[0].0].value.shape(),
                    self.nodes[p.0].value.shape()
                )));
            }
            channels += pc;
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * channels * plane);
        for i in 0..n {
            for p in parts {
                let t = &self.nodes[p.0].value;
                let per = t.shape()[1] * plane;
                data.extend_from_slice(&t.data()[i * per..(i + 1) * per]);
            }
        }
        let value = Tensor::new(&[n, channels, h, w], data)?;
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
            },
            needs,
        ))
    }

    /// Nearest-neighbour spatial upsampling by an integer factor.
    pub fn upsample_nearest(&mut self, x: Var, factor: usize) -> Result<Var> {
        if factor == 1 {
            return Ok(x);
        }
        let (n, c, h, w) = self.nodes[x.0].value.dims4()?;
        let src = self.nodes[x.0].value.data();
        let (ho, wo) = (h * factor, w * factor);
        let mut data = vec![F::zero(); n * c * ho * wo];
        for nc in 0..n * c {
            for y in 0..ho {
                for xx in 0..wo {
                    data[(nc * ho + y) * wo + xx] = src[(nc * h + y / factor) * w + xx / factor];
                }
            }
        }
        let value = Tensor::new(&[n, c, ho, wo], data)?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Upsample { x, factor }, needs))
    }

    /// Same data viewed with a different shape.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.nodes[x.0].value.clone().reshape(shape)?;
        let needs = self.needs(x);
        Ok(self.push(value, Op::Reshape { x }, needs))
    }

    /// Mean squared error over all elements, as a scalar.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(Error::Input(alloc::format!(
                "mse over mismatched shapes {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let n = F::of(ta.numel() as f64);
        let s: F = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::scalar(s / n), Op::Mse { a, b }, needs))
    }

    /// `-mean(ln(max(q, eps)))` with `q = p` or `q = 1 - p`.
    pub fn neg_log_mean(&mut self, p: Var, complement: bool, eps: F) -> Var {
        let t = &self.nodes[p.0].value;
        let n = F::of(t.numel() as f64);
        let s: F = t
            .data()
            .iter()
            .map(|&v| {
                let q = if complement { F::one() - v } else { v };
                -(q.max(eps)).ln()
            })
            .sum();
        let needs = self.needs(p);
        self.push(
            Tensor::scalar(s / n),
            Op::NegLog {
                p,
                complement,
                eps,
            },
            needs,
        )
    }

    /// Linear combination of equally shaped nodes.
    pub fn combine(&mut self, terms: &[(Var, F)]) -> Result<Var> {
        let shape = self.nodes[terms[0].0 .0].value.shape().to_vec();
        let mut value = Tensor::zeros(&shape);
        for &(v, c) in terms {
            let t = &self.nodes[v.0].value;
            if t.shape() != &shape[..] {
                return Err(Error::Config(alloc::format!(
                    "cannot combine {:?} with {:?}",
                    shape,
                    t.shape()
                )));
            }
            value.add_scaled(t, c);
        }
        let needs = terms.iter().any(|&(v, _)| self.needs(v));
        Ok(self.push(
            value,
            Op::Combine {
                terms: terms.to_vec(),
            },
            needs,
        ))
    }

    /// Sum of equally shaped nodes.
    pub fn sum(&mut self, vars: &[Var]) -> Result<Var> {
        let terms: Vec<(Var, F)> = vars.iter().map(|&v| (v, F::one())).collect();
        self.combine(&terms)
    }

    /// Gradients of the scalar `loss` with respect to every node that needs one.
    pub fn backward(&self, loss: Var) -> Result<Grads<F>> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::Config("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Tensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.nodes[loss.0].value.shape(), F::one()));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Grads { grads })
    }

    fn grad_slot<'a>(&self, grads: &'a mut [Option<Tensor<F>>], v: Var) -> &'a mut Tensor<F> {
        grads[v.0].get_or_insert_with(|| Tensor::zeros(self.nodes[v.0].value.shape()))
    }

    fn backprop_node(&self, idx: usize, g: &Tensor<F>, grads: &mut [Option<Tensor<F>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                let (n, co) = (node.value.shape()[0], node.value.shape()[1]);
                let xv = self.nodes[x.0].value.data();
                let wv = self.nodes[w.0].value.data();
                let mut dx = self.needs(*x).then(|| self.take_or_zero(grads, *x));
                let mut dw = self.needs(*w).then(|| self.take_or_zero(grads, *w));
                let mut db = b
                    .filter(|b| self.needs(*b))
                    .map(|b| self.take_or_zero(grads, b));
                kernels::conv2d_backward(
                    xv,
                    n,
                    geom,
                    wv,
                    co,
                    g.data(),
                    dx.as_mut().map(|t| t.data_mut()),
                    dw.as_mut().map(|t| t.data_mut()),
                    db.as_mut().map(|t| t.data_mut()),
                );
                self.restore(grads, *x, dx);
                self.restore(grads, *w, dw);
                if let Some(b) = b {
                    self.restore(grads, *b, db);
                }
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                let (n, ci) = {
                    let s = self.nodes[x.0].value.shape();
                    (s[0], s[1])
                };
                let xv = self.nodes[x.0].value.data();
                let wv = self.nodes[w.0].value.data();
                let mut dx = self.needs(*x).then(|| self.take_or_zero(grads, *x));
                let mut dw = self.needs(*w).then(|| self.take_or_zero(grads, *w));
                let mut db = b
                    .filter(|b| self.needs(*b))
                    .map(|b| self.take_or_zero(grads, b));
                kernels::conv_transpose2d_backward(
                    xv,
                    n,
                    ci,
                    geom,
                    wv,
                    g.data(),
                    dx.as_mut().map(|t| t.data_mut()),
                    dw.as_mut().map(|t| t.data_mut()),
                    db.as_mut().map(|t| t.data_mut()),
                );
                self.restore(grads, *x, dx);
                self.restore(grads, *w, dw);
                if let Some(b) = b {
                    self.restore(grads, *b, db);
                }
            }
            Op::LeakyRelu { x, slope } => {
                if self.needs(*x) {
                    let xv = self.nodes[x.0].value.data();
                    let slot = self.grad_slot(grads, *x);
                    for ((d, &gv), &v) in slot.data_mut().iter_mut().zip(g.data()).zip(xv) {
                        *d += if v > F::zero() { gv } else { gv * *slope };
                    }
                }
            }
            Op::Sigmoid { x } => {
                if self.needs(*x) {
                    let y = node.value.data();
                    let slot = self.grad_slot(grads, *x);
                    for ((d, &gv), &yv) in slot.data_mut().iter_mut().zip(g.data()).zip(y) {
                        *d += gv * yv * (F::one() - yv);
                    }
                }
            }
            Op::HardSigmoid { x } => {
                if self.needs(*x) {
                    let y = node.value.data();
                    let slot = self.grad_slot(grads, *x);
                    for ((d, &gv), &yv) in slot.data_mut().iter_mut().zip(g.data()).zip(y) {
                        if yv > F::zero() && yv < F::one() {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Tanh { x } => {
                if self.needs(*x) {
                    let y = node.value.data();
                    let slot = self.grad_slot(grads, *x);
                    for ((d, &gv), &yv) in slot.data_mut().iter_mut().zip(g.data()).zip(y) {
                        *d += gv * (F::one() - yv * yv);
                    }
                }
            }
            Op::Concat { parts } => {
                let s = node.value.shape();
                let (n, c, plane) = (s[0], s[1], s[2] * s[3]);
                let mut offset = 0;
                for p in parts {
                    let pc = self.nodes[p.0].value.shape()[1];
                    if self.needs(*p) {
                        let slot = self.grad_slot(grads, *p);
                        let dst = slot.data_mut();
                        for i in 0..n {
                            let src = &g.data()[(i * c + offset) * plane..(i * c + offset + pc) * plane];
                            for (d, &v) in dst[i * pc * plane..(i + 1) * pc * plane].iter_mut().zip(src) {
                                *d += v;
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::Upsample { x, factor } => {
                if self.needs(*x) {
                    let s = self.nodes[x.0].value.shape();
                    let (nc, h, w) = (s[0] * s[1], s[2], s[3]);
                    let (ho, wo) = (h * factor, w * factor);
                    let slot = self.grad_slot(grads, *x);
                    let dst = slot.data_mut();
                    for c in 0..nc {
                        for y in 0..ho {
                            for xx in 0..wo {
                                dst[(c * h + y / factor) * w + xx / factor] +=
                                    g.data()[(c * ho + y) * wo + xx];
                            }
                        }
                    }
                }
            }
            Op::Reshape { x } => {
                if self.needs(*x) {
                    let slot = self.grad_slot(grads, *x);
                    for (d, &v) in slot.data_mut().iter_mut().zip(g.data()) {
                        *d += v;
                    }
                }
            }
            Op::SpectralNorm { w, u, v, sigma } => {
                if self.needs(*w) {
                    let wv = self.nodes[w.0].value.data();
                    let slot = self.grad_slot(grads, *w);
                    let dst = slot.data_mut();
                    if sigma.abs().as_f64() < SPECTRAL_EPS {
                        for (d, &gv) in dst.iter_mut().zip(g.data()) {
                            *d += gv;
                        }
                    } else {
                        let inner: F = g.data().iter().zip(wv).map(|(&a, &b)| a * b).sum();
                        let coef = inner / (*sigma * *sigma);
                        let cols = v.len();
                        for (i, &ui) in u.iter().enumerate() {
                            for (j, &vj) in v.iter().enumerate() {
                                let k = i * cols + j;
                                dst[k] += g.data()[k] / *sigma - coef * ui * vj;
                            }
                        }
                    }
                }
            }
            Op::Mse { a, b } => {
                let gv = g.item();
                let av = self.nodes[a.0].value.data();
                let bv = self.nodes[b.0].value.data();
                let scale = F::of(2.0) * gv / F::of(av.len() as f64);
                if self.needs(*a) {
                    let slot = self.grad_slot(grads, *a);
                    for ((d, &x), &y) in slot.data_mut().iter_mut().zip(av).zip(bv) {
                        *d += scale * (x - y);
                    }
                }
                if self.needs(*b) {
                    let slot = self.grad_slot(grads, *b);
                    for ((d, &x), &y) in slot.data_mut().iter_mut().zip(av).zip(bv) {
                        *d -= scale * (x - y);
                    }
                }
            }
            Op::NegLog { p, complement, eps } => {
                if self.needs(*p) {
                    let gv = g.item();
                    let pv = self.nodes[p.0].value.data();
                    let n = F::of(pv.len() as f64);
                    let slot = self.grad_slot(grads, *p);
                    for (d, &v) in slot.data_mut().iter_mut().zip(pv) {
                        let q = if *complement { F::one() - v } else { v };
                        if q > *eps {
                            let dq = -gv / (q * n);
                            *d += if *complement { -dq } else { dq };
                        }
                    }
                }
            }
            Op::Combine { terms } => {
                for &(v, c) in terms {
                    if self.needs(v) {
                        self.grad_slot(grads, v).add_scaled(g, c);
                    }
                }
            }
        }
    }

    fn take_or_zero(&self, grads: &mut [Option<Tensor<F>>], v: Var) -> Tensor<F> {
        grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(self.nodes[v.0].value.shape()))
    }

    fn restore(&self, grads: &mut [Option<Tensor<F>>], v: Var, t: Option<Tensor<F>>) {
        if let Some(t) = t {
            grads[v.0] = Some(t);
        }
    }
}

#[inline]
pub fn hard_sigmoid<F: Real>(x: F) -> F {
    let y = x + F::of(0.5);
    if y <= F::zero() {
        F::zero()
    } else if y >= F::one() {
        F::one()
    } else {
        y
    }
}

/// Logistic function, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}
