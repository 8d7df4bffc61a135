//! Reconstruction, adversarial and feature-space losses.
//!
//! Pixel and feature distances are per-frame mean squared errors summed over
//! time. Adversarial terms average `-ln` probabilities over batch and time,
//! with probabilities clamped at [`LOG_EPS`]. The generator side uses the
//! non-saturating form `-ln D(fake)`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::init::kaiming_uniform;
use crate::model::{Frame, Model, MotionCode};
use crate::real::Real;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Lower clamp for probabilities inside logarithms.
pub const LOG_EPS: f64 = 1e-7;

/// Weights of the generator objective:
/// `gan1 + lambda0 gan2 + lambda1 perceptual + lambda2 rec1 + lambda3 rec2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda0: 1.0,
            lambda1: 10.0,
            lambda2: 20.0,
            lambda3: 20.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda0, self.lambda1, self.lambda2, self.lambda3];
        if all.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config("loss weights must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Every loss term of one training step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub rec1: f64,
    pub rec2: f64,
    pub gan1_g: f64,
    pub gan1_d: f64,
    pub gan2_g: f64,
    pub gan2_d: f64,
    pub perceptual: f64,
    pub total_g: f64,
    pub total_d: f64,
}

impl LossReport {
    pub const FIELDS: [&'static str; 9] = [
        "rec1",
        "rec2",
        "gan1_g",
        "gan1_d",
        "gan2_g",
        "gan2_d",
        "perceptual",
        "total_g",
        "total_d",
    ];

    /// Values in [`LossReport::FIELDS`] order.
    pub fn values(&self) -> [f64; 9] {
        [
            self.rec1,
            self.rec2,
            self.gan1_g,
            self.gan1_d,
            self.gan2_g,
            self.gan2_d,
            self.perceptual,
            self.total_g,
            self.total_d,
        ]
    }

    pub fn first_non_finite(&self) -> Option<&'static str> {
        Self::FIELDS
            .iter()
            .zip(self.values())
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| *n)
    }
}

/// `(total_g, total_d)` from the individual terms.
pub fn total_objective(report: &LossReport, w: &LossWeights) -> Result<(f64, f64)> {
    let parts = [
        report.rec1,
        report.rec2,
        report.gan1_g,
        report.gan1_d,
        report.gan2_g,
        report.gan2_d,
        report.perceptual,
    ];
    if parts.iter().any(|v| !v.is_finite()) {
        return Err(Error::TrainingFault(alloc::format!(
            "non-finite loss component in {report:?}"
        )));
    }
    let g = report.gan1_g
        + w.lambda0 * report.gan2_g
        + w.lambda1 * report.perceptual
        + w.lambda2 * report.rec1
        + w.lambda3 * report.rec2;
    let d = report.gan1_d + w.lambda0 * report.gan2_d;
    Ok((g, d))
}

/// A fixed feature map applied to batched frames.
pub trait FeatureExtractor<F: Real>: Send + Sync {
    fn features(&self, g: &mut Graph<F>, frames: Var) -> Result<Var>;
}

/// Features equal to the pixels.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityFeatures;

impl<F: Real> FeatureExtractor<F> for IdentityFeatures {
    fn features(&self, _g: &mut Graph<F>, frames: Var) -> Result<Var> {
        Ok(frames)
    }
}

/// Frozen stride-2 3x3 convolutions with leaky rectifiers; the last stage's
/// output is the feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvPyramid<F: Real = f32> {
    stages: Vec<(Tensor<F>, Tensor<F>)>,
    slope: F,
}

impl<F: Real> ConvPyramid<F> {
    pub const DEFAULT_WIDTHS: [usize; 3] = [8, 16, 32];

    /// Random weights, identical for identical seeds.
    pub fn random(in_channels: usize, widths: &[usize], seed: u64) -> Result<Self> {
        if in_channels == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::Config("feature pyramid needs positive widths".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = in_channels;
        let stages = widths
            .iter()
            .map(|&w| {
                let weight = kaiming_uniform(&[w, c, 3, 3], c * 9, 0.2, &mut rng);
                c = w;
                (weight, Tensor::zeros(&[w]))
            })
            .collect();
        Ok(ConvPyramid {
            stages,
            slope: F::of(0.2),
        })
    }

    /// Externally supplied weights `(Co, Ci, 3, 3)` and biases `(Co)`.
    pub fn from_weights(stages: Vec<(Tensor<F>, Tensor<F>)>) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for (w, b) in &stages {
            let (co, ci, k, k2) = w.dims4()?;
            if k != 3 || k2 != 3 || b.shape() != [co] || prev.is_some_and(|p| p != ci) {
                return Err(Error::Format("inconsistent feature pyramid weights".into()));
            }
            prev = Some(co);
        }
        if stages.is_empty() {
            return Err(Error::Format("feature pyramid has no stages".into()));
        }
        Ok(ConvPyramid {
            stages,
            slope: F::of(0.2),
        })
    }

    pub fn stages(&self) -> &[(Tensor<F>, Tensor<F>)] {
        &self.stages
    }
}

impl<F: Real> FeatureExtractor<F> for ConvPyramid<F> {
    fn features(&self, g: &mut Graph<F>, frames: Var) -> Result<Var> {
        let mut x = frames;
        for (w, b) in &self.stages {
            let w = g.constant(w.clone());
            let b = g.constant(b.clone());
            let y = g.conv2d(x, w, Some(b), 2, 1)?;
            x = g.leaky_relu(y, self.slope);
        }
        Ok(x)
    }
}

/// Which feature extractor the perceptual term uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    Identity,
    RandomPyramid { seed: u64 },
}

impl FeatureKind {
    pub fn build<F: Real>(self, channels: usize) -> Result<Box<dyn FeatureExtractor<F>>> {
        Ok(match self {
            FeatureKind::Identity => Box::new(IdentityFeatures),
            FeatureKind::RandomPyramid { seed } => Box::new(ConvPyramid::<F>::random(
                channels,
                &ConvPyramid::<F>::DEFAULT_WIDTHS,
                seed,
            )?),
        })
    }
}

// Graph-level terms shared by training and the frame-level functions below.

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Input(alloc::format!(
            "frame lists differ in length ({a} vs {b})"
        )));
    }
    Ok(())
}

/// `sum_t mse(a_t, b_t)`; an empty list gives zero.
pub fn summed_mse<F: Real>(g: &mut Graph<F>, a: &[Var], b: &[Var]) -> Result<Var> {
    check_lengths(a.len(), b.len())?;
    if a.is_empty() {
        return Ok(g.constant(Tensor::scalar(F::zero())));
    }
    let terms = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| g.mse(x, y))
        .collect::<Result<Vec<_>>>()?;
    g.sum(&terms)
}

/// `sum_t mse(phi(a_t), phi(b_t))`.
pub fn perceptual_graph<F: Real>(
    g: &mut Graph<F>,
    phi: &dyn FeatureExtractor<F>,
    a: &[Var],
    b: &[Var],
) -> Result<Var> {
    check_lengths(a.len(), b.len())?;
    let fa = a.iter().map(|&x| phi.features(g, x)).collect::<Result<Vec<_>>>()?;
    let fb = b.iter().map(|&x| phi.features(g, x)).collect::<Result<Vec<_>>>()?;
    summed_mse(g, &fa, &fb)
}

/// Mean over `probs` of `-ln(max(p, eps))` (or of `1 - p` when `complement`).
pub fn mean_neg_log<F: Real>(g: &mut Graph<F>, probs: &[Var], complement: bool) -> Result<Var> {
    if probs.is_empty() {
        return Err(Error::Input("no discriminator outputs".into()));
    }
    let eps = F::of(LOG_EPS);
    let terms: Vec<(Var, F)> = probs
        .iter()
        .map(|&p| (g.neg_log_mean(p, complement, eps), F::one() / F::of(probs.len() as f64)))
        .collect();
    g.combine(&terms)
}

/// `(d_loss, g_loss)` from per-step real and fake probabilities.
pub fn adversarial_graph<F: Real>(
    g: &mut Graph<F>,
    real: &[Var],
    fake: &[Var],
) -> Result<(Var, Var)> {
    let r = mean_neg_log(g, real, false)?;
    let f = mean_neg_log(g, fake, true)?;
    let d = g.sum(&[r, f])?;
    let gen = mean_neg_log(g, fake, false)?;
    Ok((d, gen))
}

/// The adversarial formulas on plain probabilities, each slice averaged.
pub fn adversarial_from_probs(real: &[f64], fake: &[f64]) -> (f64, f64) {
    let nl = |q: f64| -libm::log(q.max(LOG_EPS));
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&p| f(p)).sum::<f64>() / v.len() as f64;
    let d = mean(real, &nl) + mean(fake, &|p| nl(1.0 - p));
    (d, mean(fake, &nl))
}

// Frame-level evaluation.

fn frame_vars<F: Real>(g: &mut Graph<F>, frames: &[Frame<F>]) -> Result<Vec<Var>> {
    frames
        .iter()
        .map(|f| {
            let s = f.tensor().shape();
            Ok(g.constant(f.tensor().clone().reshape(&[1, s[0], s[1], s[2]])?))
        })
        .collect()
}

fn check_frames<F: Real>(pred: &[Frame<F>], gt: &[Frame<F>]) -> Result<()> {
    check_lengths(pred.len(), gt.len())?;
    if pred.iter().zip(gt).any(|(a, b)| a.tensor().shape() != b.tensor().shape()) {
        return Err(Error::Input("frame shapes differ".into()));
    }
    Ok(())
}

/// Summed per-frame pixel MSE.
pub fn loss_rec1<F: Real>(pred: &[Frame<F>], gt: &[Frame<F>]) -> Result<F> {
    check_frames(pred, gt)?;
    let mut g = Graph::new();
    let a = frame_vars(&mut g, pred)?;
    let b = frame_vars(&mut g, gt)?;
    let l = summed_mse(&mut g, &a, &b)?;
    Ok(g.value(l).item())
}

/// Summed per-frame MSE between predictions and `G(E1(gt))`.
pub fn loss_rec2<F: Real>(pred: &[Frame<F>], gt: &[Frame<F>], model: &Model<F>) -> Result<F> {
    check_frames(pred, gt)?;
    let mut g = Graph::new();
    let a = frame_vars(&mut g, pred)?;
    let b = frame_vars(&mut g, gt)?
        .into_iter()
        .map(|x| {
            let h = model.e1(&mut g, x, false)?;
            model.decode(&mut g, h, false)
        })
        .collect::<Result<Vec<_>>>()?;
    let l = summed_mse(&mut g, &a, &b)?;
    Ok(g.value(l).item())
}

/// Summed per-frame feature MSE.
pub fn loss_perceptual<F: Real>(
    pred: &[Frame<F>],
    gt: &[Frame<F>],
    phi: &dyn FeatureExtractor<F>,
) -> Result<F> {
    check_frames(pred, gt)?;
    let mut g = Graph::new();
    let a = frame_vars(&mut g, pred)?;
    let b = frame_vars(&mut g, gt)?;
    let l = perceptual_graph(&mut g, phi, &a, &b)?;
    Ok(g.value(l).item())
}

/// `(d_loss, g_loss)` of the frame discriminator; frame `t` is judged
/// with motion code `t`.
pub fn loss_gan_frame<F: Real>(
    real: &[Frame<F>],
    fake: &[Frame<F>],
    motion: &[MotionCode<F>],
    model: &Model<F>,
) -> Result<(F, F)> {
    check_frames(real, fake)?;
    check_lengths(real.len(), motion.len())?;
    let mut g = Graph::new();
    let r = frame_vars(&mut g, real)?;
    let f = frame_vars(&mut g, fake)?;
    let mut pr = Vec::with_capacity(r.len());
    let mut pf = Vec::with_capacity(r.len());
    for ((&ri, &fi), m) in r.iter().zip(&f).zip(motion) {
        let s = m.shape();
        let m = g.constant(m.tensor().clone().reshape(&[1, s[0], s[1], s[2]])?);
        pr.push(model.d1(&mut g, ri, m, false)?);
        pf.push(model.d1(&mut g, fi, m, false)?);
    }
    let (d, gen) = adversarial_graph(&mut g, &pr, &pf)?;
    Ok((g.value(d).item(), g.value(gen).item()))
}

/// `(d_loss, g_loss)` of the pair discriminator over the consecutive pairs
/// of two equally long clips.
pub fn loss_gan_pair<F: Real>(
    real: &[Frame<F>],
    fake: &[Frame<F>],
    model: &Model<F>,
) -> Result<(F, F)> {
    check_frames(real, fake)?;
    if real.len() < 2 {
        return Err(Error::Input("pairs need clips of at least two frames".into()));
    }
    let mut g = Graph::new();
    let r = frame_vars(&mut g, real)?;
    let f = frame_vars(&mut g, fake)?;
    let mut pr = Vec::with_capacity(r.len() - 1);
    let mut pf = Vec::with_capacity(r.len() - 1);
    for t in 0..r.len() - 1 {
        pr.push(model.d2(&mut g, r[t], r[t + 1], false)?);
        pf.push(model.d2(&mut g, f[t], f[t + 1], false)?);
    }
    let (d, gen) = adversarial_graph(&mut g, &pr, &pf)?;
    Ok((g.value(d).item(), g.value(gen).item()))
}

/// Number of consecutive pairs in a clip of `len` frames.
pub fn pair_count(len: usize) -> usize {
    len.saturating_sub(1)
}
