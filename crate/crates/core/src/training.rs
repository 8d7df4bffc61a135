//! Alternating adversarial training of the generator networks (`E1`, `E2`,
//! `P`, `G`) against the two discriminators.
//!
//! Each step first updates the discriminators on detached generated frames,
//! then updates the generator networks against the freshly updated
//! discriminators. How the predictor's previous state enters each step is
//! set by [`TrainingMode`].

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::data::{BatchIterator, ClipSource, TrainingBatch};
use crate::graph::{Graph, Grads, Var};
use crate::losses::{self, FeatureExtractor, FeatureKind, LossReport, LossWeights};
use crate::model::Model;
use crate::optim::{Adam, AdamConfig};
use crate::params::{Group, ParamStore};
use crate::real::Real;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Where the predictor's state input comes from at steps `t >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainingMode {
    /// The previous prediction, treated as a constant.
    SingleStep,
    /// The encoding `E1(I_t)` of the ground-truth frame.
    TeacherForcing,
    /// The previous prediction, differentiated through the whole clip.
    FullBptt,
}

impl TrainingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainingMode::SingleStep => "single_step",
            TrainingMode::TeacherForcing => "teacher_forcing",
            TrainingMode::FullBptt => "full_bptt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::SingleStep, Self::TeacherForcing, Self::FullBptt]
            .into_iter()
            .find(|m| m.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub batch_size: usize,
    /// Predicted frames per training clip; clips hold one more frame.
    pub clip_len: usize,
    pub mode: TrainingMode,
    /// Seeds the batch order.
    pub seed: u64,
    pub features: FeatureKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            batch_size: 8,
            clip_len: 16,
            mode: TrainingMode::SingleStep,
            seed: 0,
            features: FeatureKind::RandomPyramid { seed: 0 },
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch_size == 0 || self.clip_len == 0 {
            return Err(Error::Config("batch size and clip length must be positive".into()));
        }
        let a = &self.adam;
        if !(a.lr >= 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::Config("invalid optimizer settings".into()));
        }
        Ok(())
    }
}

/// Nodes of one generator unroll over a batch.
#[derive(Clone, Debug)]
pub struct GeneratorPass {
    /// Ground-truth frames `I_0 ..= I_T` (constants).
    pub real: Vec<Var>,
    /// `E1(I_0)`.
    pub h0: Var,
    /// State input of the predictor at every step.
    pub state_inputs: Vec<Var>,
    /// Motion codes `x_0 .. x_{T-1}`.
    pub motion: Vec<Var>,
    /// Predicted states `h_1 ..= h_T`.
    pub states: Vec<Var>,
    /// Generated frames `I_1 ..= I_T`.
    pub frames: Vec<Var>,
}

/// Builds the generator unroll for `batch`; generator parameters are
/// trainable leaves.
pub fn generator_pass<F: Real>(
    g: &mut Graph<F>,
    model: &Model<F>,
    batch: &TrainingBatch,
    mode: TrainingMode,
) -> Result<GeneratorPass> {
    let real: Vec<Var> = batch.frames.iter().map(|f| g.constant(f.cast())).collect();
    let full = g.constant(batch.full.cast());
    let h0 = model.e1(g, real[0], true)?;
    let steps = batch.steps();
    let mut pass = GeneratorPass {
        real,
        h0,
        state_inputs: Vec::with_capacity(steps),
        motion: Vec::with_capacity(steps),
        states: Vec::with_capacity(steps),
        frames: Vec::with_capacity(steps),
    };
    for t in 0..steps {
        let instant = g.constant(batch.instant[t].cast());
        let x = model.e2(g, full, instant, true)?;
        let input = match (t, mode) {
            (0, _) => h0,
            (_, TrainingMode::SingleStep) => g.detach(pass.states[t - 1]),
            (_, TrainingMode::FullBptt) => pass.states[t - 1],
            (_, TrainingMode::TeacherForcing) => model.e1(g, pass.real[t], true)?,
        };
        let h = model.predict(g, h0, input, x, true)?;
        let frame = model.decode(g, h, true)?;
        pass.state_inputs.push(input);
        pass.motion.push(x);
        pass.states.push(h);
        pass.frames.push(frame);
    }
    Ok(pass)
}

/// Scalar nodes of the generator objective.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorTerms {
    pub rec1: Var,
    pub rec2: Var,
    pub perceptual: Var,
    pub gan1: Var,
    pub gan2: Var,
    pub total: Var,
}

/// Generator losses on top of `pass`. Discriminator parameters enter as
/// constants; the pair sequence starts with `(I_0, generated I_1)`.
pub fn generator_terms<F: Real>(
    g: &mut Graph<F>,
    model: &Model<F>,
    phi: &dyn FeatureExtractor<F>,
    pass: &GeneratorPass,
    weights: &LossWeights,
) -> Result<GeneratorTerms> {
    let targets = &pass.real[1..];
    let rec1 = losses::summed_mse(g, &pass.frames, targets)?;
    let recon = targets
        .iter()
        .map(|&x| {
            let h = model.e1(g, x, true)?;
            model.decode(g, h, true)
        })
        .collect::<Result<Vec<_>>>()?;
    let rec2 = losses::summed_mse(g, &pass.frames, &recon)?;
    let perceptual = losses::perceptual_graph(g, phi, &pass.frames, targets)?;
    let p1 = pass
        .frames
        .iter()
        .zip(&pass.motion)
        .map(|(&f, &x)| model.d1(g, f, x, false))
        .collect::<Result<Vec<_>>>()?;
    let gan1 = losses::mean_neg_log(g, &p1, false)?;
    let mut prev = pass.real[0];
    let mut p2 = Vec::with_capacity(pass.frames.len());
    for &f in &pass.frames {
        p2.push(model.d2(g, prev, f, false)?);
        prev = f;
    }
    let gan2 = losses::mean_neg_log(g, &p2, false)?;
    let w = |v: f64| F::of(v);
    let total = g.combine(&[
        (gan1, F::one()),
        (gan2, w(weights.lambda0)),
        (perceptual, w(weights.lambda1)),
        (rec1, w(weights.lambda2)),
        (rec2, w(weights.lambda3)),
    ])?;
    Ok(GeneratorTerms {
        rec1,
        rec2,
        perceptual,
        gan1,
        gan2,
        total,
    })
}

/// Scalar nodes of the discriminator objective.
#[derive(Clone, Copy, Debug)]
pub struct DiscriminatorTerms {
    pub gan1: Var,
    pub gan2: Var,
    pub total: Var,
}

/// Discriminator losses on real frames `I_0 ..= I_T`, generated frames
/// `I_1 ..= I_T` and motion codes `x_0 .. x_{T-1}`, all given as values.
pub fn discriminator_terms<F: Real>(
    g: &mut Graph<F>,
    model: &Model<F>,
    real: &[Tensor<F>],
    fake: &[Tensor<F>],
    motion: &[Tensor<F>],
    weights: &LossWeights,
) -> Result<DiscriminatorTerms> {
    if real.len() != fake.len() + 1 || fake.len() != motion.len() || fake.is_empty() {
        return Err(Error::Input("inconsistent discriminator inputs".into()));
    }
    let real: Vec<Var> = real.iter().map(|t| g.constant(t.clone())).collect();
    let fake: Vec<Var> = fake.iter().map(|t| g.constant(t.clone())).collect();
    let motion: Vec<Var> = motion.iter().map(|t| g.constant(t.clone())).collect();
    let (mut pr1, mut pf1, mut pr2, mut pf2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut prev_fake = real[0];
    for t in 0..fake.len() {
        pr1.push(model.d1(g, real[t + 1], motion[t], true)?);
        pf1.push(model.d1(g, fake[t], motion[t], true)?);
        pr2.push(model.d2(g, real[t], real[t + 1], true)?);
        pf2.push(model.d2(g, prev_fake, fake[t], true)?);
        prev_fake = fake[t];
    }
    let (gan1, _) = losses::adversarial_graph(g, &pr1, &pf1)?;
    let (gan2, _) = losses::adversarial_graph(g, &pr2, &pf2)?;
    let total = g.combine(&[(gan1, F::one()), (gan2, F::of(weights.lambda0))])?;
    Ok(DiscriminatorTerms { gan1, gan2, total })
}

/// Gradients of the parameters optimized by `opt`, in its order.
fn collect_grads<F: Real>(g: &Graph<F>, grads: &mut Grads<F>, opt: &Adam<F>) -> Vec<Option<Tensor<F>>> {
    opt.ids()
        .iter()
        .map(|&id| g.param_var(id).and_then(|v| grads.take(v)))
        .collect()
}

fn check_grads<F: Real>(grads: &[Option<Tensor<F>>], store: &ParamStore<F>, opt: &Adam<F>) -> Result<()> {
    for (gr, &id) in grads.iter().zip(opt.ids()) {
        if gr.as_ref().is_some_and(|t| !t.all_finite()) {
            return Err(Error::TrainingFault(alloc::format!(
                "non-finite gradient for {}",
                store.name(id)
            )));
        }
    }
    Ok(())
}

/// A model with its optimizers and feature extractor.
pub struct Trainer<F: Real = f32> {
    model: Model<F>,
    config: TrainConfig,
    phi: Box<dyn FeatureExtractor<F>>,
    opt_g: Adam<F>,
    opt_d: Adam<F>,
}

impl<F: Real> Trainer<F> {
    pub fn new(model: Model<F>, config: TrainConfig) -> Result<Self> {
        let opt_g = Adam::new(config.adam, model.params(), model.params().ids_in(Group::Generator));
        let opt_d = Adam::new(
            config.adam,
            model.params(),
            model.params().ids_in(Group::Discriminator),
        );
        Self::from_parts(model, config, opt_g, opt_d)
    }

    /// Resumes from saved optimizer state.
    pub fn from_parts(model: Model<F>, config: TrainConfig, opt_g: Adam<F>, opt_d: Adam<F>) -> Result<Self> {
        config.validate()?;
        let fresh = |group| model.params().ids_in(group);
        if opt_g.ids() != fresh(Group::Generator) || opt_d.ids() != fresh(Group::Discriminator) {
            return Err(Error::Format("optimizer state does not match the model".into()));
        }
        for opt in [&opt_g, &opt_d] {
            let (m, v) = opt.moments();
            for ((&id, a), b) in opt.ids().iter().zip(m).zip(v) {
                let shape = model.params().value(id).shape();
                if a.shape() != shape || b.shape() != shape {
                    return Err(Error::Format("optimizer moments do not match the model".into()));
                }
            }
        }
        let phi = config.features.build(model.config().channels)?;
        Ok(Trainer {
            model,
            config,
            phi,
            opt_g,
            opt_d,
        })
    }

    /// Replaces the perceptual feature extractor.
    pub fn with_features(mut self, phi: Box<dyn FeatureExtractor<F>>) -> Self {
        self.phi = phi;
        self
    }

    pub fn model(&self) -> &Model<F> {
        &self.model
    }

    pub fn into_model(self) -> Model<F> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn generator_optimizer(&self) -> &Adam<F> {
        &self.opt_g
    }

    pub fn discriminator_optimizer(&self) -> &Adam<F> {
        &self.opt_d
    }

    /// Completed training steps.
    pub fn step(&self) -> u64 {
        self.opt_g.step
    }

    pub fn features(&self) -> &dyn FeatureExtractor<F> {
        &*self.phi
    }

    /// One discriminator update followed by one generator update.
    ///
    /// On a training fault no parameter or optimizer state changes.
    pub fn train_step(&mut self, batch: &TrainingBatch) -> Result<LossReport> {
        if batch.steps() != self.config.clip_len || batch.batch_size() != self.config.batch_size {
            return Err(Error::Input(alloc::format!(
                "batch of {} clips with {} steps does not match the configuration ({} x {})",
                batch.batch_size(),
                batch.steps(),
                self.config.batch_size,
                self.config.clip_len
            )));
        }
        let saved_params = self.model.params().clone();
        let saved_d = self.opt_d.clone();
        let saved_g = self.opt_g.clone();
        let result = self.try_step(batch);
        if result.is_err() {
            *self.model.params_mut() = saved_params;
            self.opt_d = saved_d;
            self.opt_g = saved_g;
        }
        result
    }

    fn try_step(&mut self, batch: &TrainingBatch) -> Result<LossReport> {
        self.model.params_mut().power_iterate(Group::Discriminator);
        let mut g = Graph::new();
        let pass = generator_pass(&mut g, &self.model, batch, self.config.mode)?;
        let (gan1_d, gan2_d) = self.discriminator_update(&g, &pass)?;
        let mut report = self.generator_update(g, &pass)?;
        report.gan1_d = gan1_d;
        report.gan2_d = gan2_d;
        let (tg, td) = losses::total_objective(&report, &self.config.weights)?;
        report.total_g = tg;
        report.total_d = td;
        Ok(report)
    }

    /// Updates the discriminators on the detached frames of `pass`; returns
    /// the two adversarial losses before the update.
    pub(crate) fn discriminator_update(&mut self, g: &Graph<F>, pass: &GeneratorPass) -> Result<(f64, f64)> {
        let mut dg = Graph::new();
        let real: Vec<Tensor<F>> = pass.real.iter().map(|&v| g.value(v).clone()).collect();
        let fake: Vec<Tensor<F>> = pass.frames.iter().map(|&v| g.value(v).clone()).collect();
        let motion: Vec<Tensor<F>> = pass.motion.iter().map(|&v| g.value(v).clone()).collect();
        let d = discriminator_terms(&mut dg, &self.model, &real, &fake, &motion, &self.config.weights)?;
        let (l1, l2) = (dg.value(d.gan1).item().as_f64(), dg.value(d.gan2).item().as_f64());
        if !(l1.is_finite() && l2.is_finite()) {
            return Err(Error::TrainingFault(alloc::format!(
                "discriminator losses {l1} / {l2} at step {}",
                self.step()
            )));
        }
        let mut grads = dg.backward(d.total)?;
        let grads = collect_grads(&dg, &mut grads, &self.opt_d);
        check_grads(&grads, self.model.params(), &self.opt_d)?;
        self.opt_d.update(self.model.params_mut(), &grads);
        Ok((l1, l2))
    }

    /// Adds the generator objective to the unroll in `g` and updates the
    /// generator networks. Adversarial discriminator losses are left zero.
    pub(crate) fn generator_update(&mut self, mut g: Graph<F>, pass: &GeneratorPass) -> Result<LossReport> {
        let weights = self.config.weights;
        let terms = generator_terms(&mut g, &self.model, &*self.phi, pass, &weights)?;
        let v = |x: Var| g.value(x).item().as_f64();
        let report = LossReport {
            rec1: v(terms.rec1),
            rec2: v(terms.rec2),
            gan1_g: v(terms.gan1),
            gan2_g: v(terms.gan2),
            perceptual: v(terms.perceptual),
            ..LossReport::default()
        };
        if let Some(name) = report.first_non_finite() {
            return Err(Error::TrainingFault(alloc::format!(
                "{name} is not finite at step {}: {report:?}",
                self.step()
            )));
        }
        let mut grads = g.backward(terms.total)?;
        let grads = collect_grads(&g, &mut grads, &self.opt_g);
        check_grads(&grads, self.model.params(), &self.opt_g)?;
        self.opt_g.update(self.model.params_mut(), &grads);
        Ok(report)
    }

    /// Trains for `steps` more steps on seeded batches of `source`, calling
    /// `on_step` after every step with the completed step count.
    ///
    /// Batch `k` depends only on the seed and `k`, so a trainer restored from
    /// a checkpoint continues exactly where the original run would be.
    pub fn fit<S: ClipSource + ?Sized>(
        &mut self,
        source: &S,
        steps: u64,
        mut on_step: impl FnMut(u64, &LossReport),
    ) -> Result<()> {
        let mut batches = BatchIterator::new(
            source,
            self.config.batch_size,
            self.config.clip_len + 1,
            self.config.seed,
        )?;
        for _ in 0..steps {
            let batch = batches.batch_at(self.step())?;
            let report = self.train_step(&batch)?;
            on_step(self.step(), &report);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
