use super::*;
use crate::data::{SynthConfig, SyntheticClips, VideoClip};
use crate::losses::ConvPyramid;
use crate::model::ModelConfig;
use alloc::vec;

/// About 450 parameters on an 8x8 canvas.
fn tiny_config() -> ModelConfig {
    ModelConfig {
        height: 8,
        width: 8,
        latent_channels: 2,
        motion_channels: 2,
        depth: 1,
        encoder_width: 2,
        predictor_blocks: 1,
        predictor_layers: 1,
        predictor_growth: 2,
        predictor_width: 2,
        disc_depth: 1,
        disc_width: 2,
        ..ModelConfig::default()
    }
}

fn tiny_source(clips: usize, frames: usize) -> SyntheticClips {
    SyntheticClips::new(
        SynthConfig {
            height: 8,
            width: 8,
            glyph_size: 5,
            frames,
            step_range: (0.5, 1.5),
            ..SynthConfig::default()
        },
        clips,
    )
    .unwrap()
}

fn tiny_batch(steps: usize, batch: usize) -> TrainingBatch {
    let src = tiny_source(batch, steps + 1);
    let clips: Vec<VideoClip> = (0..batch).map(|i| src.clip(i).unwrap()).collect();
    TrainingBatch::from_clips(&clips).unwrap()
}

fn train_config(steps: usize, batch: usize, mode: TrainingMode) -> TrainConfig {
    TrainConfig {
        batch_size: batch,
        clip_len: steps,
        mode,
        ..TrainConfig::default()
    }
}

/// Fresh parameters with random biases, so that no pre-activation sits
/// exactly on a rectifier kink over the all-black background.
fn fd_model(seed: u64) -> Model<f64> {
    use rand::{Rng, SeedableRng};
    let mut m = Model::<f64>::new(tiny_config(), seed).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = m.params().ids().filter(|&id| m.params().name(id).ends_with(".bias")).collect();
    for id in ids {
        for v in m.params_mut().value_mut(id).data_mut() {
            *v = rng.gen_range(-0.3..0.3);
        }
    }
    m
}

fn phi() -> ConvPyramid<f64> {
    ConvPyramid::random(1, &[2], 5).unwrap()
}

/// Generator objective where the state inputs of steps `t >= 1` are the
/// given constants.
fn loss_with_fixed_states(
    model: &Model<f64>,
    batch: &TrainingBatch,
    states: &[Tensor<f64>],
) -> (Graph<f64>, GeneratorTerms) {
    let mut g = Graph::new();
    let real: Vec<Var> = batch.frames.iter().map(|f| g.constant(f.cast())).collect();
    let full = g.constant(batch.full.cast());
    let h0 = model.e1(&mut g, real[0], true).unwrap();
    let mut pass = GeneratorPass {
        real,
        h0,
        state_inputs: vec![],
        motion: vec![],
        states: vec![],
        frames: vec![],
    };
    for t in 0..batch.steps() {
        let instant = g.constant(batch.instant[t].cast());
        let x = model.e2(&mut g, full, instant, true).unwrap();
        let input = if t == 0 { h0 } else { g.constant(states[t - 1].clone()) };
        let h = model.predict(&mut g, h0, input, x, true).unwrap();
        let f = model.decode(&mut g, h, true).unwrap();
        pass.state_inputs.push(input);
        pass.motion.push(x);
        pass.states.push(h);
        pass.frames.push(f);
    }
    let terms = generator_terms(&mut g, model, &phi(), &pass, &LossWeights::default()).unwrap();
    (g, terms)
}

fn predicted_states(model: &Model<f64>, batch: &TrainingBatch) -> Vec<Tensor<f64>> {
    let mut g = Graph::new();
    let pass = generator_pass(&mut g, model, batch, TrainingMode::SingleStep).unwrap();
    pass.states.iter().map(|&h| g.value(h).clone()).collect()
}

fn assert_gradients_match(analytic: &[f64], numeric: &[f64]) {
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric) {
        let scale = a.abs().max(n.abs());
        if scale > 1e-6 {
            worst = worst.max((a - n).abs() / scale);
        } else {
            assert!((a - n).abs() < 1e-10, "{a} vs {n}");
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn tiny_config_is_small() {
    assert!(Model::<f64>::new(tiny_config(), 0).unwrap().params().numel() <= 1000);
}

#[test]
fn constant_state_gradients_match_finite_differences() {
    let model = fd_model(1);
    let batch = tiny_batch(3, 2);
    let states = predicted_states(&model, &batch);

    let mut g = Graph::new();
    let pass = generator_pass(&mut g, &model, &batch, TrainingMode::SingleStep).unwrap();
    let terms = generator_terms(&mut g, &model, &phi(), &pass, &LossWeights::default()).unwrap();
    let grads = g.backward(terms.total).unwrap();

    let h = 1e-5;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for id in model.params().ids_in(Group::Generator) {
        let ga = grads.get(g.param_var(id).unwrap()).cloned().unwrap_or_else(|| Tensor::zeros(model.params().value(id).shape()));
        for j in 0..model.params().value(id).numel() {
            let eval = |delta: f64| {
                let mut m = model.clone();
                m.params_mut().value_mut(id).data_mut()[j] += delta;
                let (g, t) = loss_with_fixed_states(&m, &batch, &states);
                g.value(t.total).item()
            };
            analytic.push(ga.data()[j]);
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
    }
    assert_gradients_match(&analytic, &numeric);
}

#[test]
fn discriminator_gradients_match_finite_differences() {
    let model = fd_model(2);
    let batch = tiny_batch(2, 2);
    let mut g = Graph::new();
    let pass = generator_pass(&mut g, &model, &batch, TrainingMode::SingleStep).unwrap();
    let real: Vec<Tensor<f64>> = pass.real.iter().map(|&v| g.value(v).clone()).collect();
    let fake: Vec<Tensor<f64>> = pass.frames.iter().map(|&v| g.value(v).clone()).collect();
    let motion: Vec<Tensor<f64>> = pass.motion.iter().map(|&v| g.value(v).clone()).collect();
    let w = LossWeights::default();
    let loss = |m: &Model<f64>| -> (Graph<f64>, DiscriminatorTerms) {
        let mut dg = Graph::new();
        let t = discriminator_terms(&mut dg, m, &real, &fake, &motion, &w).unwrap();
        (dg, t)
    };
    let (dg, t) = loss(&model);
    let grads = dg.backward(t.total).unwrap();
    let h = 1e-5;
    let (mut analytic, mut numeric) = (Vec::new(), Vec::new());
    for id in model.params().ids_in(Group::Discriminator) {
        let ga = grads.get(dg.param_var(id).unwrap()).unwrap().clone();
        for j in 0..ga.numel() {
            let eval = |delta: f64| {
                let mut m = model.clone();
                m.params_mut().value_mut(id).data_mut()[j] += delta;
                let (g, t) = loss(&m);
                g.value(t.total).item()
            };
            analytic.push(ga.data()[j]);
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
    }
    assert_gradients_match(&analytic, &numeric);
}

#[test]
fn detached_state_carries_no_gradient_to_earlier_steps() {
    let model = Model::<f64>::new(tiny_config(), 3).unwrap();
    let batch = tiny_batch(3, 2);
    let states = predicted_states(&model, &batch);
    let mut g = Graph::new();
    let pass = generator_pass(&mut g, &model, &batch, TrainingMode::SingleStep).unwrap();
    let terms = generator_terms(&mut g, &model, &phi(), &pass, &LossWeights::default()).unwrap();
    let grads = g.backward(terms.total).unwrap();
    let (og, ot) = loss_with_fixed_states(&model, &batch, &states);
    let ograds = og.backward(ot.total).unwrap();
    for id in model.params().ids_in(Group::Generator) {
        let a = grads.get(g.param_var(id).unwrap()).unwrap();
        let b = ograds.get(og.param_var(id).unwrap()).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
    for &s in &pass.state_inputs[1..] {
        assert!(!g.requires_grad(s));
    }

    // through-time differentiation does see the earlier steps
    let mut fg = Graph::new();
    let fpass = generator_pass(&mut fg, &model, &batch, TrainingMode::FullBptt).unwrap();
    let fterms = generator_terms(&mut fg, &model, &phi(), &fpass, &LossWeights::default()).unwrap();
    let fgrads = fg.backward(fterms.total).unwrap();
    let id = model.params().find("p.out.weight").unwrap();
    assert_ne!(
        fgrads.get(fg.param_var(id).unwrap()).unwrap(),
        grads.get(g.param_var(id).unwrap()).unwrap()
    );
}

#[test]
fn one_step_clips_train_identically_in_every_mode() {
    let batch = tiny_batch(1, 2);
    let run = |mode| {
        let model = Model::<f32>::new(tiny_config(), 4).unwrap();
        let mut tr = Trainer::new(model, train_config(1, 2, mode)).unwrap();
        let r = tr.train_step(&batch).unwrap();
        (tr.into_model().into_params(), r)
    };
    let (single, rs) = run(TrainingMode::SingleStep);
    let (bptt, rb) = run(TrainingMode::FullBptt);
    let (teacher, rt) = run(TrainingMode::TeacherForcing);
    assert_eq!(single, bptt);
    assert_eq!(single, teacher);
    assert_eq!(rs, rb);
    assert_eq!(rs, rt);
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let batch = tiny_batch(3, 2);
    for mode in [TrainingMode::SingleStep, TrainingMode::TeacherForcing] {
        let model = Model::<f32>::new(tiny_config(), 5).unwrap();
        let before = model.params().clone();
        let mut cfg = train_config(3, 2, mode);
        cfg.adam.lr = 0.0;
        let mut tr = Trainer::new(model, cfg).unwrap();
        tr.train_step(&batch).unwrap();
        for id in before.ids() {
            assert_eq!(tr.model().params().value(id), before.value(id));
        }
    }
}

#[test]
fn each_update_touches_only_its_own_networks() {
    let batch = tiny_batch(2, 2);
    let model = Model::<f32>::new(tiny_config(), 6).unwrap();
    let mut tr = Trainer::new(model, train_config(2, 2, TrainingMode::SingleStep)).unwrap();
    let gen = tr.model().params().ids_in(Group::Generator);
    let disc = tr.model().params().ids_in(Group::Discriminator);
    let snapshot = |tr: &Trainer, ids: &[crate::params::ParamId]| -> Vec<Tensor<f32>> {
        ids.iter().map(|&id| tr.model().params().value(id).clone()).collect()
    };

    let mut g = Graph::new();
    let pass = generator_pass(&mut g, tr.model(), &batch, TrainingMode::SingleStep).unwrap();
    let (g0, d0) = (snapshot(&tr, &gen), snapshot(&tr, &disc));
    tr.discriminator_update(&g, &pass).unwrap();
    assert_eq!(snapshot(&tr, &gen), g0);
    assert_ne!(snapshot(&tr, &disc), d0);

    let d1 = snapshot(&tr, &disc);
    tr.generator_update(g, &pass).unwrap();
    assert_eq!(snapshot(&tr, &disc), d1);
    assert_ne!(snapshot(&tr, &gen), g0);
}

#[test]
fn chance_level_discriminators_give_two_ln_two() {
    let batch = tiny_batch(3, 2);
    let mut model = Model::<f64>::new(tiny_config(), 7).unwrap();
    for id in model.params().ids_in(Group::Discriminator) {
        model.params_mut().value_mut(id).data_mut().fill(0.0);
    }
    let mut tr = Trainer::new(model, train_config(3, 2, TrainingMode::SingleStep)).unwrap();
    let r = tr.train_step(&batch).unwrap();
    let two_ln2 = 2.0 * core::f64::consts::LN_2;
    assert!((r.gan1_d - two_ln2).abs() < 1e-9);
    assert!((r.gan2_d - two_ln2).abs() < 1e-9);
    assert!(r.rec1 >= 0.0 && r.rec2 >= 0.0 && r.perceptual >= 0.0);
    let (tg, td) = losses::total_objective(&r, &LossWeights::default()).unwrap();
    assert_eq!((r.total_g, r.total_d), (tg, td));
}

#[test]
fn neutral_autoencoder_gives_zero_second_reconstruction_loss() {
    let batch = tiny_batch(2, 2);
    let mut model = Model::<f64>::new(tiny_config(), 8).unwrap();
    model.params_mut().zero_all();
    let mut g = Graph::new();
    let pass = generator_pass(&mut g, &model, &batch, TrainingMode::SingleStep).unwrap();
    let terms = generator_terms(&mut g, &model, &phi(), &pass, &LossWeights::default()).unwrap();
    assert_eq!(g.value(terms.rec2).item(), 0.0);
}

#[test]
fn non_finite_losses_fault_without_changing_state() {
    let batch = tiny_batch(2, 2);
    let mut model = Model::<f32>::new(tiny_config(), 9).unwrap();
    let id = model.params().find("g.0.bias").unwrap();
    model.params_mut().value_mut(id).data_mut()[0] = f32::NAN;
    let mut tr = Trainer::new(model, train_config(2, 2, TrainingMode::SingleStep)).unwrap();
    let bits = |tr: &Trainer| -> Vec<u32> {
        let p = tr.model().params();
        p.ids().flat_map(|id| p.value(id).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect()
    };
    let before = bits(&tr);
    let err = tr.train_step(&batch).unwrap_err();
    assert!(matches!(err, Error::TrainingFault(_)), "{err:?}");
    assert_eq!(bits(&tr), before);
    assert_eq!(tr.step(), 0);
}

#[test]
fn batch_shape_must_match_configuration() {
    let model = Model::<f32>::new(tiny_config(), 0).unwrap();
    let mut tr = Trainer::new(model, train_config(3, 2, TrainingMode::SingleStep)).unwrap();
    assert!(matches!(tr.train_step(&tiny_batch(2, 2)), Err(Error::Input(_))));
}

#[test]
fn resumed_training_matches_uninterrupted_training() {
    let src = tiny_source(6, 4);
    let cfg = train_config(3, 2, TrainingMode::SingleStep);
    let mut straight = Trainer::new(Model::<f32>::new(tiny_config(), 10).unwrap(), cfg.clone()).unwrap();
    let mut reports = Vec::new();
    straight.fit(&src, 5, |_, r| reports.push(*r)).unwrap();

    let mut first = Trainer::new(Model::<f32>::new(tiny_config(), 10).unwrap(), cfg.clone()).unwrap();
    first.fit(&src, 2, |_, _| {}).unwrap();
    let model = Model::from_params(tiny_config(), first.model().params().clone()).unwrap();
    let mut resumed = Trainer::from_parts(
        model,
        cfg,
        first.generator_optimizer().clone(),
        first.discriminator_optimizer().clone(),
    )
    .unwrap();
    let mut later = Vec::new();
    resumed.fit(&src, 3, |_, r| later.push(*r)).unwrap();
    assert_eq!(resumed.step(), 5);
    assert_eq!(resumed.model().params(), straight.model().params());
    assert_eq!(later[..], reports[2..]);
}

#[test]
fn optimizer_state_must_fit_the_model() {
    let a = Model::<f32>::new(tiny_config(), 0).unwrap();
    let tr = Trainer::new(a.clone(), TrainConfig::default()).unwrap();
    let opt_g = tr.discriminator_optimizer().clone();
    let opt_d = tr.discriminator_optimizer().clone();
    assert!(matches!(
        Trainer::from_parts(a, TrainConfig::default(), opt_g, opt_d),
        Err(Error::Format(_))
    ));
}

#[test]
fn mode_names_round_trip() {
    for m in [TrainingMode::SingleStep, TrainingMode::TeacherForcing, TrainingMode::FullBptt] {
        assert_eq!(TrainingMode::parse(m.as_str()), Some(m));
    }
    assert_eq!(TrainingMode::parse("bptt"), None);
}
