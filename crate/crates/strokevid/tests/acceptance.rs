//! Acceptance criteria A1 to A8. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.
//!
//! A1 to A3 read the trained checkpoints under `artifacts/` at the workspace
//! root (override with `STROKEVID_ARTIFACTS`); the other criteria are self
//! contained.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strokevid::checkpoint;
use strokevid::cli::{CHECKPOINT_FILE, CONFIG_FILE};
use strokevid::config::RunConfig;
use strokevid::dataset::{write_dataset, DatasetReader};
use strokevid::evaluate::{evaluate_ground_truth, evaluate_model, predict};
use strokevid_core::data::{ClipSource, SynthConfig, SyntheticClips, TrainingBatch, VideoClip};
use strokevid_core::losses::{self, ConvPyramid, LossReport, LossWeights};
use strokevid_core::metrics::{psnr, ssim, stroke_adherence};
use strokevid_core::optim::AdamConfig;
use strokevid_core::training::{
    discriminator_terms, generator_pass, generator_terms, GeneratorPass, TrainConfig, Trainer, TrainingMode,
};
use strokevid_core::{spectral_normalize, Frame, Graph, Group, Model, ModelConfig, PowerState, Tensor, Var};

type Outcome = Result<String, String>;

const HELD_OUT_SEED: u64 = 7919;
const HELD_OUT_CLIPS: usize = 100;
const TRAIN_STEPS: usize = 16;
const LONG_STEPS: usize = 24;
const MAX_BUDGET: u64 = 20_000;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn artifacts_dir() -> PathBuf {
    std::env::var_os("STROKEVID_ARTIFACTS")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../artifacts"))
}

/// A trained arm: its run configuration and final trainer state.
struct Arm {
    run: RunConfig,
    trainer: Trainer,
}

fn load_arm(mode: &str) -> Result<Arm, String> {
    let dir = artifacts_dir().join(mode);
    let run = RunConfig::load(&dir.join(CONFIG_FILE)).map_err(|e| format!("{}: {e}", dir.display()))?;
    let trainer = checkpoint::load(&dir.join(CHECKPOINT_FILE)).map_err(|e| format!("{}: {e}", dir.display()))?;
    if trainer.config().mode.as_str() != mode {
        return Err(format!("{} holds a {} run", dir.display(), trainer.config().mode.as_str()));
    }
    Ok(Arm { run, trainer })
}

fn check_budget(arm: &Arm) -> Result<(), String> {
    let m = arm.trainer.model().config();
    let t = arm.trainer.config();
    if (m.height, m.width) != (64, 64) || t.clip_len != TRAIN_STEPS || arm.trainer.step() > MAX_BUDGET {
        return Err(format!(
            "run is {}x{} with {}-frame clips after {} steps",
            m.height,
            m.width,
            t.clip_len,
            arm.trainer.step()
        ));
    }
    Ok(())
}

/// Held-out trajectories from the training distribution under another seed,
/// long enough for the extended rollout.
fn held_out() -> Vec<VideoClip> {
    let cfg = SynthConfig {
        frames: LONG_STEPS + 1,
        seed: HELD_OUT_SEED,
        ..SynthConfig::default()
    };
    let src = SyntheticClips::new(cfg, HELD_OUT_CLIPS).unwrap();
    (0..HELD_OUT_CLIPS).map(|i| src.clip(i).unwrap()).collect()
}

fn window(clips: &[VideoClip], frames: usize) -> Vec<VideoClip> {
    clips.iter().map(|c| c.window(0, frames).unwrap()).collect()
}

fn mean_intensity(frame: &Frame) -> f64 {
    frame.data().iter().map(|&v| v as f64).sum::<f64>() / frame.data().len() as f64
}

/// Mean over clips of each clip's mean adherence across `steps` (1-based,
/// inclusive range of generated frames).
fn adherence_over(pred: &[Vec<Frame>], clips: &[VideoClip], first: usize, last: usize) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    let mut missing = 0;
    for (frames, clip) in pred.iter().zip(clips) {
        let a = stroke_adherence(&frames[..last], &clip.keypoints().window(0, last + 1).unwrap())
            .unwrap()
            .slice(first - 1..last);
        missing += a.missing();
        if let Some(m) = a.mean() {
            sum += m;
            n += 1;
        }
    }
    (if n == 0 { f64::INFINITY } else { sum / n as f64 }, missing)
}

struct Rollouts {
    single: Arm,
    clips: Vec<VideoClip>,
    long: Vec<Vec<Frame>>,
    a1: f64,
}

fn single_step_rollouts() -> Result<Rollouts, String> {
    let single = load_arm("single_step")?;
    check_budget(&single)?;
    let clips = held_out();
    let long = predict(single.trainer.model(), &clips, LONG_STEPS, 10).map_err(|e| e.to_string())?;
    let report = evaluate_model(single.trainer.model(), &window(&clips, TRAIN_STEPS + 1), TRAIN_STEPS)
        .map_err(|e| e.to_string())?;
    let a1 = report.mean_adherence().unwrap_or(f64::INFINITY);
    if report.missing() > 0 {
        return Err(format!("{} generated frames are entirely black", report.missing()));
    }
    Ok(Rollouts { single, clips, long, a1 })
}

fn a1(r: &Rollouts) -> Outcome {
    let gt = evaluate_ground_truth(&window(&r.clips, TRAIN_STEPS + 1)).map_err(|e| e.to_string())?;
    let baseline = gt.mean_adherence().unwrap_or(f64::INFINITY);
    ensure(
        r.a1 <= 3.0 && baseline <= 0.51,
        format!(
            "adherence {:.3} px (<= 3.0) over {} held-out clips after {} steps; ground truth {:.3} px (<= 0.51)",
            r.a1,
            r.clips.len(),
            r.single.trainer.step(),
            baseline
        ),
    )
}

fn training_mean_intensity(run: &RunConfig) -> f64 {
    let cfg = SynthConfig {
        frames: run.train.clip_len + 1,
        ..SynthConfig::default()
    };
    let src = SyntheticClips::new(cfg, 200).unwrap();
    let (mut sum, mut n) = (0.0, 0);
    for i in 0..src.len() {
        for f in src.clip(i).unwrap().frames() {
            sum += mean_intensity(f);
            n += 1;
        }
    }
    sum / n as f64
}

fn a2(r: &Rollouts) -> Outcome {
    let finite = r.long.iter().flatten().all(|f| f.data().iter().all(|v| v.is_finite()));
    let reference = training_mean_intensity(&r.single.run);
    let mut worst = 0.0f64;
    for t in 0..LONG_STEPS {
        let m = r.long.iter().map(|c| mean_intensity(&c[t])).sum::<f64>() / r.long.len() as f64;
        worst = worst.max((m / reference - 1.0).abs());
    }
    let (late, missing) = adherence_over(&r.long, &r.clips, TRAIN_STEPS + 1, LONG_STEPS);
    ensure(
        finite && worst <= 0.2 && missing == 0 && late <= 2.0 * r.a1,
        format!(
            "finite {finite}; worst per-step mean intensity deviation {:.1}% (<= 20%) from {reference:.4}; \
             adherence over steps 17-24 {late:.3} px (<= {:.3}); black frames {missing}",
            100.0 * worst,
            2.0 * r.a1
        ),
    )
}

fn a3(r: &Rollouts) -> Outcome {
    let teacher = load_arm("teacher_forcing")?;
    let mut same = teacher.run.clone();
    same.train.mode = r.single.run.train.mode.clone();
    if same != r.single.run || teacher.trainer.step() != r.single.trainer.step() {
        return Err("arms differ in more than the training mode".into());
    }
    let report = evaluate_model(teacher.trainer.model(), &window(&r.clips, TRAIN_STEPS + 1), TRAIN_STEPS)
        .map_err(|e| e.to_string())?;
    let tf = report.mean_adherence().unwrap_or(f64::INFINITY);
    ensure(
        tf >= 2.0 * r.a1,
        format!("teacher forcing {tf:.3} px vs single step {:.3} px (ratio {:.2}, >= 2)", r.a1, tf / r.a1),
    )
}

/// About 450 parameters on an 8x8 canvas.
fn toy_config() -> ModelConfig {
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

fn toy_batch(steps: usize, batch: usize, seed: u64) -> TrainingBatch {
    let src = SyntheticClips::new(
        SynthConfig {
            height: 8,
            width: 8,
            glyph_size: 5,
            frames: steps + 1,
            step_range: (0.5, 1.5),
            seed,
            ..SynthConfig::default()
        },
        batch,
    )
    .unwrap();
    let clips: Vec<VideoClip> = (0..batch).map(|i| src.clip(i).unwrap()).collect();
    TrainingBatch::from_clips(&clips).unwrap()
}

/// Random biases keep pre-activations off the rectifier kinks.
fn toy_model_f64(seed: u64) -> Model<f64> {
    let mut m = Model::<f64>::new(toy_config(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = m.params().ids().filter(|&id| m.params().name(id).ends_with(".bias")).collect();
    for id in ids {
        for v in m.params_mut().value_mut(id).data_mut() {
            *v = rng.gen_range(-0.3..0.3);
        }
    }
    m
}

fn toy_phi() -> ConvPyramid<f64> {
    ConvPyramid::random(1, &[2], 5).unwrap()
}

/// Generator objective with the state inputs of steps after the first
/// replaced by constants (or unrolled when `states` is `None`).
fn unrolled_objective(model: &Model<f64>, batch: &TrainingBatch, states: Option<&[Tensor<f64>]>) -> f64 {
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
        let input = match (t, states) {
            (0, _) => h0,
            (_, Some(s)) => g.constant(s[t - 1].clone()),
            (_, None) => pass.states[t - 1],
        };
        let h = model.predict(&mut g, h0, input, x, true).unwrap();
        let f = model.decode(&mut g, h, true).unwrap();
        pass.state_inputs.push(input);
        pass.motion.push(x);
        pass.states.push(h);
        pass.frames.push(f);
    }
    let terms = generator_terms(&mut g, model, &toy_phi(), &pass, &LossWeights::default()).unwrap();
    g.value(terms.total).item()
}

/// Worst relative error between analytic generator gradients under `mode`
/// and central differences of `objective`.
fn gradient_error(
    model: &Model<f64>,
    batch: &TrainingBatch,
    mode: TrainingMode,
    objective: &dyn Fn(&Model<f64>) -> f64,
) -> Result<f64, String> {
    let mut g = Graph::new();
    let pass = generator_pass(&mut g, model, batch, mode).unwrap();
    let terms = generator_terms(&mut g, model, &toy_phi(), &pass, &LossWeights::default()).unwrap();
    let grads = g.backward(terms.total).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for id in model.params().ids_in(Group::Generator) {
        let shape = model.params().value(id).shape().to_vec();
        let analytic = grads
            .get(g.param_var(id).unwrap())
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&shape));
        for j in 0..analytic.numel() {
            let eval = |d: f64| {
                let mut m = model.clone();
                m.params_mut().value_mut(id).data_mut()[j] += d;
                objective(&m)
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic.data()[j];
            let scale = a.abs().max(numeric.abs());
            if scale > 1e-6 {
                worst = worst.max((a - numeric).abs() / scale);
            } else if (a - numeric).abs() > 1e-10 {
                return Err(format!("{}[{j}]: {a} vs {numeric}", model.params().name(id)));
            }
        }
    }
    Ok(worst)
}

fn a4() -> Outcome {
    // one-step clips: the two truncation rules must give the same update
    let batch = toy_batch(1, 2, 11);
    let run = |mode| {
        let cfg = TrainConfig {
            batch_size: 2,
            clip_len: 1,
            mode,
            ..TrainConfig::default()
        };
        let mut tr = Trainer::new(Model::<f32>::new(toy_config(), 4).unwrap(), cfg).unwrap();
        let report = tr.train_step(&batch).unwrap();
        (
            tr.model().params().clone(),
            tr.generator_optimizer().moments().0.to_vec(),
            tr.discriminator_optimizer().moments().1.to_vec(),
            report,
        )
    };
    let (ps, gs, ds, rs) = run(TrainingMode::SingleStep);
    let (pb, gb, db, rb) = run(TrainingMode::FullBptt);
    let bitwise = ps == pb && gs == gb && ds == db && rs.values().map(f64::to_bits) == rb.values().map(f64::to_bits);

    // three-step clips
    let model = toy_model_f64(1);
    let batch = toy_batch(3, 2, 12);
    let states: Vec<Tensor<f64>> = {
        let mut g = Graph::new();
        let pass = generator_pass(&mut g, &model, &batch, TrainingMode::SingleStep).unwrap();
        pass.states.iter().map(|&h| g.value(h).clone()).collect()
    };
    let single = gradient_error(&model, &batch, TrainingMode::SingleStep, &|m| {
        unrolled_objective(m, &batch, Some(&states))
    })?;
    let bptt = gradient_error(&model, &batch, TrainingMode::FullBptt, &|m| unrolled_objective(m, &batch, None))?;
    ensure(
        bitwise && single < 1e-4 && bptt < 1e-4,
        format!(
            "T=1 updates bitwise equal: {bitwise}; T=3 worst relative error {single:.2e} with constant states, \
             {bptt:.2e} through time (< 1e-4)"
        ),
    )
}

fn a5() -> Outcome {
    let w = LossWeights::default();
    let adam = AdamConfig::default();
    let paper = (w.lambda0, w.lambda1, w.lambda2, w.lambda3) == (1.0, 10.0, 20.0, 20.0)
        && (adam.lr, adam.beta1, adam.beta2) == (2e-4, 0.5, 0.999);

    // graph total against a hand sum of the individual terms
    let model = toy_model_f64(3);
    let batch = toy_batch(3, 2, 13);
    let mut g = Graph::new();
    let pass = generator_pass(&mut g, &model, &batch, TrainingMode::SingleStep).unwrap();
    let t = generator_terms(&mut g, &model, &toy_phi(), &pass, &w).unwrap();
    let v = |x: Var| g.value(x).item();
    let hand = v(t.gan1) + 1.0 * v(t.gan2) + 10.0 * v(t.perceptual) + 20.0 * v(t.rec1) + 20.0 * v(t.rec2);
    let graph_exact = v(t.total) == hand;

    // dyadic terms sum exactly in any order
    let report = LossReport {
        rec1: 0.375,
        rec2: 0.0625,
        gan1_g: 1.5,
        gan1_d: 0.75,
        gan2_g: 2.25,
        gan2_d: 1.125,
        perceptual: 0.5,
        ..LossReport::default()
    };
    let (tg, td) = losses::total_objective(&report, &w).unwrap();
    let dyadic = tg == 1.5 + 2.25 + 5.0 + 7.5 + 1.25 && td == 0.75 + 1.125;

    // discriminators that output exactly one half
    let mut chance = Model::<f64>::new(toy_config(), 9).unwrap();
    for id in chance.params().ids_in(Group::Discriminator) {
        chance.params_mut().value_mut(id).data_mut().fill(0.0);
    }
    let mut g = Graph::new();
    let pass = generator_pass(&mut g, &chance, &batch, TrainingMode::SingleStep).unwrap();
    let real: Vec<Tensor<f64>> = pass.real.iter().map(|&x| g.value(x).clone()).collect();
    let fake: Vec<Tensor<f64>> = pass.frames.iter().map(|&x| g.value(x).clone()).collect();
    let motion: Vec<Tensor<f64>> = pass.motion.iter().map(|&x| g.value(x).clone()).collect();
    let mut dg = Graph::new();
    let d = discriminator_terms(&mut dg, &chance, &real, &fake, &motion, &w).unwrap();
    let two_ln2 = 2.0 * std::f64::consts::LN_2;
    let (e1, e2) = ((dg.value(d.gan1).item() - two_ln2).abs(), (dg.value(d.gan2).item() - two_ln2).abs());
    ensure(
        paper && graph_exact && dyadic && e1 <= 1e-9 && e2 <= 1e-9,
        format!(
            "weights (1, 10, 20, 20) and Adam (2e-4, 0.5, 0.999): {paper}; graph total equals hand sum: {graph_exact}; dyadic totals exact: {dyadic}; \
             chance-level d_loss errors {e1:.1e}, {e2:.1e} (<= 1e-9)"
        ),
    )
}

fn psnr_reference(a: &[f64], b: &[f64]) -> f64 {
    let se: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    if se == 0.0 {
        return 100.0;
    }
    (-10.0 * (se / a.len() as f64).log10()).min(100.0)
}

/// Direct 2-D windowed statistics at every position where the 11x11 window
/// fits, averaged over channels.
fn ssim_reference(a: &[f64], b: &[f64], ch: usize, h: usize, w: usize) -> f64 {
    let k = 11usize;
    let sigma = 1.5f64;
    let mut win = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            win[i * k + j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = win.iter().sum();
    win.iter_mut().for_each(|x| *x /= total);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    for c in 0..ch {
        let at = |p: &[f64], r: usize, col: usize| p[c * h * w + r * w + col];
        let mut s = 0.0;
        let mut n = 0;
        for r in 0..=h - k {
            for col in 0..=w - k {
                let (mut ma, mut mb) = (0.0, 0.0);
                for i in 0..k {
                    for j in 0..k {
                        ma += win[i * k + j] * at(a, r + i, col + j);
                        mb += win[i * k + j] * at(b, r + i, col + j);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..k {
                    for j in 0..k {
                        let (x, y) = (at(a, r + i, col + j) - ma, at(b, r + i, col + j) - mb);
                        va += win[i * k + j] * x * x;
                        vb += win[i * k + j] * y * y;
                        cov += win[i * k + j] * x * y;
                    }
                }
                s += (2.0 * ma * mb + c1) * (2.0 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                n += 1;
            }
        }
        acc += s / n as f64;
    }
    acc / ch as f64
}

fn a6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_p, mut worst_s) = (0.0f64, 0.0f64);
    let mut identity = true;
    for i in 0..100 {
        let ch = if i % 4 == 0 { 3 } else { 1 };
        let (h, w) = (rng.gen_range(11..=40), rng.gen_range(11..=40));
        let n = ch * h * w;
        let a: Vec<f32> = (0..n).map(|_| rng.gen::<f32>()).collect();
        // mix of independent noise and perturbed copies
        let b: Vec<f32> = if i % 2 == 0 {
            (0..n).map(|_| rng.gen::<f32>()).collect()
        } else {
            a.iter().map(|&x| (x + rng.gen_range(-0.1f32..0.1)).clamp(0.0, 1.0)).collect()
        };
        let fa = Frame::from_vec(ch, h, w, a.clone()).unwrap();
        let fb = Frame::from_vec(ch, h, w, b.clone()).unwrap();
        let (ad, bd): (Vec<f64>, Vec<f64>) = (a.iter().map(|&x| x as f64).collect(), b.iter().map(|&x| x as f64).collect());
        worst_p = worst_p.max((psnr(&fa, &fb).unwrap() - psnr_reference(&ad, &bd)).abs());
        worst_s = worst_s.max((ssim(&fa, &fb).unwrap() - ssim_reference(&ad, &bd, ch, h, w)).abs());
        identity &= psnr(&fa, &fa).unwrap() == 100.0 && (ssim(&fa, &fa).unwrap() - 1.0).abs() <= 1e-12;
    }
    ensure(
        worst_p <= 1e-6 && worst_s <= 1e-6 && identity,
        format!("100 pairs: worst PSNR error {worst_p:.1e}, worst SSIM error {worst_s:.1e} (<= 1e-6); identity caps hold: {identity}"),
    )
}

/// Iterations before the check. Fifty leave random matrices whose two
/// largest singular values nearly coincide a few percent off, so the count is
/// raised; the fifty-iteration figure is reported alongside.
const POWER_ITERATIONS: usize = 1000;

/// Worst `|sigma_max - 1|` per iteration count in `counts`.
fn normalized_top_error(counts: &[usize]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = vec![0.0f64; counts.len()];
    for i in 0..100 {
        let (rows, cols) = if i < 10 { (64, 64) } else { (rng.gen_range(1..=64), rng.gen_range(1..=64)) };
        let weight = Tensor::<f64>::from_fn(&[rows, cols], |_| rng.gen_range(-1.0..1.0));
        let init = PowerState::init(&weight, &mut rng);
        for (k, &n) in counts.iter().enumerate() {
            let mut state = init.clone();
            for _ in 1..n {
                state.iterate(weight.data());
            }
            let normalized = spectral_normalize(&weight, &mut state, true);
            let top = nalgebra::DMatrix::from_row_slice(rows, cols, normalized.data()).singular_values().max();
            worst[k] = worst[k].max((top - 1.0).abs());
        }
    }
    worst
}

fn a7() -> Outcome {
    let worst = normalized_top_error(&[50, POWER_ITERATIONS]);
    ensure(
        worst[1] <= 1e-3,
        format!(
            "worst |sigma_max - 1| over 100 matrices up to 64x64: {:.2e} after {POWER_ITERATIONS} power iterations (<= 1e-3); \
             {:.2e} after 50",
            worst[1], worst[0]
        ),
    )
}

fn a8() -> Outcome {
    // dataset round trip
    let dir = tempfile::tempdir().unwrap();
    let src = SyntheticClips::new(SynthConfig { frames: 9, ..SynthConfig::default() }, 12).unwrap();
    write_dataset(&src, dir.path()).map_err(|e| e.to_string())?;
    let back = DatasetReader::open(dir.path()).and_then(|r| r.read_all()).map_err(|e| e.to_string())?;
    let dataset = back.len() == src.len()
        && back.iter().enumerate().all(|(i, c)| {
            let o = src.clip(i).unwrap();
            let bits = |fs: &[Frame]| fs.iter().flat_map(|f| f.data().iter().map(|v| v.to_bits())).collect::<Vec<_>>();
            bits(c.frames()) == bits(o.frames()) && c.keypoints() == o.keypoints()
        });

    // checkpoint resume against an uninterrupted run
    let clips = common::tiny_clips(6, 0);
    let mut straight = common::tiny_trainer(5);
    straight.fit(&clips, 6, |_, _| {}).unwrap();
    let mut first = common::tiny_trainer(5);
    first.fit(&clips, 3, |_, _| {}).unwrap();
    let path = dir.path().join("resume.tar");
    checkpoint::save(&first, &path).map_err(|e| e.to_string())?;
    drop(first);
    let mut resumed = checkpoint::load(&path).map_err(|e| e.to_string())?;
    resumed.fit(&clips, 3, |_, _| {}).unwrap();
    let resume = checkpoint::to_bytes(&resumed).unwrap() == checkpoint::to_bytes(&straight).unwrap();

    // rollout prefixes
    let model = Model::new(
        ModelConfig {
            depth: 2,
            latent_channels: 8,
            motion_channels: 4,
            encoder_width: 8,
            predictor_width: 8,
            predictor_growth: 4,
            predictor_blocks: 1,
            disc_depth: 2,
            ..ModelConfig::default()
        },
        8,
    )
    .unwrap();
    let clip = SyntheticClips::new(SynthConfig { frames: LONG_STEPS + 1, seed: 3, ..SynthConfig::default() }, 1)
        .unwrap()
        .clip(0)
        .unwrap();
    let full = model.rollout(&clip.frames()[0], clip.keypoints(), LONG_STEPS).unwrap();
    let mut prefix = true;
    for t in 1..=LONG_STEPS {
        let part = model.rollout(&clip.frames()[0], clip.keypoints(), t).unwrap();
        prefix &= part.len() == t && part.iter().zip(&full).all(|(a, b)| a.data() == b.data());
    }
    ensure(
        dataset && resume && prefix,
        format!("dataset round trip bit-exact: {dataset}; resumed run bitwise equal: {resume}; prefixes for T=1..24: {prefix}"),
    )
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(d) => {
            println!("PASS {name}: {d} [{secs:.1}s]");
            true
        }
        Err(d) => {
            println!("FAIL {name}: {d} [{secs:.1}s]");
            false
        }
    }
}

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let mut ok = true;
    match single_step_rollouts() {
        Ok(r) => {
            ok &= run("A1 stroke controllability", || a1(&r));
            ok &= run("A2 length generalization", || a2(&r));
            ok &= run("A3 teacher-forcing failure", || a3(&r));
        }
        Err(e) => {
            for name in ["A1 stroke controllability", "A2 length generalization", "A3 teacher-forcing failure"] {
                println!("FAIL {name}: {e}");
            }
            ok = false;
        }
    }
    ok &= run("A4 gradient truncation", a4);
    ok &= run("A5 loss arithmetic", a5);
    ok &= run("A6 metric oracles", a6);
    ok &= run("A7 spectral normalization", a7);
    ok &= run("A8 plumbing determinism", a8);
    if !ok {
        std::process::exit(1);
    }
}
