//! The five networks and the recursive rollout.
//!
//! * `E1` encodes a frame into a spatial latent state.
//! * `E2` encodes the channel concatenation of the full stroke raster and
//!   the current one-segment raster into a motion code.
//! * `P` maps `[h0, h_t, x_t]` to the next latent state.
//! * `G` decodes a latent state to a frame in `[0, 1]`.
//! * `D1` scores a frame given a motion code; `D2` scores a frame pair.
//!
//! Inference never touches the discriminators' power vectors, so a model can
//! be shared read-only between threads.

mod config;
mod nets;

pub use config::ModelConfig;

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::params::ParamStore;
use crate::real::Real;
use crate::strokes::{self, RasterRole, StrokeKeypoints, StrokeRaster};
use crate::tensor::Tensor;
use crate::{Error, Result};

use nets::Networks;

/// One image of shape `(C, H, W)` with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<F = f32> {
    pixels: Tensor<F>,
}

impl<F: Real> Frame<F> {
    pub fn new(pixels: Tensor<F>) -> Result<Self> {
        if pixels.shape().len() != 3 {
            return Err(Error::Config(alloc::format!(
                "a frame has shape (C, H, W), got {:?}",
                pixels.shape()
            )));
        }
        if let Some(v) = pixels
            .data()
            .iter()
            .find(|v| !v.is_finite() || **v < F::zero() || **v > F::one())
        {
            return Err(Error::Input(alloc::format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Frame { pixels })
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<F>) -> Result<Self> {
        Self::new(Tensor::new(&[channels, height, width], data)?)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: F) -> Result<Self> {
        Self::new(Tensor::full(&[channels, height, width], value))
    }

    pub fn tensor(&self) -> &Tensor<F> {
        &self.pixels
    }

    pub fn into_tensor(self) -> Tensor<F> {
        self.pixels
    }

    pub fn data(&self) -> &[F] {
        self.pixels.data()
    }

    pub fn channels(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[2]
    }

    /// Mean over channels at `(row, col)`.
    pub fn luminance(&self, row: usize, col: usize) -> F {
        let (c, h, w) = (self.channels(), self.height(), self.width());
        let s: F = (0..c).map(|ci| self.pixels.data()[(ci * h + row) * w + col]).sum();
        s / F::of(c as f64)
    }

    fn batched(&self) -> Tensor<F> {
        let s = self.pixels.shape();
        self.pixels
            .clone()
            .reshape(&[1, s[0], s[1], s[2]])
            .expect("frame reshape")
    }
}

macro_rules! feature_map {
    ($name:ident, $what:literal) => {
        #[doc = concat!("A ", $what, " of shape `(C, h, w)` on the latent grid.")]
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name<F = f32> {
            features: Tensor<F>,
        }

        impl<F: Real> $name<F> {
            pub fn new(features: Tensor<F>) -> Result<Self> {
                if features.shape().len() != 3 {
                    return Err(Error::Config(alloc::format!(
                        concat!("a ", $what, " has shape (C, h, w), got {:?}"),
                        features.shape()
                    )));
                }
                if !features.all_finite() {
                    return Err(Error::Input(concat!("non-finite ", $what).into()));
                }
                Ok($name { features })
            }

            pub fn tensor(&self) -> &Tensor<F> {
                &self.features
            }

            pub fn shape(&self) -> &[usize] {
                self.features.shape()
            }

            fn batched(&self) -> Tensor<F> {
                let s = self.features.shape();
                self.features
                    .clone()
                    .reshape(&[1, s[0], s[1], s[2]])
                    .expect("feature reshape")
            }
        }
    };
}

feature_map!(LatentState, "latent state");
feature_map!(MotionCode, "motion code");

/// `(1, 1, H, W)` tensor of a stroke raster.
pub fn raster_tensor<F: Real>(r: &StrokeRaster) -> Tensor<F> {
    Tensor::new(
        &[1, 1, r.height(), r.width()],
        r.pixels().iter().map(|&v| F::of(v as f64)).collect(),
    )
    .expect("raster shape")
}

/// Network parameters together with the architecture they instantiate.
#[derive(Clone, Debug)]
pub struct Model<F: Real = f32> {
    config: ModelConfig,
    params: ParamStore<F>,
    nets: Networks,
}

impl<F: Real> Model<F> {
    /// Freshly initialized model; identical seeds give identical parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let nets = Networks::build(&config, &mut params, &mut rng);
        Ok(Model {
            config,
            params,
            nets,
        })
    }

    /// Rebuilds the architecture for `config` and adopts `params`, which must
    /// match it name by name and shape by shape.
    pub fn from_params(config: ModelConfig, params: ParamStore<F>) -> Result<Self> {
        let template = Self::new(config, 0)?;
        if template.params.len() != params.len() {
            return Err(Error::Format(alloc::format!(
                "expected {} parameter arrays, found {}",
                template.params.len(),
                params.len()
            )));
        }
        for id in template.params.ids() {
            let same = template.params.name(id) == params.name(id)
                && template.params.group(id) == params.group(id)
                && template.params.value(id).shape() == params.value(id).shape()
                && template.params.power_state(id).map(|s| (s.rows(), s.cols()))
                    == params.power_state(id).map(|s| (s.rows(), s.cols()));
            if !same {
                return Err(Error::Format(alloc::format!(
                    "parameter {} does not match the configuration",
                    template.params.name(id)
                )));
            }
        }
        Ok(Model {
            config: template.config,
            params,
            nets: template.nets,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore<F> {
        self.params
    }

    fn slope(&self) -> F {
        F::of(self.config.slope)
    }

    // Batched graph builders. `trainable` marks the network's parameters as
    // requiring gradient.

    /// `E1` on `(N, C, H, W)` frames.
    pub fn e1(&self, g: &mut Graph<F>, frames: Var, trainable: bool) -> Result<Var> {
        self.check_spatial(g, frames, self.config.channels, "frame")?;
        self.nets
            .e1
            .forward(g, &self.params, frames, trainable, self.slope())
    }

    /// `E2` on `(N, 1, H, W)` full and instant stroke rasters.
    pub fn e2(&self, g: &mut Graph<F>, full: Var, instant: Var, trainable: bool) -> Result<Var> {
        self.check_spatial(g, full, 1, "stroke raster")?;
        self.check_spatial(g, instant, 1, "stroke raster")?;
        let x = g.concat_channels(&[full, instant])?;
        self.nets.e2.forward(g, &self.params, x, trainable, self.slope())
    }

    /// `P(h0, h_t, x_t)`.
    pub fn predict(
        &self,
        g: &mut Graph<F>,
        h0: Var,
        ht: Var,
        xt: Var,
        trainable: bool,
    ) -> Result<Var> {
        let (gh, gw) = self.config.latent_grid();
        let want_h = [self.config.latent_channels, gh, gw];
        let want_x = [self.config.motion_channels, gh, gw];
        for (v, want, what) in [(h0, want_h, "h0"), (ht, want_h, "h_t"), (xt, want_x, "x_t")] {
            let s = g.value(v).shape();
            if s.len() != 4 || s[1..] != want {
                return Err(Error::Config(alloc::format!(
                    "{what} has shape {s:?}, expected (N, {}, {}, {})",
                    want[0],
                    want[1],
                    want[2]
                )));
            }
        }
        self.nets
            .predictor
            .forward(g, &self.params, [h0, ht, xt], trainable, self.slope())
    }

    /// `G` on `(N, C_h, h, w)` latent states.
    pub fn decode(&self, g: &mut Graph<F>, h: Var, trainable: bool) -> Result<Var> {
        let (gh, gw) = self.config.latent_grid();
        let s = g.value(h).shape();
        if s.len() != 4 || s[1..] != [self.config.latent_channels, gh, gw] {
            return Err(Error::Config(alloc::format!(
                "latent has shape {s:?}, expected (N, {}, {gh}, {gw})",
                self.config.latent_channels
            )));
        }
        self.nets
            .decoder
            .forward(g, &self.params, h, trainable, self.slope())
    }

    /// `D1(frame | motion)`, probabilities of shape `(N, 1, 1, 1)`.
    pub fn d1(&self, g: &mut Graph<F>, frames: Var, motion: Var, trainable: bool) -> Result<Var> {
        self.check_spatial(g, frames, self.config.channels, "frame")?;
        self.nets
            .d1
            .forward(g, &self.params, frames, Some(motion), trainable, self.slope())
    }

    /// `D2(frame_t, frame_t1)`, probabilities of shape `(N, 1, 1, 1)`.
    pub fn d2(&self, g: &mut Graph<F>, first: Var, second: Var, trainable: bool) -> Result<Var> {
        self.check_spatial(g, first, self.config.channels, "frame")?;
        self.check_spatial(g, second, self.config.channels, "frame")?;
        let pair = g.concat_channels(&[first, second])?;
        self.nets
            .d2
            .forward(g, &self.params, pair, None, trainable, self.slope())
    }

    fn check_spatial(&self, g: &Graph<F>, v: Var, channels: usize, what: &str) -> Result<()> {
        let s = g.value(v).shape();
        if s.len() != 4 || s[1..] != [channels, self.config.height, self.config.width] {
            return Err(Error::Config(alloc::format!(
                "{what} has shape {s:?}, expected (N, {channels}, {}, {})",
                self.config.height,
                self.config.width
            )));
        }
        Ok(())
    }

    // Single-sample operations.

    pub fn encode_frame(&self, frame: &Frame<F>) -> Result<LatentState<F>> {
        let mut g = Graph::new();
        let x = g.constant(frame.batched());
        let h = self.e1(&mut g, x, false)?;
        unbatch(g.value(h)).and_then(LatentState::new)
    }

    pub fn encode_motion(
        &self,
        full_stroke: &StrokeRaster,
        instant_stroke: &StrokeRaster,
    ) -> Result<MotionCode<F>> {
        if full_stroke.role() != RasterRole::Full || instant_stroke.role() != RasterRole::Instant {
            return Err(Error::Input(
                "expected a full stroke raster and an instant stroke raster".into(),
            ));
        }
        let mut g = Graph::new();
        let s = g.constant(raster_tensor(full_stroke));
        let st = g.constant(raster_tensor(instant_stroke));
        let x = self.e2(&mut g, s, st, false)?;
        unbatch(g.value(x)).and_then(MotionCode::new)
    }

    pub fn predict_next(
        &self,
        h0: &LatentState<F>,
        ht: &LatentState<F>,
        xt: &MotionCode<F>,
    ) -> Result<LatentState<F>> {
        let mut g = Graph::new();
        let a = g.constant(h0.batched());
        let b = g.constant(ht.batched());
        let c = g.constant(xt.batched());
        let h = self.predict(&mut g, a, b, c, false)?;
        unbatch(g.value(h)).and_then(LatentState::new)
    }

    pub fn decode_frame(&self, h: &LatentState<F>) -> Result<Frame<F>> {
        let mut g = Graph::new();
        let x = g.constant(h.batched());
        let y = self.decode(&mut g, x, false)?;
        unbatch(g.value(y)).and_then(Frame::new)
    }

    /// Probability in `(0, 1)` that `frame` is real given `motion`.
    pub fn discriminate_frame(&self, frame: &Frame<F>, motion: &MotionCode<F>) -> Result<F> {
        if motion.shape() != self.config.motion_shape() {
            return Err(Error::Config(alloc::format!(
                "motion code has shape {:?}, expected {:?}",
                motion.shape(),
                self.config.motion_shape()
            )));
        }
        let mut g = Graph::new();
        let x = g.constant(frame.batched());
        let m = g.constant(motion.batched());
        let p = self.d1(&mut g, x, m, false)?;
        Ok(g.value(p).data()[0])
    }

    /// Probability in `(0, 1)` that `(first, second)` are real consecutive frames.
    pub fn discriminate_pair(&self, first: &Frame<F>, second: &Frame<F>) -> Result<F> {
        let mut g = Graph::new();
        let a = g.constant(first.batched());
        let b = g.constant(second.batched());
        let p = self.d2(&mut g, a, b, false)?;
        Ok(g.value(p).data()[0])
    }

    /// Generates `steps` frames from `first` following `keypoints`.
    ///
    /// The initial encoding is computed once and passed at every step; each
    /// predicted state is fed back as the next step's state. The full stroke
    /// raster covers every given keypoint, so a shorter rollout is a prefix of
    /// a longer one.
    pub fn rollout(
        &self,
        first: &Frame<F>,
        keypoints: &StrokeKeypoints,
        steps: usize,
    ) -> Result<Vec<Frame<F>>> {
        let frames = self.rollout_batch(&[first], &[keypoints], steps)?;
        Ok(frames.into_iter().next().unwrap_or_default())
    }

    /// Batched [`Model::rollout`]; returns one frame list per input.
    pub fn rollout_batch(
        &self,
        firsts: &[&Frame<F>],
        keypoints: &[&StrokeKeypoints],
        steps: usize,
    ) -> Result<Vec<Vec<Frame<F>>>> {
        if firsts.len() != keypoints.len() {
            return Err(Error::Input("one stroke per initial frame is required".into()));
        }
        for kp in keypoints {
            if kp.len() < steps + 1 {
                return Err(Error::Input(alloc::format!(
                    "{steps} frames need {} keypoints, got {}",
                    steps + 1,
                    kp.len()
                )));
            }
            if (kp.height(), kp.width()) != (self.config.height, self.config.width) {
                return Err(Error::Config(alloc::format!(
                    "stroke canvas {}x{} does not match model {}x{}",
                    kp.height(),
                    kp.width(),
                    self.config.height,
                    self.config.width
                )));
            }
        }
        let n = firsts.len();
        let mut out: Vec<Vec<Frame<F>>> = (0..n).map(|_| Vec::with_capacity(steps)).collect();
        if steps == 0 || n == 0 {
            return Ok(out);
        }
        let batch = |ts: Vec<Tensor<F>>| -> Result<Tensor<F>> {
            let refs: Vec<&Tensor<F>> = ts.iter().collect();
            Tensor::stack_batch(&refs)
        };
        let full = batch(
            keypoints
                .iter()
                .map(|kp| raster_tensor(&strokes::rasterize_stroke(kp)))
                .collect(),
        )?;
        let h0 = {
            let mut g = Graph::new();
            let x = g.constant(batch(firsts.iter().map(|f| f.batched()).collect())?);
            let h = self.e1(&mut g, x, false)?;
            g.value(h).clone()
        };
        let mut state = h0.clone();
        for t in 0..steps {
            let instant = batch(
                keypoints
                    .iter()
                    .map(|kp| strokes::instant_stroke(kp, t).map(|r| raster_tensor(&r)))
                    .collect::<Result<Vec<_>>>()?,
            )?;
            let mut g = Graph::new();
            let s = g.constant(full.clone());
            let st = g.constant(instant);
            let x = self.e2(&mut g, s, st, false)?;
            let a = g.constant(h0.clone());
            let b = g.constant(state);
            let h = self.predict(&mut g, a, b, x, false)?;
            let y = self.decode(&mut g, h, false)?;
            state = g.value(h).clone();
            let frames = g.value(y);
            for (i, frames_i) in out.iter_mut().enumerate() {
                frames_i.push(Frame::new(unbatch(&frames.batch_item(i))?)?);
            }
        }
        Ok(out)
    }
}

/// `(1, C, H, W)` to `(C, H, W)`.
fn unbatch<F: Real>(t: &Tensor<F>) -> Result<Tensor<F>> {
    let s = t.shape();
    if s.len() != 4 || s[0] != 1 {
        return Err(Error::Config(alloc::format!("expected one batch item, got {s:?}")));
    }
    t.clone().reshape(&s[1..])
}
