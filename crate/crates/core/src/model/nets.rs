use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::ModelConfig;
use crate::graph::{Graph, Var};
use crate::init::kaiming_uniform;
use crate::params::{Group, ParamId, ParamStore};
use crate::real::Real;
use crate::spectral::PowerState;
use crate::tensor::Tensor;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Activation {
    Leaky,
    Tanh,
    Sigmoid,
    HardSigmoid,
}

#[derive(Clone, Debug)]
pub(crate) struct Layer {
    weight: ParamId,
    bias: Option<ParamId>,
    transposed: bool,
    stride: usize,
    pad: usize,
    spectral: bool,
    act: Activation,
}

impl Layer {
    pub(crate) fn forward<F: Real>(
        &self,
        g: &mut Graph<F>,
        store: &ParamStore<F>,
        x: Var,
        trainable: bool,
        slope: F,
    ) -> Result<Var> {
        let w = if self.spectral {
            g.spectral_param(store, self.weight, trainable)
        } else {
            g.param(store, self.weight, trainable)
        };
        let b = self.bias.map(|b| g.param(store, b, trainable));
        let y = if self.transposed {
            g.conv_transpose2d(x, w, b, self.stride, self.pad)?
        } else {
            g.conv2d(x, w, b, self.stride, self.pad)?
        };
        Ok(match self.act {
            Activation::Leaky => g.leaky_relu(y, slope),
            Activation::Tanh => g.tanh(y),
            Activation::Sigmoid => g.sigmoid(y),
            Activation::HardSigmoid => g.hard_sigmoid(y),
        })
    }
}

fn forward_chain<F: Real>(
    layers: &[Layer],
    g: &mut Graph<F>,
    store: &ParamStore<F>,
    mut x: Var,
    trainable: bool,
    slope: F,
) -> Result<Var> {
    for layer in layers {
        x = layer.forward(g, store, x, trainable, slope)?;
    }
    Ok(x)
}

struct Builder<'a, F, R> {
    store: &'a mut ParamStore<F>,
    rng: &'a mut R,
    slope: f64,
}

struct Spec<'s> {
    name: &'s str,
    group: Group,
    cin: usize,
    cout: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    act: Activation,
    transposed: bool,
    spectral: bool,
}

impl<F: Real, R: Rng> Builder<'_, F, R> {
    fn layer(&mut self, s: Spec<'_>) -> Layer {
        let k2 = s.kernel * s.kernel;
        let (shape, fan_in) = if s.transposed {
            // each output pixel sees cin * k^2 / stride^2 inputs
            (
                [s.cin, s.cout, s.kernel, s.kernel],
                (s.cin * k2 / (s.stride * s.stride)).max(1),
            )
        } else {
            ([s.cout, s.cin, s.kernel, s.kernel], s.cin * k2)
        };
        let slope = match s.act {
            Activation::Leaky => self.slope,
            _ => 1.0,
        };
        let w: Tensor<F> = kaiming_uniform(&shape, fan_in, slope, self.rng);
        let weight = if s.spectral {
            let power = PowerState::init(&w, self.rng);
            self.store
                .add_spectral(format!("{}.weight", s.name), s.group, w, power)
        } else {
            self.store.add(format!("{}.weight", s.name), s.group, w)
        };
        // a hard-sigmoid output starts at black, like the canvas
        let b0 = if s.act == Activation::HardSigmoid { -0.5 } else { 0.0 };
        let bias = self.store.add(
            format!("{}.bias", s.name),
            s.group,
            Tensor::full(&[s.cout], F::of(b0)),
        );
        Layer {
            weight,
            bias: Some(bias),
            transposed: s.transposed,
            stride: s.stride,
            pad: s.pad,
            spectral: s.spectral,
            act: s.act,
        }
    }
}

/// Stack of stride-2 convolutions (or one pointwise layer at depth 0).
#[derive(Clone, Debug)]
pub(crate) struct Encoder {
    layers: Vec<Layer>,
}

impl Encoder {
    fn build<F: Real, R: Rng>(
        b: &mut Builder<'_, F, R>,
        cfg: &ModelConfig,
        prefix: &str,
        cin: usize,
        cout: usize,
    ) -> Self {
        let widths = cfg.encoder_widths(cout);
        let last = widths.len() - 1;
        let mut layers = Vec::new();
        let mut c = cin;
        for (i, &w) in widths.iter().enumerate() {
            let (kernel, stride, pad) = if cfg.depth == 0 { (1, 1, 0) } else { (4, 2, 1) };
            layers.push(b.layer(Spec {
                name: &format!("{prefix}.{i}"),
                group: Group::Generator,
                cin: c,
                cout: w,
                kernel,
                stride,
                pad,
                act: if i == last {
                    Activation::Tanh
                } else {
                    Activation::Leaky
                },
                transposed: false,
                spectral: false,
            }));
            c = w;
        }
        Encoder { layers }
    }

    pub(crate) fn forward<F: Real>(
        &self,
        g: &mut Graph<F>,
        store: &ParamStore<F>,
        x: Var,
        trainable: bool,
        slope: F,
    ) -> Result<Var> {
        forward_chain(&self.layers, g, store, x, trainable, slope)
    }
}

/// Mirror of the encoder built from transposed convolutions, ending in a
/// sigmoid so frames land in `[0, 1]`.
#[derive(Clone, Debug)]
pub(crate) struct Decoder {
    layers: Vec<Layer>,
}

impl Decoder {
    fn build<F: Real, R: Rng>(b: &mut Builder<'_, F, R>, cfg: &ModelConfig) -> Self {
        let stages = cfg.depth.max(1);
        let mut layers = Vec::new();
        let mut c = cfg.latent_channels;
        for i in 0..stages {
            let last = i + 1 == stages;
            let w = if last {
                cfg.channels
            } else {
                cfg.encoder_width << (stages - 2 - i)
            };
            let (kernel, stride, pad) = if cfg.depth == 0 { (1, 1, 0) } else { (4, 2, 1) };
            layers.push(b.layer(Spec {
                name: &format!("g.{i}"),
                group: Group::Generator,
                cin: c,
                cout: w,
                kernel,
                stride,
                pad,
                act: if last {
                    Activation::HardSigmoid
                } else {
                    Activation::Leaky
                },
                transposed: true,
                spectral: false,
            }));
            c = w;
        }
        Decoder { layers }
    }

    pub(crate) fn forward<F: Real>(
        &self,
        g: &mut Graph<F>,
        store: &ParamStore<F>,
        x: Var,
        trainable: bool,
        slope: F,
    ) -> Result<Var> {
        forward_chain(&self.layers, g, store, x, trainable, slope)
    }
}

#[derive(Clone, Debug)]
struct DenseBlock {
    layers: Vec<Layer>,
    transition: Layer,
}

/// Dense-block predictor over the channel concatenation `[h0, h_t, x_t]`.
#[derive(Clone, Debug)]
pub(crate) struct Predictor {
    blocks: Vec<DenseBlock>,
    out: Layer,
}

impl Predictor {
    fn build<F: Real, R: Rng>(b: &mut Builder<'_, F, R>, cfg: &ModelConfig) -> Self {
        let mut c = 2 * cfg.latent_channels + cfg.motion_channels;
        let mut blocks = Vec::new();
        for bi in 0..cfg.predictor_blocks {
            let mut layers = Vec::new();
            for li in 0..cfg.predictor_layers {
                layers.push(b.layer(Spec {
                    name: &format!("p.block{bi}.layer{li}"),
                    group: Group::Generator,
                    cin: c + li * cfg.predictor_growth,
                    cout: cfg.predictor_growth,
                    kernel: 3,
                    stride: 1,
                    pad: 1,
                    act: Activation::Leaky,
                    transposed: false,
                    spectral: false,
                }));
            }
            let transition = b.layer(Spec {
                name: &format!("p.block{bi}.transition"),
                group: Group::Generator,
                cin: c + cfg.predictor_layers * cfg.predictor_growth,
                cout: cfg.predictor_width,
                kernel: 1,
                stride: 1,
                pad: 0,
                act: Activation::Leaky,
                transposed: false,
                spectral: false,
            });
            blocks.push(DenseBlock { layers, transition });
            c = cfg.predictor_width;
        }
        let out = b.layer(Spec {
            name: "p.out",
            group: Group::Generator,
            cin: c,
            cout: cfg.latent_channels,
            kernel: 1,
            stride: 1,
            pad: 0,
            act: Activation::Tanh,
            transposed: false,
            spectral: false,
        });
        Predictor { blocks, out }
    }

    pub(crate) fn forward<F: Real>(
        &self,
        g: &mut Graph<F>,
        store: &ParamStore<F>,
        inputs: [Var; 3],
        trainable: bool,
        slope: F,
    ) -> Result<Var> {
        let mut x = g.concat_channels(&inputs)?;
        for block in &self.blocks {
            let mut feats = x;
            for layer in &block.layers {
                let y = layer.forward(g, store, feats, trainable, slope)?;
                feats = g.concat_channels(&[feats, y])?;
            }
            x = block.transition.forward(g, store, feats, trainable, slope)?;
        }
        self.out.forward(g, store, x, trainable, slope)
    }
}

/// Spectrally normalized convolutional discriminator with a linear head.
/// When conditioned, the motion code is upsampled to the final feature grid,
/// concatenated, and mixed by a pointwise layer before the head.
#[derive(Clone, Debug)]
pub(crate) struct Discriminator {
    stages: Vec<Layer>,
    cond: Option<(Layer, usize)>,
    head: Layer,
}

impl Discriminator {
    fn build<F: Real, R: Rng>(
        b: &mut Builder<'_, F, R>,
        cfg: &ModelConfig,
        prefix: &str,
        cin: usize,
        conditioned: bool,
    ) -> Self {
        let group = Group::Discriminator;
        let mut stages = Vec::new();
        let mut c = cin;
        for i in 0..cfg.disc_depth {
            let w = cfg.disc_width << i;
            stages.push(b.layer(Spec {
                name: &format!("{prefix}.{i}"),
                group,
                cin: c,
                cout: w,
                kernel: 4,
                stride: 2,
                pad: 1,
                act: Activation::Leaky,
                transposed: false,
                spectral: true,
            }));
            c = w;
        }
        let cond = conditioned.then(|| {
            let width = c.max(cfg.disc_width);
            let layer = b.layer(Spec {
                name: &format!("{prefix}.cond"),
                group,
                cin: c + cfg.motion_channels,
                cout: width,
                kernel: 1,
                stride: 1,
                pad: 0,
                act: Activation::Leaky,
                transposed: false,
                spectral: true,
            });
            c = width;
            (layer, 1usize << (cfg.depth - cfg.disc_depth))
        });
        let (gh, gw) = cfg.disc_grid();
        let head = b.layer(Spec {
            name: &format!("{prefix}.head"),
            group,
            cin: c * gh * gw,
            cout: 1,
            kernel: 1,
            stride: 1,
            pad: 0,
            act: Activation::Sigmoid,
            transposed: false,
            spectral: true,
        });
        Discriminator { stages, cond, head }
    }

    /// Probabilities of shape `(N, 1, 1, 1)`.
    pub(crate) fn forward<F: Real>(
        &self,
        g: &mut Graph<F>,
        store: &ParamStore<F>,
        x: Var,
        motion: Option<Var>,
        trainable: bool,
        slope: F,
    ) -> Result<Var> {
        let mut h = forward_chain(&self.stages, g, store, x, trainable, slope)?;
        if let Some((layer, factor)) = &self.cond {
            let m = motion.ok_or_else(|| {
                crate::Error::Config(String::from("conditioned discriminator needs a motion code"))
            })?;
            let m = g.upsample_nearest(m, *factor)?;
            let joined = g.concat_channels(&[h, m])?;
            h = layer.forward(g, store, joined, trainable, slope)?;
        }
        let (n, c, hh, ww) = g.value(h).dims4()?;
        let flat = g.reshape(h, &[n, c * hh * ww, 1, 1])?;
        self.head.forward(g, store, flat, trainable, slope)
    }
}

/// The six networks of the model.
#[derive(Clone, Debug)]
pub(crate) struct Networks {
    pub e1: Encoder,
    pub e2: Encoder,
    pub predictor: Predictor,
    pub decoder: Decoder,
    pub d1: Discriminator,
    pub d2: Discriminator,
}

impl Networks {
    pub(crate) fn build<F: Real, R: Rng>(
        cfg: &ModelConfig,
        store: &mut ParamStore<F>,
        rng: &mut R,
    ) -> Self {
        let mut b = Builder {
            store,
            rng,
            slope: cfg.slope,
        };
        let e1 = Encoder::build(&mut b, cfg, "e1", cfg.channels, cfg.latent_channels);
        let e2 = Encoder::build(&mut b, cfg, "e2", 2, cfg.motion_channels);
        let predictor = Predictor::build(&mut b, cfg);
        let decoder = Decoder::build(&mut b, cfg);
        let d1 = Discriminator::build(&mut b, cfg, "d1", cfg.channels, true);
        let d2 = Discriminator::build(&mut b, cfg, "d2", 2 * cfg.channels, false);
        Networks {
            e1,
            e2,
            predictor,
            decoder,
            d1,
            d2,
        }
    }
}
