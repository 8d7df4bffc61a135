//! JSON forms of the model and training settings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use strokevid_core::losses::{FeatureKind, LossWeights};
use strokevid_core::optim::AdamConfig;
use strokevid_core::training::{TrainConfig, TrainingMode};
use strokevid_core::ModelConfig;

use crate::{format_err, io_err, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub latent_channels: usize,
    pub motion_channels: usize,
    pub depth: usize,
    pub encoder_width: usize,
    pub predictor_blocks: usize,
    pub predictor_layers: usize,
    pub predictor_growth: usize,
    pub predictor_width: usize,
    pub disc_depth: usize,
    pub disc_width: usize,
    pub slope: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelConfig::default().into()
    }
}

impl From<ModelConfig> for ModelSettings {
    fn from(c: ModelConfig) -> Self {
        ModelSettings {
            height: c.height,
            width: c.width,
            channels: c.channels,
            latent_channels: c.latent_channels,
            motion_channels: c.motion_channels,
            depth: c.depth,
            encoder_width: c.encoder_width,
            predictor_blocks: c.predictor_blocks,
            predictor_layers: c.predictor_layers,
            predictor_growth: c.predictor_growth,
            predictor_width: c.predictor_width,
            disc_depth: c.disc_depth,
            disc_width: c.disc_width,
            slope: c.slope,
        }
    }
}

impl From<&ModelSettings> for ModelConfig {
    fn from(s: &ModelSettings) -> Self {
        ModelConfig {
            height: s.height,
            width: s.width,
            channels: s.channels,
            latent_channels: s.latent_channels,
            motion_channels: s.motion_channels,
            depth: s.depth,
            encoder_width: s.encoder_width,
            predictor_blocks: s.predictor_blocks,
            predictor_layers: s.predictor_layers,
            predictor_growth: s.predictor_growth,
            predictor_width: s.predictor_width,
            disc_depth: s.disc_depth,
            disc_width: s.disc_width,
            slope: s.slope,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureSettings {
    Identity,
    RandomPyramid { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    /// `[lambda0, lambda1, lambda2, lambda3]`.
    pub weights: [f64; 4],
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub clip_len: usize,
    pub mode: String,
    pub seed: u64,
    pub features: FeatureSettings,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainConfig::default().into()
    }
}

impl From<TrainConfig> for TrainSettings {
    fn from(c: TrainConfig) -> Self {
        let w = c.weights;
        TrainSettings {
            weights: [w.lambda0, w.lambda1, w.lambda2, w.lambda3],
            lr: c.adam.lr,
            beta1: c.adam.beta1,
            beta2: c.adam.beta2,
            eps: c.adam.eps,
            batch_size: c.batch_size,
            clip_len: c.clip_len,
            mode: c.mode.as_str().into(),
            seed: c.seed,
            features: match c.features {
                FeatureKind::Identity => FeatureSettings::Identity,
                FeatureKind::RandomPyramid { seed } => FeatureSettings::RandomPyramid { seed },
            },
        }
    }
}

impl TryFrom<&TrainSettings> for TrainConfig {
    type Error = crate::Error;

    fn try_from(s: &TrainSettings) -> Result<Self> {
        let mode = TrainingMode::parse(&s.mode)
            .ok_or_else(|| format_err(format!("unknown training mode {:?}", s.mode)))?;
        let [lambda0, lambda1, lambda2, lambda3] = s.weights;
        let c = TrainConfig {
            weights: LossWeights {
                lambda0,
                lambda1,
                lambda2,
                lambda3,
            },
            adam: AdamConfig {
                lr: s.lr,
                beta1: s.beta1,
                beta2: s.beta2,
                eps: s.eps,
            },
            batch_size: s.batch_size,
            clip_len: s.clip_len,
            mode,
            seed: s.seed,
            features: match s.features {
                FeatureSettings::Identity => FeatureKind::Identity,
                FeatureSettings::RandomPyramid { seed } => FeatureKind::RandomPyramid { seed },
            },
        };
        c.validate()?;
        Ok(c)
    }
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSettings,
    /// Seeds parameter initialization.
    pub init_seed: u64,
    pub train: TrainSettings,
    /// Steps between checkpoints; 0 saves only at the end.
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSettings::default(),
            init_seed: 0,
            train: TrainSettings::default(),
            checkpoint_every: 250,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| format_err(format!("{}: {e}", path.display())))
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let c = ModelConfig::from(&self.model);
        c.validate()?;
        Ok(c)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        TrainConfig::try_from(&self.train)
    }
}
