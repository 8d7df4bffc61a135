#![allow(dead_code)]

use std::path::Path;

use strokevid::config::RunConfig;
use strokevid::dataset::write_dataset;
use strokevid_core::data::{GlyphShape, SynthConfig, SyntheticClips};
use strokevid_core::training::{TrainConfig, Trainer};
use strokevid_core::{Model, ModelConfig};

pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        height: 16,
        width: 16,
        channels: 1,
        latent_channels: 4,
        motion_channels: 2,
        depth: 1,
        encoder_width: 4,
        predictor_blocks: 1,
        predictor_layers: 1,
        predictor_growth: 2,
        predictor_width: 4,
        disc_depth: 1,
        disc_width: 2,
        slope: 0.2,
    }
}

pub fn tiny_train_config() -> TrainConfig {
    TrainConfig {
        batch_size: 2,
        clip_len: 3,
        ..TrainConfig::default()
    }
}

pub fn tiny_run_config() -> RunConfig {
    RunConfig {
        model: tiny_model_config().into(),
        train: tiny_train_config().into(),
        checkpoint_every: 2,
        ..RunConfig::default()
    }
}

pub fn tiny_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        height: 16,
        width: 16,
        glyph_size: 5,
        frames: 5,
        step_range: (0.5, 1.5),
        shapes: vec![GlyphShape::Disk, GlyphShape::Cross],
        seed,
    }
}

pub fn tiny_clips(count: usize, seed: u64) -> SyntheticClips {
    SyntheticClips::new(tiny_synth(seed), count).unwrap()
}

pub fn write_tiny_dataset(root: &Path, count: usize, seed: u64) {
    write_dataset(&tiny_clips(count, seed), root).unwrap();
}

pub fn tiny_trainer(seed: u64) -> Trainer {
    Trainer::new(Model::new(tiny_model_config(), seed).unwrap(), tiny_train_config()).unwrap()
}

/// FNV-1a over every byte of every regular file below `root`, visited in
/// sorted path order, with the relative path mixed in.
pub fn tree_checksum(root: &Path) -> u64 {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for f in files {
        eat(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        eat(&std::fs::read(&f).unwrap());
    }
    h
}
