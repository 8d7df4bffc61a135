//! Command-line interface.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use strokevid_core::data::{Glyph, GlyphShape, SynthConfig, SyntheticClips};
use strokevid_core::strokes::keypoints_from_text;
use strokevid_core::training::{Trainer, TrainingMode};
use strokevid_core::Model;

use crate::config::RunConfig;
use crate::dataset::{write_dataset, DatasetReader};
use crate::evaluate::{evaluate_ground_truth, evaluate_model};
use crate::imageio::{decode_png, encode_gif, encode_png};
use crate::metrics_log::MetricsLog;
use crate::{checkpoint, idx};

pub const CHECKPOINT_FILE: &str = "checkpoint.tar";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Parser)]
#[command(name = "strokevid", version, about = "Stroke-controlled video synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic moving-glyph dataset.
    MakeDataset(MakeDatasetArgs),
    /// Train a model, resuming from the output directory when possible.
    Train(TrainArgs),
    /// Roll a checkpoint out along a keypoint path.
    Generate(GenerateArgs),
    /// Score a checkpoint on a held-out dataset.
    Evaluate(EvaluateArgs),
    /// Run the HTTP inference service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct MakeDatasetArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub clips: usize,
    /// Canvas side length, or HEIGHTxWIDTH.
    #[arg(long, default_value = "64")]
    pub canvas: String,
    /// Comma-separated procedural shapes (disk, cross, lshape, ring,
    /// square), "all", or the path of an IDX image file.
    #[arg(long, default_value = "all")]
    pub glyphs: String,
    /// Side length of procedural glyphs.
    #[arg(long, default_value_t = 16)]
    pub glyph_size: usize,
    #[arg(long, default_value_t = 17)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub min_step: f64,
    #[arg(long, default_value_t = 6.0)]
    pub max_step: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON run configuration; defaults apply to absent fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = ["single_step", "teacher_forcing", "full_bptt"])]
    pub mode: Option<String>,
    /// Total number of steps; a resumed run continues up to this count.
    #[arg(long)]
    pub steps: u64,
    /// Overrides both the initialization and the batch-order seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print a progress line every this many steps.
    #[arg(long, default_value_t = 50)]
    pub log_every: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Initial frame (PNG).
    #[arg(long)]
    pub image: PathBuf,
    /// Keypoint document.
    #[arg(long)]
    pub keypoints: PathBuf,
    #[arg(long)]
    pub frames: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Playback rate of the animated preview.
    #[arg(long, default_value_t = 8)]
    pub fps: u32,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Not needed with --ground-truth.
    #[arg(long, required_unless_present = "ground_truth")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Predicted frames per clip; defaults to the clip length minus one.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Score the dataset against itself.
    #[arg(long)]
    pub ground_truth: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: std::net::SocketAddr,
    #[arg(long, default_value_t = 4 << 20)]
    pub max_image_bytes: usize,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::MakeDataset(a) => make_dataset(&a),
        Command::Train(a) => train(&a),
        Command::Generate(a) => generate(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Serve(a) => {
            let limits = crate::service::Limits {
                max_image_bytes: a.max_image_bytes,
                ..Default::default()
            };
            tokio::runtime::Runtime::new()?.block_on(crate::service::serve(a.addr, a.checkpoint, limits))
        }
    }
}

fn parse_canvas(s: &str) -> anyhow::Result<(usize, usize)> {
    let parse = |v: &str| v.trim().parse::<usize>().with_context(|| format!("bad canvas size {s:?}"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

pub fn make_dataset(a: &MakeDatasetArgs) -> anyhow::Result<()> {
    let (height, width) = parse_canvas(&a.canvas)?;
    let mut config = SynthConfig {
        height,
        width,
        glyph_size: a.glyph_size,
        frames: a.frames,
        step_range: (a.min_step, a.max_step),
        seed: a.seed,
        ..SynthConfig::default()
    };
    let source = if Path::new(&a.glyphs).is_file() {
        let glyphs: Vec<Glyph> = idx::load_digit_bitmaps(Path::new(&a.glyphs))?;
        config.glyph_size = glyphs.first().map(Glyph::size).unwrap_or(a.glyph_size);
        SyntheticClips::with_glyphs(config, glyphs, a.clips)?
    } else {
        if a.glyphs != "all" {
            config.shapes = a
                .glyphs
                .split(',')
                .map(|n| GlyphShape::from_name(n.trim()).with_context(|| format!("unknown glyph shape {n:?}")))
                .collect::<anyhow::Result<_>>()?;
        }
        SyntheticClips::new(config, a.clips)?
    };
    let manifest = write_dataset(&source, &a.out)?;
    println!("wrote {} clips to {}", manifest.clips.len(), a.out.display());
    Ok(())
}

pub fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let mut run = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(mode) = &a.mode {
        run.train.mode = mode.clone();
    }
    if let Some(seed) = a.seed {
        run.init_seed = seed;
        run.train.seed = seed;
    }
    let data = DatasetReader::open(&a.data)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let ckpt = a.out.join(CHECKPOINT_FILE);
    let log_path = a.out.join(METRICS_FILE);
    let mut trainer = if ckpt.exists() {
        let t = checkpoint::load(&ckpt)?;
        let mut saved: RunConfig = run.clone();
        saved.model = t.model().config().clone().into();
        saved.train = t.config().clone().into();
        if saved.model != run.model || saved.train != run.train {
            bail!(
                "{} was trained with a different configuration; use a fresh --out",
                ckpt.display()
            );
        }
        eprintln!("resuming from step {}", t.step());
        t
    } else {
        let model = Model::new(run.model_config()?, run.init_seed)?;
        Trainer::new(model, run.train_config()?)?
    };
    let config_json = serde_json::to_string_pretty(&run)? + "\n";
    std::fs::write(a.out.join(CONFIG_FILE), config_json)?;
    let mut log = MetricsLog::resume(&log_path, trainer.step())?;
    if trainer.step() >= a.steps {
        checkpoint::save(&trainer, &ckpt)?;
        return Ok(());
    }
    let remaining = a.steps - trainer.step();
    let every = run.checkpoint_every;
    let started = Instant::now();
    let mut last: crate::Result<()> = Ok(());
    let mut on_step = |step: u64, r: &strokevid_core::losses::LossReport| {
        if last.is_ok() {
            last = log.append(step, r);
        }
        if a.log_every > 0 && step % a.log_every == 0 {
            eprintln!(
                "step {step} rec1 {:.4} rec2 {:.4} perc {:.4} g {:.3} d {:.3} ({:.1}s)",
                r.rec1,
                r.rec2,
                r.perceptual,
                r.total_g,
                r.total_d,
                started.elapsed().as_secs_f64()
            );
        }
    };
    // Step in chunks so checkpoints land on multiples of `every`.
    let mut left = remaining;
    while left > 0 {
        let chunk = if every > 0 { (every - trainer.step() % every).min(left) } else { left };
        trainer.fit(&data, chunk, &mut on_step)?;
        left -= chunk;
        if every > 0 && trainer.step() % every == 0 {
            checkpoint::save(&trainer, &ckpt)?;
        }
    }
    last?;
    checkpoint::save(&trainer, &ckpt)?;
    let mode = TrainingMode::parse(&run.train.mode).map(TrainingMode::as_str).unwrap_or("?");
    eprintln!("trained to step {} ({mode})", trainer.step());
    Ok(())
}

pub fn generate(a: &GenerateArgs) -> anyhow::Result<()> {
    let model = checkpoint::load_model(&a.checkpoint)?;
    let c = model.config();
    let png = std::fs::read(&a.image).with_context(|| format!("cannot read {}", a.image.display()))?;
    let first = decode_png(&png, c.channels)?;
    let text = std::fs::read_to_string(&a.keypoints)
        .with_context(|| format!("cannot read {}", a.keypoints.display()))?;
    let kp = keypoints_from_text(&text)?;
    let frames = model.rollout(&first, &kp, a.frames)?;
    std::fs::create_dir_all(&a.out)?;
    for (t, f) in frames.iter().enumerate() {
        std::fs::write(a.out.join(crate::dataset::frame_file_name(t + 1)), encode_png(f)?)?;
    }
    let mut preview = vec![first];
    preview.extend(frames);
    let delay = 1000 / a.fps.max(1);
    std::fs::write(a.out.join("preview.gif"), encode_gif(&preview, delay)?)?;
    println!("wrote {} frames to {}", a.frames, a.out.display());
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    let clips = DatasetReader::open(&a.data)?.read_all()?;
    if clips.is_empty() {
        bail!("{} holds no clips", a.data.display());
    }
    let report = if a.ground_truth {
        evaluate_ground_truth(&clips)?
    } else {
        let path = a.checkpoint.as_ref().context("--checkpoint is required")?;
        let model = checkpoint::load_model(path)?;
        let shortest = clips.iter().map(|c| c.len()).min().unwrap_or(1);
        let steps = a.frames.unwrap_or(shortest - 1);
        evaluate_model(&model, &clips, steps)?
    };
    let table = report.to_table();
    std::fs::write(&a.report, &table).with_context(|| format!("cannot write {}", a.report.display()))?;
    print!("{}", table.split("\n\n").nth(1).unwrap_or(""));
    Ok(())
}
