//! Moving-glyph clips, clip sources and seeded batching.
//!
//! A synthetic clip pastes one glyph onto a black canvas at every keypoint
//! of a stroke. Placement uses whole pixels: the glyph's top-left corner is
//! the nearest integer to `keypoint - centroid`. Generated strokes are
//! snapped to the lattice where this rounding is exact, so their keypoints
//! record where the object is.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{raster_tensor, Frame};
use crate::strokes::{self, Point, StrokeKeypoints};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// A square single-channel sprite with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Glyph {
    size: usize,
    pixels: Vec<f32>,
}

/// Built-in procedural shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlyphShape {
    Disk,
    Cross,
    LShape,
    Ring,
    Square,
}

impl GlyphShape {
    pub const ALL: [GlyphShape; 5] = [
        GlyphShape::Disk,
        GlyphShape::Cross,
        GlyphShape::LShape,
        GlyphShape::Ring,
        GlyphShape::Square,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GlyphShape::Disk => "disk",
            GlyphShape::Cross => "cross",
            GlyphShape::LShape => "l-shape",
            GlyphShape::Ring => "ring",
            GlyphShape::Square => "square",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl Glyph {
    pub fn new(size: usize, pixels: Vec<f32>) -> Result<Self> {
        if size == 0 || pixels.len() != size * size {
            return Err(Error::Input(alloc::format!(
                "glyph of size {size} needs {} pixels, got {}",
                size * size,
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Input("glyph pixels must lie in [0, 1]".into()));
        }
        if !pixels.iter().any(|&v| v > 0.1) {
            return Err(Error::Input("glyph has no pixel brighter than 0.1".into()));
        }
        Ok(Glyph { size, pixels })
    }

    /// Glyph from 8-bit intensities, scaled by 1/255.
    pub fn from_bytes(size: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(size, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    /// A binary procedural shape symmetric about pixel `(size/2, size/2)`,
    /// except the L-shape, which is asymmetric by construction.
    pub fn procedural(shape: GlyphShape, size: usize) -> Result<Self> {
        if size < 5 {
            return Err(Error::Input("procedural glyphs need size >= 5".into()));
        }
        let c = (size / 2) as isize;
        let r = c - 1;
        let t = (size / 8).max(1) as isize;
        let inside = |row: isize, col: isize| -> bool {
            let (dy, dx) = (row - c, col - c);
            match shape {
                GlyphShape::Disk => dx * dx + dy * dy <= r * r,
                GlyphShape::Cross => (dx.abs() <= t && dy.abs() <= r) || (dy.abs() <= t && dx.abs() <= r),
                GlyphShape::LShape => {
                    (dx >= -r && dx <= -r + 2 * t && dy.abs() <= r) || (dy <= r && dy >= r - 2 * t && dx >= -r && dx <= r)
                }
                GlyphShape::Ring => {
                    let d2 = dx * dx + dy * dy;
                    d2 <= r * r && d2 >= (r - 2 * t) * (r - 2 * t)
                }
                GlyphShape::Square => dx.abs() <= r - t && dy.abs() <= r - t,
            }
        };
        let pixels = (0..size * size)
            .map(|i| {
                if inside((i / size) as isize, (i % size) as isize) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(size, pixels)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    /// Intensity centroid `(x, y)` in glyph pixel coordinates.
    pub fn centroid(&self) -> (f64, f64) {
        let (mut m, mut mx, mut my) = (0.0f64, 0.0f64, 0.0f64);
        for (i, &v) in self.pixels.iter().enumerate() {
            let v = v as f64;
            m += v;
            mx += v * (i % self.size) as f64;
            my += v * (i / self.size) as f64;
        }
        (mx / m, my / m)
    }

    /// Keypoint margins `(before, after)` that keep the pasted glyph inside
    /// the canvas along each axis.
    pub fn margins(&self) -> ((usize, usize), (usize, usize)) {
        let (cx, cy) = self.centroid();
        let g = self.size as f64 - 1.0;
        let m = |c: f64| (libm::ceil(c) as usize, libm::ceil(g - c) as usize);
        (m(cx), m(cy))
    }
}

/// A clip of frames with the keypoint of each frame.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoClip {
    frames: Vec<Frame>,
    keypoints: StrokeKeypoints,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>, keypoints: StrokeKeypoints) -> Result<Self> {
        if frames.len() != keypoints.len() {
            return Err(Error::Input(alloc::format!(
                "{} frames but {} keypoints",
                frames.len(),
                keypoints.len()
            )));
        }
        if let Some(f) = frames.first() {
            let shape = f.tensor().shape();
            if frames.iter().any(|g| g.tensor().shape() != shape) {
                return Err(Error::Input("clip frames differ in shape".into()));
            }
            if (f.height(), f.width()) != (keypoints.height(), keypoints.width()) {
                return Err(Error::Input("keypoint canvas does not match frames".into()));
            }
        }
        Ok(VideoClip { frames, keypoints })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn keypoints(&self) -> &StrokeKeypoints {
        &self.keypoints
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames and keypoints `start..start + len`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        let keypoints = self.keypoints.window(start, len)?;
        Ok(VideoClip {
            frames: self.frames[start..start + len].to_vec(),
            keypoints,
        })
    }
}

/// Renders `glyph` at every keypoint on a black `height x width` canvas.
pub fn make_moving_glyph_clip(
    glyph: &Glyph,
    kp: &StrokeKeypoints,
    canvas: (usize, usize),
) -> Result<VideoClip> {
    let (height, width) = canvas;
    let g = glyph.size;
    if g >= height.min(width) {
        return Err(Error::Input(alloc::format!(
            "glyph of size {g} does not fit a {height}x{width} canvas"
        )));
    }
    if (kp.height(), kp.width()) != canvas {
        return Err(Error::Input("keypoint canvas does not match clip canvas".into()));
    }
    let (cx, cy) = glyph.centroid();
    let frames = kp
        .points()
        .iter()
        .map(|p| {
            let left = libm::round(p.x - cx).clamp(0.0, (width - g) as f64) as usize;
            let top = libm::round(p.y - cy).clamp(0.0, (height - g) as f64) as usize;
            let mut pixels = vec![0.0f32; height * width];
            for r in 0..g {
                let dst = (top + r) * width + left;
                pixels[dst..dst + g].copy_from_slice(&glyph.pixels[r * g..(r + 1) * g]);
            }
            Frame::from_vec(1, height, width, pixels)
        })
        .collect::<Result<Vec<_>>>()?;
    VideoClip::new(frames, kp.clone())
}

/// Random access to a collection of clips.
pub trait ClipSource {
    fn len(&self) -> usize;

    fn clip(&self, index: usize) -> Result<VideoClip>;

    /// Length of the shortest clip.
    fn min_clip_len(&self) -> Result<usize>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ClipSource for [VideoClip] {
    fn len(&self) -> usize {
        <[VideoClip]>::len(self)
    }

    fn clip(&self, index: usize) -> Result<VideoClip> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::Input(alloc::format!("no clip {index}")))
    }

    fn min_clip_len(&self) -> Result<usize> {
        self.iter()
            .map(VideoClip::len)
            .min()
            .ok_or_else(|| Error::Input("empty dataset".into()))
    }
}

impl ClipSource for Vec<VideoClip> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn clip(&self, index: usize) -> Result<VideoClip> {
        self.as_slice().clip(index)
    }

    fn min_clip_len(&self) -> Result<usize> {
        self.as_slice().min_clip_len()
    }
}

/// Settings of the synthetic moving-glyph generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub glyph_size: usize,
    /// Frames per clip (keypoints per stroke).
    pub frames: usize,
    pub step_range: (f64, f64),
    pub shapes: Vec<GlyphShape>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            height: 64,
            width: 64,
            glyph_size: 16,
            frames: 17,
            step_range: (2.0, 6.0),
            shapes: GlyphShape::ALL.to_vec(),
            seed: 0,
        }
    }
}

/// Clips generated on demand; clip `i` depends only on `(config, i)`.
///
/// Keypoints are snapped so that each glyph's centroid lands exactly on them.
#[derive(Clone, Debug)]
pub struct SyntheticClips {
    config: SynthConfig,
    glyphs: Vec<Glyph>,
    count: usize,
}

impl SyntheticClips {
    pub fn new(config: SynthConfig, count: usize) -> Result<Self> {
        let glyphs = config
            .shapes
            .iter()
            .map(|&s| Glyph::procedural(s, config.glyph_size))
            .collect::<Result<Vec<_>>>()?;
        Self::with_glyphs(config, glyphs, count)
    }

    /// Uses the given glyphs (for example loaded digits) instead of shapes.
    pub fn with_glyphs(config: SynthConfig, glyphs: Vec<Glyph>, count: usize) -> Result<Self> {
        if glyphs.is_empty() {
            return Err(Error::Input("at least one glyph is required".into()));
        }
        if config.frames < 2 {
            return Err(Error::Input("synthetic clips need at least two frames".into()));
        }
        if glyphs.iter().any(|g| g.size() >= config.height.min(config.width)) {
            return Err(Error::Input("glyph larger than canvas".into()));
        }
        Ok(SyntheticClips {
            config,
            glyphs,
            count,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    /// Glyph index and snapped keypoints of clip `index`.
    pub fn trajectory(&self, index: usize) -> Result<(usize, StrokeKeypoints)> {
        let c = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        rng.set_stream(index as u64);
        let gi = rng.gen_range(0..self.glyphs.len());
        let glyph = &self.glyphs[gi];
        let ((lx, hx), (ly, hy)) = glyph.margins();
        let (cx, cy) = glyph.centroid();
        let inner = (c.height - ly - hy, c.width - lx - hx);
        let raw = strokes::gen_random_trajectory(c.frames - 1, inner, c.step_range, rng.gen())?;
        let snap = |v: f64, lo: usize, centre: f64| libm::round(v + lo as f64 - centre) + centre;
        let points = raw
            .points()
            .iter()
            .map(|p| Point::new(snap(p.x, lx, cx), snap(p.y, ly, cy)))
            .collect();
        Ok((gi, StrokeKeypoints::new(points, c.height, c.width)?))
    }
}

impl ClipSource for SyntheticClips {
    fn len(&self) -> usize {
        self.count
    }

    fn clip(&self, index: usize) -> Result<VideoClip> {
        if index >= self.count {
            return Err(Error::Input(alloc::format!("no clip {index}")));
        }
        let (gi, kp) = self.trajectory(index)?;
        make_moving_glyph_clip(&self.glyphs[gi], &kp, (self.config.height, self.config.width))
    }

    fn min_clip_len(&self) -> Result<usize> {
        if self.count == 0 {
            return Err(Error::Input("empty dataset".into()));
        }
        Ok(self.config.frames)
    }
}

/// `B` equally long sub-clips with their stroke rasters, stacked per time step.
#[derive(Clone, Debug)]
pub struct TrainingBatch {
    /// `T + 1` tensors of shape `(B, C, H, W)`.
    pub frames: Vec<Tensor<f32>>,
    /// Full-path rasters `(B, 1, H, W)`.
    pub full: Tensor<f32>,
    /// `T` one-segment rasters `(B, 1, H, W)`.
    pub instant: Vec<Tensor<f32>>,
    pub keypoints: Vec<StrokeKeypoints>,
    /// Source clip index of every member.
    pub indices: Vec<usize>,
}

impl TrainingBatch {
    pub fn from_clips(clips: &[VideoClip]) -> Result<Self> {
        let first = clips
            .first()
            .ok_or_else(|| Error::Input("a batch needs at least one clip".into()))?;
        let len = first.len();
        if len < 2 || clips.iter().any(|c| c.len() != len) {
            return Err(Error::Input("batch clips must share a length of at least 2".into()));
        }
        let stack = |ts: Vec<Tensor<f32>>| -> Result<Tensor<f32>> {
            let refs: Vec<&Tensor<f32>> = ts.iter().collect();
            Tensor::stack_batch(&refs)
        };
        let frames = (0..len)
            .map(|t| {
                stack(
                    clips
                        .iter()
                        .map(|c| {
                            let f = c.frames()[t].tensor();
                            let s = f.shape();
                            f.clone().reshape(&[1, s[0], s[1], s[2]])
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let full = stack(
            clips
                .iter()
                .map(|c| raster_tensor(&strokes::rasterize_stroke(c.keypoints())))
                .collect(),
        )?;
        let instant = (0..len - 1)
            .map(|t| {
                stack(
                    clips
                        .iter()
                        .map(|c| strokes::instant_stroke(c.keypoints(), t).map(|r| raster_tensor(&r)))
                        .collect::<Result<Vec<_>>>()?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingBatch {
            frames,
            full,
            instant,
            keypoints: clips.iter().map(|c| c.keypoints().clone()).collect(),
            indices: Vec::new(),
        })
    }

    pub fn batch_size(&self) -> usize {
        self.full.shape()[0]
    }

    /// Number of predicted steps `T`.
    pub fn steps(&self) -> usize {
        self.instant.len()
    }
}

/// Seeded batch stream. Every epoch visits a fresh permutation of the source;
/// batch `k` is a pure function of `(seed, k)`, so a stream can resume at
/// any step.
pub struct BatchIterator<'a, S: ClipSource + ?Sized> {
    source: &'a S,
    batch_size: usize,
    clip_len: usize,
    seed: u64,
    step: u64,
    epoch: Option<(u64, Vec<usize>)>,
}

impl<'a, S: ClipSource + ?Sized> BatchIterator<'a, S> {
    pub fn new(source: &'a S, batch_size: usize, clip_len: usize, seed: u64) -> Result<Self> {
        if source.is_empty() {
            return Err(Error::Input("cannot batch an empty dataset".into()));
        }
        if batch_size == 0 {
            return Err(Error::Input("batch size must be positive".into()));
        }
        if clip_len < 2 {
            return Err(Error::Input("clip length must be at least 2".into()));
        }
        let shortest = source.min_clip_len()?;
        if clip_len > shortest {
            return Err(Error::Input(alloc::format!(
                "clip length {clip_len} exceeds the shortest clip ({shortest})"
            )));
        }
        Ok(BatchIterator {
            source,
            batch_size,
            clip_len,
            seed,
            step: 0,
            epoch: None,
        })
    }

    /// Continue from batch `step`.
    pub fn starting_at(mut self, step: u64) -> Self {
        self.step = step;
        self
    }

    pub fn batches_per_epoch(&self) -> u64 {
        self.source.len().div_ceil(self.batch_size) as u64
    }

    /// Source indices of batch `step`.
    pub fn indices_at(&mut self, step: u64) -> Vec<usize> {
        let n = self.source.len();
        let per_epoch = self.batches_per_epoch();
        let epoch = step / per_epoch;
        if self.epoch.as_ref().map(|e| e.0) != Some(epoch) {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(epoch);
            order.shuffle(&mut rng);
            self.epoch = Some((epoch, order));
        }
        let order = &self.epoch.as_ref().expect("epoch order").1;
        let base = (step % per_epoch) as usize * self.batch_size;
        (0..self.batch_size).map(|j| order[(base + j) % n]).collect()
    }

    pub fn batch_at(&mut self, step: u64) -> Result<TrainingBatch> {
        let indices = self.indices_at(step);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_0ff5_e7c1_1b5a);
        rng.set_stream(step);
        let clips = indices
            .iter()
            .map(|&i| {
                let clip = self.source.clip(i)?;
                let start = rng.gen_range(0..=clip.len() - self.clip_len);
                clip.window(start, self.clip_len)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut batch = TrainingBatch::from_clips(&clips)?;
        batch.indices = indices;
        Ok(batch)
    }
}

impl<S: ClipSource + ?Sized> Iterator for BatchIterator<'_, S> {
    type Item = Result<TrainingBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        let batch = self.batch_at(self.step);
        self.step += 1;
        Some(batch)
    }
}
