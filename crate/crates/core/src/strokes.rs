//! Motion strokes: keypoint paths, their grayscale-time rasters, random
//! trajectories, and the plain-text keypoint document.
//!
//! A raster has a white (1.0) background. Keypoint `t` of a path with `n`
//! points is drawn with intensity `0.75 * t / (n - 1)`, so the path starts
//! black and ends light grey. Consecutive keypoints are joined by one pixel
//! wide segments whose intensity is interpolated linearly; segments are
//! painted in time order so later samples overwrite earlier ones.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Intensity of the final keypoint of a stroke.
pub const STROKE_END_INTENSITY: f32 = 0.75;

/// Raster background value.
pub const BACKGROUND: f32 = 1.0;

/// A point in pixel coordinates: `x` is the column, `y` the row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    fn pixel(self) -> (usize, usize) {
        (libm::round(self.y) as usize, libm::round(self.x) as usize)
    }
}

/// An ordered keypoint path on a `height x width` canvas; one point per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeKeypoints {
    points: Vec<Point>,
    height: usize,
    width: usize,
}

impl StrokeKeypoints {
    pub fn new(points: Vec<Point>, height: usize, width: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("a stroke needs at least one keypoint".into()));
        }
        for (t, p) in points.iter().enumerate() {
            let inside = p.x.is_finite()
                && p.y.is_finite()
                && p.x >= 0.0
                && p.y >= 0.0
                && p.x <= (width as f64 - 1.0)
                && p.y <= (height as f64 - 1.0);
            if !inside {
                return Err(Error::Input(alloc::format!(
                    "keypoint {t} at ({}, {}) is outside the {height}x{width} canvas",
                    p.x,
                    p.y
                )));
            }
        }
        Ok(StrokeKeypoints {
            points,
            height,
            width,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The sub-path `start..start + len`, re-timed so it starts at index 0.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.points.len() {
            return Err(Error::Input(alloc::format!(
                "window {start}..{} outside stroke of {} points",
                start + len,
                self.points.len()
            )));
        }
        Ok(StrokeKeypoints {
            points: self.points[start..start + len].to_vec(),
            height: self.height,
            width: self.width,
        })
    }

    /// Same path moved by `(dx, dy)`; fails if it leaves the canvas.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| Point::new(p.x + dx, p.y + dy))
            .collect();
        Self::new(points, self.height, self.width)
    }

    /// Intensity assigned to keypoint `t`.
    pub fn intensity(&self, t: usize) -> f32 {
        time_intensity(t, self.points.len() - 1)
    }
}

fn time_intensity(t: usize, last: usize) -> f32 {
    if last == 0 {
        0.0
    } else {
        (STROKE_END_INTENSITY as f64 * t as f64 / last as f64) as f32
    }
}

/// Whether a raster encodes the whole path or a single segment of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RasterRole {
    Full,
    Instant,
}

/// A `height x width` grayscale stroke image in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeRaster {
    pixels: Vec<f32>,
    height: usize,
    width: usize,
    role: RasterRole,
}

impl StrokeRaster {
    fn blank(height: usize, width: usize, role: RasterRole) -> Self {
        StrokeRaster {
            pixels: vec![BACKGROUND; height * width],
            height,
            width,
            role,
        }
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn role(&self) -> RasterRole {
        self.role
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    /// Row-major indices of every non-background pixel.
    pub fn stroke_pixels(&self) -> Vec<usize> {
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < BACKGROUND)
            .map(|(i, _)| i)
            .collect()
    }

    fn plot(&mut self, p: Point, value: f32) {
        let (r, c) = p.pixel();
        if r < self.height && c < self.width {
            self.pixels[r * self.width + c] = value;
        }
    }

    fn draw_segment(&mut self, a: Point, b: Point, va: f32, vb: f32) {
        let steps = libm::ceil(libm::fmax((b.x - a.x).abs(), (b.y - a.y).abs())) as usize;
        let steps = steps.max(1);
        for i in 0..=steps {
            let s = i as f64 / steps as f64;
            let p = Point::new(a.x + (b.x - a.x) * s, a.y + (b.y - a.y) * s);
            let v = va as f64 + (vb as f64 - va as f64) * s;
            self.plot(p, v as f32);
        }
    }
}

/// Rasterizes the full path with grayscale time encoding.
pub fn rasterize_stroke(kp: &StrokeKeypoints) -> StrokeRaster {
    let mut raster = StrokeRaster::blank(kp.height, kp.width, RasterRole::Full);
    let last = kp.points.len() - 1;
    if last == 0 {
        raster.plot(kp.points[0], 0.0);
        return raster;
    }
    for t in 0..last {
        raster.draw_segment(
            kp.points[t],
            kp.points[t + 1],
            time_intensity(t, last),
            time_intensity(t + 1, last),
        );
    }
    raster
}

/// Rasterizes only the segment from keypoint `t` to `t + 1`, keeping the
/// intensities it has in the full raster.
pub fn instant_stroke(kp: &StrokeKeypoints, t: usize) -> Result<StrokeRaster> {
    let last = kp.points.len() - 1;
    if t >= last {
        return Err(Error::Input(alloc::format!(
            "segment {t} does not exist in a stroke of {} keypoints",
            kp.points.len()
        )));
    }
    let mut raster = StrokeRaster::blank(kp.height, kp.width, RasterRole::Instant);
    raster.draw_segment(
        kp.points[t],
        kp.points[t + 1],
        time_intensity(t, last),
        time_intensity(t + 1, last),
    );
    Ok(raster)
}

/// Smooth random walk of `steps + 1` keypoints inside a `height x width`
/// canvas. Each step turns by a uniform angle in ±45° and has a length drawn
/// uniformly from `step_range`; a step that would leave the canvas has the
/// offending direction components mirrored.
pub fn gen_random_trajectory(
    steps: usize,
    bounds: (usize, usize),
    step_range: (f64, f64),
    seed: u64,
) -> Result<StrokeKeypoints> {
    let (height, width) = bounds;
    let (lo, hi) = step_range;
    if steps == 0 {
        return Err(Error::Input("a trajectory needs at least one step".into()));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
        return Err(Error::Input(alloc::format!("invalid step range ({lo}, {hi})")));
    }
    let span = height.min(width) as f64 - 1.0;
    if span < 2.0 * hi {
        return Err(Error::Input(alloc::format!(
            "canvas {height}x{width} too small for steps up to {hi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (xmax, ymax) = (width as f64 - 1.0, height as f64 - 1.0);
    let mut p = Point::new(rng.gen_range(0.0..=xmax), rng.gen_range(0.0..=ymax));
    let mut angle: f64 = rng.gen_range(0.0..core::f64::consts::TAU);
    let jitter = core::f64::consts::FRAC_PI_4;
    let mut points = Vec::with_capacity(steps + 1);
    points.push(p);
    for _ in 0..steps {
        angle += rng.gen_range(-jitter..=jitter);
        let len = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let (mut dx, mut dy) = (libm::cos(angle), libm::sin(angle));
        let nx = p.x + len * dx;
        if !(0.0..=xmax).contains(&nx) {
            dx = -dx;
        }
        let ny = p.y + len * dy;
        if !(0.0..=ymax).contains(&ny) {
            dy = -dy;
        }
        angle = libm::atan2(dy, dx);
        p = Point::new(
            (p.x + len * dx).clamp(0.0, xmax),
            (p.y + len * dy).clamp(0.0, ymax),
        );
        points.push(p);
    }
    StrokeKeypoints::new(points, height, width)
}

/// Axis-aligned box in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

/// One keypoint per box, at the box centre.
pub fn track_to_keypoints(
    boxes: &[BoundingBox],
    height: usize,
    width: usize,
) -> Result<StrokeKeypoints> {
    if boxes.is_empty() {
        return Err(Error::Input("no boxes to track".into()));
    }
    let points = boxes
        .iter()
        .map(|b| Point::new((b.x0 + b.x1) / 2.0, (b.y0 + b.y1) / 2.0))
        .collect();
    StrokeKeypoints::new(points, height, width)
}

const KEYPOINTS_MAGIC: &str = "strokevid-keypoints 1";

/// Serializes keypoints as the shared plain-text document:
///
/// ```text
/// strokevid-keypoints 1
/// canvas <height> <width>
/// <t> <x> <y>
/// ```
///
/// Coordinates use the shortest exact decimal form, so parsing round-trips.
pub fn keypoints_to_text(kp: &StrokeKeypoints) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{KEYPOINTS_MAGIC}");
    let _ = writeln!(s, "canvas {} {}", kp.height, kp.width);
    for (t, p) in kp.points.iter().enumerate() {
        let _ = writeln!(s, "{t} {:?} {:?}", p.x, p.y);
    }
    s
}

/// Parses a keypoint document. Blank lines and `#` comments are ignored.
pub fn keypoints_from_text(text: &str) -> Result<StrokeKeypoints> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some(KEYPOINTS_MAGIC) {
        return Err(Error::Format("missing keypoints header".into()));
    }
    let canvas = lines
        .next()
        .ok_or_else(|| Error::Format("missing canvas line".into()))?;
    let mut fields = canvas.split_whitespace();
    if fields.next() != Some("canvas") {
        return Err(Error::Format(alloc::format!("bad canvas line: {canvas}")));
    }
    let height = parse_field::<usize>(fields.next(), "canvas height")?;
    let width = parse_field::<usize>(fields.next(), "canvas width")?;
    let mut points = Vec::new();
    for line in lines {
        let mut f = line.split_whitespace();
        let t = parse_field::<usize>(f.next(), "time index")?;
        if t != points.len() {
            return Err(Error::Format(alloc::format!(
                "expected time index {}, found {t}",
                points.len()
            )));
        }
        let x = parse_field::<f64>(f.next(), "x")?;
        let y = parse_field::<f64>(f.next(), "y")?;
        if f.next().is_some() {
            return Err(Error::Format(alloc::format!("trailing fields in: {line}")));
        }
        points.push(Point::new(x, y));
    }
    StrokeKeypoints::new(points, height, width)
}

fn parse_field<T: core::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| Error::Format(alloc::format!("invalid or missing {what}")))
}
