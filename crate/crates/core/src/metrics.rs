//! Image similarity and stroke adherence.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::Frame;
use crate::real::Real;
use crate::strokes::StrokeKeypoints;
use crate::{Error, Result};

/// Value returned by [`psnr`] for identical frames.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_shape<F: Real>(a: &Frame<F>, b: &Frame<F>) -> Result<()> {
    if a.tensor().shape() != b.tensor().shape() {
        return Err(Error::Input(alloc::format!(
            "frame shapes differ: {:?} vs {:?}",
            a.tensor().shape(),
            b.tensor().shape()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio for peak value 1, capped at [`PSNR_CAP`].
pub fn psnr<F: Real>(a: &Frame<F>, b: &Frame<F>) -> Result<f64> {
    same_shape(a, b)?;
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * libm::log10(1.0 / mse)).min(PSNR_CAP))
}

/// Normalized 1D Gaussian taps of the SSIM window.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - c;
        *t = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Valid-mode separable Gaussian filtering of an `h x w` plane.
fn filter(plane: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * plane[r * w + c + k])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[(r + k) * ow + c])
                .sum();
        }
    }
    out
}

/// Mean local SSIM over all fully contained 11x11 Gaussian windows,
/// averaged over channels.
pub fn ssim<F: Real>(a: &Frame<F>, b: &Frame<F>) -> Result<f64> {
    same_shape(a, b)?;
    let (ch, h, w) = (a.channels(), a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Input(alloc::format!(
            "frames of {h}x{w} are smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let taps = gaussian_taps();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let plane = h * w;
    let mut total = 0.0;
    for c in 0..ch {
        let pa: Vec<f64> = a.data()[c * plane..(c + 1) * plane].iter().map(|v| v.as_f64()).collect();
        let pb: Vec<f64> = b.data()[c * plane..(c + 1) * plane].iter().map(|v| v.as_f64()).collect();
        let prod = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
        let mu_a = filter(&pa, h, w, &taps);
        let mu_b = filter(&pb, h, w, &taps);
        let e_aa = filter(&prod(&pa, &pa), h, w, &taps);
        let e_bb = filter(&prod(&pb, &pb), h, w, &taps);
        let e_ab = filter(&prod(&pa, &pb), h, w, &taps);
        let n = mu_a.len();
        let mut s = 0.0;
        for i in 0..n {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            s += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
        total += s / n as f64;
    }
    Ok(total / ch as f64)
}

/// Per-step values with their aggregates.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        libm::sqrt(self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn series<F: Real>(
    pred: &[Frame<F>],
    gt: &[Frame<F>],
    f: fn(&Frame<F>, &Frame<F>) -> Result<f64>,
) -> Result<MetricSeries> {
    if pred.len() != gt.len() {
        return Err(Error::Input(alloc::format!(
            "{} predicted frames but {} reference frames",
            pred.len(),
            gt.len()
        )));
    }
    Ok(MetricSeries {
        values: pred.iter().zip(gt).map(|(a, b)| f(a, b)).collect::<Result<_>>()?,
    })
}

pub fn psnr_series<F: Real>(pred: &[Frame<F>], gt: &[Frame<F>]) -> Result<MetricSeries> {
    series(pred, gt, psnr)
}

pub fn ssim_series<F: Real>(pred: &[Frame<F>], gt: &[Frame<F>]) -> Result<MetricSeries> {
    series(pred, gt, ssim)
}

/// Intensity centroid `(x, y)` of the channel-mean image, `None` when the
/// frame is entirely black.
pub fn intensity_centroid<F: Real>(frame: &Frame<F>) -> Option<(f64, f64)> {
    let (h, w) = (frame.height(), frame.width());
    let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            let v = frame.luminance(r, c).as_f64();
            m += v;
            mx += v * c as f64;
            my += v * r as f64;
        }
    }
    (m > 0.0).then(|| (mx / m, my / m))
}

/// Distances between generated objects and the keypoints they should follow.
#[derive(Clone, Debug, PartialEq)]
pub struct Adherence {
    /// Distance for every frame; `None` for all-black frames.
    pub per_step: Vec<Option<f64>>,
}

impl Adherence {
    /// Mean over the steps with a measurable centroid.
    pub fn mean(&self) -> Option<f64> {
        let seen: Vec<f64> = self.per_step.iter().flatten().copied().collect();
        (!seen.is_empty()).then(|| seen.iter().sum::<f64>() / seen.len() as f64)
    }

    pub fn missing(&self) -> usize {
        self.per_step.iter().filter(|d| d.is_none()).count()
    }

    /// Steps `range` only.
    pub fn slice(&self, range: core::ops::Range<usize>) -> Adherence {
        Adherence {
            per_step: self.per_step[range].to_vec(),
        }
    }
}

/// Centroid distance between generated frame `t` and keypoint `t + 1`.
pub fn stroke_adherence<F: Real>(clip: &[Frame<F>], kp: &StrokeKeypoints) -> Result<Adherence> {
    if clip.len() + 1 != kp.len() {
        return Err(Error::Input(alloc::format!(
            "{} generated frames need {} keypoints, got {}",
            clip.len(),
            clip.len() + 1,
            kp.len()
        )));
    }
    let per_step = clip
        .iter()
        .zip(&kp.points()[1..])
        .map(|(f, p)| intensity_centroid(f).map(|(x, y)| libm::hypot(x - p.x, y - p.y)))
        .collect();
    Ok(Adherence { per_step })
}
