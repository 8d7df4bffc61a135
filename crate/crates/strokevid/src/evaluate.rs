//! Held-out evaluation: per-step image similarity and stroke adherence.

use std::fmt::Write;

use strokevid_core::data::VideoClip;
use strokevid_core::metrics::{psnr, ssim, stroke_adherence, Adherence, MetricSeries};
use strokevid_core::{Frame, Model};

use crate::{format_err, Result};

/// Aggregates over clips for one predicted step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRow {
    /// 1 for the first predicted frame.
    pub step: usize,
    pub psnr: MetricSeries,
    pub ssim: MetricSeries,
    /// Adherence of every clip at this step; `None` where the frame was black.
    pub adherence: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<StepRow>,
    /// Per-clip adherence over all predicted steps.
    pub per_clip: Vec<Adherence>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl EvaluationReport {
    pub fn clips(&self) -> usize {
        self.per_clip.len()
    }

    pub fn mean_psnr(&self) -> f64 {
        mean(&self.rows.iter().flat_map(|r| r.psnr.values.iter().copied()).collect::<Vec<_>>())
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(&self.rows.iter().flat_map(|r| r.ssim.values.iter().copied()).collect::<Vec<_>>())
    }

    /// Mean over clips of each clip's adherence on `steps` (0-based frame
    /// indices). Clips without any measurable frame are skipped.
    pub fn adherence_over(&self, steps: std::ops::Range<usize>) -> Option<f64> {
        let per: Vec<f64> = self
            .per_clip
            .iter()
            .filter_map(|a| a.slice(steps.clone()).mean())
            .collect();
        (!per.is_empty()).then(|| mean(&per))
    }

    pub fn mean_adherence(&self) -> Option<f64> {
        self.adherence_over(0..self.rows.len())
    }

    pub fn missing(&self) -> usize {
        self.per_clip.iter().map(Adherence::missing).sum()
    }

    /// Plain-text report: one tab-separated row per step, then a summary.
    pub fn to_table(&self) -> String {
        let mut s = String::from("step\tpsnr_mean\tpsnr_std\tssim_mean\tssim_std\tadherence_mean\tmissing\n");
        for r in &self.rows {
            let seen: Vec<f64> = r.adherence.iter().flatten().copied().collect();
            let adh = if seen.is_empty() { f64::NAN } else { mean(&seen) };
            let _ = writeln!(
                s,
                "{}\t{:.4}\t{:.4}\t{:.6}\t{:.6}\t{:.4}\t{}",
                r.step,
                r.psnr.mean(),
                r.psnr.std(),
                r.ssim.mean(),
                r.ssim.std(),
                adh,
                r.adherence.len() - seen.len()
            );
        }
        let _ = writeln!(s, "\nclips\t{}", self.clips());
        let _ = writeln!(s, "psnr_mean\t{:.4}", self.mean_psnr());
        let _ = writeln!(s, "ssim_mean\t{:.6}", self.mean_ssim());
        let _ = writeln!(
            s,
            "adherence_mean_px\t{:.4}",
            self.mean_adherence().unwrap_or(f64::NAN)
        );
        let _ = writeln!(s, "adherence_missing\t{}", self.missing());
        s
    }
}

/// Scores `predicted[i]` against frames `1..=T` of `clips[i]` and its
/// keypoints `0..=T`, where `T` is the prediction length.
pub fn evaluate_predictions(predicted: &[Vec<Frame>], clips: &[VideoClip]) -> Result<EvaluationReport> {
    if clips.is_empty() {
        return Err(format_err("the evaluation set is empty"));
    }
    if predicted.len() != clips.len() {
        return Err(format_err("one prediction per clip is required"));
    }
    let steps = predicted[0].len();
    let mut rows: Vec<StepRow> = (0..steps)
        .map(|t| StepRow {
            step: t + 1,
            psnr: MetricSeries { values: Vec::new() },
            ssim: MetricSeries { values: Vec::new() },
            adherence: Vec::new(),
        })
        .collect();
    let mut per_clip = Vec::with_capacity(clips.len());
    for (pred, clip) in predicted.iter().zip(clips) {
        if pred.len() != steps || clip.len() < steps + 1 {
            return Err(format_err(format!(
                "{} predicted frames against a clip of {}",
                pred.len(),
                clip.len()
            )));
        }
        let adherence = stroke_adherence(pred, &clip.keypoints().window(0, steps + 1)?)?;
        for (t, row) in rows.iter_mut().enumerate() {
            let gt = &clip.frames()[t + 1];
            row.psnr.values.push(psnr(&pred[t], gt)?);
            row.ssim.values.push(ssim(&pred[t], gt)?);
            row.adherence.push(adherence.per_step[t]);
        }
        per_clip.push(adherence);
    }
    Ok(EvaluationReport { rows, per_clip })
}

/// Rolls `model` out for `steps` frames from the first frame of every clip.
pub fn predict(model: &Model, clips: &[VideoClip], steps: usize, chunk: usize) -> Result<Vec<Vec<Frame>>> {
    let mut out = Vec::with_capacity(clips.len());
    for part in clips.chunks(chunk.max(1)) {
        let firsts: Vec<&Frame> = part.iter().map(|c| &c.frames()[0]).collect();
        let kps: Vec<_> = part.iter().map(|c| c.keypoints()).collect();
        out.extend(model.rollout_batch(&firsts, &kps, steps)?);
    }
    Ok(out)
}

pub fn evaluate_model(model: &Model, clips: &[VideoClip], steps: usize) -> Result<EvaluationReport> {
    if clips.is_empty() {
        return Err(format_err("the evaluation set is empty"));
    }
    evaluate_predictions(&predict(model, clips, steps, 16)?, clips)
}

/// Scores each clip's own frames against itself.
pub fn evaluate_ground_truth(clips: &[VideoClip]) -> Result<EvaluationReport> {
    let predicted: Vec<Vec<Frame>> = clips.iter().map(|c| c.frames()[1..].to_vec()).collect();
    evaluate_predictions(&predicted, clips)
}
