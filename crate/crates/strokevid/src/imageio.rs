//! Frame <-> 8-bit image conversion, PNG and GIF encoding.

use std::io::Cursor;

use image::codecs::gif::{GifEncoder, Repeat};
use image::{DynamicImage, GrayImage, ImageFormat, RgbImage, RgbaImage};
use strokevid_core::Frame;

use crate::{format_err, Result};

/// The intensity an 8-bit sample stands for.
pub fn unit(b: u8) -> f32 {
    b as f32 / 255.0
}

/// Nearest 8-bit sample.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Interleaved (`HWC`) 8-bit samples, rounding to the nearest level.
pub fn frame_samples(frame: &Frame) -> Vec<u8> {
    interleave(frame, quantize)
}

/// Interleaved 8-bit samples, failing unless every value is exactly
/// `k / 255` for some byte `k`.
pub fn exact_samples(frame: &Frame) -> Result<Vec<u8>> {
    if let Some(v) = frame.data().iter().find(|&&v| unit(quantize(v)).to_bits() != v.to_bits()) {
        return Err(format_err(format!("pixel value {v} has no exact 8-bit representation")));
    }
    Ok(frame_samples(frame))
}

fn interleave(frame: &Frame, f: impl Fn(f32) -> u8) -> Vec<u8> {
    let (c, h, w) = (frame.channels(), frame.height(), frame.width());
    let data = frame.data();
    let mut out = vec![0u8; c * h * w];
    for ch in 0..c {
        for i in 0..h * w {
            out[i * c + ch] = f(data[ch * h * w + i]);
        }
    }
    out
}

/// Frame from interleaved 8-bit samples.
pub fn frame_from_samples(channels: usize, height: usize, width: usize, samples: &[u8]) -> Result<Frame> {
    if samples.len() != channels * height * width {
        return Err(format_err("sample count does not match the image size"));
    }
    let mut data = vec![0.0f32; samples.len()];
    for ch in 0..channels {
        for i in 0..height * width {
            data[ch * height * width + i] = unit(samples[i * channels + ch]);
        }
    }
    Ok(Frame::from_vec(channels, height, width, data)?)
}

fn to_image(frame: &Frame, samples: Vec<u8>) -> Result<DynamicImage> {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    let img = match frame.channels() {
        1 => GrayImage::from_raw(w, h, samples).map(DynamicImage::ImageLuma8),
        3 => RgbImage::from_raw(w, h, samples).map(DynamicImage::ImageRgb8),
        c => return Err(format_err(format!("cannot encode {c}-channel frames"))),
    };
    img.ok_or_else(|| format_err("image buffer size mismatch"))
}

fn png_bytes(img: &DynamicImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| format_err(format!("png encoding failed: {e}")))?;
    Ok(out.into_inner())
}

/// PNG of the nearest 8-bit rendering of `frame`.
pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    png_bytes(&to_image(frame, frame_samples(frame))?)
}

/// Lossless PNG; fails for values that are not 8-bit levels.
pub fn encode_png_exact(frame: &Frame) -> Result<Vec<u8>> {
    png_bytes(&to_image(frame, exact_samples(frame)?)?)
}

/// Image dimensions `(width, height)` from a PNG header without decoding
/// the pixels.
pub fn png_dimensions(bytes: &[u8]) -> Result<(u32, u32)> {
    let reader = image::ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
    reader
        .into_dimensions()
        .map_err(|e| format_err(format!("unreadable png: {e}")))
}

/// Decodes a PNG into a frame with `channels` channels (1 = luma, 3 = RGB).
pub fn decode_png(bytes: &[u8], channels: usize) -> Result<Frame> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| format_err(format!("unreadable png: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let samples = match channels {
        1 => img.into_luma8().into_raw(),
        3 => img.into_rgb8().into_raw(),
        c => return Err(format_err(format!("cannot decode into {c} channels"))),
    };
    frame_from_samples(channels, h, w, &samples)
}

/// Animated GIF of `frames`, looping forever, `delay_ms` per frame.
pub fn encode_gif(frames: &[Frame], delay_ms: u32) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = GifEncoder::new_with_speed(&mut out, 10);
        enc.set_repeat(Repeat::Infinite)
            .map_err(|e| format_err(format!("gif encoding failed: {e}")))?;
        for f in frames {
            let rgb = frame_samples(f);
            let (c, n) = (f.channels(), f.height() * f.width());
            let mut rgba = Vec::with_capacity(n * 4);
            for i in 0..n {
                let px = if c == 1 {
                    [rgb[i]; 3]
                } else {
                    [rgb[i * 3], rgb[i * 3 + 1], rgb[i * 3 + 2]]
                };
                rgba.extend_from_slice(&px);
                rgba.push(255);
            }
            let buf = RgbaImage::from_raw(f.width() as u32, f.height() as u32, rgba)
                .ok_or_else(|| format_err("image buffer size mismatch"))?;
            let frame = image::Frame::from_parts(buf, 0, 0, image::Delay::from_numer_denom_ms(delay_ms, 1));
            enc.encode_frame(frame)
                .map_err(|e| format_err(format!("gif encoding failed: {e}")))?;
        }
    }
    Ok(out)
}
