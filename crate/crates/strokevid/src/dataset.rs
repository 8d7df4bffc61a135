//! On-disk clip datasets.
//!
//! ```text
//! <root>/manifest.json
//! <root>/clip_00000/frame_000.png ... frame_016.png
//! <root>/clip_00000/keypoints.txt
//! ```
//!
//! Frames are lossless 8-bit PNGs, so only values of the form `k / 255` can
//! be stored; everything read back is bit-identical to what was written.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strokevid_core::data::{ClipSource, VideoClip};
use strokevid_core::strokes::{keypoints_from_text, keypoints_to_text};

use crate::imageio::{decode_png, encode_png_exact};
use crate::{format_err, io_err, Result};

pub const MANIFEST: &str = "manifest.json";
pub const KEYPOINTS_FILE: &str = "keypoints.txt";
const FORMAT_NAME: &str = "strokevid-dataset";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub name: String,
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    /// `[channels, height, width]`, absent for an empty dataset.
    pub frame_shape: Option<[usize; 3]>,
    pub clips: Vec<ClipEntry>,
}

pub fn clip_dir_name(index: usize) -> String {
    format!("clip_{index:05}")
}

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:03}.png")
}

/// Writes every clip of `source` under `root`.
///
/// `root` must be absent, empty, or an earlier dataset, which is replaced.
pub fn write_dataset<S: ClipSource + ?Sized>(source: &S, root: &Path) -> Result<Manifest> {
    prepare_root(root)?;
    let mut manifest = Manifest {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        frame_shape: None,
        clips: Vec::with_capacity(source.len()),
    };
    for i in 0..source.len() {
        let clip = source.clip(i)?;
        let shape = clip
            .frames()
            .first()
            .map(|f| [f.channels(), f.height(), f.width()]);
        match (manifest.frame_shape, shape) {
            (None, s) => manifest.frame_shape = s,
            (Some(a), Some(b)) if a != b => {
                return Err(format_err(format!("clip {i} has frame shape {b:?}, expected {a:?}")))
            }
            _ => {}
        }
        let name = clip_dir_name(i);
        write_clip(&clip, &root.join(&name))?;
        manifest.clips.push(ClipEntry {
            name,
            frames: clip.len(),
        });
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = root.join(MANIFEST);
    fs::write(&path, json + "\n").map_err(io_err(path))?;
    Ok(manifest)
}

fn prepare_root(root: &Path) -> Result<()> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let manifest = root.join(MANIFEST);
    if manifest.exists() {
        let old = read_manifest(root)?;
        for c in &old.clips {
            let dir = root.join(&c.name);
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(io_err(dir))?;
            }
        }
        fs::remove_file(&manifest).map_err(io_err(&manifest))?;
    }
    let mut entries = fs::read_dir(root).map_err(io_err(root))?;
    if entries.next().is_some() {
        return Err(format_err(format!(
            "{} is neither empty nor a dataset",
            root.display()
        )));
    }
    Ok(())
}

fn write_clip(clip: &VideoClip, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (t, frame) in clip.frames().iter().enumerate() {
        let path = dir.join(frame_file_name(t));
        fs::write(&path, encode_png_exact(frame)?).map_err(io_err(path))?;
    }
    let path = dir.join(KEYPOINTS_FILE);
    fs::write(&path, keypoints_to_text(clip.keypoints())).map_err(io_err(path))?;
    Ok(())
}

fn read_manifest(root: &Path) -> Result<Manifest> {
    let path = root.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| format_err(format!("{}: {e}", path.display())))?;
    if m.format != FORMAT_NAME || m.version != FORMAT_VERSION {
        return Err(format_err(format!(
            "unsupported dataset format {} v{}",
            m.format, m.version
        )));
    }
    Ok(m)
}

/// A dataset on disk; clips are decoded on demand.
#[derive(Clone, Debug)]
pub struct DatasetReader {
    root: PathBuf,
    manifest: Manifest,
}

impl DatasetReader {
    /// Reads the manifest and checks that every listed file is present.
    pub fn open(root: &Path) -> Result<Self> {
        let manifest = read_manifest(root)?;
        if manifest.clips.iter().any(|c| c.frames == 0) {
            return Err(format_err("manifest lists a clip without frames"));
        }
        if !manifest.clips.is_empty() && manifest.frame_shape.is_none() {
            return Err(format_err("manifest lacks the frame shape"));
        }
        for c in &manifest.clips {
            let dir = root.join(&c.name);
            let pngs = fs::read_dir(&dir)
                .map_err(|e| format_err(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok())
                .filter(|e| e.file_name().to_string_lossy().ends_with(".png"))
                .count();
            if pngs != c.frames {
                return Err(format_err(format!(
                    "{} holds {pngs} frames, manifest lists {}",
                    c.name, c.frames
                )));
            }
            for f in (0..c.frames).map(frame_file_name).chain([KEYPOINTS_FILE.to_string()]) {
                if !dir.join(&f).is_file() {
                    return Err(format_err(format!("{}/{f} is missing", c.name)));
                }
            }
        }
        Ok(DatasetReader {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Decodes every clip.
    pub fn read_all(&self) -> Result<Vec<VideoClip>> {
        (0..self.manifest.clips.len()).map(|i| self.read_clip(i)).collect()
    }

    pub fn read_clip(&self, index: usize) -> Result<VideoClip> {
        let entry = self
            .manifest
            .clips
            .get(index)
            .ok_or_else(|| format_err(format!("no clip {index}")))?;
        let [channels, height, width] = self.manifest.frame_shape.expect("checked on open");
        let dir = self.root.join(&entry.name);
        let frames = (0..entry.frames)
            .map(|t| {
                let path = dir.join(frame_file_name(t));
                let bytes = fs::read(&path).map_err(io_err(&path))?;
                let frame = decode_png(&bytes, channels)?;
                if (frame.height(), frame.width()) != (height, width) {
                    return Err(format_err(format!("{} has the wrong size", path.display())));
                }
                Ok(frame)
            })
            .collect::<Result<Vec<_>>>()?;
        let path = dir.join(KEYPOINTS_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let kp = keypoints_from_text(&text)?;
        VideoClip::new(frames, kp).map_err(|e| format_err(format!("{}: {e}", entry.name)))
    }
}

impl ClipSource for DatasetReader {
    fn len(&self) -> usize {
        self.manifest.clips.len()
    }

    fn clip(&self, index: usize) -> strokevid_core::Result<VideoClip> {
        self.read_clip(index)
            .map_err(|e| strokevid_core::Error::Format(e.to_string()))
    }

    fn min_clip_len(&self) -> strokevid_core::Result<usize> {
        self.manifest
            .clips
            .iter()
            .map(|c| c.frames)
            .min()
            .ok_or_else(|| strokevid_core::Error::Input("empty dataset".into()))
    }
}
