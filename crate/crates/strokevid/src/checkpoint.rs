//! Checkpoint archives.
//!
//! A checkpoint is an uncompressed tar archive with fixed header fields
//! (zero timestamps and owners), so saving the same state twice gives the
//! same bytes. It holds `metadata.json` followed by one binary array per
//! entry: parameters under `params/`, spectral power vectors under `power/`
//! and Adam moments under `adam/<group>/{m,v}/`.
//!
//! An array is the magic `SVA1`, the number of dimensions and each
//! dimension as little-endian `u32`, then the values as little-endian
//! `f32` in row-major order.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strokevid_core::optim::Adam;
use strokevid_core::training::Trainer;
use strokevid_core::{Group, Model, ModelConfig, Tensor};

use crate::config::{ModelSettings, TrainSettings};
use crate::{format_err, io_err, Result};

const FORMAT_NAME: &str = "strokevid-checkpoint";
const FORMAT_VERSION: u32 = 1;
const ARRAY_MAGIC: &[u8; 4] = b"SVA1";
pub const METADATA: &str = "metadata.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub format: String,
    pub version: u32,
    /// Completed training steps.
    pub step: u64,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub generator_adam_step: u64,
    pub discriminator_adam_step: u64,
    /// Entry names in archive order.
    pub arrays: Vec<String>,
}

pub fn encode_array(shape: &[usize], values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * shape.len() + 4 * values.len());
    out.extend_from_slice(ARRAY_MAGIC);
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_array(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f32>)> {
    let bad = || format_err("malformed array");
    if bytes.get(..4) != Some(ARRAY_MAGIC.as_slice()) {
        return Err(bad());
    }
    let word = |i: usize| -> Result<usize> {
        let b = bytes.get(4 + 4 * i..8 + 4 * i).ok_or_else(bad)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    };
    let ndim = word(0)?;
    let shape = (1..=ndim).map(word).collect::<Result<Vec<_>>>()?;
    let body = &bytes[8 + 4 * ndim..];
    let n: usize = shape.iter().product();
    if body.len() != 4 * n {
        return Err(format_err(format!(
            "array of shape {shape:?} needs {} bytes, found {}",
            4 * n,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((shape, values))
}

fn group_dir(group: Group) -> &'static str {
    match group {
        Group::Generator => "generator",
        Group::Discriminator => "discriminator",
    }
}

/// Every array of a trainer, in archive order.
fn arrays(trainer: &Trainer) -> Vec<(String, Vec<u8>)> {
    let store = trainer.model().params();
    let mut out = Vec::new();
    for id in store.ids() {
        let name = store.name(id);
        let value = store.value(id);
        out.push((format!("params/{name}"), encode_array(value.shape(), value.data())));
        if let Some(p) = store.power_state(id) {
            out.push((format!("power/{name}.u"), encode_array(&[p.u.len()], &p.u)));
            out.push((format!("power/{name}.v"), encode_array(&[p.v.len()], &p.v)));
        }
    }
    for (group, opt) in [
        (Group::Generator, trainer.generator_optimizer()),
        (Group::Discriminator, trainer.discriminator_optimizer()),
    ] {
        let (m, v) = opt.moments();
        for (which, moments) in [("m", m), ("v", v)] {
            for (&id, t) in opt.ids().iter().zip(moments) {
                out.push((
                    format!("adam/{}/{which}/{}", group_dir(group), store.name(id)),
                    encode_array(t.shape(), t.data()),
                ));
            }
        }
    }
    out
}

fn append(builder: &mut tar::Builder<Vec<u8>>, name: &str, data: &[u8]) -> Result<()> {
    let mut header = tar::Header::new_ustar();
    header.set_size(data.len() as u64);
    header.set_mode(0o644);
    header.set_mtime(0);
    header.set_uid(0);
    header.set_gid(0);
    header.set_entry_type(tar::EntryType::Regular);
    builder
        .append_data(&mut header, name, data)
        .map_err(|e| format_err(format!("cannot archive {name}: {e}")))
}

/// Serializes the full training state.
pub fn to_bytes(trainer: &Trainer) -> Result<Vec<u8>> {
    let arrays = arrays(trainer);
    let meta = Metadata {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        step: trainer.step(),
        model: trainer.model().config().clone().into(),
        train: trainer.config().clone().into(),
        generator_adam_step: trainer.generator_optimizer().step,
        discriminator_adam_step: trainer.discriminator_optimizer().step,
        arrays: arrays.iter().map(|(n, _)| n.clone()).collect(),
    };
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    let mut builder = tar::Builder::new(Vec::new());
    builder.mode(tar::HeaderMode::Deterministic);
    append(&mut builder, METADATA, json.as_bytes())?;
    for (name, data) in &arrays {
        append(&mut builder, name, data)?;
    }
    builder
        .into_inner()
        .map_err(|e| format_err(format!("cannot finish archive: {e}")))
}

/// Writes through a temporary file so an interrupted save never leaves a
/// partial checkpoint behind.
pub fn save(trainer: &Trainer, path: &Path) -> Result<()> {
    let bytes = to_bytes(trainer)?;
    let tmp = path.with_extension("tar.partial");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn entries(bytes: &[u8]) -> Result<HashMap<String, Vec<u8>>> {
    let mut archive = tar::Archive::new(bytes);
    let mut out = HashMap::new();
    let bad = |e: std::io::Error| format_err(format!("corrupt checkpoint archive: {e}"));
    for entry in archive.entries().map_err(bad)? {
        let mut entry = entry.map_err(bad)?;
        let name = entry.path().map_err(bad)?.to_string_lossy().into_owned();
        let mut data = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut data).map_err(bad)?;
        if data.len() as u64 != entry.size() {
            return Err(format_err(format!("{name} is truncated")));
        }
        out.insert(name, data);
    }
    Ok(out)
}

fn metadata(files: &HashMap<String, Vec<u8>>) -> Result<Metadata> {
    let raw = files
        .get(METADATA)
        .ok_or_else(|| format_err("checkpoint lacks metadata"))?;
    let meta: Metadata =
        serde_json::from_slice(raw).map_err(|e| format_err(format!("bad checkpoint metadata: {e}")))?;
    if meta.format != FORMAT_NAME || meta.version != FORMAT_VERSION {
        return Err(format_err(format!(
            "unsupported checkpoint format {} v{}",
            meta.format, meta.version
        )));
    }
    Ok(meta)
}

/// Reads an archive entry and checks its shape.
fn take(files: &mut HashMap<String, Vec<u8>>, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
    let raw = files
        .remove(name)
        .ok_or_else(|| format_err(format!("checkpoint lacks {name}")))?;
    let (found, values) = decode_array(&raw).map_err(|e| format_err(format!("{name}: {e}")))?;
    if found != shape {
        return Err(format_err(format!("{name} has shape {found:?}, expected {shape:?}")));
    }
    Ok(values)
}

/// Restores the full training state.
pub fn from_bytes(bytes: &[u8]) -> Result<Trainer> {
    let mut files = entries(bytes)?;
    let meta = metadata(&files)?;
    files.remove(METADATA);
    if files.len() != meta.arrays.len() || meta.arrays.iter().any(|a| !files.contains_key(a)) {
        return Err(format_err("checkpoint arrays do not match its metadata"));
    }
    let config = ModelConfig::from(&meta.model);
    let train = strokevid_core::training::TrainConfig::try_from(&meta.train)?;
    let mut model: Model = Model::new(config, 0)?;
    let ids: Vec<_> = model.params().ids().collect();
    for &id in &ids {
        let name = model.params().name(id).to_string();
        let shape = model.params().value(id).shape().to_vec();
        let values = take(&mut files, &format!("params/{name}"), &shape)?;
        *model.params_mut().value_mut(id) = Tensor::new(&shape, values)?;
        if let Some((rows, cols)) = model.params().power_state(id).map(|p| (p.rows(), p.cols())) {
            let u = take(&mut files, &format!("power/{name}.u"), &[rows])?;
            let v = take(&mut files, &format!("power/{name}.v"), &[cols])?;
            let p = model.params_mut().power_state_mut(id).expect("spectral parameter");
            p.u = u;
            p.v = v;
        }
    }
    let mut optimizers = Vec::new();
    for (group, step) in [
        (Group::Generator, meta.generator_adam_step),
        (Group::Discriminator, meta.discriminator_adam_step),
    ] {
        let mut opt = Adam::new(train.adam, model.params(), model.params().ids_in(group));
        opt.step = step;
        let names: Vec<(String, Vec<usize>)> = opt
            .ids()
            .iter()
            .map(|&id| (model.params().name(id).to_string(), model.params().value(id).shape().to_vec()))
            .collect();
        let (m, v) = opt.moments_mut();
        for (which, moments) in [("m", m), ("v", v)] {
            for ((name, shape), t) in names.iter().zip(moments.iter_mut()) {
                let values = take(&mut files, &format!("adam/{}/{which}/{name}", group_dir(group)), shape)?;
                *t = Tensor::new(shape, values)?;
            }
        }
        optimizers.push(opt);
    }
    if !files.is_empty() {
        return Err(format_err("checkpoint holds arrays the model does not use"));
    }
    let opt_d = optimizers.pop().expect("two optimizers");
    let opt_g = optimizers.pop().expect("two optimizers");
    let trainer = Trainer::from_parts(model, train, opt_g, opt_d)?;
    if trainer.step() != meta.step {
        return Err(format_err("checkpoint step disagrees with its optimizer state"));
    }
    Ok(trainer)
}

pub fn load(path: &Path) -> Result<Trainer> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    from_bytes(&bytes)
}

/// Only the model, for inference.
pub fn load_model(path: &Path) -> Result<Model> {
    Ok(load(path)?.into_model())
}
