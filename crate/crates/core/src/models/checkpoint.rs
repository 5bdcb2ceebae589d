use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::{build_model, Model};
use crate::data::Normalization;
use crate::error::{Error, Result};
use crate::layers::GroupingScheme;
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SRLIFTCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct BufferEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    seed: u64,
    grouping: GroupingScheme,
    normalization: Normalization,
    params: Vec<BufferEntry>,
    running: Vec<BufferEntry>,
}

/// Layout: magic, format version (u32 LE), header length (u64 LE), JSON
/// header, then every parameter followed by every running mean and variance
/// as little-endian f32.
pub fn write_checkpoint(model: &Model, mut out: impl Write) -> Result<()> {
    let header = Header {
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        seed: model.seed,
        grouping: model.grouping.clone(),
        normalization: model.normalization.clone(),
        params: model
            .params
            .iter()
            .map(|(name, t)| BufferEntry {
                name: name.into(),
                shape: t.shape().to_vec(),
            })
            .collect(),
        running: model
            .running
            .iter()
            .flat_map(|r| {
                [
                    BufferEntry {
                        name: format!("{}.running_mean", r.name),
                        shape: vec![r.mean.len()],
                    },
                    BufferEntry {
                        name: format!("{}.running_var", r.name),
                        shape: vec![r.var.len()],
                    },
                ]
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(20 + json.len() + 4 * model.params.count());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    let values = model
        .params
        .iter()
        .flat_map(|(_, t)| t.data().iter())
        .chain(
            model
                .running
                .iter()
                .flat_map(|r| r.mean.iter().chain(&r.var)),
        );
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(mut input: impl Read) -> Result<Model> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Invalid(format!("malformed checkpoint: {m}"));
    if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Invalid(format!(
            "checkpoint version {version} is not supported (expected {CHECKPOINT_VERSION})"
        )));
    }
    let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(20..).ok_or_else(|| bad("truncated"))?;
    if body.len() < hlen {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])?;
    let mut model = build_model(&header.config, header.seed)?;
    if model.grouping != header.grouping {
        return Err(bad("stored grouping does not match the rebuilt model"));
    }
    let stored: Vec<(&str, &[usize])> = header
        .params
        .iter()
        .map(|e| (e.name.as_str(), e.shape.as_slice()))
        .collect();
    let built: Vec<(&str, &[usize])> = model.params.iter().map(|(n, t)| (n, t.shape())).collect();
    if stored != built {
        return Err(bad("parameter manifest does not match the rebuilt model"));
    }
    let mut floats = body[hlen..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let expected = model.params.count()
        + model
            .running
            .iter()
            .map(|r| 2 * r.mean.len())
            .sum::<usize>();
    if body.len() - hlen != 4 * expected {
        return Err(bad("buffer size does not match the manifest"));
    }
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        let shape = model.params.get(id).shape().to_vec();
        let n: usize = shape.iter().product();
        let data: Vec<f64> = floats.by_ref().take(n).collect();
        model.params.set(id, Tensor::new(shape, data)?)?;
    }
    for r in &mut model.running {
        for v in r.mean.iter_mut().chain(r.var.iter_mut()) {
            *v = floats.next().expect("size checked");
        }
    }
    model.normalization = header.normalization;
    Ok(model)
}

/// Writes through a temporary file and renames it into place.
pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        write_checkpoint(model, &mut f)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    read_checkpoint(std::fs::File::open(path)?)
}
