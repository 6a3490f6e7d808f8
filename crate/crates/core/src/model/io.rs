//! Versioned binary model container: JSON header (config, levels,
//! vocabulary, optimizer step) followed by raw little-endian f64 tensors
//! for the parameters and both Adam moment estimates. Round trips are
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LevelConfig, Model, ModelConfig, ModelParams, OptState};
use crate::error::{Error, Result};
use crate::features::Vocabulary;

const MAGIC: &[u8; 4] = b"MLGM";
const VERSION: u32 = 1;

/// A model plus everything needed to resume training or run inference.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: Model,
    pub vocab: Vocabulary,
    pub opt: OptState,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    levels: Vec<u8>,
    vocab: Vec<String>,
    opt_step: u64,
}

fn shapes_and_slices(params: &ModelParams) -> Vec<(Vec<usize>, &[f64])> {
    let mut out = Vec::with_capacity(params.tensor_count());
    out.push((
        params.embeddings.shape().to_vec(),
        params.embeddings.as_slice().unwrap(),
    ));
    for b in &params.blocks {
        out.push((b.kernel.shape().to_vec(), b.kernel.as_slice().unwrap()));
        out.push((b.bias.shape().to_vec(), b.bias.as_slice().unwrap()));
        out.push((b.dense_w.shape().to_vec(), b.dense_w.as_slice().unwrap()));
        out.push((b.dense_b.shape().to_vec(), b.dense_b.as_slice().unwrap()));
    }
    for h in &params.heads {
        out.push((h.w.shape().to_vec(), h.w.as_slice().unwrap()));
        out.push((h.b.shape().to_vec(), h.b.as_slice().unwrap()));
    }
    out
}

fn write_tensor(w: &mut impl Write, shape: &[usize], data: &[f64]) -> Result<()> {
    w.write_all(&[shape.len() as u8])?;
    for &dim in shape {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    let mut buf = [0u8; 8 * 1024];
    for chunk in data.chunks(1024) {
        for (i, v) in chunk.iter().enumerate() {
            buf[i * 8..(i + 1) * 8].copy_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf[..chunk.len() * 8])?;
    }
    Ok(())
}

fn read_tensor(r: &mut impl Read, name: &str, expect_shape: &[usize], out: &mut [f64]) -> Result<()> {
    let mut ndim = [0u8; 1];
    r.read_exact(&mut ndim)?;
    let mut shape = Vec::with_capacity(ndim[0] as usize);
    for _ in 0..ndim[0] {
        let mut dim = [0u8; 8];
        r.read_exact(&mut dim)?;
        shape.push(u64::from_le_bytes(dim) as usize);
    }
    if shape != expect_shape {
        return Err(Error::ShapeMismatch(format!(
            "tensor {name}: file has shape {shape:?}, expected {expect_shape:?}"
        )));
    }
    let mut buf = [0u8; 8 * 1024];
    for chunk in out.chunks_mut(1024) {
        let bytes = &mut buf[..chunk.len() * 8];
        r.read_exact(bytes)?;
        for (i, v) in chunk.iter_mut().enumerate() {
            *v = f64::from_le_bytes(bytes[i * 8..(i + 1) * 8].try_into().unwrap());
        }
    }
    Ok(())
}

fn write_params(w: &mut impl Write, params: &ModelParams) -> Result<()> {
    for (shape, data) in shapes_and_slices(params) {
        write_tensor(w, &shape, data)?;
    }
    Ok(())
}

fn read_params(r: &mut impl Read, template: &mut ModelParams, what: &str) -> Result<()> {
    let names = template.tensor_names();
    let expected: Vec<Vec<usize>> = shapes_and_slices(template)
        .iter()
        .map(|(shape, _)| shape.clone())
        .collect();
    let mut idx = 0;
    let mut failure = None;
    template.for_each_slice_mut(|_, out| {
        if failure.is_some() {
            return;
        }
        let name = format!("{what}.{}", names[idx]);
        if let Err(e) = read_tensor(r, &name, &expected[idx], out) {
            failure = Some(e);
        }
        idx += 1;
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn save_model(saved: &SavedModel, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let header = Header {
        config: saved.model.config.clone(),
        levels: saved.model.levels.levels().to_vec(),
        vocab: saved.vocab.entries().to_vec(),
        opt_step: saved.opt.step,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    write_params(&mut w, &saved.model.params)?;
    write_params(&mut w, &saved.opt.m)?;
    write_params(&mut w, &saved.opt.v)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let file = File::open(path)?;
    let mut r = BufReader::with_capacity(1 << 20, file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ModelFormat("bad magic; not a model file".into()));
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported model version {version}, expected {VERSION}"
        )));
    }
    let mut header_len = [0u8; 8];
    r.read_exact(&mut header_len)?;
    let mut header_bytes = vec![0u8; u64::from_le_bytes(header_len) as usize];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::ModelFormat(format!("bad header: {e}")))?;

    header.config.validate()?;
    let levels = LevelConfig::new(header.levels)?;
    let vocab = Vocabulary::from_entries(header.vocab);

    let mut params = ModelParams::zeros(&header.config, &levels, vocab.len());
    read_params(&mut r, &mut params, "params")?;
    let mut m = params.zeros_like();
    read_params(&mut r, &mut m, "adam_m")?;
    let mut v = params.zeros_like();
    read_params(&mut r, &mut v, "adam_v")?;

    // no trailing garbage
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::ModelFormat("trailing bytes after tensors".into()));
    }

    Ok(SavedModel {
        model: Model {
            config: header.config,
            levels,
            params,
        },
        vocab,
        opt: OptState {
            m,
            v,
            step: header.opt_step,
        },
    })
}
