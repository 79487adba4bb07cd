//! Binary weight and dataset files (all integers u32 LE, all reals f64 LE).
//!
//! Weights: `"MGN1"`, version, layer count, then `(inputs, outputs)` per
//! layer, then per layer the row-major `outputs × inputs` weights followed by
//! the biases.
//!
//! Dataset: `"MGD1"`, version, example count, density count, the densities,
//! then per example the apex `(x, y)` followed, for each density in header
//! order, by that many `(x, y)` target points.

use std::collections::BTreeMap;
use std::path::Path;

use super::dataset::{Dataset, TrainingExample};
use super::mlp::{Layer, MlpParams};
use crate::geometry::Vec2;
use crate::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"MGN1";
pub const DATASET_MAGIC: &[u8; 4] = b"MGD1";
pub const WEIGHTS_VERSION: u32 = 1;
pub const DATASET_VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::TruncatedFile);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4], version: u32) -> Result<()> {
        if self.buf.len() < 4 {
            return Err(Error::TruncatedFile);
        }
        if self.take(4)? != magic {
            return Err(Error::BadMagic);
        }
        let found = self.u32()?;
        if found != version {
            return Err(Error::VersionMismatch {
                found,
                expected: version,
            });
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, x: usize) {
    out.extend_from_slice(&(x as u32).to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, x: f64) {
    out.extend_from_slice(&x.to_le_bytes());
}

pub fn weights_to_bytes(params: &MlpParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * params.num_params());
    out.extend_from_slice(WEIGHTS_MAGIC);
    put_u32(&mut out, WEIGHTS_VERSION as usize);
    put_u32(&mut out, params.layers.len());
    for l in &params.layers {
        put_u32(&mut out, l.inputs);
        put_u32(&mut out, l.outputs);
    }
    for x in params.iter() {
        put_f64(&mut out, *x);
    }
    out
}

/// Parses a weight file and checks it describes a valid sampler network.
pub fn weights_from_bytes(bytes: &[u8]) -> Result<MlpParams> {
    let mut r = Reader { buf: bytes };
    r.header(WEIGHTS_MAGIC, WEIGHTS_VERSION)?;
    let n = r.u32()? as usize;
    if n > 64 {
        return Err(Error::ShapeMismatch(format!("{n} layers")));
    }
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        dims.push((r.u32()? as usize, r.u32()? as usize));
    }
    let mut layers = Vec::with_capacity(n);
    for (inputs, outputs) in dims {
        if inputs.saturating_mul(outputs) > 1 << 28 {
            return Err(Error::ShapeMismatch(format!("layer {inputs}×{outputs}")));
        }
        let mut l = Layer::zeros(inputs, outputs);
        for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
            *w = r.f64()?;
        }
        layers.push(l);
    }
    if !r.buf.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} trailing bytes", r.buf.len())));
    }
    let params = MlpParams { layers };
    params.validate()?;
    Ok(params)
}

pub fn save_weights(params: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, weights_to_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    weights_from_bytes(&bytes)
}

pub fn dataset_to_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(DATASET_MAGIC);
    put_u32(&mut out, DATASET_VERSION as usize);
    put_u32(&mut out, ds.examples.len());
    put_u32(&mut out, ds.densities.len());
    for &d in &ds.densities {
        put_u32(&mut out, d);
    }
    for ex in &ds.examples {
        put_f64(&mut out, ex.apex.x);
        put_f64(&mut out, ex.apex.y);
        for &d in &ds.densities {
            let pts = ex.targets.get(&d).filter(|p| p.len() == d).ok_or_else(|| {
                Error::ShapeMismatch(format!("example lacks {d}-point targets"))
            })?;
            for p in pts {
                put_f64(&mut out, p.x);
                put_f64(&mut out, p.y);
            }
        }
    }
    Ok(out)
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { buf: bytes };
    r.header(DATASET_MAGIC, DATASET_VERSION)?;
    let n = r.u32()? as usize;
    let nd = r.u32()? as usize;
    let mut densities = Vec::with_capacity(nd.min(1024));
    for _ in 0..nd {
        densities.push(r.u32()? as usize);
    }
    let per_example = 16 + 16 * densities.iter().sum::<usize>();
    if r.buf.len() < n.saturating_mul(per_example) {
        return Err(Error::TruncatedFile);
    }
    let mut examples = Vec::with_capacity(n);
    for _ in 0..n {
        let apex = Vec2::new(r.f64()?, r.f64()?);
        let mut targets = BTreeMap::new();
        for &d in &densities {
            let mut pts = Vec::with_capacity(d);
            for _ in 0..d {
                pts.push(Vec2::new(r.f64()?, r.f64()?));
            }
            targets.insert(d, pts);
        }
        examples.push(TrainingExample { apex, targets });
    }
    if !r.buf.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} trailing bytes", r.buf.len())));
    }
    Ok(Dataset {
        densities,
        examples,
    })
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset_to_bytes(ds)?).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    dataset_from_bytes(&bytes)
}
