//! Binary checkpoint layout, little endian:
//!
//! ```text
//! magic "GRSAGE\0\0" | version u32 | head u8 | horizon u32 | seed u64
//! hash length u32 (0 = none) | config hash utf-8
//! input encoder hidden decoder output: u32 each
//! features u32 | nodes u32 | feature_mean f64[nodes·features] | feature_std f64[features]
//! rows u32 | target_mean f64[rows·output] | target_std f64[rows·output]
//! per layer: rows u32 | cols u32 | w f64[rows·cols] (row major) | b f64[rows]
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{Dense, Dims, Normalizer, SurrogateModel};
use super::Head;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GRSAGE\0\0";
const VERSION: u32 = 3;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s<'a>(out: &mut Vec<u8>, vals: impl IntoIterator<Item = &'a f64>) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes(model: &SurrogateModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    out.push(model.head.code());
    put_u32(&mut out, model.horizon as u32);
    out.extend_from_slice(&model.seed.to_le_bytes());
    let hash = model.config_hash.as_deref().unwrap_or("");
    put_u32(&mut out, hash.len() as u32);
    out.extend_from_slice(hash.as_bytes());
    let d = model.dims();
    for v in [d.input, d.encoder, d.hidden, d.decoder, d.output] {
        put_u32(&mut out, v as u32);
    }
    put_u32(&mut out, model.norm.feature_std.len() as u32);
    put_u32(&mut out, model.norm.feature_mean.nrows() as u32);
    put_f64s(&mut out, model.norm.feature_mean.iter());
    put_f64s(&mut out, &model.norm.feature_std);
    put_u32(&mut out, model.norm.target_mean.nrows() as u32);
    put_f64s(&mut out, model.norm.target_mean.iter());
    put_f64s(&mut out, model.norm.target_std.iter());
    for layer in &model.layers {
        put_u32(&mut out, layer.w.nrows() as u32);
        put_u32(&mut out, layer.w.ncols() as u32);
        put_f64s(&mut out, layer.w.iter());
        put_f64s(&mut out, layer.b.iter());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::format("checkpoint", format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::format("checkpoint", "size overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<SurrogateModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::format("checkpoint", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format("checkpoint", format!("unsupported version {version}")));
    }
    let code = r.take(1)?[0];
    let head = Head::from_code(code).ok_or_else(|| Error::format("checkpoint", format!("unknown head {code}")))?;
    let horizon = r.u32()? as usize;
    let seed = r.u64()?;
    let len = r.u32()? as usize;
    let hash = std::str::from_utf8(r.take(len)?).map_err(|_| Error::format("checkpoint", "config hash is not utf-8"))?;
    let config_hash = (len > 0).then(|| hash.to_string());
    let dims = Dims::new(head, horizon);
    let stored: Vec<usize> = (0..5).map(|_| r.u32().map(|v| v as usize)).collect::<Result<_>>()?;
    if stored != [dims.input, dims.encoder, dims.hidden, dims.decoder, dims.output] {
        return Err(Error::format("checkpoint", format!("layer widths {stored:?} do not match head and horizon")));
    }
    let features = r.u32()? as usize;
    if features != dims.input {
        return Err(Error::format("checkpoint", "normalizer width does not match input width"));
    }
    let nodes = r.u32()? as usize;
    let feature_mean = Array2::from_shape_vec((nodes, features), r.f64s(nodes * features)?).expect("sized");
    let feature_std = r.f64s(features)?;
    let rows = r.u32()? as usize;
    let shape = (rows, dims.output);
    let target_mean = Array2::from_shape_vec(shape, r.f64s(rows * dims.output)?).expect("sized");
    let target_std = Array2::from_shape_vec(shape, r.f64s(rows * dims.output)?).expect("sized");
    let mut layers = Vec::with_capacity(6);
    for (k, &(o, i)) in dims.shapes().iter().enumerate() {
        let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
        if (rows, cols) != (o, i) {
            return Err(Error::format("checkpoint", format!("layer {k} is {rows}x{cols}, expected {o}x{i}")));
        }
        let w = Array2::from_shape_vec((rows, cols), r.f64s(rows * cols)?).expect("sized");
        let b = Array1::from(r.f64s(rows)?);
        layers.push(Dense { w, b });
    }
    if r.pos != buf.len() {
        return Err(Error::format("checkpoint", "trailing bytes"));
    }
    let norm = Normalizer { feature_mean, feature_std, target_mean, target_std };
    Ok(SurrogateModel { head, horizon, seed, layers, norm, config_hash })
}

pub fn write_checkpoint(model: &SurrogateModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<SurrogateModel> {
    from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
