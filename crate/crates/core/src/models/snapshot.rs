//! Model snapshots.
//!
//! ```text
//! header   "SICM" | version u16 | kind u8 | P u32 | L u32 | signals u32
//!          | init_seed u64 | params u16
//! param    name_len u16 | name utf-8 | role u8 | ndims u8 | dims u32*ndims
//!          | axes u8*ndims | values (re f64, im f64)*
//! ```
//!
//! Little-endian throughout, values in row-major order. A TOML manifest
//! listing name, shape and role of every parameter is written next to the
//! binary file.

use std::path::Path;

use serde::Serialize;

use crate::cxnn::{Axis, CxArray, Parameter, Role};
use crate::dataset::{sidecar_path, Reader};
use crate::{Error, Result};

use super::{Model, ModelKind, ModelSpec};

pub const MODEL_MAGIC: &[u8; 4] = b"SICM";
pub const MODEL_FORMAT_VERSION: u16 = 1;

pub fn encode_model(model: &Model) -> Vec<u8> {
    let spec = model.spec();
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    buf.push(spec.kind.code());
    buf.extend_from_slice(&(spec.nonlinear_order as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.linear_order as u32).to_le_bytes());
    buf.extend_from_slice(&(spec.num_signals as u32).to_le_bytes());
    buf.extend_from_slice(&spec.init_seed.to_le_bytes());
    buf.extend_from_slice(&(model.parameters().len() as u16).to_le_bytes());
    for p in model.parameters() {
        buf.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        buf.extend_from_slice(p.name.as_bytes());
        buf.push(p.role.code());
        buf.push(p.values.dims().len() as u8);
        for &d in p.values.dims() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.extend(p.values.axes().iter().map(|a| a.code()));
        for v in p.values.data() {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    buf
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(r.error(0, format!("bad magic {magic:02x?}, expected \"SICM\"")));
    }
    let at = r.pos();
    let version = r.u16("version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(r.error(at, format!("unsupported version {version}")));
    }
    let at = r.pos();
    let kind = ModelKind::from_code(r.u8("model kind")?)
        .filter(|k| k.is_neural())
        .ok_or_else(|| r.error(at, "unknown model kind"))?;
    let spec = ModelSpec {
        kind,
        nonlinear_order: r.u32("P")? as usize,
        linear_order: r.u32("L")? as usize,
        num_signals: r.u32("signal count")? as usize,
        init_seed: r.u64("init seed")?,
    };
    let count = r.u16("parameter count")? as usize;
    let mut params = Vec::with_capacity(count.min(16));
    for _ in 0..count {
        let len = r.u16("name length")? as usize;
        let at = r.pos();
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| r.error(at, "parameter name is not utf-8"))?
            .to_string();
        let at = r.pos();
        let role = Role::from_code(r.u8("role")?).ok_or_else(|| r.error(at, "unknown role"))?;
        let ndims = r.u8("ndims")? as usize;
        let dims = (0..ndims)
            .map(|_| r.u32("dim").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let at = r.pos();
        let axes = (0..ndims)
            .map(|_| r.u8("axis").and_then(|c| Axis::from_code(c).ok_or_else(|| r.error(at, "unknown axis"))))
            .collect::<Result<Vec<_>>>()?;
        let size = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let size = size
            .filter(|s| s.saturating_mul(16) <= bytes.len() - r.pos())
            .ok_or_else(|| r.error(at, format!("truncated: parameter '{name}' claims dims {dims:?}")))?;
        let data = (0..size).map(|_| r.c64("value")).collect::<Result<Vec<_>>>()?;
        let values = CxArray::new(data, &dims, &axes).map_err(|e| r.error(at, e.to_string()))?;
        params.push(Parameter::new(name, role, values));
    }
    r.finish()?;
    Model::from_parts(spec, params).map_err(|e| Error::Format {
        offset: bytes.len(),
        message: e.to_string(),
    })
}

#[derive(Serialize)]
struct ManifestParam {
    name: String,
    role: String,
    shape: Vec<usize>,
    axes: Vec<String>,
}

#[derive(Serialize)]
struct Manifest {
    format: String,
    version: u16,
    kind: String,
    nonlinear_order: usize,
    linear_order: usize,
    num_signals: usize,
    init_seed: u64,
    parameters: Vec<ManifestParam>,
}

pub fn manifest_text(model: &Model) -> Result<String> {
    let spec = model.spec();
    let m = Manifest {
        format: "SICM".into(),
        version: MODEL_FORMAT_VERSION,
        kind: spec.kind.to_string(),
        nonlinear_order: spec.nonlinear_order,
        linear_order: spec.linear_order,
        num_signals: spec.num_signals,
        init_seed: spec.init_seed,
        parameters: model
            .parameters()
            .iter()
            .map(|p| ManifestParam {
                name: p.name.clone(),
                role: p.role.to_string(),
                shape: p.values.dims().to_vec(),
                axes: p.values.axes().iter().map(|a| a.to_string()).collect(),
            })
            .collect(),
    };
    toml::to_string(&m).map_err(|e| Error::Config(e.to_string()))
}

/// Write the snapshot and its `<path>.toml` manifest.
pub fn write_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    std::fs::write(&side, manifest_text(model)?).map_err(|e| Error::io(&side, e))
}

pub fn read_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
