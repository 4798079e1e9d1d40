//! Binary PNN checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "PNN1"                      magic
//! u8                          format version (1)
//! u8                          hidden activation code (0 sigmoid, 1 relu, 2 tanh)
//! u8                          output-layer activation code
//! u32                         sub-network count k
//! k × { u32 len, len × u32 }  sub-network architectures
//! k × {                       per sub-network, in order
//!   per hidden layer: weights (row-major f64), bias (f64)
//!   output block weights (row-major f64)
//! }
//! shared output bias (f64)
//! k × frozen sub-network output bias (f64)
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a round trip is bit-exact.

use std::fs;
use std::path::Path;

use crate::activation::ActivationKind;
use crate::error::{PnnError, Result};
use crate::linalg::{Matrix, Vector};
use crate::network::{Layer, PnnModel, SubNetwork};

pub const MAGIC: &[u8; 4] = b"PNN1";
pub const FORMAT_VERSION: u8 = 1;

/// Upper bounds that keep a corrupt header from triggering huge allocations.
const MAX_SUBNETS: u32 = 1 << 10;
const MAX_LAYERS: u32 = 1 << 10;
const MAX_WIDTH: u32 = 1 << 24;

pub fn encode(model: &PnnModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.push(model.activation().code());
    out.push(model.head().code());
    put_u32(&mut out, model.subnet_count());
    for s in model.subnets() {
        put_u32(&mut out, s.arch().len());
        for &w in s.arch() {
            put_u32(&mut out, w);
        }
    }
    for s in model.subnets() {
        for layer in &s.hidden {
            put_f64s(&mut out, layer.weights.as_slice());
            put_f64s(&mut out, layer.bias.as_slice());
        }
        put_f64s(&mut out, s.output_weights.as_slice());
    }
    put_f64s(&mut out, model.shared_bias());
    for b in model.sub_biases() {
        put_f64s(&mut out, b);
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<PnnModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(r.error("bad magic, not a PNN checkpoint"));
    }
    let version = r.u8()?;
    if version != FORMAT_VERSION {
        return Err(r.error(&format!("unsupported format version {version} (expected {FORMAT_VERSION})")));
    }
    let activation = r.activation()?;
    let head = r.activation()?;
    let k = r.u32()?;
    if !(2..=MAX_SUBNETS).contains(&k) {
        return Err(r.error(&format!("sub-network count {k} out of range")));
    }
    let mut archs = Vec::with_capacity(k as usize);
    for _ in 0..k {
        let len = r.u32()?;
        if !(3..=MAX_LAYERS).contains(&len) {
            return Err(r.error(&format!("architecture length {len} out of range")));
        }
        let mut arch = Vec::with_capacity(len as usize);
        for _ in 0..len {
            let w = r.u32()?;
            if w == 0 || w > MAX_WIDTH {
                return Err(r.error(&format!("layer width {w} out of range")));
            }
            arch.push(w as usize);
        }
        archs.push(arch);
    }
    let mut subnets = Vec::with_capacity(archs.len());
    for arch in &archs {
        let n = arch.len();
        let mut hidden = Vec::with_capacity(n - 2);
        for w in arch[..n - 1].windows(2) {
            let weights = r.matrix(w[1], w[0])?;
            let bias = r.vector(w[1])?;
            hidden.push(Layer::new(weights, bias)?);
        }
        let output_weights = r.matrix(arch[n - 1], arch[n - 2])?;
        subnets.push(SubNetwork::new(hidden, output_weights)?);
    }
    let width = archs[0][archs[0].len() - 1];
    let shared_bias = r.vector(width)?;
    let sub_biases = (0..k).map(|_| r.vector(width)).collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(r.error(&format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    PnnModel::from_parts(subnets, shared_bias, sub_biases, activation, head)
        .map_err(|e| PnnError::CheckpointFormat(e.to_string()))
}

/// Writes through a temporary sibling file so a crash never leaves a truncated checkpoint.
pub fn save_checkpoint(model: &PnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, encode(model)).map_err(|e| PnnError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PnnError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<PnnModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| PnnError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        PnnError::CheckpointFormat(msg) => PnnError::CheckpointFormat(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    let v = u32::try_from(v).expect("checkpoint header field exceeds u32");
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error(&self, msg: &str) -> PnnError {
        PnnError::CheckpointFormat(format!("at byte {}: {msg}", self.pos))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(&format!("truncated, needed {n} more bytes")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn activation(&mut self) -> Result<ActivationKind> {
        let code = self.u8()?;
        ActivationKind::from_code(code).ok_or_else(|| self.error(&format!("unknown activation code {code}")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| self.error("size overflow"))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn vector(&mut self, n: usize) -> Result<Vector> {
        Ok(self.f64s(n)?.into())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let n = rows.checked_mul(cols).ok_or_else(|| self.error("size overflow"))?;
        Matrix::from_vec(rows, cols, self.f64s(n)?)
    }
}
