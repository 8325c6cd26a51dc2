//! Binary checkpoints: `HGCK`, u32 version, u32 scalar byte width, u32
//! tensor count, then per tensor a u32-length UTF-8 name, u32 rank, u32
//! dims and the little-endian payload. All integers are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::scalar::{Precision, Scalar};

const MAGIC: &[u8; 4] = b"HGCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointInfo {
    pub precision: Precision,
    /// Name and dims of each tensor, in file order.
    pub tensors: Vec<(String, Vec<usize>)>,
}

impl CheckpointInfo {
    pub fn dims(&self, name: &str) -> Option<&[usize]> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_slice())
    }
}

pub fn encode<T: Scalar, P: Parameters<T>>(params: &P) -> Vec<u8> {
    let tensors = params.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(T::PRECISION.byte_width() as u32).to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.iter() {
            v.write_le(&mut out);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {} (needed {n} more)", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn read_header<'a>(bytes: &'a [u8]) -> Result<(Reader<'a>, Precision, usize)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let width = r.u32()?;
    let precision =
        Precision::from_byte_width(width).ok_or_else(|| Error::Format(format!("unsupported scalar width {width}")))?;
    let count = r.u32()? as usize;
    Ok((r, precision, count))
}

fn read_tensor_header(r: &mut Reader<'_>) -> Result<(String, Vec<usize>)> {
    let len = r.u32()? as usize;
    let name = std::str::from_utf8(r.take(len)?)
        .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
        .to_string();
    let rank = r.u32()? as usize;
    let dims = (0..rank)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    Ok((name, dims))
}

/// Header and tensor layout of an encoded checkpoint.
pub fn inspect(bytes: &[u8]) -> Result<CheckpointInfo> {
    let (mut r, precision, count) = read_header(bytes)?;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let (name, dims) = read_tensor_header(&mut r)?;
        let n: usize = dims.iter().product();
        r.take(n * precision.byte_width())?;
        tensors.push((name, dims));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        )));
    }
    Ok(CheckpointInfo { precision, tensors })
}

/// Decodes into a copy of `template`, which fixes the expected tensor names
/// and shapes.
pub fn decode<T: Scalar, P: Parameters<T>>(bytes: &[u8], template: &P) -> Result<P> {
    let (mut r, precision, count) = read_header(bytes)?;
    if precision != T::PRECISION {
        return Err(Error::Format(format!(
            "checkpoint holds {precision} values, expected {}",
            T::PRECISION
        )));
    }
    let mut out = template.clone();
    let mut slots = out.tensors_mut();
    if count != slots.len() {
        return Err(Error::Shape {
            name: "tensor count".into(),
            expected: vec![slots.len()],
            found: vec![count],
        });
    }
    for (expected_name, slot) in slots.iter_mut() {
        let (name, dims) = read_tensor_header(&mut r)?;
        if &name != expected_name || dims != slot.shape() {
            return Err(Error::Shape {
                name: expected_name.clone(),
                expected: slot.shape().to_vec(),
                found: dims,
            });
        }
        let width = precision.byte_width();
        let payload = r.take(slot.len() * width)?;
        for (v, chunk) in slot.iter_mut().zip(payload.chunks_exact(width)) {
            *v = T::read_le(chunk);
        }
    }
    drop(slots);
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        )));
    }
    Ok(out)
}

pub fn save_checkpoint<T: Scalar, P: Parameters<T>>(path: &Path, params: &P) -> Result<()> {
    fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar, P: Parameters<T>>(path: &Path, template: &P) -> Result<P> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, template)
}

pub fn peek_checkpoint(path: &Path) -> Result<CheckpointInfo> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    inspect(&bytes)
}
