//! Parameter checkpoints.
//!
//! Layout: the magic `HSSN`, a `u32` format version and a `u32` block count,
//! then per tensor a `u32` name length, the UTF-8 name, three `u32` dims
//! (rows, cols, 1) and `rows * cols` little-endian `f32` values. All integers
//! are little-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::aggregation::ModelParams;
use crate::error::{format_err, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HSSN";
const VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let tensors = params.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        for dim in [t.nrows(), t.ncols(), 1] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in t.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(format_err(self.bytes.len(), format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(format_err(0, "bad magic, expected HSSN"));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(format_err(4, format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32("block count")?;
    let mut named = Vec::new();
    for _ in 0..count {
        let start = r.pos;
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| format_err(start + 4, "tensor name is not UTF-8"))?
            .to_string();
        let dims_at = r.pos;
        let (rows, cols, depth) = (r.u32("dims")?, r.u32("dims")?, r.u32("dims")?);
        if depth != 1 {
            return Err(format_err(dims_at + 8, format!("tensor {name} has depth {depth}")));
        }
        let n = (rows as u64) * (cols as u64);
        if n * 4 > (bytes.len() - r.pos) as u64 {
            return Err(format_err(bytes.len(), format!("truncated payload for {name}")));
        }
        let payload_at = r.pos;
        let payload = r.take(n as usize * 4, "payload")?;
        let mut data = Vec::with_capacity(n as usize);
        for (i, c) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(format_err(payload_at + 4 * i, format!("non-finite value in {name}")));
            }
            data.push(f64::from(v));
        }
        let t = Array2::from_shape_vec((rows as usize, cols as usize), data).expect("length checked");
        named.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(format_err(r.pos, "trailing bytes after last block"));
    }
    ModelParams::from_tensors(named)
}

pub fn write_checkpoint(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    fs::write(path, encode_checkpoint(params))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    decode_checkpoint(&fs::read(path)?)
}
