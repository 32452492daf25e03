//! Named-tensor container:
//!
//! ```text
//! "EVLP" | version u16 = 1 | reserved u16 | tensor count u32
//! per tensor: name length u32 | UTF-8 name | rank u32 | dims u64 x rank | f32 LE x prod(dims)
//! ```

use std::path::Path;

use super::{StorageError, read_all};
use crate::fusion::AdapterParams;

const MAGIC: [u8; 4] = *b"EVLP";
const VERSION: u16 = 1;

pub fn encode_params(params: &AdapterParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + params.len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    let tensors: Vec<_> = params.tensors().collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, data) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StorageError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(StorageError::TruncatedFile { offset: self.bytes.len() as u64 })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, StorageError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, StorageError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_params(bytes: &[u8]) -> Result<AdapterParams, StorageError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(StorageError::BadMagic { found: magic, expected: MAGIC });
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(StorageError::UnsupportedVersion(version));
    }
    r.take(2)?;
    let count = r.u32()?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|e| StorageError::BadParams(format!("tensor name is not UTF-8: {e}")))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| StorageError::BadParams(format!("tensor {name} is too large")))?;
        let data = r
            .take(numel)?
            .chunks_exact(4)
            .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        tensors.push((name, shape, data));
    }
    if r.pos != bytes.len() {
        return Err(StorageError::TrailingBytes { offset: r.pos as u64, extra: (bytes.len() - r.pos) as u64 });
    }
    AdapterParams::from_tensors(tensors).map_err(|e| StorageError::BadParams(e.to_string()))
}

pub fn write_params(path: impl AsRef<Path>, params: &AdapterParams) -> Result<(), StorageError> {
    std::fs::write(path, encode_params(params)).map_err(StorageError::SinkFailure)
}

pub fn read_params(path: impl AsRef<Path>) -> Result<AdapterParams, StorageError> {
    let f = std::fs::File::open(path).map_err(StorageError::Source)?;
    decode_params(&read_all(f)?)
}
