//! Binary named-tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "CSCD" | version u32 | count u64
//! count × ( name_len u32 | name utf-8 | rank u32 | rank × dim u64 | f32 payload )
//! ```

use std::fs;
use std::path::Path;

use cascade_core::tensor::{NamedTensor, TensorSet};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"CSCD";
pub const VERSION: u32 = 1;

pub fn encode(set: &TensorSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for t in set.iter() {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.at))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> std::result::Result<TensorSet, String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let count = r.u64()?;
    let mut set = TensorSet::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| "tensor name is not UTF-8".to_string())?
            .to_string();
        let rank = r.u32()? as usize;
        let dims = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| format!("tensor `{name}` is too large"))?;
        let payload = r.take(n.checked_mul(4).ok_or("tensor too large")?)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        set.push(NamedTensor::new(name, dims, data).map_err(|e| e.to_string())?);
    }
    if r.at != bytes.len() {
        return Err("trailing bytes after the last tensor".into());
    }
    Ok(set)
}

pub fn save(path: &Path, set: &TensorSet) -> Result<()> {
    fs::write(path, encode(set)).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<TensorSet> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|message| CliError::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorSet {
        let mut set = TensorSet::new();
        set.push(NamedTensor::new("w", vec![2, 3], vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5, 1e-40, 7.0]).unwrap());
        set.push(NamedTensor::scalar("ünï", 0.25));
        set.push(NamedTensor::new("empty", vec![0, 4], vec![]).unwrap());
        set
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let set = sample();
        let back = decode(&encode(&set)).unwrap();
        let bits = |s: &TensorSet| -> Vec<Vec<u32>> { s.iter().map(|t| t.data.iter().map(|v| v.to_bits()).collect()).collect() };
        assert_eq!(bits(&back), bits(&set));
        assert_eq!(back, set);
    }

    #[test]
    fn rejects_damage() {
        let bytes = encode(&sample());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).unwrap_err().contains("magic"));
        let mut newer = bytes.clone();
        newer[4] = 9;
        assert!(decode(&newer).unwrap_err().contains("version"));
        let mut long = bytes;
        long.push(0);
        assert!(decode(&long).is_err());
    }
}
