//! Named `f32` tensors, the in-memory side of the checkpoint container.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::contract(format!(
                "tensor `{name}` has {} values for dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { name, dims, data })
    }

    pub fn vector(name: impl Into<String>, data: Vec<f32>) -> Self {
        let dims = alloc::vec![data.len()];
        Self {
            name: name.into(),
            dims,
            data,
        }
    }

    pub fn scalar(name: impl Into<String>, v: f32) -> Self {
        Self::vector(name, alloc::vec![v])
    }

    pub fn from_matrix(name: impl Into<String>, m: &Matrix<f32>) -> Self {
        Self {
            name: name.into(),
            dims: alloc::vec![m.rows(), m.cols()],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<Matrix<f32>> {
        match self.dims.as_slice() {
            [r, c] => Matrix::from_vec(*r, *c, self.data.clone()),
            [n] => Matrix::from_vec(1, *n, self.data.clone()),
            _ => Err(Error::contract(format!(
                "tensor `{}` of rank {} is not a matrix",
                self.name,
                self.dims.len()
            ))),
        }
    }
}

/// Ordered collection of named tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorSet {
    tensors: Vec<NamedTensor>,
}

impl TensorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: NamedTensor) {
        self.tensors.push(t);
    }

    pub fn extend(&mut self, other: TensorSet) {
        self.tensors.extend(other.tensors);
    }

    pub fn iter(&self) -> impl Iterator<Item = &NamedTensor> {
        self.tensors.iter()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Lookup {
                kind: "tensor",
                id: name.into(),
            })
    }

    pub fn matrix(&self, name: &str) -> Result<Matrix<f32>> {
        self.get(name)?.to_matrix()
    }

    pub fn scalar(&self, name: &str) -> Result<f32> {
        let t = self.get(name)?;
        match t.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::contract(format!("tensor `{name}` is not a scalar"))),
        }
    }

    /// Integer stored in a scalar tensor (exact below 2^24).
    pub fn count(&self, name: &str) -> Result<usize> {
        let v = self.scalar(name)?;
        if v < 0.0 || libm::truncf(v) != v || v > 16_777_216.0 {
            return Err(Error::contract(format!("tensor `{name}` is not a count")));
        }
        Ok(v as usize)
    }

    /// Tensors whose name starts with `prefix`, with the prefix removed.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a NamedTensor)> {
        self.tensors
            .iter()
            .filter_map(move |t| t.name.strip_prefix(prefix).map(|rest| (rest, t)))
    }
}

impl FromIterator<NamedTensor> for TensorSet {
    fn from_iter<I: IntoIterator<Item = NamedTensor>>(iter: I) -> Self {
        Self {
            tensors: iter.into_iter().collect(),
        }
    }
}

impl IntoIterator for TensorSet {
    type Item = NamedTensor;
    type IntoIter = alloc::vec::IntoIter<NamedTensor>;

    fn into_iter(self) -> Self::IntoIter {
        self.tensors.into_iter()
    }
}

/// Splits a 64-bit value into four 16-bit limbs, each exact in `f32`.
pub fn u64_to_limbs(v: u64) -> [f32; 4] {
    core::array::from_fn(|i| ((v >> (16 * i)) & 0xffff) as f32)
}

pub fn limbs_to_u64(limbs: &[f32]) -> Result<u64> {
    if limbs.len() != 4 {
        return Err(Error::contract("expected four 16-bit limbs"));
    }
    let mut v = 0u64;
    for (i, &l) in limbs.iter().enumerate() {
        if !(0.0..=65535.0).contains(&l) || libm::truncf(l) != l {
            return Err(Error::contract("limb outside 16-bit range"));
        }
        v |= (l as u64) << (16 * i);
    }
    Ok(v)
}

/// Encodes strings as two tensors: `<name>.len` (byte length of each) and
/// `<name>.bytes` (all UTF-8 bytes, one value per byte).
pub fn strings_to_tensors<S: AsRef<str>>(name: &str, strings: &[S]) -> [NamedTensor; 2] {
    let lens = strings.iter().map(|s| s.as_ref().len() as f32).collect();
    let bytes = strings
        .iter()
        .flat_map(|s| s.as_ref().bytes())
        .map(f32::from)
        .collect();
    [
        NamedTensor::vector(format!("{name}.len"), lens),
        NamedTensor::vector(format!("{name}.bytes"), bytes),
    ]
}

pub fn tensors_to_strings(set: &TensorSet, name: &str) -> Result<Vec<String>> {
    let lens = &set.get(&format!("{name}.len"))?.data;
    let bytes = &set.get(&format!("{name}.bytes"))?.data;
    let mut out = Vec::with_capacity(lens.len());
    let mut at = 0usize;
    for &l in lens {
        if l < 0.0 || libm::truncf(l) != l || l > 16_777_216.0 {
            return Err(Error::contract(format!("bad string length in `{name}`")));
        }
        let end = at + l as usize;
        let chunk = bytes
            .get(at..end)
            .ok_or_else(|| Error::contract(format!("string bytes of `{name}` are truncated")))?;
        let raw: Vec<u8> = chunk
            .iter()
            .map(|&b| {
                if (0.0..=255.0).contains(&b) && libm::truncf(b) == b {
                    Ok(b as u8)
                } else {
                    Err(Error::contract(format!("bad byte in `{name}`")))
                }
            })
            .collect::<Result<_>>()?;
        out.push(String::from_utf8(raw).map_err(|_| Error::contract(format!("`{name}` is not UTF-8")))?);
        at = end;
    }
    if at != bytes.len() {
        return Err(Error::contract(format!("trailing bytes in `{name}`")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strings_round_trip() {
        let words = ["", "héllo", "a b", "<end>"];
        let set: TensorSet = strings_to_tensors("w", &words).into_iter().collect();
        assert_eq!(tensors_to_strings(&set, "w").unwrap(), words);
    }

    #[test]
    fn limbs_round_trip() {
        for v in [0u64, 1, u64::MAX, 0xdead_beef_0123_4567] {
            assert_eq!(limbs_to_u64(&u64_to_limbs(v)).unwrap(), v);
        }
    }
}
