use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{strings_to_tensors, tensors_to_strings, NamedTensor, TensorSet};
use crate::{Error, Result};

/// Dense per-entity vectors (words, documents, users, forums) addressed by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: BTreeMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn push(&mut self, id: impl Into<String>, vector: &[f32]) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                op: "embedding push",
                left: (1, self.dim),
                right: (1, vector.len()),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding vector"));
        }
        if self.index.contains_key(&id) {
            return Err(Error::contract(format!("duplicate entity id `{id}`")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), self.row(i)))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn to_tensors(&self, prefix: &str) -> TensorSet {
        let mut set: TensorSet = strings_to_tensors(&format!("{prefix}ids"), &self.ids)
            .into_iter()
            .collect();
        set.push(NamedTensor {
            name: format!("{prefix}vectors"),
            dims: vec![self.len(), self.dim],
            data: self.data.clone(),
        });
        set
    }

    pub fn from_tensors(set: &TensorSet, prefix: &str) -> Result<Self> {
        let ids = tensors_to_strings(set, &format!("{prefix}ids"))?;
        let vectors = set.get(&format!("{prefix}vectors"))?;
        let [rows, dim] = vectors.dims[..] else {
            return Err(Error::contract(format!("`{prefix}vectors` is not a matrix")));
        };
        if rows != ids.len() {
            return Err(Error::contract(format!("`{prefix}` has {} ids but {rows} rows", ids.len())));
        }
        let mut table = Self::new(dim);
        for (i, id) in ids.into_iter().enumerate() {
            table.push(id, &vectors.data[i * dim..(i + 1) * dim])?;
        }
        Ok(table)
    }
}
