use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::corpus::{TokenId, Vocabulary};
use crate::{Error, Result};

/// Binary Huffman coding of the vocabulary for hierarchical softmax.
///
/// Inner nodes are numbered in merge order, so the root is the last one.
/// `paths[t]` lists the inner nodes from the root down to token `t` and
/// `codes[t]` the branch taken at each of them. Tokens with zero count have
/// no leaf and an empty code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTree {
    codes: Vec<Vec<bool>>,
    paths: Vec<Vec<u32>>,
    inner_nodes: usize,
}

#[derive(Clone, Copy)]
enum Child {
    Leaf(usize),
    Inner(usize),
}

impl HuffmanTree {
    /// Classic Huffman merge over per-token counts.
    ///
    /// Nodes are ordered by `(count, smallest token index below them)`; the
    /// first node popped becomes branch `0` of the merge and the second
    /// branch `1`.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let leaves: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
        if leaves.len() < 2 {
            return Err(Error::contract(
                "hierarchical softmax needs at least two tokens with positive counts",
            ));
        }
        // heap entries: (count, min token index, node)
        let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = BinaryHeap::new();
        let mut nodes: Vec<Child> = Vec::new();
        for &t in &leaves {
            heap.push(Reverse((counts[t], t, nodes.len())));
            nodes.push(Child::Leaf(t));
        }
        let mut children: Vec<[Child; 2]> = Vec::with_capacity(leaves.len() - 1);
        while heap.len() > 1 {
            let Reverse((c0, m0, n0)) = heap.pop().unwrap();
            let Reverse((c1, m1, n1)) = heap.pop().unwrap();
            let inner = children.len();
            children.push([nodes[n0], nodes[n1]]);
            heap.push(Reverse((c0 + c1, m0.min(m1), nodes.len())));
            nodes.push(Child::Inner(inner));
        }

        let mut codes = vec![Vec::new(); counts.len()];
        let mut paths = vec![Vec::new(); counts.len()];
        let root = children.len() - 1;
        let mut stack: Vec<(usize, Vec<bool>, Vec<u32>)> = vec![(root, Vec::new(), Vec::new())];
        while let Some((node, code, path)) = stack.pop() {
            for (bit, child) in children[node].iter().enumerate() {
                let mut c = code.clone();
                c.push(bit == 1);
                let mut p = path.clone();
                p.push(node as u32);
                match *child {
                    Child::Leaf(t) => {
                        codes[t] = c;
                        paths[t] = p;
                    }
                    Child::Inner(i) => stack.push((i, c, p)),
                }
            }
        }
        Ok(Self {
            codes,
            paths,
            inner_nodes: children.len(),
        })
    }

    pub fn from_vocabulary(vocab: &Vocabulary) -> Result<Self> {
        Self::from_counts(vocab.counts())
    }

    pub fn inner_nodes(&self) -> usize {
        self.inner_nodes
    }

    pub fn token_count(&self) -> usize {
        self.codes.len()
    }

    pub fn has_leaf(&self, t: TokenId) -> bool {
        self.codes.get(t as usize).is_some_and(|c| !c.is_empty())
    }

    pub fn code(&self, t: TokenId) -> &[bool] {
        &self.codes[t as usize]
    }

    pub fn path(&self, t: TokenId) -> &[u32] {
        &self.paths[t as usize]
    }

    /// Σ 2^(−len) over leaves, as an exact rational `numerator / 2^max_len`.
    pub fn kraft_sum(&self) -> (u128, u32) {
        let max_len = self.codes.iter().map(Vec::len).max().unwrap_or(0) as u32;
        let num = self
            .codes
            .iter()
            .filter(|c| !c.is_empty())
            .map(|c| 1u128 << (max_len - c.len() as u32))
            .sum();
        (num, max_len)
    }

    /// True when the Kraft sum equals exactly one.
    pub fn kraft_is_one(&self) -> bool {
        let (num, max_len) = self.kraft_sum();
        max_len < 128 && num == 1u128 << max_len
    }
}

/// Huffman tree over the vocabulary's own counts.
pub fn build_huffman(vocab: &Vocabulary) -> Result<HuffmanTree> {
    HuffmanTree::from_vocabulary(vocab)
}
