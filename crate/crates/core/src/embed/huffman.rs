//! Binary Huffman coding over word frequencies. Each word's code is read
//! root to leaf; internal nodes are the output units of the hierarchical
//! softmax.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTree {
    /// Per word: code bits (0 = first-merged child), root to leaf.
    codes: Vec<Vec<u8>>,
    /// Per word: internal-node ids along the root-to-leaf path, aligned
    /// with `codes`; ids index the output-vector table.
    paths: Vec<Vec<u32>>,
    n_internal: usize,
}

impl HuffmanTree {
    pub fn code(&self, word_id: usize) -> &[u8] {
        &self.codes[word_id]
    }

    pub fn path(&self, word_id: usize) -> &[u32] {
        &self.paths[word_id]
    }

    pub fn n_words(&self) -> usize {
        self.codes.len()
    }

    pub fn n_internal(&self) -> usize {
        self.n_internal
    }

    /// Rebuilds from stored codes and paths, validating shape.
    pub fn from_parts(codes: Vec<Vec<u8>>, paths: Vec<Vec<u32>>) -> Result<Self> {
        if codes.len() != paths.len() || codes.is_empty() {
            return Err(Error::InvalidInput("code and path tables must align".into()));
        }
        let n_internal = codes.len().saturating_sub(1);
        for (code, path) in codes.iter().zip(&paths) {
            if code.len() != path.len() {
                return Err(Error::InvalidInput("code/path length mismatch".into()));
            }
            if code.iter().any(|&b| b > 1) {
                return Err(Error::InvalidInput("code bits must be 0 or 1".into()));
            }
            if path.iter().any(|&n| n as usize >= n_internal.max(1)) && n_internal > 0 {
                return Err(Error::InvalidInput("path node id out of range".into()));
            }
        }
        Ok(HuffmanTree { codes, paths, n_internal })
    }
}

/// Builds the tree by repeatedly merging the two lowest-count nodes; count
/// ties are broken by the lowest node id, so construction is deterministic.
/// A vocabulary of n words yields exactly n-1 internal nodes.
pub fn build_huffman(freqs: &[u64]) -> Result<HuffmanTree> {
    let n = freqs.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot build a Huffman tree over an empty vocabulary".into()));
    }
    // Node ids: 0..n are leaves (word ids), n.. are internal in creation order.
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for (id, &f) in freqs.iter().enumerate() {
        heap.push(Reverse((f, id)));
    }
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut bit = vec![0u8; 2 * n - 1];
    let mut next_id = n;
    while heap.len() > 1 {
        let Reverse((c0, id0)) = heap.pop().unwrap();
        let Reverse((c1, id1)) = heap.pop().unwrap();
        parent[id0] = next_id;
        bit[id0] = 0;
        parent[id1] = next_id;
        bit[id1] = 1;
        heap.push(Reverse((c0 + c1, next_id)));
        next_id += 1;
    }
    let mut codes = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for word in 0..n {
        let mut code = Vec::new();
        let mut path = Vec::new();
        let mut node = word;
        while parent[node] != usize::MAX {
            code.push(bit[node]);
            path.push((parent[node] - n) as u32);
            node = parent[node];
        }
        code.reverse();
        path.reverse();
        codes.push(code);
        paths.push(path);
    }
    Ok(HuffmanTree { codes, paths, n_internal: n - 1 })
}
