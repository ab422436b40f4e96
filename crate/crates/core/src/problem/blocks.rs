use std::ops::Range;

use crate::error::{Error, Result};

/// Partition of the `N` coordinates into `n` contiguous blocks.
///
/// Block `i` occupies `offsets[i]..offsets[i + 1]`; the block-embedding
/// operators are never materialised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    offsets: Vec<usize>,
    owner: Vec<usize>,
}

impl BlockStructure {
    /// `n` blocks of size one.
    pub fn unit(n: usize) -> Self {
        Self {
            offsets: (0..=n).collect(),
            owner: (0..n).collect(),
        }
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Blocks("no blocks".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Blocks(format!("block {i} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        let mut owner = Vec::new();
        for (i, &s) in sizes.iter().enumerate() {
            offsets.push(offsets[i] + s);
            owner.extend(std::iter::repeat_n(i, s));
        }
        Ok(Self { offsets, owner })
    }

    /// Number of blocks `n`.
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total dimension `N`.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn size(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    #[inline]
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Block containing coordinate `c`.
    #[inline]
    pub fn block_of(&self, c: usize) -> usize {
        self.owner[c]
    }

    pub fn is_unit(&self) -> bool {
        self.dim() == self.n()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}
