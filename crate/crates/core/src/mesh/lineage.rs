//! Bisection-tree addresses of NVB elements.
//!
//! An element is identified by the index of its ancestor in the initial mesh
//! and the sequence of left (0) / right (1) bisection choices leading to it.
//! Bits are stored left-aligned, so sorting by `(root, bits, depth)` lists the
//! leaves of any mesh in depth-first order and puts ancestors before their
//! descendants.

use std::cmp::Ordering;

use crate::error::MeshError;

/// Maximum number of bisections recorded per element.
pub const MAX_DEPTH: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lineage {
    pub root: u32,
    pub depth: u8,
    pub bits: u128,
}

impl Lineage {
    pub fn root(root: u32) -> Self {
        Lineage {
            root,
            depth: 0,
            bits: 0,
        }
    }

    /// Address of the left (`bit = 0`) or right (`bit = 1`) child.
    pub fn child(&self, bit: u8) -> Result<Self, MeshError> {
        let d = self.depth as usize;
        if d >= MAX_DEPTH - 1 {
            return Err(MeshError::LineageOverflow(MAX_DEPTH - 1));
        }
        let bits = self.bits | ((bit as u128 & 1) << (127 - d));
        Ok(Lineage {
            root: self.root,
            depth: self.depth + 1,
            bits,
        })
    }

    /// Bisection choice at level `level` (0 = first bisection).
    pub fn bit(&self, level: usize) -> u8 {
        ((self.bits >> (127 - level)) & 1) as u8
    }

    pub fn path(&self) -> Vec<u8> {
        (0..self.depth as usize).map(|l| self.bit(l)).collect()
    }

    pub fn from_path(root: u32, path: &[u8]) -> Result<Self, MeshError> {
        path.iter().try_fold(Lineage::root(root), |l, &b| l.child(b))
    }

    /// True when `self` is a (non-strict) ancestor of `other`.
    pub fn is_ancestor_of(&self, other: &Lineage) -> bool {
        if self.root != other.root || self.depth > other.depth {
            return false;
        }
        if self.depth == 0 {
            return true;
        }
        let shift = 128 - self.depth as u32;
        (self.bits >> shift) == (other.bits >> shift)
    }

    /// Path encoded as a string of '0' and '1'.
    pub fn path_string(&self) -> String {
        self.path().iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
    }

    pub fn parse_path(root: u32, s: &str) -> Result<Self, MeshError> {
        let path = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(MeshError::Format(format!("bad lineage character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Lineage::from_path(root, &path)
    }
}

impl Ord for Lineage {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.root, self.bits, self.depth).cmp(&(other.root, other.bits, other.depth))
    }
}

impl PartialOrd for Lineage {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
