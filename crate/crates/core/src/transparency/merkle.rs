//! Append-only Merkle tree over 32-byte leaves.
//!
//! Hashing follows the widely deployed transparency-log convention:
//! `leaf = H(0x00 || entry)`, `node = H(0x01 || left || right)`, trees are
//! left-balanced (split at the largest power of two below the size). The
//! distinct prefixes keep internal nodes from ever verifying as leaves.

use crate::crypto::{sha256, Digest};
use thiserror::Error;

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MerkleError {
    #[error("index {index} out of range for tree of size {size}")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("invalid size range {old}..{new} for tree of size {size}")]
    InvalidRange { old: u64, new: u64, size: u64 },
}

pub fn leaf_hash(entry: &Digest) -> Digest {
    let mut buf = [0u8; 33];
    buf[0] = LEAF_PREFIX;
    buf[1..].copy_from_slice(entry.as_bytes());
    sha256(&buf)
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut buf = [0u8; 65];
    buf[0] = NODE_PREFIX;
    buf[1..33].copy_from_slice(left.as_bytes());
    buf[33..].copy_from_slice(right.as_bytes());
    sha256(&buf)
}

/// Proof that a leaf sits at a known index of a tree of known size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InclusionProof {
    pub path: Vec<Digest>,
}

/// Proof that the tree of size `new_size` extends the tree of size
/// `old_size` without rewriting history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencyProof {
    pub old_size: u64,
    pub new_size: u64,
    pub path: Vec<Digest>,
}

/// The log structure itself. Leaves only ever get appended; the peak stack
/// caches the roots of the maximal perfect subtrees so appends and root
/// reads stay cheap.
#[derive(Clone, Debug, Default)]
pub struct MerkleTree {
    leaves: Vec<Digest>,
    peaks: Vec<(u32, Digest)>,
}

impl MerkleTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_leaves(leaves: Vec<Digest>) -> Self {
        let mut tree = Self::new();
        for leaf in leaves {
            tree.append(leaf);
        }
        tree
    }

    pub fn size(&self) -> u64 {
        self.leaves.len() as u64
    }

    pub fn leaves(&self) -> &[Digest] {
        &self.leaves
    }

    /// Appends an entry and returns its index.
    pub fn append(&mut self, entry: Digest) -> u64 {
        let index = self.size();
        self.leaves.push(entry);
        let mut carry = (0u32, leaf_hash(&entry));
        while let Some(&(height, ref left)) = self.peaks.last() {
            if height != carry.0 {
                break;
            }
            carry = (height + 1, node_hash(left, &carry.1));
            self.peaks.pop();
        }
        self.peaks.push(carry);
        index
    }

    /// Root of the whole tree; the empty tree hashes to `H("")`.
    pub fn root(&self) -> Digest {
        self.root_at(self.size()).expect("own size is in range")
    }

    /// Root of the prefix of the first `size` leaves.
    pub fn root_at(&self, size: u64) -> Option<Digest> {
        if size > self.size() {
            return None;
        }
        Some(subtree_root(&self.leaves[..size as usize]))
    }

    pub fn prove_inclusion(&self, index: u64, size: u64) -> Result<InclusionProof, MerkleError> {
        if size > self.size() || index >= size {
            return Err(MerkleError::IndexOutOfRange {
                index,
                size: self.size().min(size),
            });
        }
        let path = inclusion_path(&self.leaves[..size as usize], index);
        Ok(InclusionProof { path })
    }

    pub fn prove_consistency(&self, old: u64, new: u64) -> Result<ConsistencyProof, MerkleError> {
        if old > new || new > self.size() {
            return Err(MerkleError::InvalidRange {
                old,
                new,
                size: self.size(),
            });
        }
        let path = if old == new || old == 0 {
            Vec::new()
        } else {
            consistency_path(&self.leaves[..new as usize], old, true)
        };
        Ok(ConsistencyProof {
            old_size: old,
            new_size: new,
            path,
        })
    }
}

fn largest_power_of_two_below(n: u64) -> u64 {
    debug_assert!(n > 1);
    let mut k = 1;
    while k * 2 < n {
        k *= 2;
    }
    k
}

fn subtree_root(leaves: &[Digest]) -> Digest {
    match leaves.len() {
        0 => sha256(b""),
        1 => leaf_hash(&leaves[0]),
        n => {
            let k = largest_power_of_two_below(n as u64) as usize;
            node_hash(&subtree_root(&leaves[..k]), &subtree_root(&leaves[k..]))
        }
    }
}

fn inclusion_path(leaves: &[Digest], index: u64) -> Vec<Digest> {
    if leaves.len() <= 1 {
        return Vec::new();
    }
    let k = largest_power_of_two_below(leaves.len() as u64) as usize;
    if (index as usize) < k {
        let mut path = inclusion_path(&leaves[..k], index);
        path.push(subtree_root(&leaves[k..]));
        path
    } else {
        let mut path = inclusion_path(&leaves[k..], index - k as u64);
        path.push(subtree_root(&leaves[..k]));
        path
    }
}

fn consistency_path(leaves: &[Digest], old: u64, old_is_prefix_root: bool) -> Vec<Digest> {
    let n = leaves.len() as u64;
    if old == n {
        return if old_is_prefix_root {
            Vec::new()
        } else {
            vec![subtree_root(leaves)]
        };
    }
    let k = largest_power_of_two_below(n);
    if old <= k {
        let mut path = consistency_path(&leaves[..k as usize], old, old_is_prefix_root);
        path.push(subtree_root(&leaves[k as usize..]));
        path
    } else {
        let mut path = consistency_path(&leaves[k as usize..], old - k, false);
        path.push(subtree_root(&leaves[..k as usize]));
        path
    }
}

/// Recomputes the root committed to by an inclusion proof. Returns `None`
/// when the proof shape cannot match the claimed index and size.
pub fn root_from_inclusion(
    entry: &Digest,
    index: u64,
    size: u64,
    path: &[Digest],
) -> Option<Digest> {
    if index >= size {
        return None;
    }
    let mut fn_ = index;
    let mut sn = size - 1;
    let mut r = leaf_hash(entry);
    for p in path {
        if sn == 0 {
            return None;
        }
        if fn_ & 1 == 1 || fn_ == sn {
            r = node_hash(p, &r);
            if fn_ & 1 == 0 {
                while fn_ != 0 && fn_ & 1 == 0 {
                    fn_ >>= 1;
                    sn >>= 1;
                }
            }
        } else {
            r = node_hash(&r, p);
        }
        fn_ >>= 1;
        sn >>= 1;
    }
    if sn == 0 {
        Some(r)
    } else {
        None
    }
}

pub fn verify_inclusion_root(
    root: &Digest,
    size: u64,
    entry: &Digest,
    index: u64,
    proof: &InclusionProof,
) -> bool {
    root_from_inclusion(entry, index, size, &proof.path).is_some_and(|r| r == *root)
}

/// Checks that the `new` tree extends the `old` tree, given both roots.
pub fn verify_consistency_roots(
    old_size: u64,
    old_root: &Digest,
    new_size: u64,
    new_root: &Digest,
    proof: &ConsistencyProof,
) -> bool {
    if proof.old_size != old_size || proof.new_size != new_size || old_size > new_size {
        return false;
    }
    if old_size == new_size {
        return proof.path.is_empty() && old_root == new_root;
    }
    if old_size == 0 {
        // Anything extends the empty tree.
        return proof.path.is_empty();
    }

    let mut path = proof.path.iter();
    let mut fn_ = old_size - 1;
    let mut sn = new_size - 1;
    while fn_ & 1 == 1 {
        fn_ >>= 1;
        sn >>= 1;
    }
    let first = if fn_ == 0 {
        // The old tree is a perfect subtree, so its root seeds the walk.
        *old_root
    } else {
        match path.next() {
            Some(d) => *d,
            None => return false,
        }
    };
    let mut fr = first;
    let mut sr = first;
    for c in path {
        if sn == 0 {
            return false;
        }
        if fn_ & 1 == 1 || fn_ == sn {
            fr = node_hash(c, &fr);
            sr = node_hash(c, &sr);
            if fn_ & 1 == 0 {
                while fn_ != 0 && fn_ & 1 == 0 {
                    fn_ >>= 1;
                    sn >>= 1;
                }
            }
        } else {
            sr = node_hash(&sr, c);
        }
        fn_ >>= 1;
        sn >>= 1;
    }
    fr == *old_root && sr == *new_root && sn == 0
}
