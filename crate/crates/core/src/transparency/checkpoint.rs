//! Signed checkpoints over the log and the client-side verification entry
//! points.

use std::collections::BTreeMap;

use thiserror::Error;

use super::merkle::{
    verify_consistency_roots, verify_inclusion_root, ConsistencyProof, InclusionProof, MerkleTree,
};
use crate::crypto::{verify, CryptoError, Digest, PublicKey, Signature, SigningKeypair};

/// Canonical bytes covered by the enforcer and witness signatures:
/// `root || size (8-byte BE) || timestamp (8-byte BE)`.
pub fn checkpoint_signing_bytes(root: &Digest, size: u64, timestamp: u64) -> [u8; 48] {
    let mut buf = [0u8; 48];
    buf[..32].copy_from_slice(root.as_bytes());
    buf[32..40].copy_from_slice(&size.to_be_bytes());
    buf[40..48].copy_from_slice(&timestamp.to_be_bytes());
    buf
}

/// A signed commitment to the log at one point in time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub root: Digest,
    pub size: u64,
    pub timestamp: u64,
    pub enforcer_sig: Signature,
    pub witness_sigs: Vec<(String, Signature)>,
}

impl Checkpoint {
    pub fn verify_enforcer(&self, pk: &PublicKey) -> bool {
        let bytes = checkpoint_signing_bytes(&self.root, self.size, self.timestamp);
        verify(pk, &bytes, &self.enforcer_sig)
    }

    /// Counts how many known witnesses have validly co-signed.
    pub fn valid_witness_count(&self, witness_pks: &BTreeMap<String, PublicKey>) -> usize {
        let bytes = checkpoint_signing_bytes(&self.root, self.size, self.timestamp);
        self.witness_sigs
            .iter()
            .filter(|(id, sig)| {
                witness_pks
                    .get(id)
                    .is_some_and(|pk| verify(pk, &bytes, sig))
            })
            .count()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + 64 + 1);
        out.extend_from_slice(&checkpoint_signing_bytes(
            &self.root,
            self.size,
            self.timestamp,
        ));
        out.extend_from_slice(self.enforcer_sig.as_bytes());
        out.push(self.witness_sigs.len() as u8);
        for (id, sig) in &self.witness_sigs {
            out.push(id.len() as u8);
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(sig.as_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<(Self, usize), CodecError> {
        let mut r = Reader::new(bytes);
        let root = Digest::from_slice(r.take(32)?)?;
        let size = r.u64()?;
        let timestamp = r.u64()?;
        let enforcer_sig = Signature::from_slice(r.take(64)?)?;
        let n = r.u8()? as usize;
        let mut witness_sigs = Vec::with_capacity(n);
        for _ in 0..n {
            let id_len = r.u8()? as usize;
            let id = String::from_utf8(r.take(id_len)?.to_vec())
                .map_err(|_| CodecError::Malformed("witness id"))?;
            let sig = Signature::from_slice(r.take(64)?)?;
            witness_sigs.push((id, sig));
        }
        Ok((
            Checkpoint {
                root,
                size,
                timestamp,
                enforcer_sig,
                witness_sigs,
            },
            r.consumed(),
        ))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("truncated input")]
    Truncated,
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Minimal cursor over a byte slice, shared by the binary codecs.
pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.bytes.len() - self.pos < n {
            return Err(CodecError::Truncated);
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub fn rest(&mut self) -> &'a [u8] {
        let out = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        out
    }

    pub fn finish(&self) -> Result<(), CodecError> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(CodecError::Malformed("trailing bytes"))
        }
    }
}

pub fn encode_inclusion_proof(proof: &InclusionProof) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + proof.path.len() * 32);
    out.push(proof.path.len() as u8);
    for d in &proof.path {
        out.extend_from_slice(d.as_bytes());
    }
    out
}

pub fn decode_inclusion_proof(r: &mut Reader<'_>) -> Result<InclusionProof, CodecError> {
    let n = r.u8()? as usize;
    let mut path = Vec::with_capacity(n);
    for _ in 0..n {
        path.push(Digest::from_slice(r.take(32)?)?);
    }
    Ok(InclusionProof { path })
}

pub fn encode_consistency_proof(proof: &ConsistencyProof) -> Vec<u8> {
    let mut out = Vec::with_capacity(17 + proof.path.len() * 32);
    out.extend_from_slice(&proof.old_size.to_be_bytes());
    out.extend_from_slice(&proof.new_size.to_be_bytes());
    out.push(proof.path.len() as u8);
    for d in &proof.path {
        out.extend_from_slice(d.as_bytes());
    }
    out
}

pub fn decode_consistency_proof(r: &mut Reader<'_>) -> Result<ConsistencyProof, CodecError> {
    let old_size = r.u64()?;
    let new_size = r.u64()?;
    let n = r.u8()? as usize;
    let mut path = Vec::with_capacity(n);
    for _ in 0..n {
        path.push(Digest::from_slice(r.take(32)?)?);
    }
    Ok(ConsistencyProof {
        old_size,
        new_size,
        path,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogError {
    #[error("timestamp {now} regresses behind previous checkpoint at {previous}")]
    ClockRegression { now: u64, previous: u64 },
}

/// Single-writer wrapper pairing the tree with checkpoint issuance.
#[derive(Debug, Default)]
pub struct TransparencyLog {
    tree: MerkleTree,
    last_timestamp: Option<u64>,
}

impl TransparencyLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_leaves(leaves: Vec<Digest>, last_timestamp: Option<u64>) -> Self {
        TransparencyLog {
            tree: MerkleTree::from_leaves(leaves),
            last_timestamp,
        }
    }

    pub fn tree(&self) -> &MerkleTree {
        &self.tree
    }

    /// Appends a database commitment and signs a checkpoint over the new
    /// state; the proof shows the entry is the rightmost leaf.
    pub fn append_leaf(
        &mut self,
        leaf: Digest,
        now: u64,
        keypair: &SigningKeypair,
    ) -> Result<(Checkpoint, InclusionProof), LogError> {
        if let Some(prev) = self.last_timestamp {
            if now < prev {
                return Err(LogError::ClockRegression { now, previous: prev });
            }
        }
        let index = self.tree.append(leaf);
        let size = self.tree.size();
        let root = self.tree.root();
        let sig = keypair.sign(&checkpoint_signing_bytes(&root, size, now));
        self.last_timestamp = Some(now);
        let proof = self
            .tree
            .prove_inclusion(index, size)
            .expect("fresh leaf is in range");
        Ok((
            Checkpoint {
                root,
                size,
                timestamp: now,
                enforcer_sig: sig,
                witness_sigs: Vec::new(),
            },
            proof,
        ))
    }
}

/// Full client check of a checkpointed entry: the enforcer signature and
/// every present signature from a known witness must verify, and the proof
/// must place the entry as the rightmost leaf. Any failure yields 0.
pub fn verify_inclusion(
    chkpt: &Checkpoint,
    entry: &Digest,
    proof: &InclusionProof,
    enforcer_pk: &PublicKey,
    witness_pks: &BTreeMap<String, PublicKey>,
) -> bool {
    if chkpt.size == 0 || !chkpt.verify_enforcer(enforcer_pk) {
        return false;
    }
    let bytes = checkpoint_signing_bytes(&chkpt.root, chkpt.size, chkpt.timestamp);
    for (id, sig) in &chkpt.witness_sigs {
        if let Some(pk) = witness_pks.get(id) {
            if !verify(pk, &bytes, sig) {
                return false;
            }
        }
    }
    verify_inclusion_root(&chkpt.root, chkpt.size, entry, chkpt.size - 1, proof)
}

/// Checks that the newer checkpoint's tree extends the older one's.
/// Signature checks are the caller's responsibility.
pub fn verify_consistency(
    old: &Checkpoint,
    new: &Checkpoint,
    proof: &ConsistencyProof,
) -> bool {
    verify_consistency_roots(old.size, &old.root, new.size, &new.root, proof)
}
