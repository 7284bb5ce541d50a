//! Gossip witnesses. A witness refuses to co-sign any checkpoint that is
//! not a consistent extension of the last one it saw, and keeps the
//! conflicting pair as portable evidence of a split view.

use thiserror::Error;

use super::checkpoint::{checkpoint_signing_bytes, Checkpoint};
use super::merkle::{verify_consistency_roots, ConsistencyProof};
use crate::crypto::{Digest, PublicKey, Signature, SigningKeypair};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitViewEvidence {
    pub seen_root: Digest,
    pub seen_size: u64,
    pub offered: Checkpoint,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WitnessError {
    #[error("enforcer signature on checkpoint does not verify")]
    BadEnforcerSignature,
    #[error("checkpoint of size {new} is not consistent with last seen size {seen}")]
    Inconsistent { seen: u64, new: u64 },
}

#[derive(Debug)]
pub struct Witness {
    pub id: String,
    keypair: SigningKeypair,
    enforcer_pk: PublicKey,
    last_seen: Option<(u64, Digest)>,
    evidence: Vec<SplitViewEvidence>,
}

impl Witness {
    pub fn new(id: impl Into<String>, keypair: SigningKeypair, enforcer_pk: PublicKey) -> Self {
        Witness {
            id: id.into(),
            keypair,
            enforcer_pk,
            last_seen: None,
            evidence: Vec::new(),
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public_key()
    }

    pub fn last_seen(&self) -> Option<(u64, Digest)> {
        self.last_seen
    }

    /// Restores persisted witness state.
    pub fn restore(&mut self, last_seen: Option<(u64, Digest)>) {
        self.last_seen = last_seen;
    }

    pub fn evidence(&self) -> &[SplitViewEvidence] {
        &self.evidence
    }

    /// Verifies the checkpoint against the witness's view and co-signs it.
    /// `proof` must link the last seen size to the offered checkpoint (it
    /// is ignored on first contact).
    pub fn attest(
        &mut self,
        chkpt: &Checkpoint,
        proof: &ConsistencyProof,
    ) -> Result<Signature, WitnessError> {
        if !chkpt.verify_enforcer(&self.enforcer_pk) {
            return Err(WitnessError::BadEnforcerSignature);
        }
        if let Some((seen_size, seen_root)) = self.last_seen {
            let consistent = seen_size <= chkpt.size
                && verify_consistency_roots(seen_size, &seen_root, chkpt.size, &chkpt.root, proof);
            if !consistent {
                self.evidence.push(SplitViewEvidence {
                    seen_root,
                    seen_size,
                    offered: chkpt.clone(),
                });
                return Err(WitnessError::Inconsistent {
                    seen: seen_size,
                    new: chkpt.size,
                });
            }
        }
        self.last_seen = Some((chkpt.size, chkpt.root));
        let bytes = checkpoint_signing_bytes(&chkpt.root, chkpt.size, chkpt.timestamp);
        Ok(self.keypair.sign(&bytes))
    }
}
