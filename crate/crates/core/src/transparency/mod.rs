//! Append-only Merkle log, signed checkpoints, proofs, witnesses, and
//! checkpoint gossip stores.

mod checkpoint;
mod merkle;
mod store;
mod witness;

pub use checkpoint::{
    checkpoint_signing_bytes, decode_consistency_proof, decode_inclusion_proof,
    encode_consistency_proof, encode_inclusion_proof, verify_consistency, verify_inclusion,
    Checkpoint, CodecError, LogError, Reader, TransparencyLog,
};
pub use merkle::{
    leaf_hash, node_hash, root_from_inclusion, verify_consistency_roots, verify_inclusion_root,
    ConsistencyProof, InclusionProof, MerkleError, MerkleTree,
};
pub use store::{CheckpointStore, FileCheckpointStore, MemoryCheckpointStore, StoreError};
pub use witness::{SplitViewEvidence, Witness, WitnessError};
