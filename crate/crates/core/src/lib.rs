//! Building blocks for robust, privacy-preserving, transparent, and
//! auditable on-device blocklisting.
//!
//! The library is organized around the roles of a deployment:
//!
//! - [`crypto`]: group arithmetic for blinding, hashing with domain
//!   separation, signatures, and length-preserving signature encryption.
//! - [`transparency`]: append-only Merkle log, signed checkpoints,
//!   inclusion/consistency proofs, witnesses, and checkpoint stores.
//! - [`curator`]: append-only databases of signed object hashes.
//! - [`enforcer`]: blinded, encrypted key-value databases committed to the
//!   transparency log, plus the server half of the PSI exchange.
//! - [`client`]: snapshot verification, detection queries, local
//!   evaluation, and appeal bundles.
//! - [`pir`]: the space-efficient bucketed retrieval protocol behind an
//!   abstract homomorphic backend.
//! - [`auditor`]: unprivileged log audits and privileged database
//!   reconstruction.

pub mod auditor;
pub mod client;
pub mod crypto;
pub mod curator;
pub mod enforcer;
pub mod pir;
pub mod transparency;
