//! Space-efficient protocol: prefix bucketing with padding, per-bucket
//! commitments, and one-hot homomorphic selection behind an abstract
//! backend. No private backend ships here; the reference backend exists
//! for functional and equivalence testing only.

mod backend;
mod bucket;
mod protocol;

pub use backend::{
    bfv_plaintext_bytes, entries_per_slot, BackendError, FheBackend, NotPrivateReferenceBackend,
};
pub use bucket::{
    build_buckets, coms_hash, prefix_of, slot_width, Bucket, BucketError, BucketSlot, BucketedDb,
};
pub use protocol::{
    client_pir_decode, client_pir_query, server_pir_answer, PirAnswer, PirProtocolError, PirQuery,
};
