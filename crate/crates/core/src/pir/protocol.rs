//! The retrieval protocol over the backend: encrypted one-hot selection on
//! the server, commitment and inclusion checks plus signature evaluation
//! on the client.

use std::collections::BTreeMap;

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use super::backend::FheBackend;
use super::bucket::{coms_hash, prefix_of, Bucket, BucketedDb};
use crate::client::{check_encrypted_sigs, EvalDiagnostic, EvalOptions, Verdict, VerdictStatus};
use crate::crypto::{derive_key, object_hash, Digest, GroupElement, PublicKey, SigCiphertext};
use crate::curator::CuratorTrust;
use crate::enforcer::CuratorDirectoryEntry;
use crate::transparency::{verify_inclusion, Checkpoint, InclusionProof};

/// Encrypted one-hot selector over the `2^k` buckets.
pub struct PirQuery<B: FheBackend> {
    pub prefix_bits: u32,
    pub cts: Vec<B::Ciphertext>,
}

/// Encrypted bucket plus everything needed to verify it: all bucket
/// commitments, the inclusion proof for their hash, the gossiped
/// checkpoint, and the curator directory.
pub struct PirAnswer<B: FheBackend> {
    pub answer: B::Ciphertext,
    pub bucket_size: usize,
    pub directory: Vec<CuratorDirectoryEntry>,
    pub coms: Vec<Digest>,
    pub checkpoint: Checkpoint,
    pub inclusion: InclusionProof,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PirProtocolError {
    #[error("query has {got} ciphertexts, database has {want} buckets")]
    QueryShape { got: usize, want: usize },
    #[error("prefix bits mismatch: query {query}, database {db}")]
    PrefixBits { query: u32, db: u32 },
}

/// Builds the encrypted selector for the bucket holding `lookup_key`.
pub fn client_pir_query<B: FheBackend, R: RngCore + CryptoRng>(
    backend: &B,
    lookup_key: &Digest,
    prefix_bits: u32,
    rng: &mut R,
) -> (PirQuery<B>, B::SecretKey) {
    let sk = backend.keygen(rng);
    let alpha = prefix_of(lookup_key, prefix_bits);
    let cts = (0..1u32 << prefix_bits)
        .map(|j| backend.encrypt(&sk, &[u8::from(j == alpha)]))
        .collect();
    (
        PirQuery {
            prefix_bits,
            cts,
        },
        sk,
    )
}

/// Absorbs every bucket into the matching selector slot and sums. The
/// loop shape is identical for every query; the plaintext index is never
/// inspected here.
pub fn server_pir_answer<B: FheBackend>(
    backend: &B,
    query: &PirQuery<B>,
    db: &BucketedDb,
) -> Result<PirAnswer<B>, PirProtocolError> {
    if query.prefix_bits != db.prefix_bits {
        return Err(PirProtocolError::PrefixBits {
            query: query.prefix_bits,
            db: db.prefix_bits,
        });
    }
    if query.cts.len() != db.buckets.len() {
        return Err(PirProtocolError::QueryShape {
            got: query.cts.len(),
            want: db.buckets.len(),
        });
    }
    let n_curators = db.directory.len();
    let absorbed: Vec<B::Ciphertext> = query
        .cts
        .iter()
        .zip(db.buckets.iter())
        .map(|(ct, bucket)| backend.absorb(ct, &bucket.to_bytes(n_curators)))
        .collect();
    Ok(PirAnswer {
        answer: backend.add(&absorbed),
        bucket_size: db.bucket_size,
        directory: db.directory.clone(),
        coms: db.coms.clone(),
        checkpoint: db.checkpoint.clone(),
        inclusion: db.inclusion.clone(),
    })
}

/// Decrypts and verifies a retrieval, then evaluates exactly like the
/// time-efficient client. All failures collapse to Benign:
/// checkpoint/witness signatures, the recomputed bucket commitment, its
/// membership at position alpha, the database hash over all commitments,
/// and the log inclusion proof must all pass before any signature is even
/// decrypted.
#[allow(clippy::too_many_arguments)]
pub fn client_pir_decode<B: FheBackend>(
    backend: &B,
    answer: &PirAnswer<B>,
    sk: &B::SecretKey,
    lookup_key: &Digest,
    unblinded: &GroupElement,
    object: &[u8],
    enforcer_pk: &PublicKey,
    witness_pks: &BTreeMap<String, PublicKey>,
    witness_quorum: usize,
    trust: &CuratorTrust,
    opts: &EvalOptions,
) -> Verdict {
    let benign = |diag: Vec<EvalDiagnostic>| Verdict {
        status: VerdictStatus::Benign,
        attesting_curators: Vec::new(),
        evidence: Vec::new(),
        epoch: 0,
        diagnostics: diag,
    };
    let malformed = vec![EvalDiagnostic::MalformedRecord];

    if !answer.checkpoint.verify_enforcer(enforcer_pk)
        || answer.checkpoint.valid_witness_count(witness_pks) < witness_quorum
    {
        return benign(malformed);
    }
    let prefix_bits = (answer.coms.len() as u32).trailing_zeros();
    if !(1..=24).contains(&prefix_bits) || answer.coms.len() != 1usize << prefix_bits {
        return benign(malformed);
    }
    let alpha = prefix_of(lookup_key, prefix_bits) as usize;

    let bucket_bytes = backend.decrypt(sk, &answer.answer);
    let Some(bucket) = Bucket::parse(&bucket_bytes, answer.bucket_size, answer.directory.len())
    else {
        return benign(malformed);
    };

    // Commitment chain: bucket -> coms[alpha] -> H(coms) -> log.
    if crate::crypto::sha256(&bucket_bytes) != answer.coms[alpha] {
        return benign(malformed);
    }
    let db_hash = coms_hash(&answer.coms);
    if !verify_inclusion(
        &answer.checkpoint,
        &db_hash,
        &answer.inclusion,
        enforcer_pk,
        witness_pks,
    ) {
        return benign(malformed);
    }

    let Some(slot) = bucket
        .slots
        .iter()
        .find(|s| !s.is_null() && s.blinded_id == *lookup_key)
    else {
        return benign(Vec::new());
    };

    let obj_hash = object_hash(object);
    let key = derive_key(unblinded);
    let enc_sigs: Vec<(u8, SigCiphertext)> = slot
        .enc_sigs
        .iter()
        .enumerate()
        .filter(|(_, ct)| !ct.is_zero())
        .map(|(idx, ct)| (idx as u8, *ct))
        .collect();
    let (attesting, evidence, diagnostics) =
        check_encrypted_sigs(&obj_hash, &key, &enc_sigs, &answer.directory, trust, opts);
    if attesting.len() >= opts.policy_m {
        Verdict {
            status: VerdictStatus::Harmful,
            attesting_curators: attesting,
            evidence,
            epoch: 0,
            diagnostics,
        }
    } else {
        benign(diagnostics)
    }
}
