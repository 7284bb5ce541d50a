//! Client-side protocol: verify a snapshot before trusting it, run the
//! blinded detection exchange, evaluate locally, and export appeal
//! bundles.
//!
//! Evaluation never fails open: every anomaly (missing key, undecryptable
//! or unverifiable signature, stale timestamp) collapses to Benign, with
//! the reason kept on a diagnostic channel for the appeal and audit paths.

use std::collections::BTreeMap;

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{
    blind, decrypt_sig, derive_id, derive_key, hash_to_group, object_hash, unblind, verify,
    Digest, GroupElement, PublicKey, Scalar, SigCiphertext, Signature, SymKey,
};
use crate::curator::{entry_payload, CuratorTrust};
use crate::enforcer::{database_hash, CuratorDirectoryEntry, DatabaseSnapshot};
use crate::transparency::{verify_inclusion, CodecError, Reader};

/// Why a snapshot was rejected. The client discards all data from the
/// enforcer when any of these fire.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SnapshotRejection {
    #[error("checkpoint signature does not verify under the enforcer key")]
    EnforcerSignature,
    #[error("witness quorum not met: {valid} of {required}")]
    WitnessQuorum { valid: usize, required: usize },
    #[error("records do not hash to the committed database hash")]
    DbHashMismatch,
    #[error("inclusion proof does not place the database in the log")]
    InclusionFailure,
    #[error("snapshot is structurally malformed: {0}")]
    Malformed(&'static str),
}

/// A snapshot that passed every check, flattened into a lookup map.
#[derive(Debug, Clone)]
pub struct VerifiedDb {
    pub epoch: u64,
    pub directory: Vec<CuratorDirectoryEntry>,
    lookup: BTreeMap<Digest, Vec<(u8, SigCiphertext)>>,
    pub checkpoint_root: Digest,
    pub checkpoint_size: u64,
    pub checkpoint_time: u64,
}

impl VerifiedDb {
    pub fn len(&self) -> usize {
        self.lookup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lookup.is_empty()
    }

    pub fn get(&self, id: &Digest) -> Option<&[(u8, SigCiphertext)]> {
        self.lookup.get(id).map(|v| v.as_slice())
    }
}

/// Runs the full acceptance pipeline on a snapshot: enforcer signature,
/// witness quorum, database hash recomputation, and the inclusion proof
/// showing the database is the rightmost log entry.
pub fn verify_snapshot(
    snapshot: &DatabaseSnapshot,
    enforcer_pk: &PublicKey,
    witness_pks: &BTreeMap<String, PublicKey>,
    quorum: usize,
) -> Result<VerifiedDb, SnapshotRejection> {
    if !snapshot.checkpoint.verify_enforcer(enforcer_pk) {
        return Err(SnapshotRejection::EnforcerSignature);
    }
    let valid = snapshot.checkpoint.valid_witness_count(witness_pks);
    if valid < quorum {
        return Err(SnapshotRejection::WitnessQuorum {
            valid,
            required: quorum,
        });
    }
    for w in snapshot.records.windows(2) {
        if w[0].blinded_id >= w[1].blinded_id {
            return Err(SnapshotRejection::Malformed("records not sorted and unique"));
        }
    }
    for rec in &snapshot.records {
        if rec.enc_sigs.is_empty() {
            return Err(SnapshotRejection::Malformed("record without signatures"));
        }
        if rec
            .enc_sigs
            .iter()
            .any(|(idx, _)| *idx as usize >= snapshot.directory.len())
        {
            return Err(SnapshotRejection::Malformed("curator index out of range"));
        }
    }
    if database_hash(&snapshot.records) != snapshot.db_hash {
        return Err(SnapshotRejection::DbHashMismatch);
    }
    if !verify_inclusion(
        &snapshot.checkpoint,
        &snapshot.db_hash,
        &snapshot.inclusion,
        enforcer_pk,
        witness_pks,
    ) {
        return Err(SnapshotRejection::InclusionFailure);
    }
    Ok(VerifiedDb {
        epoch: snapshot.epoch,
        directory: snapshot.directory.clone(),
        lookup: snapshot
            .records
            .iter()
            .map(|r| (r.blinded_id, r.enc_sigs.clone()))
            .collect(),
        checkpoint_root: snapshot.checkpoint.root,
        checkpoint_size: snapshot.checkpoint.size,
        checkpoint_time: snapshot.checkpoint.timestamp,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("query state already consumed")]
    StateReused,
}

/// In-flight detection query. Single use; the blinding scalar never
/// leaves this struct.
pub struct QueryState {
    randomness: Option<Scalar>,
    obj_hash: Digest,
}

impl std::fmt::Debug for QueryState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "QueryState({:?})", self.obj_hash)
    }
}

impl QueryState {
    pub fn obj_hash(&self) -> &Digest {
        &self.obj_hash
    }
}

/// Starts detection: `Req = H(obj)^A` under fresh uniform randomness.
pub fn begin_query<R: RngCore + CryptoRng>(
    object: &[u8],
    rng: &mut R,
) -> (GroupElement, QueryState) {
    let obj_hash = object_hash(object);
    let randomness = Scalar::random(rng);
    let request =
        blind(&hash_to_group(&obj_hash), &randomness).expect("hash output is never identity");
    (
        request,
        QueryState {
            randomness: Some(randomness),
            obj_hash,
        },
    )
}

/// Finishes detection: unblinds the response to `H(obj)^B` and derives
/// the lookup key. Consumes the state's randomness.
pub fn complete_query(
    state: &mut QueryState,
    response: &GroupElement,
) -> Result<(Digest, GroupElement), QueryError> {
    let randomness = state.randomness.take().ok_or(QueryError::StateReused)?;
    let unblinded = unblind(response, &randomness).expect("decoded responses are never identity");
    Ok((derive_id(&unblinded), unblinded))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictStatus {
    Benign,
    Harmful,
}

/// Per-signature failure reasons; diagnostics only, never part of the
/// verdict decision surface.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalDiagnostic {
    UnknownCurator { curator_id: String },
    SignatureInvalid { curator_id: String },
    TimestampStale { curator_id: String, signed_at: u64 },
    MalformedRecord,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppealSignature {
    pub curator_id: String,
    pub signature: Signature,
    /// Published timestamp the signature covers; 0 when untimestamped.
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub status: VerdictStatus,
    /// Curators whose signatures verified; empty iff Benign.
    pub attesting_curators: Vec<String>,
    /// Decrypted signatures backing a Harmful verdict.
    pub evidence: Vec<AppealSignature>,
    pub epoch: u64,
    pub diagnostics: Vec<EvalDiagnostic>,
}

impl Verdict {
    fn benign(epoch: u64, diagnostics: Vec<EvalDiagnostic>) -> Self {
        Verdict {
            status: VerdictStatus::Benign,
            attesting_curators: Vec::new(),
            evidence: Vec::new(),
            epoch,
            diagnostics,
        }
    }

    pub fn is_harmful(&self) -> bool {
        self.status == VerdictStatus::Harmful
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub policy_m: usize,
    pub now: u64,
    /// Allowance for clock disagreement when checking timestamp freshness.
    pub skew_secs: u64,
}

impl EvalOptions {
    pub fn new(policy_m: usize, now: u64) -> Self {
        EvalOptions {
            policy_m,
            now,
            skew_secs: 300,
        }
    }
}

/// Shared signature evaluation for both protocols: decrypt each ciphertext
/// under its slot, verify against the payload for this object, and check
/// timestamp freshness when the curator publishes timestamps.
pub(crate) fn check_encrypted_sigs(
    obj_hash: &Digest,
    key: &SymKey,
    enc_sigs: &[(u8, SigCiphertext)],
    directory: &[CuratorDirectoryEntry],
    trust: &CuratorTrust,
    opts: &EvalOptions,
) -> (Vec<String>, Vec<AppealSignature>, Vec<EvalDiagnostic>) {
    let mut attesting = Vec::new();
    let mut evidence = Vec::new();
    let mut diagnostics = Vec::new();
    for (dir_idx, ct) in enc_sigs {
        let Some(dir_entry) = directory.get(*dir_idx as usize) else {
            diagnostics.push(EvalDiagnostic::MalformedRecord);
            continue;
        };
        let Some(anchor) = trust.get(&dir_entry.id) else {
            diagnostics.push(EvalDiagnostic::UnknownCurator {
                curator_id: dir_entry.id.clone(),
            });
            continue;
        };
        let signed_at = dir_entry.published_timestamp;
        if let Some(window) = anchor.validity_window_secs {
            let fresh = signed_at > 0
                && signed_at <= opts.now + opts.skew_secs
                && opts.now <= signed_at + window + opts.skew_secs;
            if !fresh {
                diagnostics.push(EvalDiagnostic::TimestampStale {
                    curator_id: dir_entry.id.clone(),
                    signed_at,
                });
                continue;
            }
        } else if signed_at != 0 {
            diagnostics.push(EvalDiagnostic::TimestampStale {
                curator_id: dir_entry.id.clone(),
                signed_at,
            });
            continue;
        }
        let sig = decrypt_sig(key, ct, *dir_idx as u32);
        let payload = entry_payload(signed_at, obj_hash);
        if verify(&anchor.public_key, &payload, &sig) {
            attesting.push(dir_entry.id.clone());
            evidence.push(AppealSignature {
                curator_id: dir_entry.id.clone(),
                signature: sig,
                timestamp: signed_at,
            });
        } else {
            diagnostics.push(EvalDiagnostic::SignatureInvalid {
                curator_id: dir_entry.id.clone(),
            });
        }
    }
    (attesting, evidence, diagnostics)
}

/// Local evaluation: looks the unblinded value up in the verified
/// database, verifies the decrypted curator signatures against `H(obj)`,
/// and emits Harmful only when at least `policy_m` of them pass. Performs
/// no network operation.
pub fn evaluate(
    object: &[u8],
    unblinded: &GroupElement,
    db: &VerifiedDb,
    trust: &CuratorTrust,
    opts: &EvalOptions,
) -> Verdict {
    let lookup_key = derive_id(unblinded);
    let Some(enc_sigs) = db.get(&lookup_key) else {
        return Verdict::benign(db.epoch, Vec::new());
    };
    let obj_hash = object_hash(object);
    let key = derive_key(unblinded);
    let (attesting, evidence, diagnostics) =
        check_encrypted_sigs(&obj_hash, &key, enc_sigs, &db.directory, trust, opts);
    if attesting.len() >= opts.policy_m {
        Verdict {
            status: VerdictStatus::Harmful,
            attesting_curators: attesting,
            evidence,
            epoch: db.epoch,
            diagnostics,
        }
    } else {
        Verdict::benign(db.epoch, diagnostics)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AppealError {
    #[error("only harmful verdicts can be appealed")]
    NotHarmful,
    #[error("verdict carries no evidence")]
    NoEvidence,
}

/// Object plus curator signatures; verifiable by anyone holding the
/// curators' public keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppealBundle {
    pub object: Vec<u8>,
    pub signatures: Vec<AppealSignature>,
}

const APPEAL_MAGIC: &[u8; 4] = b"VBA1";

impl AppealBundle {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.object.len() + self.signatures.len() * 80);
        out.extend_from_slice(APPEAL_MAGIC);
        out.extend_from_slice(&(self.object.len() as u64).to_be_bytes());
        out.extend_from_slice(&self.object);
        out.push(self.signatures.len() as u8);
        for sig in &self.signatures {
            out.push(sig.curator_id.len() as u8);
            out.extend_from_slice(sig.curator_id.as_bytes());
            out.extend_from_slice(sig.signature.as_bytes());
            out.extend_from_slice(&sig.timestamp.to_be_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != APPEAL_MAGIC {
            return Err(CodecError::Malformed("appeal magic"));
        }
        let obj_len = r.u64()? as usize;
        let object = r.take(obj_len)?.to_vec();
        let n = r.u8()? as usize;
        let mut signatures = Vec::with_capacity(n);
        for _ in 0..n {
            let id_len = r.u8()? as usize;
            let curator_id = String::from_utf8(r.take(id_len)?.to_vec())
                .map_err(|_| CodecError::Malformed("curator id"))?;
            let signature = Signature::from_slice(r.take(64)?)?;
            let timestamp = r.u64()?;
            signatures.push(AppealSignature {
                curator_id,
                signature,
                timestamp,
            });
        }
        r.finish()?;
        Ok(AppealBundle { object, signatures })
    }
}

/// Packages a Harmful verdict into a self-contained, publicly verifiable
/// bundle.
pub fn export_appeal(object: &[u8], verdict: &Verdict) -> Result<AppealBundle, AppealError> {
    if verdict.status != VerdictStatus::Harmful {
        return Err(AppealError::NotHarmful);
    }
    if verdict.evidence.is_empty() {
        return Err(AppealError::NoEvidence);
    }
    Ok(AppealBundle {
        object: object.to_vec(),
        signatures: verdict.evidence.clone(),
    })
}
