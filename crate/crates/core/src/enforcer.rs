//! The enforcer turns curator exports into the blinded, encrypted
//! key-value database served to clients, commits each build to the
//! transparency log, and answers PSI queries.
//!
//! A record is keyed by `C = H(h^B || "id")` and holds one encrypted
//! curator signature per attesting curator. Nothing derived from the raw
//! object hash appears in a snapshot except through the secret blinding
//! value `B`.

use std::collections::BTreeMap;

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{
    blind, derive_id, derive_key, encrypt_sig, hash_to_group, sha256, verify, CryptoError, Digest,
    GroupElement, PublicKey, Scalar, SigCiphertext, SigningKeypair, SIG_CIPHERTEXT_LEN,
};
use crate::curator::{entry_payload, CuratorTrust, ExportSet};
use crate::transparency::{
    decode_inclusion_proof, encode_inclusion_proof, Checkpoint, CodecError, InclusionProof,
    LogError, Reader, TransparencyLog,
};

/// One blinded entry: the lookup id and the encrypted signatures of the
/// attesting curators, referenced by their index into the snapshot's
/// curator directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlindedRecord {
    pub blinded_id: Digest,
    pub enc_sigs: Vec<(u8, SigCiphertext)>,
}

impl BlindedRecord {
    /// Canonical serialization: `blinded_id || count || (idx || ct)*`,
    /// with signatures in directory order.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(33 + self.enc_sigs.len() * (1 + SIG_CIPHERTEXT_LEN));
        out.extend_from_slice(self.blinded_id.as_bytes());
        out.push(self.enc_sigs.len() as u8);
        for (idx, ct) in &self.enc_sigs {
            out.push(*idx);
            out.extend_from_slice(ct.as_bytes());
        }
        out
    }
}

/// Directory entry naming a curator that contributed to a snapshot, along
/// with the published timestamp its signatures cover (0 when the curator
/// signs untimestamped payloads).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CuratorDirectoryEntry {
    pub id: String,
    pub published_timestamp: u64,
}

/// A published database: sorted records, their commitment, and the log
/// material a client needs to verify it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatabaseSnapshot {
    pub epoch: u64,
    pub enforcer_pk: PublicKey,
    pub directory: Vec<CuratorDirectoryEntry>,
    pub records: Vec<BlindedRecord>,
    pub db_hash: Digest,
    pub checkpoint: Checkpoint,
    pub inclusion: InclusionProof,
}

/// `h_DB`: hash over the canonical serialization of the sorted records.
pub fn database_hash(records: &[BlindedRecord]) -> Digest {
    let mut input = Vec::new();
    for rec in records {
        input.extend_from_slice(&rec.canonical_bytes());
    }
    sha256(&input)
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"VBS1";

impl DatabaseSnapshot {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Wire/file format: header (epoch, record count, pk) and directory,
    /// then the sorted canonical records, checkpoint, inclusion proof.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&self.epoch.to_be_bytes());
        out.extend_from_slice(self.enforcer_pk.as_bytes());
        out.push(self.directory.len() as u8);
        for entry in &self.directory {
            out.push(entry.id.len() as u8);
            out.extend_from_slice(entry.id.as_bytes());
            out.extend_from_slice(&entry.published_timestamp.to_be_bytes());
        }
        out.extend_from_slice(&(self.records.len() as u64).to_be_bytes());
        for rec in &self.records {
            out.extend_from_slice(&rec.canonical_bytes());
        }
        out.extend_from_slice(&self.checkpoint.encode());
        out.extend_from_slice(&encode_inclusion_proof(&self.inclusion));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(CodecError::Malformed("snapshot magic"));
        }
        let epoch = r.u64()?;
        let enforcer_pk = PublicKey::from_slice(r.take(32)?)?;
        let dir_len = r.u8()? as usize;
        let mut directory = Vec::with_capacity(dir_len);
        for _ in 0..dir_len {
            let id_len = r.u8()? as usize;
            let id = String::from_utf8(r.take(id_len)?.to_vec())
                .map_err(|_| CodecError::Malformed("curator id"))?;
            let published_timestamp = r.u64()?;
            directory.push(CuratorDirectoryEntry {
                id,
                published_timestamp,
            });
        }
        let count = r.u64()?;
        // A record is at least 33 + 65 bytes; cap preallocation by what the
        // input could actually hold.
        if count > r.remaining() as u64 / 98 {
            return Err(CodecError::Truncated);
        }
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let blinded_id = Digest::from_slice(r.take(32)?)?;
            let sig_count = r.u8()? as usize;
            if sig_count == 0 {
                return Err(CodecError::Malformed("record without signatures"));
            }
            let mut enc_sigs = Vec::with_capacity(sig_count);
            for _ in 0..sig_count {
                let idx = r.u8()?;
                if idx as usize >= dir_len {
                    return Err(CodecError::Malformed("curator index out of range"));
                }
                let ct = SigCiphertext::from_slice(r.take(SIG_CIPHERTEXT_LEN)?)?;
                enc_sigs.push((idx, ct));
            }
            records.push(BlindedRecord {
                blinded_id,
                enc_sigs,
            });
        }
        let rest = r.rest();
        let (checkpoint, used) = Checkpoint::decode(rest)?;
        let mut r2 = Reader::new(&rest[used..]);
        let inclusion = decode_inclusion_proof(&mut r2)?;
        r2.finish()?;
        let db_hash = database_hash(&records);
        Ok(DatabaseSnapshot {
            epoch,
            enforcer_pk,
            directory,
            records,
            db_hash,
            checkpoint,
            inclusion,
        })
    }
}

/// Why an input signature was left out of a build.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DropReason {
    UnknownCurator,
    BadSignature,
    Expired,
    StaleTimestamp,
    ModeMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DroppedSignature {
    pub curator_id: String,
    pub idx: u64,
    pub reason: DropReason,
}

/// Build-time log of everything that was rejected; one bad curator must
/// never block publication.
#[derive(Clone, Debug, Default)]
pub struct BuildReport {
    pub dropped: Vec<DroppedSignature>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("blinded id collision; distinct hashes mapped to one id")]
    IdCollision,
    #[error("more than 255 curators in one deployment")]
    TooManyCurators,
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PsiError {
    #[error("request rejected: {0}")]
    BadRequest(CryptoError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("old epoch {old} is not before new epoch {new}")]
    EpochOrder { old: u64, new: u64 },
}

/// Pluggable pre-handler for PSI requests. The mechanism is deployment
/// specific; the default passes everything through.
pub trait PsiRateLimiter: Send + Sync {
    fn allow(&self, peer: &str) -> bool;
}

/// Default no-op limiter.
pub struct NoRateLimit;

impl PsiRateLimiter for NoRateLimit {
    fn allow(&self, _peer: &str) -> bool {
        true
    }
}

/// The enforcer's long-lived secrets and its transparency log. The
/// blinding value `B` is fixed for the deployment; changing it would
/// invalidate every published lookup id.
pub struct EnforcerState {
    blind_b: Scalar,
    keypair: SigningKeypair,
    pub policy_m: usize,
    pub epoch: u64,
    pub log: TransparencyLog,
}

impl EnforcerState {
    pub fn new<R: RngCore + CryptoRng>(policy_m: usize, rng: &mut R) -> Self {
        assert!(policy_m >= 1, "policy requires at least one curator");
        EnforcerState {
            blind_b: Scalar::random(rng),
            keypair: SigningKeypair::generate(rng),
            policy_m,
            epoch: 0,
            log: TransparencyLog::new(),
        }
    }

    pub fn from_parts(
        blind_b: Scalar,
        keypair: SigningKeypair,
        policy_m: usize,
        epoch: u64,
        log: TransparencyLog,
    ) -> Self {
        EnforcerState {
            blind_b,
            keypair,
            policy_m,
            epoch,
            log,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public_key()
    }

    pub fn keypair(&self) -> &SigningKeypair {
        &self.keypair
    }

    /// The deployment blinding value; share only with privileged auditors.
    pub fn blinding_value(&self) -> &Scalar {
        &self.blind_b
    }

    /// Builds and commits a database from curator exports. Signatures that
    /// fail verification or freshness are dropped and reported; hashes
    /// attested by fewer than `policy_m` curators are excluded. An empty
    /// result still publishes as an explicit empty snapshot.
    pub fn build_database(
        &mut self,
        sets: &[ExportSet],
        trust: &CuratorTrust,
        now: u64,
    ) -> Result<(DatabaseSnapshot, BuildReport), BuildError> {
        let (directory, records, report) = self.assemble_records(sets, trust, now)?;
        let db_hash = database_hash(&records);
        let (checkpoint, inclusion) = self.log.append_leaf(db_hash, now, &self.keypair)?;
        self.epoch += 1;
        Ok((
            DatabaseSnapshot {
                epoch: self.epoch,
                enforcer_pk: self.public_key(),
                directory,
                records,
                db_hash,
                checkpoint,
                inclusion,
            },
            report,
        ))
    }

    /// The verification/policy/blinding pipeline without the log commit;
    /// the space-efficient build commits a bucket-level hash instead.
    pub fn assemble_records(
        &self,
        sets: &[ExportSet],
        trust: &CuratorTrust,
        now: u64,
    ) -> Result<(Vec<CuratorDirectoryEntry>, Vec<BlindedRecord>, BuildReport), BuildError> {
        let mut report = BuildReport::default();
        // curator id -> obj hash -> freshest accepted (signed_at, idx, sig)
        let mut accepted: BTreeMap<&str, BTreeMap<Digest, (u64, u64, crate::crypto::Signature)>> =
            BTreeMap::new();

        for set in sets {
            let Some(anchor) = trust.get(&set.curator_id) else {
                for rec in &set.records {
                    report.dropped.push(DroppedSignature {
                        curator_id: set.curator_id.clone(),
                        idx: rec.idx,
                        reason: DropReason::UnknownCurator,
                    });
                }
                continue;
            };
            let per_curator = accepted.entry(set.curator_id.as_str()).or_default();
            for rec in &set.records {
                let drop = |reason| DroppedSignature {
                    curator_id: set.curator_id.clone(),
                    idx: rec.idx,
                    reason,
                };
                match (anchor.validity_window_secs, rec.signed_at) {
                    (None, 0) => {}
                    (None, _) | (Some(_), 0) => {
                        report.dropped.push(drop(DropReason::ModeMismatch));
                        continue;
                    }
                    (Some(window), t) => {
                        if t > now || now - t > window {
                            report.dropped.push(drop(DropReason::Expired));
                            continue;
                        }
                    }
                }
                // Signatures are checked against the published trust
                // anchor, not the key the export claims; this is what makes
                // key rotation revoke old exports.
                let payload = entry_payload(rec.signed_at, &rec.obj_hash);
                if !verify(&anchor.public_key, &payload, &rec.sig) {
                    report.dropped.push(drop(DropReason::BadSignature));
                    continue;
                }
                match per_curator.get(&rec.obj_hash) {
                    Some(&(t, idx, _)) if (t, idx) >= (rec.signed_at, rec.idx) => {}
                    _ => {
                        per_curator.insert(rec.obj_hash, (rec.signed_at, rec.idx, rec.sig));
                    }
                }
            }
        }

        // In timestamped mode only signatures covering the curator's latest
        // published timestamp are current; anything older predates a
        // refresh and is treated as revoked.
        let mut latest: BTreeMap<&str, u64> = BTreeMap::new();
        for (curator, entries) in &accepted {
            let t = entries.values().map(|&(t, _, _)| t).max().unwrap_or(0);
            latest.insert(curator, t);
        }
        for (curator, entries) in &mut accepted {
            let t_latest = latest[curator];
            entries.retain(|_, &mut (t, idx, _)| {
                if t == t_latest {
                    true
                } else {
                    report.dropped.push(DroppedSignature {
                        curator_id: curator.to_string(),
                        idx,
                        reason: DropReason::StaleTimestamp,
                    });
                    false
                }
            });
        }
        accepted.retain(|_, entries| !entries.is_empty());

        if accepted.len() > u8::MAX as usize {
            return Err(BuildError::TooManyCurators);
        }
        let directory: Vec<CuratorDirectoryEntry> = accepted
            .keys()
            .map(|&id| CuratorDirectoryEntry {
                id: id.to_string(),
                published_timestamp: latest[id],
            })
            .collect();

        // Regroup per hash, keeping directory order within each record.
        let mut by_hash: BTreeMap<Digest, Vec<(u8, crate::crypto::Signature)>> = BTreeMap::new();
        for (dir_idx, (_, entries)) in accepted.iter().enumerate() {
            for (obj_hash, &(_, _, sig)) in entries {
                by_hash.entry(*obj_hash).or_default().push((dir_idx as u8, sig));
            }
        }

        let mut records = Vec::new();
        for (obj_hash, sigs) in &by_hash {
            if sigs.len() < self.policy_m {
                continue;
            }
            let element = hash_to_group(obj_hash);
            let blinded = blind(&element, &self.blind_b).expect("hash output is never identity");
            let key = derive_key(&blinded);
            let enc_sigs = sigs
                .iter()
                .map(|(idx, sig)| (*idx, encrypt_sig(&key, sig, *idx as u32)))
                .collect();
            records.push(BlindedRecord {
                blinded_id: derive_id(&blinded),
                enc_sigs,
            });
        }
        records.sort_by(|a, b| a.blinded_id.cmp(&b.blinded_id));
        if records.windows(2).any(|w| w[0].blinded_id == w[1].blinded_id) {
            return Err(BuildError::IdCollision);
        }
        Ok((directory, records, report))
    }

    /// Publishes a new epoch from fresh curator exports. Expired or
    /// rotated-away signatures drop out through the same build-time
    /// verification as the initial build.
    pub fn publish_update(
        &mut self,
        sets: &[ExportSet],
        trust: &CuratorTrust,
        now: u64,
    ) -> Result<(DatabaseSnapshot, BuildReport), BuildError> {
        self.build_database(sets, trust, now)
    }

    /// `Resp = Req^B`. Constant work regardless of what the request
    /// corresponds to; the record set is never consulted.
    pub fn respond_psi(&self, request: &GroupElement) -> Result<GroupElement, PsiError> {
        psi_response(&self.blind_b, request)
    }
}

/// The PSI exchange is a single exponentiation with the deployment secret.
pub fn psi_response(blind_b: &Scalar, request: &GroupElement) -> Result<GroupElement, PsiError> {
    blind(request, blind_b).map_err(PsiError::BadRequest)
}

/// Record-level difference between two snapshots, for distributing partial
/// modifications. `added` carries new or changed records; `removed` lists
/// ids that disappeared.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SnapshotDiff {
    pub added: Vec<BlindedRecord>,
    pub removed: Vec<Digest>,
}

pub fn snapshot_diff(
    old: &DatabaseSnapshot,
    new: &DatabaseSnapshot,
) -> Result<SnapshotDiff, DiffError> {
    if old.epoch >= new.epoch {
        return Err(DiffError::EpochOrder {
            old: old.epoch,
            new: new.epoch,
        });
    }
    let old_map: BTreeMap<&Digest, &BlindedRecord> =
        old.records.iter().map(|r| (&r.blinded_id, r)).collect();
    let new_map: BTreeMap<&Digest, &BlindedRecord> =
        new.records.iter().map(|r| (&r.blinded_id, r)).collect();

    let mut diff = SnapshotDiff::default();
    for (id, rec) in &new_map {
        if old_map.get(id) != Some(rec) {
            diff.added.push((*rec).clone());
        }
    }
    for id in old_map.keys() {
        if !new_map.contains_key(*id) {
            diff.removed.push(**id);
        }
    }
    Ok(diff)
}

/// Applies a diff to a sorted record set, yielding the new sorted set.
pub fn apply_diff(old: &[BlindedRecord], diff: &SnapshotDiff) -> Vec<BlindedRecord> {
    let mut map: BTreeMap<Digest, BlindedRecord> = old
        .iter()
        .map(|r| (r.blinded_id, r.clone()))
        .collect();
    for id in &diff.removed {
        map.remove(id);
    }
    for rec in &diff.added {
        map.insert(rec.blinded_id, rec.clone());
    }
    map.into_values().collect()
}
