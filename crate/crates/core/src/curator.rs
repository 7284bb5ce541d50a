//! Curators maintain an append-only database of harmful objects, sign the
//! object hashes, and export the signed sets to enforcers. Raw object
//! bytes never leave the curator except toward allowlisted auditors.
//!
//! Revocation works by expiry rather than deletion, in one of two modes:
//! rotating the signing key on an interval, or stamping signatures with a
//! published timestamp that is only fresh for a validity window.

use std::collections::{BTreeMap, BTreeSet};

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

use crate::crypto::{object_hash, verify, Digest, PublicKey, Signature, SigningKeypair};
use crate::transparency::{CodecError, Reader};

/// Signed payload framing: `"entry-v1" || T (8-byte BE, 0 when
/// untimestamped) || object hash`.
pub fn entry_payload(timestamp: u64, obj_hash: &Digest) -> [u8; 48] {
    let mut buf = [0u8; 48];
    buf[..8].copy_from_slice(b"entry-v1");
    buf[8..16].copy_from_slice(&timestamp.to_be_bytes());
    buf[16..].copy_from_slice(obj_hash.as_bytes());
    buf
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RevocationMode {
    /// Old signatures expire when the key rotates.
    KeyRotation,
    /// Signatures carry the curator's published timestamp and expire after
    /// the validity window.
    Timestamped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchivedKey {
    pub public_key: PublicKey,
    pub valid_from: u64,
    pub valid_until: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CuratorError {
    #[error("credential {0:?} is not an authorized auditor")]
    Unauthorized(String),
    #[error("no entry with idx {0}")]
    NotFound(u64),
    #[error("validity window must be positive in timestamped mode")]
    InvalidWindow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CuratorEntry {
    pub idx: u64,
    pub obj_hash: Digest,
    pub sig: Signature,
    /// The published timestamp the signature covers; 0 when untimestamped.
    pub signed_at: u64,
}

/// The curator's signing identity, including its archived key history.
pub struct CuratorIdentity {
    pub curator_id: String,
    keypair: SigningKeypair,
    pub mode: RevocationMode,
    pub validity_window_secs: u64,
    /// Published timestamp covered by current signatures (0 in rotation mode).
    pub published_timestamp: u64,
    key_activated_at: u64,
    archived: Vec<ArchivedKey>,
}

impl CuratorIdentity {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        curator_id: String,
        keypair: SigningKeypair,
        mode: RevocationMode,
        validity_window_secs: u64,
        published_timestamp: u64,
        key_activated_at: u64,
        archived: Vec<ArchivedKey>,
    ) -> Self {
        CuratorIdentity {
            curator_id,
            keypair,
            mode,
            validity_window_secs,
            published_timestamp,
            key_activated_at,
            archived,
        }
    }

    pub fn public_key(&self) -> PublicKey {
        self.keypair.public_key()
    }

    pub fn keypair_seed(&self) -> [u8; 32] {
        self.keypair.seed()
    }

    pub fn key_activated_at(&self) -> u64 {
        self.key_activated_at
    }

    pub fn archived_keys(&self) -> &[ArchivedKey] {
        &self.archived
    }

    /// Verifies a historical signature against whichever key was active
    /// when it was produced.
    pub fn verify_at(&self, signed_at_time: u64, payload: &[u8], sig: &Signature) -> bool {
        if signed_at_time >= self.key_activated_at {
            return verify(&self.public_key(), payload, sig);
        }
        self.archived
            .iter()
            .find(|k| k.valid_from <= signed_at_time && signed_at_time < k.valid_until)
            .is_some_and(|k| verify(&k.public_key, payload, sig))
    }
}

pub struct CuratorDb {
    pub identity: CuratorIdentity,
    entries: Vec<CuratorEntry>,
    objects: BTreeMap<u64, Vec<u8>>,
    auditors: BTreeSet<String>,
}

impl CuratorDb {
    pub fn new<R: RngCore + CryptoRng>(
        curator_id: impl Into<String>,
        mode: RevocationMode,
        validity_window_secs: u64,
        now: u64,
        rng: &mut R,
    ) -> Result<Self, CuratorError> {
        if mode == RevocationMode::Timestamped && validity_window_secs == 0 {
            return Err(CuratorError::InvalidWindow);
        }
        let identity = CuratorIdentity {
            curator_id: curator_id.into(),
            keypair: SigningKeypair::generate(rng),
            mode,
            validity_window_secs,
            published_timestamp: match mode {
                RevocationMode::KeyRotation => 0,
                RevocationMode::Timestamped => now,
            },
            key_activated_at: now,
            archived: Vec::new(),
        };
        Ok(CuratorDb {
            identity,
            entries: Vec::new(),
            objects: BTreeMap::new(),
            auditors: BTreeSet::new(),
        })
    }

    pub fn from_parts(identity: CuratorIdentity, entries: Vec<CuratorEntry>) -> Self {
        CuratorDb {
            identity,
            entries,
            objects: BTreeMap::new(),
            auditors: BTreeSet::new(),
        }
    }

    pub fn authorize_auditor(&mut self, credential: impl Into<String>) {
        self.auditors.insert(credential.into());
    }

    pub fn auditors(&self) -> impl Iterator<Item = &str> {
        self.auditors.iter().map(|s| s.as_str())
    }

    /// Reattaches raw object bytes when loading a persisted database.
    pub fn restore_object(&mut self, idx: u64, bytes: Vec<u8>) {
        self.objects.insert(idx, bytes);
    }

    pub fn entries(&self) -> &[CuratorEntry] {
        &self.entries
    }

    fn next_idx(&self) -> u64 {
        self.entries.last().map(|e| e.idx).unwrap_or(0) + 1
    }

    /// Appends a harmful object: hashes it, signs the payload under the
    /// current key, and retains the raw bytes for privileged disclosure.
    /// Duplicates are allowed and get a fresh idx and signature.
    pub fn add_object(&mut self, object: &[u8]) -> &CuratorEntry {
        let obj_hash = object_hash(object);
        let signed_at = self.identity.published_timestamp;
        let sig = self
            .identity
            .keypair
            .sign(&entry_payload(signed_at, &obj_hash));
        let idx = self.next_idx();
        self.objects.insert(idx, object.to_vec());
        self.entries.push(CuratorEntry {
            idx,
            obj_hash,
            sig,
            signed_at,
        });
        self.entries.last().unwrap()
    }

    /// The complete signed set, ordered by idx. Raw object bytes are never
    /// part of an export.
    pub fn export_set(&self) -> ExportSet {
        ExportSet {
            curator_id: self.identity.curator_id.clone(),
            public_key: self.identity.public_key(),
            records: self.entries.clone(),
        }
    }

    /// Raw bytes for one entry, for allowlisted auditor credentials only.
    pub fn disclose_object(&self, idx: u64, credential: &str) -> Result<&[u8], CuratorError> {
        if !self.auditors.contains(credential) {
            return Err(CuratorError::Unauthorized(credential.to_string()));
        }
        self.objects
            .get(&idx)
            .map(|v| v.as_slice())
            .ok_or(CuratorError::NotFound(idx))
    }

    /// Rotates the signing key. The outgoing key is archived with its
    /// validity interval so historical signatures stay checkable.
    pub fn rotate_key<R: RngCore + CryptoRng>(&mut self, now: u64, rng: &mut R) {
        let outgoing = ArchivedKey {
            public_key: self.identity.public_key(),
            valid_from: self.identity.key_activated_at,
            valid_until: now,
        };
        self.identity.archived.push(outgoing);
        self.identity.keypair = SigningKeypair::generate(rng);
        self.identity.key_activated_at = now;
    }

    /// Advances the published timestamp and re-signs every distinct hash
    /// currently in the database, appending fresh entries. Pre-refresh
    /// signatures age out once the validity window passes.
    pub fn refresh_timestamp(&mut self, now: u64) {
        assert_eq!(self.identity.mode, RevocationMode::Timestamped);
        self.identity.published_timestamp = now;
        let mut seen = BTreeSet::new();
        let hashes: Vec<Digest> = self
            .entries
            .iter()
            .rev()
            .filter(|e| seen.insert(e.obj_hash))
            .map(|e| e.obj_hash)
            .collect();
        for obj_hash in hashes {
            let sig = self.identity.keypair.sign(&entry_payload(now, &obj_hash));
            let idx = self.next_idx();
            self.entries.push(CuratorEntry {
                idx,
                obj_hash,
                sig,
                signed_at: now,
            });
        }
    }
}

/// A curator's exported set plus the metadata enforcers need to verify it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportSet {
    pub curator_id: String,
    pub public_key: PublicKey,
    pub records: Vec<CuratorEntry>,
}

const EXPORT_MAGIC: &[u8; 4] = b"VBX1";
const EXPORT_RECORD_LEN: u32 = 112;

impl ExportSet {
    /// Length-prefixed binary records (idx 8 || hash 32 || sig 64 || T 8)
    /// after a header naming the curator and its public key.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.records.len() * 116);
        out.extend_from_slice(EXPORT_MAGIC);
        out.push(self.curator_id.len() as u8);
        out.extend_from_slice(self.curator_id.as_bytes());
        out.extend_from_slice(self.public_key.as_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_be_bytes());
        for rec in &self.records {
            out.extend_from_slice(&EXPORT_RECORD_LEN.to_be_bytes());
            out.extend_from_slice(&rec.idx.to_be_bytes());
            out.extend_from_slice(rec.obj_hash.as_bytes());
            out.extend_from_slice(rec.sig.as_bytes());
            out.extend_from_slice(&rec.signed_at.to_be_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != EXPORT_MAGIC {
            return Err(CodecError::Malformed("export magic"));
        }
        let id_len = r.u8()? as usize;
        let curator_id = String::from_utf8(r.take(id_len)?.to_vec())
            .map_err(|_| CodecError::Malformed("curator id"))?;
        let public_key = PublicKey::from_slice(r.take(32)?)?;
        let count = r.u64()?;
        if count > r.remaining() as u64 / (4 + EXPORT_RECORD_LEN as u64) {
            return Err(CodecError::Truncated);
        }
        let mut records = Vec::with_capacity(count as usize);
        for _ in 0..count {
            if r.u32()? != EXPORT_RECORD_LEN {
                return Err(CodecError::Malformed("export record length"));
            }
            let idx = r.u64()?;
            let obj_hash = Digest::from_slice(r.take(32)?)?;
            let sig = Signature::from_slice(r.take(64)?)?;
            let signed_at = r.u64()?;
            records.push(CuratorEntry {
                idx,
                obj_hash,
                sig,
                signed_at,
            });
        }
        r.finish()?;
        Ok(ExportSet {
            curator_id,
            public_key,
            records,
        })
    }
}

/// What a verifier knows about one curator: its current key and, in
/// timestamped mode, the validity window for published timestamps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrustedCurator {
    pub public_key: PublicKey,
    pub validity_window_secs: Option<u64>,
}

/// Curator trust anchors keyed by curator id.
pub type CuratorTrust = BTreeMap<String, TrustedCurator>;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn rng() -> StdRng {
        StdRng::seed_from_u64(20)
    }

    #[test]
    fn first_entry_gets_idx_one_and_verifies() {
        let mut rng = rng();
        let mut db =
            CuratorDb::new("c1", RevocationMode::KeyRotation, 0, 1000, &mut rng).unwrap();
        let entry = db.add_object(b"bad bytes").clone();
        assert_eq!(entry.idx, 1);
        assert_eq!(entry.signed_at, 0);
        let payload = entry_payload(entry.signed_at, &entry.obj_hash);
        assert!(verify(&db.identity.public_key(), &payload, &entry.sig));
    }

    #[test]
    fn duplicate_object_appends_fresh_entry() {
        let mut rng = rng();
        let mut db =
            CuratorDb::new("c1", RevocationMode::KeyRotation, 0, 1000, &mut rng).unwrap();
        let first = db.add_object(b"dup").clone();
        let second = db.add_object(b"dup").clone();
        assert_eq!(first.obj_hash, second.obj_hash);
        assert_eq!(second.idx, first.idx + 1);
        assert_eq!(first.sig, second.sig); // same key, same payload: Ed25519 is deterministic
    }

    #[test]
    fn idx_sequence_has_no_gaps_or_repeats() {
        let mut rng = rng();
        let mut db =
            CuratorDb::new("c1", RevocationMode::KeyRotation, 0, 1000, &mut rng).unwrap();
        for i in 0..50u32 {
            db.add_object(&i.to_be_bytes());
        }
        for (i, e) in db.entries().iter().enumerate() {
            assert_eq!(e.idx, i as u64 + 1);
        }
    }

    #[test]
    fn export_is_complete_ordered_and_round_trips() {
        let mut rng = rng();
        let mut db =
            CuratorDb::new("curator-a", RevocationMode::Timestamped, 3600, 5000, &mut rng)
                .unwrap();
        assert!(db.export_set().records.is_empty());
        for i in 0..9u32 {
            db.add_object(format!("object {i}").as_bytes());
        }
        let export = db.export_set();
        assert_eq!(export.records.len(), 9);
        assert!(export.records.windows(2).all(|w| w[0].idx < w[1].idx));

        let decoded = ExportSet::decode(&export.encode()).unwrap();
        assert_eq!(decoded, export);
    }

    #[test]
    fn export_never_contains_object_bytes() {
        let mut rng = rng();
        let mut db =
            CuratorDb::new("c1", RevocationMode::KeyRotation, 0, 1000, &mut rng).unwrap();
        let secret = b"a sufficiently long secret object body 1234567890";
        db.add_object(secret);
        let encoded = db.export_set().encode();
        assert!(
            !encoded.windows(secret.len()).any(|w| w == secret),
            "raw object bytes leaked into export"
        );
    }

    #[test]
    fn disclosure_requires_allowlisted_credential() {
        let mut rng = rng();
        let mut db =
            CuratorDb::new("c1", RevocationMode::KeyRotation, 0, 1000, &mut rng).unwrap();
        let entry_idx = db.add_object(b"evidence").idx;
        db.authorize_auditor("auditor-1");

        let bytes = db.disclose_object(entry_idx, "auditor-1").unwrap();
        assert_eq!(bytes, b"evidence");
        assert_eq!(object_hash(bytes), db.entries()[0].obj_hash);

        assert_eq!(
            db.disclose_object(entry_idx, "nobody"),
            Err(CuratorError::Unauthorized("nobody".into()))
        );
        assert_eq!(
            db.disclose_object(99, "auditor-1"),
            Err(CuratorError::NotFound(99))
        );
    }

    #[test]
    fn rotation_archives_old_key_with_interval() {
        let mut rng = rng();
        let mut db =
            CuratorDb::new("c1", RevocationMode::KeyRotation, 0, 1000, &mut rng).unwrap();
        let old_pk = db.identity.public_key();
        let old_entry = db.add_object(b"before rotation").clone();

        db.rotate_key(2000, &mut rng);
        assert_ne!(db.identity.public_key(), old_pk);

        let new_entry = db.add_object(b"after rotation").clone();
        let new_payload = entry_payload(new_entry.signed_at, &new_entry.obj_hash);
        assert!(verify(&db.identity.public_key(), &new_payload, &new_entry.sig));
        assert!(!verify(&old_pk, &new_payload, &new_entry.sig));

        // Historical signature verifies under the archived key within its
        // interval, and not under the current key.
        let old_payload = entry_payload(old_entry.signed_at, &old_entry.obj_hash);
        assert!(db.identity.verify_at(1500, &old_payload, &old_entry.sig));
        assert!(!verify(&db.identity.public_key(), &old_payload, &old_entry.sig));
        assert_eq!(db.identity.archived_keys().len(), 1);
        assert_eq!(db.identity.archived_keys()[0].valid_from, 1000);
        assert_eq!(db.identity.archived_keys()[0].valid_until, 2000);
        // Outside the interval the archive does not vouch for it.
        assert!(!db.identity.verify_at(2500, &old_payload, &old_entry.sig));
    }

    #[test]
    fn timestamp_refresh_resigns_distinct_hashes() {
        let mut rng = rng();
        let mut db =
            CuratorDb::new("c1", RevocationMode::Timestamped, 100, 1000, &mut rng).unwrap();
        db.add_object(b"x");
        db.add_object(b"y");
        db.add_object(b"x");
        assert_eq!(db.entries().len(), 3);
        assert!(db.entries().iter().all(|e| e.signed_at == 1000));

        db.refresh_timestamp(1500);
        // Two distinct hashes re-signed.
        assert_eq!(db.entries().len(), 5);
        let fresh: Vec<_> = db.entries().iter().filter(|e| e.signed_at == 1500).collect();
        assert_eq!(fresh.len(), 2);
        for e in fresh {
            let payload = entry_payload(e.signed_at, &e.obj_hash);
            assert!(verify(&db.identity.public_key(), &payload, &e.sig));
        }
        assert_eq!(db.identity.published_timestamp, 1500);
    }

    #[test]
    fn timestamped_mode_requires_positive_window() {
        let mut rng = rng();
        assert_eq!(
            CuratorDb::new("c", RevocationMode::Timestamped, 0, 1, &mut rng).err(),
            Some(CuratorError::InvalidWindow)
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn entry_strategy() -> impl Strategy<Value = CuratorEntry> {
            (
                proptest::array::uniform32(any::<u8>()),
                proptest::collection::vec(any::<u8>(), 64),
                any::<u64>(),
            )
                .prop_map(|(hash, sig, signed_at)| CuratorEntry {
                    idx: 0,
                    obj_hash: Digest(hash),
                    sig: Signature(sig.try_into().unwrap()),
                    signed_at,
                })
        }

        proptest! {
            #[test]
            fn export_codec_round_trips(
                id in "[a-z0-9-]{1,24}",
                pk in proptest::array::uniform32(any::<u8>()),
                entries in proptest::collection::vec(entry_strategy(), 0..40),
            ) {
                let mut entries = entries;
                for (i, e) in entries.iter_mut().enumerate() {
                    e.idx = i as u64 + 1;
                }
                let export = ExportSet {
                    curator_id: id,
                    public_key: PublicKey(pk),
                    records: entries,
                };
                let decoded = ExportSet::decode(&export.encode()).unwrap();
                prop_assert_eq!(decoded, export);
            }
        }
    }
}
