//! On-disk state for the curator and enforcer roles.
//!
//! Curator directory:
//!   identity.toml    signing seed, mode, timestamps, archived keys
//!   entries.bin      the export-set encoding of all entries
//!   objects/<idx>    raw object bytes, served only to allowlisted auditors
//!   auditors.txt     allowlisted auditor credentials, one per line
//!
//! Enforcer directory:
//!   enforcer.key     signing seed (hex)
//!   blind.key        blinding scalar (hex); the privileged auditor's B file
//!   enforcer.toml    policy and epoch counters
//!   leaves.bin       transparency log leaves, 32 bytes each
//!   checkpoints.log  append-only gossip store
//!   snapshot.bin     latest published snapshot
//!   witness-<id>.state   simulated witness view

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use veilblock_core::crypto::{Digest, PublicKey, SigningKeypair};
use veilblock_core::curator::{
    ArchivedKey, CuratorDb, CuratorIdentity, ExportSet, RevocationMode,
};
use veilblock_core::enforcer::{DatabaseSnapshot, EnforcerState};
use veilblock_core::transparency::{CheckpointStore, FileCheckpointStore, TransparencyLog};

use crate::keyfiles;

#[derive(Serialize, Deserialize)]
struct IdentityFile {
    curator_id: String,
    seed: String,
    mode: String,
    validity_window_secs: u64,
    published_timestamp: u64,
    key_activated_at: u64,
    #[serde(default)]
    archived: Vec<ArchivedKeyFile>,
}

#[derive(Serialize, Deserialize)]
struct ArchivedKeyFile {
    public_key: String,
    valid_from: u64,
    valid_until: u64,
}

pub struct CuratorDir {
    pub root: PathBuf,
}

impl CuratorDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CuratorDir { root: root.into() }
    }

    fn identity_path(&self) -> PathBuf {
        self.root.join("identity.toml")
    }

    fn entries_path(&self) -> PathBuf {
        self.root.join("entries.bin")
    }

    fn auditors_path(&self) -> PathBuf {
        self.root.join("auditors.txt")
    }

    pub fn objects_dir(&self) -> PathBuf {
        self.root.join("objects")
    }

    pub fn exists(&self) -> bool {
        self.identity_path().exists()
    }

    pub fn save(&self, db: &CuratorDb) -> Result<()> {
        std::fs::create_dir_all(&self.root)?;
        std::fs::create_dir_all(self.objects_dir())?;
        let identity = &db.identity;
        let file = IdentityFile {
            curator_id: identity.curator_id.clone(),
            seed: hex::encode(identity.keypair_seed()),
            mode: match identity.mode {
                RevocationMode::KeyRotation => "key-rotation".into(),
                RevocationMode::Timestamped => "timestamped".into(),
            },
            validity_window_secs: identity.validity_window_secs,
            published_timestamp: identity.published_timestamp,
            key_activated_at: identity.key_activated_at(),
            archived: identity
                .archived_keys()
                .iter()
                .map(|k| ArchivedKeyFile {
                    public_key: hex::encode(k.public_key.as_bytes()),
                    valid_from: k.valid_from,
                    valid_until: k.valid_until,
                })
                .collect(),
        };
        std::fs::write(self.identity_path(), toml::to_string_pretty(&file)?)?;
        std::fs::write(self.entries_path(), db.export_set().encode())?;
        let auditors: Vec<&str> = db.auditors().collect();
        std::fs::write(self.auditors_path(), auditors.join("\n"))?;
        Ok(())
    }

    pub fn save_object(&self, idx: u64, bytes: &[u8]) -> Result<()> {
        std::fs::create_dir_all(self.objects_dir())?;
        std::fs::write(self.objects_dir().join(idx.to_string()), bytes)?;
        Ok(())
    }

    pub fn load(&self) -> Result<CuratorDb> {
        let text = std::fs::read_to_string(self.identity_path())
            .with_context(|| format!("no curator state in {}", self.root.display()))?;
        let file: IdentityFile = toml::from_str(&text)?;
        let seed: [u8; 32] = hex::decode(&file.seed)?
            .try_into()
            .map_err(|_| anyhow::anyhow!("bad seed length"))?;
        let mode = match file.mode.as_str() {
            "key-rotation" => RevocationMode::KeyRotation,
            "timestamped" => RevocationMode::Timestamped,
            other => bail!("unknown revocation mode {other:?}"),
        };
        let archived = file
            .archived
            .iter()
            .map(|k| {
                Ok(ArchivedKey {
                    public_key: PublicKey::from_slice(&hex::decode(&k.public_key)?)?,
                    valid_from: k.valid_from,
                    valid_until: k.valid_until,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let identity = CuratorIdentity::from_parts(
            file.curator_id,
            SigningKeypair::from_seed(&seed),
            mode,
            file.validity_window_secs,
            file.published_timestamp,
            file.key_activated_at,
            archived,
        );
        let entries = if self.entries_path().exists() {
            ExportSet::decode(&std::fs::read(self.entries_path())?)?.records
        } else {
            Vec::new()
        };
        let mut db = CuratorDb::from_parts(identity, entries);
        if let Ok(text) = std::fs::read_to_string(self.auditors_path()) {
            for line in text.lines().filter(|l| !l.is_empty()) {
                db.authorize_auditor(line);
            }
        }
        if let Ok(dir) = std::fs::read_dir(self.objects_dir()) {
            for entry in dir.flatten() {
                if let Some(idx) = entry
                    .file_name()
                    .to_str()
                    .and_then(|name| name.parse::<u64>().ok())
                {
                    db.restore_object(idx, std::fs::read(entry.path())?);
                }
            }
        }
        Ok(db)
    }
}

#[derive(Serialize, Deserialize)]
struct EnforcerFile {
    policy_m: usize,
    epoch: u64,
}

pub struct EnforcerDir {
    pub root: PathBuf,
}

impl EnforcerDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        EnforcerDir { root: root.into() }
    }

    pub fn key_path(&self) -> PathBuf {
        self.root.join("enforcer.key")
    }

    pub fn blind_path(&self) -> PathBuf {
        self.root.join("blind.key")
    }

    fn meta_path(&self) -> PathBuf {
        self.root.join("enforcer.toml")
    }

    pub fn leaves_path(&self) -> PathBuf {
        self.root.join("leaves.bin")
    }

    pub fn checkpoints_path(&self) -> PathBuf {
        self.root.join("checkpoints.log")
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.root.join("snapshot.bin")
    }

    pub fn buckets_path(&self) -> PathBuf {
        self.root.join("buckets.bin")
    }

    fn witness_state_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("witness-{id}.state"))
    }

    pub fn init(&self, policy_m: usize, rng: &mut (impl rand::RngCore + rand::CryptoRng)) -> Result<()> {
        std::fs::create_dir_all(&self.root)?;
        if self.key_path().exists() {
            bail!("{} already initialized", self.root.display());
        }
        let state = EnforcerState::new(policy_m, rng);
        keyfiles::write_keypair(&self.key_path(), state.keypair())?;
        keyfiles::write_scalar(&self.blind_path(), state.blinding_value())?;
        self.save_meta(policy_m, 0)?;
        Ok(())
    }

    fn save_meta(&self, policy_m: usize, epoch: u64) -> Result<()> {
        let file = EnforcerFile { policy_m, epoch };
        std::fs::write(self.meta_path(), toml::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(&self) -> Result<EnforcerState> {
        let keypair = keyfiles::read_keypair(&self.key_path())?;
        let blind = keyfiles::read_scalar(&self.blind_path())?;
        let text = std::fs::read_to_string(self.meta_path())
            .with_context(|| format!("no enforcer state in {}", self.root.display()))?;
        let meta: EnforcerFile = toml::from_str(&text)?;
        let leaves = self.load_leaves()?;
        let last_timestamp = FileCheckpointStore::new(self.checkpoints_path())
            .fetch_all()?
            .last()
            .map(|c| c.timestamp);
        Ok(EnforcerState::from_parts(
            blind,
            keypair,
            meta.policy_m,
            meta.epoch,
            TransparencyLog::from_leaves(leaves, last_timestamp),
        ))
    }

    pub fn load_leaves(&self) -> Result<Vec<Digest>> {
        if !self.leaves_path().exists() {
            return Ok(Vec::new());
        }
        let bytes = std::fs::read(self.leaves_path())?;
        if bytes.len() % 32 != 0 {
            bail!("corrupt leaves file");
        }
        Ok(bytes
            .chunks_exact(32)
            .map(|c| Digest::from_slice(c).unwrap())
            .collect())
    }

    /// Persists the outcome of a publish: epoch counter, the new leaf, the
    /// gossiped checkpoint, and the snapshot itself.
    pub fn commit_publish(&self, state: &EnforcerState, snapshot: &DatabaseSnapshot) -> Result<()> {
        self.commit_leaf(state, &snapshot.db_hash, &snapshot.checkpoint)?;
        std::fs::write(self.snapshot_path(), snapshot.encode())?;
        Ok(())
    }

    /// Space-mode publish: the committed leaf is the bucket-collection hash.
    pub fn commit_publish_bucketed(
        &self,
        state: &EnforcerState,
        db: &veilblock_core::pir::BucketedDb,
    ) -> Result<()> {
        self.commit_leaf(state, &db.db_hash, &db.checkpoint)?;
        std::fs::write(self.buckets_path(), db.encode())?;
        Ok(())
    }

    fn commit_leaf(
        &self,
        state: &EnforcerState,
        leaf: &Digest,
        checkpoint: &veilblock_core::transparency::Checkpoint,
    ) -> Result<()> {
        self.save_meta(state.policy_m, state.epoch)?;
        use std::io::Write;
        let mut leaves = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.leaves_path())?;
        leaves.write_all(leaf.as_bytes())?;
        FileCheckpointStore::new(self.checkpoints_path()).publish(checkpoint)?;
        Ok(())
    }

    pub fn load_witness_state(&self, id: &str) -> Result<Option<(u64, Digest)>> {
        let path = self.witness_state_path(id);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path)?;
        let mut parts = text.split_whitespace();
        let size: u64 = parts.next().context("witness state size")?.parse()?;
        let root = Digest::from_slice(&hex::decode(parts.next().context("witness state root")?)?)?;
        Ok(Some((size, root)))
    }

    pub fn save_witness_state(&self, id: &str, size: u64, root: &Digest) -> Result<()> {
        std::fs::write(
            self.witness_state_path(id),
            format!("{size} {}\n", hex::encode(root.as_bytes())),
        )?;
        Ok(())
    }
}
