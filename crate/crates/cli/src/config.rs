//! Deployment configuration shared by every role.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use veilblock_core::crypto::PublicKey;
use veilblock_core::curator::{CuratorTrust, TrustedCurator};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("unknown or invalid field: {0}")]
    UnknownField(String),
    #[error("missing key file: {0}")]
    MissingKeyFile(PathBuf),
    #[error("policy_m must be at least 1")]
    InvalidPolicy,
    #[error("invalid public key hex for {0}")]
    BadPublicKey(String),
    #[error("unknown backend {0:?}; only \"reference\" ships")]
    UnknownBackend(String),
    #[error("prefix_bits must be in 1..=24, got {0}")]
    BadPrefixBits(u32),
}

fn default_policy_m() -> usize {
    1
}
fn default_prefix_bits() -> u32 {
    8
}
fn default_update_interval() -> u64 {
    3600
}
fn default_skew() -> u64 {
    300
}
fn default_backend() -> String {
    "reference".into()
}
fn default_slot_bytes() -> usize {
    10_240
}
fn default_listen() -> String {
    "127.0.0.1:7450".into()
}
fn default_mode() -> String {
    "time".into()
}
fn default_coms_budget() -> usize {
    2 << 20
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct CuratorRef {
    pub id: String,
    /// Hex-encoded Ed25519 public key.
    pub public_key: String,
    /// Present iff the curator signs timestamped payloads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_window_secs: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct WitnessRef {
    pub id: String,
    pub public_key: String,
    /// Seed file for in-process witness simulation; real witnesses would
    /// live elsewhere and only their public keys would appear here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_file: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct EnforcerSection {
    pub state_dir: PathBuf,
    pub key_file: PathBuf,
    pub blind_file: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_policy_m")]
    pub policy_m: usize,
    #[serde(default = "default_prefix_bits")]
    pub prefix_bits: u32,
    #[serde(default)]
    pub witness_quorum: usize,
    #[serde(default = "default_update_interval")]
    pub update_interval_secs: u64,
    #[serde(default = "default_skew")]
    pub skew_secs: u64,
    #[serde(default = "default_backend")]
    pub backend: String,
    /// Which protocol the deployment distributes: "time" commits and serves
    /// record snapshots, "space" commits and serves padded buckets.
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_slot_bytes")]
    pub slot_bytes: usize,
    /// Upper bound on the per-response commitment trailer (2^k digests).
    #[serde(default = "default_coms_budget")]
    pub coms_budget_bytes: usize,
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Hex-encoded enforcer public key, needed by clients and auditors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enforcer_public_key: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curators: Vec<CuratorRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<WitnessRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enforcer: Option<EnforcerSection>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            policy_m: default_policy_m(),
            prefix_bits: default_prefix_bits(),
            witness_quorum: 0,
            update_interval_secs: default_update_interval(),
            skew_secs: default_skew(),
            backend: default_backend(),
            mode: default_mode(),
            slot_bytes: default_slot_bytes(),
            coms_budget_bytes: default_coms_budget(),
            listen: default_listen(),
            enforcer_public_key: None,
            curators: Vec::new(),
            witnesses: Vec::new(),
            enforcer: None,
        }
    }
}

fn parse_pk(hex_str: &str, who: &str) -> Result<PublicKey, ConfigError> {
    let bytes = hex::decode(hex_str).map_err(|_| ConfigError::BadPublicKey(who.to_string()))?;
    PublicKey::from_slice(&bytes).map_err(|_| ConfigError::BadPublicKey(who.to_string()))
}

impl Config {
    pub fn parse_str(text: &str) -> Result<Config, ConfigError> {
        let config: Config =
            toml::from_str(text).map_err(|e| ConfigError::UnknownField(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads and validates, including existence of every referenced key
    /// file (resolved relative to the config's directory).
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let config = Self::load_lenient(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(enforcer) = &config.enforcer {
            for key_path in [&enforcer.key_file, &enforcer.blind_file] {
                let resolved = base.join(key_path);
                if !resolved.exists() {
                    return Err(ConfigError::MissingKeyFile(resolved));
                }
            }
        }
        for witness in &config.witnesses {
            if let Some(key_file) = &witness.key_file {
                let resolved = base.join(key_file);
                if !resolved.exists() {
                    return Err(ConfigError::MissingKeyFile(resolved));
                }
            }
        }
        Ok(config)
    }

    /// Loads without checking key files; used by `init` commands that are
    /// about to create them.
    pub fn load_lenient(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.policy_m < 1 {
            return Err(ConfigError::InvalidPolicy);
        }
        if self.backend != "reference" {
            return Err(ConfigError::UnknownBackend(self.backend.clone()));
        }
        if self.mode != "time" && self.mode != "space" {
            return Err(ConfigError::UnknownField(format!(
                "mode must be \"time\" or \"space\", got {:?}",
                self.mode
            )));
        }
        if !(1..=24).contains(&self.prefix_bits) {
            return Err(ConfigError::BadPrefixBits(self.prefix_bits));
        }
        for c in &self.curators {
            parse_pk(&c.public_key, &c.id)?;
        }
        for w in &self.witnesses {
            parse_pk(&w.public_key, &w.id)?;
        }
        if let Some(pk) = &self.enforcer_public_key {
            parse_pk(pk, "enforcer")?;
        }
        Ok(())
    }

    /// Canonical serialized form; parse-then-serialize normalizes a file.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn curator_trust(&self) -> Result<CuratorTrust, ConfigError> {
        let mut trust = CuratorTrust::new();
        for c in &self.curators {
            trust.insert(
                c.id.clone(),
                TrustedCurator {
                    public_key: parse_pk(&c.public_key, &c.id)?,
                    validity_window_secs: c.validity_window_secs,
                },
            );
        }
        Ok(trust)
    }

    pub fn witness_pks(&self) -> Result<BTreeMap<String, PublicKey>, ConfigError> {
        let mut out = BTreeMap::new();
        for w in &self.witnesses {
            out.insert(w.id.clone(), parse_pk(&w.public_key, &w.id)?);
        }
        Ok(out)
    }

    pub fn enforcer_pk(&self) -> Result<Option<PublicKey>, ConfigError> {
        self.enforcer_public_key
            .as_deref()
            .map(|pk| parse_pk(pk, "enforcer"))
            .transpose()
    }

    pub fn backend_is_space_mode(&self) -> bool {
        self.mode == "space"
    }
}
