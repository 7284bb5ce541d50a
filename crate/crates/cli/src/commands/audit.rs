use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Subcommand;

use veilblock_core::auditor::{
    audit_checkpoints, privileged_audit, verify_appeal, AuditPolicy, ConsistencyOracle,
    LeafBackedOracle, RefusingOracle,
};
use veilblock_core::client::AppealBundle;
use veilblock_core::enforcer::DatabaseSnapshot;
use veilblock_core::transparency::{CheckpointStore, FileCheckpointStore};

use crate::config::Config;
use crate::keyfiles;
use crate::statedir::EnforcerDir;
use crate::util::unix_now;

#[derive(Subcommand, Debug)]
pub enum AuditCmd {
    /// Audit a gossiped checkpoint log for consistency, oscillation, and
    /// staleness.
    Log {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        /// Checkpoint store file (base64 lines).
        checkpoints: PathBuf,
        /// The enforcer's log leaves, used to compute consistency proofs.
        /// Without it the enforcer counts as refusing to prove.
        #[arg(long)]
        leaves: Option<PathBuf>,
        #[arg(long)]
        max_age_secs: Option<u64>,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Privileged audit: reconstruct a snapshot from raw objects and the
    /// blinding value.
    Db {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        snapshot: PathBuf,
        objects_dir: PathBuf,
        blind_file: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Verify an appeal bundle using public keys only.
    Appeal {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        bundle: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
}

pub fn run(cmd: AuditCmd) -> Result<i32> {
    match cmd {
        AuditCmd::Log {
            config,
            checkpoints,
            leaves,
            max_age_secs,
            now,
        } => {
            let cfg = Config::load(&config)?;
            let pk = cfg
                .enforcer_pk()?
                .context("config needs enforcer_public_key")?;
            let chkpts = FileCheckpointStore::new(&checkpoints).fetch_all()?;
            let oracle: Box<dyn ConsistencyOracle> = match leaves {
                Some(path) => {
                    let dir = EnforcerDir::new(path.parent().unwrap_or(std::path::Path::new(".")));
                    let leaves = if path.is_file() {
                        let bytes = std::fs::read(&path)?;
                        anyhow::ensure!(bytes.len() % 32 == 0, "corrupt leaves file");
                        bytes
                            .chunks_exact(32)
                            .map(|c| veilblock_core::crypto::Digest::from_slice(c).unwrap())
                            .collect()
                    } else {
                        dir.load_leaves()?
                    };
                    Box::new(LeafBackedOracle::new(leaves))
                }
                None => Box::new(RefusingOracle),
            };
            let policy = AuditPolicy {
                min_update_interval_secs: cfg.update_interval_secs,
                max_checkpoint_age_secs: max_age_secs.unwrap_or(7 * 24 * 3600),
                witness_quorum: cfg.witness_quorum,
            };
            let report = audit_checkpoints(
                &chkpts,
                oracle.as_ref(),
                &pk,
                &cfg.witness_pks()?,
                &policy,
                now.unwrap_or_else(unix_now),
            );
            print!("{report}");
            Ok(if report.is_clean() { 0 } else { 1 })
        }
        AuditCmd::Db {
            config,
            snapshot,
            objects_dir,
            blind_file,
            now,
        } => {
            let cfg = Config::load(&config)?;
            let snapshot = DatabaseSnapshot::decode(&std::fs::read(&snapshot)?)?;
            let blind_b = keyfiles::read_scalar(&blind_file)?;
            let mut objects = Vec::new();
            for entry in std::fs::read_dir(&objects_dir)
                .with_context(|| format!("reading {}", objects_dir.display()))?
            {
                let entry = entry?;
                if entry.file_type()?.is_file() {
                    objects.push(std::fs::read(entry.path())?);
                }
            }
            let report = privileged_audit(
                &snapshot,
                &objects,
                &blind_b,
                &cfg.curator_trust()?,
                cfg.policy_m,
                now.unwrap_or_else(unix_now),
                cfg.skew_secs,
            );
            print!("{report}");
            Ok(if report.is_clean() { 0 } else { 1 })
        }
        AuditCmd::Appeal { config, bundle, now } => {
            let cfg = Config::load(&config)?;
            let bundle = AppealBundle::decode(&std::fs::read(&bundle)?)?;
            let check = verify_appeal(
                &bundle,
                &cfg.curator_trust()?,
                now.unwrap_or_else(unix_now),
                cfg.skew_secs,
            );
            if check.accepted {
                println!(
                    "appeal verified: {} curator signature(s) over {} object bytes",
                    bundle.signatures.len(),
                    bundle.object.len()
                );
                Ok(0)
            } else {
                for reason in &check.reasons {
                    println!("rejected: {reason}");
                }
                Ok(1)
            }
        }
    }
}
