use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use rand::rngs::OsRng;

use veilblock_core::curator::{CuratorDb, RevocationMode};

use crate::statedir::CuratorDir;
use crate::util::unix_now;

#[derive(Subcommand, Debug)]
pub enum CuratorCmd {
    /// Create a curator identity and empty database.
    Init {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        id: String,
        /// Sign timestamped payloads instead of relying on key rotation.
        #[arg(long)]
        timestamped: bool,
        /// Validity window for timestamped signatures.
        #[arg(long, default_value_t = 86_400)]
        window_secs: u64,
        /// Auditor credentials allowed to request raw objects.
        #[arg(long)]
        auditor: Vec<String>,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Hash, sign, and store harmful objects.
    Add {
        #[arg(long)]
        dir: PathBuf,
        files: Vec<PathBuf>,
    },
    /// Write the signed set for enforcers.
    Export {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rotate the signing key, archiving the old one.
    Rotate {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Advance the published timestamp and re-sign the database.
    Refresh {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Disclose raw object bytes to an allowlisted auditor.
    Disclose {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        idx: u64,
        #[arg(long)]
        credential: String,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cmd: CuratorCmd) -> Result<()> {
    match cmd {
        CuratorCmd::Init {
            dir,
            id,
            timestamped,
            window_secs,
            auditor,
            now,
        } => {
            let store = CuratorDir::new(&dir);
            if store.exists() {
                bail!("{} already holds a curator database", dir.display());
            }
            let mode = if timestamped {
                RevocationMode::Timestamped
            } else {
                RevocationMode::KeyRotation
            };
            let mut db = CuratorDb::new(id, mode, window_secs, now.unwrap_or_else(unix_now), &mut OsRng)?;
            for cred in auditor {
                db.authorize_auditor(cred);
            }
            store.save(&db)?;
            println!(
                "curator {} initialized\npublic_key = \"{}\"",
                db.identity.curator_id,
                hex::encode(db.identity.public_key().as_bytes())
            );
            Ok(())
        }
        CuratorCmd::Add { dir, files } => {
            if files.is_empty() {
                bail!("no files given");
            }
            let store = CuratorDir::new(&dir);
            let mut db = store.load()?;
            for file in &files {
                let bytes =
                    std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
                let entry = db.add_object(&bytes).clone();
                store.save_object(entry.idx, &bytes)?;
                println!("added idx={} hash={}", entry.idx, entry.obj_hash);
            }
            store.save(&db)?;
            Ok(())
        }
        CuratorCmd::Export { dir, out } => {
            let db = CuratorDir::new(&dir).load()?;
            let export = db.export_set();
            std::fs::write(&out, export.encode())?;
            println!(
                "exported {} records from {} to {}",
                export.records.len(),
                export.curator_id,
                out.display()
            );
            Ok(())
        }
        CuratorCmd::Rotate { dir, now } => {
            let store = CuratorDir::new(&dir);
            let mut db = store.load()?;
            db.rotate_key(now.unwrap_or_else(unix_now), &mut OsRng);
            store.save(&db)?;
            println!(
                "rotated; new public_key = \"{}\"",
                hex::encode(db.identity.public_key().as_bytes())
            );
            Ok(())
        }
        CuratorCmd::Refresh { dir, now } => {
            let store = CuratorDir::new(&dir);
            let mut db = store.load()?;
            if db.identity.mode != RevocationMode::Timestamped {
                bail!("refresh applies only to timestamped curators");
            }
            db.refresh_timestamp(now.unwrap_or_else(unix_now));
            store.save(&db)?;
            println!(
                "published timestamp now {}; {} entries",
                db.identity.published_timestamp,
                db.entries().len()
            );
            Ok(())
        }
        CuratorCmd::Disclose {
            dir,
            idx,
            credential,
            out,
        } => {
            let db = CuratorDir::new(&dir).load()?;
            let bytes = db.disclose_object(idx, &credential)?;
            std::fs::write(&out, bytes)?;
            println!("disclosed idx={idx} ({} bytes) to {}", bytes.len(), out.display());
            Ok(())
        }
    }
}
