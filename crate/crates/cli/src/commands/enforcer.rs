use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use rand::rngs::OsRng;

use veilblock_core::curator::ExportSet;
use veilblock_core::enforcer::{
    snapshot_diff, BuildReport, DatabaseSnapshot, EnforcerState,
};
use veilblock_core::pir::{build_buckets, BucketedDb, NotPrivateReferenceBackend};
use veilblock_core::transparency::{Checkpoint, CheckpointStore, FileCheckpointStore, Witness};

use crate::config::Config;
use crate::keyfiles;
use crate::server::{serve, ServerState};
use crate::statedir::EnforcerDir;
use crate::util::unix_now;

#[derive(Subcommand, Debug)]
pub enum EnforcerCmd {
    /// Generate the enforcer keypair and blinding value.
    Init {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        policy_m: usize,
    },
    /// Build and commit the first database from curator exports.
    Build {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        #[arg(long, required = true)]
        exports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Publish a new epoch from fresh exports.
    Update {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        #[arg(long, required = true)]
        exports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Serve PSI, snapshot, retrieval, and checkpoint requests.
    Serve {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        #[arg(long, default_value_t = 8)]
        workers: usize,
    },
    /// Summarize the record difference between two snapshots.
    Diff {
        old: PathBuf,
        new: PathBuf,
    },
}

fn load_exports(paths: &[PathBuf]) -> Result<Vec<ExportSet>> {
    paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            ExportSet::decode(&bytes).with_context(|| format!("decoding {}", p.display()))
        })
        .collect()
}

fn print_report(report: &BuildReport) {
    for dropped in &report.dropped {
        eprintln!(
            "dropped: curator={} idx={} reason={:?}",
            dropped.curator_id, dropped.idx, dropped.reason
        );
    }
}

fn enforcer_dir(config: &Config, config_path: &Path) -> Result<EnforcerDir> {
    let section = config
        .enforcer
        .as_ref()
        .context("config has no [enforcer] section")?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    Ok(EnforcerDir::new(base.join(&section.state_dir)))
}

/// Collects witness co-signatures for a fresh checkpoint. Witnesses are
/// simulated in-process from the seeds named in the config; refusals are
/// reported but never block publication.
fn attest_with_witnesses(
    config: &Config,
    config_path: &Path,
    dir: &EnforcerDir,
    state: &EnforcerState,
    checkpoint: &mut Checkpoint,
) -> Result<()> {
    let base = config_path.parent().unwrap_or(Path::new("."));
    for witness_ref in &config.witnesses {
        let Some(key_file) = &witness_ref.key_file else {
            continue;
        };
        let keypair = keyfiles::read_keypair(&base.join(key_file))?;
        let mut witness = Witness::new(witness_ref.id.clone(), keypair, state.public_key());
        witness.restore(dir.load_witness_state(&witness_ref.id)?);
        let from = witness.last_seen().map(|(size, _)| size).unwrap_or(0);
        let proof = state.log.tree().prove_consistency(from, checkpoint.size)?;
        match witness.attest(checkpoint, &proof) {
            Ok(sig) => {
                checkpoint.witness_sigs.push((witness_ref.id.clone(), sig));
                dir.save_witness_state(&witness_ref.id, checkpoint.size, &checkpoint.root)?;
            }
            Err(e) => eprintln!("witness {} refused: {e}", witness_ref.id),
        }
    }
    Ok(())
}

fn publish(
    config: &Config,
    config_path: &Path,
    exports: &[PathBuf],
    out: Option<&PathBuf>,
    now: u64,
    expect_first: bool,
) -> Result<()> {
    let dir = enforcer_dir(config, config_path)?;
    let mut state = dir.load()?;
    if expect_first && state.epoch != 0 {
        bail!("database already published (epoch {}); use `enforcer update`", state.epoch);
    }
    if !expect_first && state.epoch == 0 {
        bail!("no database published yet; use `enforcer build`");
    }
    let sets = load_exports(exports)?;
    let trust = config.curator_trust()?;

    if config.backend_is_space_mode() {
        let (directory, records, report) = state.assemble_records(&sets, &trust, now)?;
        print_report(&report);
        let keypair =
            veilblock_core::crypto::SigningKeypair::from_seed(&state.keypair().seed());
        let mut bucketed = build_buckets(
            &records,
            &directory,
            config.prefix_bits,
            config.coms_budget_bytes,
            &mut state.log,
            &keypair,
            now,
        )?;
        state.epoch += 1;
        attest_with_witnesses(config, config_path, &dir, &state, &mut bucketed.checkpoint)?;
        dir.commit_publish_bucketed(&state, &bucketed)?;
        if let Some(out) = out {
            std::fs::write(out, bucketed.encode())?;
        }
        println!(
            "epoch {} committed: {} records in {} buckets of size {}",
            state.epoch,
            records.len(),
            bucketed.buckets.len(),
            bucketed.bucket_size
        );
    } else {
        let (mut snapshot, report) = state.build_database(&sets, &trust, now)?;
        print_report(&report);
        attest_with_witnesses(config, config_path, &dir, &state, &mut snapshot.checkpoint)?;
        dir.commit_publish(&state, &snapshot)?;
        if let Some(out) = out {
            std::fs::write(out, snapshot.encode())?;
        }
        println!(
            "epoch {} committed: {} records, db_hash {}",
            snapshot.epoch,
            snapshot.records.len(),
            snapshot.db_hash
        );
    }
    Ok(())
}

pub fn run(cmd: EnforcerCmd) -> Result<()> {
    match cmd {
        EnforcerCmd::Init { dir, policy_m } => {
            if policy_m < 1 {
                bail!("policy_m must be at least 1");
            }
            let store = EnforcerDir::new(&dir);
            store.init(policy_m, &mut OsRng)?;
            let state = store.load()?;
            println!(
                "enforcer initialized in {}\nenforcer_public_key = \"{}\"",
                dir.display(),
                hex::encode(state.public_key().as_bytes())
            );
            Ok(())
        }
        EnforcerCmd::Build {
            config,
            exports,
            out,
            now,
        } => {
            let cfg = Config::load(&config)?;
            publish(&cfg, &config, &exports, out.as_ref(), now.unwrap_or_else(unix_now), true)
        }
        EnforcerCmd::Update {
            config,
            exports,
            out,
            now,
        } => {
            let cfg = Config::load(&config)?;
            publish(&cfg, &config, &exports, out.as_ref(), now.unwrap_or_else(unix_now), false)
        }
        EnforcerCmd::Serve { config, workers } => {
            let cfg = Config::load(&config)?;
            let dir = enforcer_dir(&cfg, &config)?;
            let state = dir.load()?;
            let checkpoints =
                FileCheckpointStore::new(dir.checkpoints_path()).fetch_all()?;

            let (snapshot_bytes, bucketed) = if cfg.backend_is_space_mode() {
                let bytes = std::fs::read(dir.buckets_path())
                    .context("no bucketed database; run `enforcer build` first")?;
                let db = BucketedDb::decode(&bytes)?;
                (None, Some(db))
            } else {
                let bytes = std::fs::read(dir.snapshot_path())
                    .context("no snapshot; run `enforcer build` first")?;
                (Some(bytes), None)
            };

            let server_state = Arc::new(ServerState::new(
                state.blinding_value().clone(),
                snapshot_bytes,
                bucketed,
                checkpoints,
                NotPrivateReferenceBackend::new(cfg.slot_bytes),
            ));
            let listener = TcpListener::bind(&cfg.listen)
                .with_context(|| format!("binding {}", cfg.listen))?;
            println!("serving on {}", listener.local_addr()?);
            serve(listener, server_state, workers)
        }
        EnforcerCmd::Diff { old, new } => {
            let old = DatabaseSnapshot::decode(&std::fs::read(&old)?)?;
            let new = DatabaseSnapshot::decode(&std::fs::read(&new)?)?;
            let diff = snapshot_diff(&old, &new)?;
            println!(
                "epoch {} -> {}: {} added/changed, {} removed",
                old.epoch,
                new.epoch,
                diff.added.len(),
                diff.removed.len()
            );
            for rec in &diff.added {
                println!("+ {}", rec.blinded_id);
            }
            for id in &diff.removed {
                println!("- {id}");
            }
            Ok(())
        }
    }
}
