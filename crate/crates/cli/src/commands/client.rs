use std::net::TcpStream;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use rand::rngs::OsRng;

use veilblock_core::client::{
    begin_query, complete_query, evaluate, export_appeal, verify_snapshot, EvalOptions, Verdict,
    VerdictStatus,
};
use veilblock_core::crypto::GroupElement;
use veilblock_core::enforcer::DatabaseSnapshot;
use veilblock_core::pir::{client_pir_decode, client_pir_query, NotPrivateReferenceBackend};

use crate::config::Config;
use crate::util::unix_now;
use crate::wire::{
    decode_pir_answer, encode_pir_query, Frame, FrameKind, WireError, CLIENT_MAX_FRAME,
};
use crate::server::roundtrip;

#[derive(Subcommand, Debug)]
pub enum ClientCmd {
    /// Fetch the current snapshot, verify it, and store it locally.
    Sync {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        #[arg(long)]
        server: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Determine the blocklist status of a file.
    Check {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        #[arg(long)]
        server: Option<String>,
        /// Verified snapshot from `client sync` (time-efficient path).
        #[arg(long)]
        db: Option<PathBuf>,
        /// Use the space-efficient retrieval protocol instead of the local
        /// snapshot.
        #[arg(long)]
        pir: bool,
        file: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Produce a publicly verifiable appeal bundle for a harmful file.
    Appeal {
        #[arg(long, env = "VEILBLOCK_CONFIG")]
        config: PathBuf,
        #[arg(long)]
        server: Option<String>,
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        file: PathBuf,
        #[arg(long)]
        now: Option<u64>,
    },
}

fn connect(config: &Config, server: Option<&str>) -> Result<TcpStream> {
    let addr = server.unwrap_or(&config.listen);
    TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))
}

fn expect_kind(frame: Frame, want: FrameKind) -> Result<Vec<u8>> {
    match frame.kind {
        k if k == want => Ok(frame.body),
        FrameKind::Error => Err(WireError::Remote(
            String::from_utf8_lossy(&frame.body).into_owned(),
        )
        .into()),
        other => bail!("unexpected frame kind {other:?}"),
    }
}

fn fetch_verified(
    config: &Config,
    stream: &mut TcpStream,
) -> Result<(DatabaseSnapshot, veilblock_core::client::VerifiedDb)> {
    let reply = roundtrip(stream, &Frame::new(FrameKind::SnapshotReq, Vec::new()), CLIENT_MAX_FRAME)?;
    let body = expect_kind(reply, FrameKind::Snapshot)?;
    let snapshot = DatabaseSnapshot::decode(&body)?;
    let pk = config
        .enforcer_pk()?
        .context("config needs enforcer_public_key for snapshot verification")?;
    let db = verify_snapshot(&snapshot, &pk, &config.witness_pks()?, config.witness_quorum)
        .map_err(|e| anyhow::anyhow!("snapshot rejected: {e}"))?;
    Ok((snapshot, db))
}

/// One detection round trip: blinded request out, unblinded value back.
fn run_psi(
    object: &[u8],
    stream: &mut TcpStream,
) -> Result<(veilblock_core::crypto::Digest, GroupElement)> {
    let (request, mut state) = begin_query(object, &mut OsRng);
    let reply = roundtrip(
        stream,
        &Frame::new(FrameKind::PsiReq, request.encode().to_vec()),
        CLIENT_MAX_FRAME,
    )?;
    let body = expect_kind(reply, FrameKind::PsiResp)?;
    let response = GroupElement::decode(&body)
        .map_err(|e| anyhow::anyhow!("invalid psi response: {e}"))?;
    Ok(complete_query(&mut state, &response)?)
}

fn verdict_json(verdict: &Verdict) -> String {
    serde_json::json!({
        "status": match verdict.status {
            VerdictStatus::Benign => "benign",
            VerdictStatus::Harmful => "harmful",
        },
        "curators": verdict.attesting_curators,
        "epoch": verdict.epoch,
        "diagnostics": verdict.diagnostics.iter().map(|d| format!("{d:?}")).collect::<Vec<_>>(),
    })
    .to_string()
}

fn check_object(
    config: &Config,
    server: Option<&str>,
    db_path: Option<&Path>,
    use_pir: bool,
    file: &Path,
    now: u64,
) -> Result<Verdict> {
    let object = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let trust = config.curator_trust()?;
    let opts = EvalOptions {
        policy_m: config.policy_m,
        now,
        skew_secs: config.skew_secs,
    };
    let mut stream = connect(config, server)?;
    let (lookup_key, unblinded) = run_psi(&object, &mut stream)?;

    if use_pir {
        let backend = NotPrivateReferenceBackend::new(config.slot_bytes);
        let (query, sk) = client_pir_query(&backend, &lookup_key, config.prefix_bits, &mut OsRng);
        let reply = roundtrip(
            &mut stream,
            &Frame::new(FrameKind::PirReq, encode_pir_query(&backend, &query)),
            CLIENT_MAX_FRAME,
        )?;
        let body = expect_kind(reply, FrameKind::PirResp)?;
        let answer = decode_pir_answer(&backend, &body)?;
        let pk = config
            .enforcer_pk()?
            .context("config needs enforcer_public_key")?;
        Ok(client_pir_decode(
            &backend,
            &answer,
            &sk,
            &lookup_key,
            &unblinded,
            &object,
            &pk,
            &config.witness_pks()?,
            config.witness_quorum,
            &trust,
            &opts,
        ))
    } else {
        let db = match db_path {
            Some(path) => {
                let snapshot = DatabaseSnapshot::decode(&std::fs::read(path)?)?;
                let pk = config
                    .enforcer_pk()?
                    .context("config needs enforcer_public_key")?;
                verify_snapshot(&snapshot, &pk, &config.witness_pks()?, config.witness_quorum)
                    .map_err(|e| anyhow::anyhow!("stored snapshot rejected: {e}"))?
            }
            None => fetch_verified(config, &mut stream)?.1,
        };
        Ok(evaluate(&object, &unblinded, &db, &trust, &opts))
    }
}

pub fn run(cmd: ClientCmd) -> Result<i32> {
    match cmd {
        ClientCmd::Sync { config, server, out } => {
            let cfg = Config::load(&config)?;
            let mut stream = connect(&cfg, server.as_deref())?;
            let (snapshot, db) = fetch_verified(&cfg, &mut stream)?;
            std::fs::write(&out, snapshot.encode())?;
            println!(
                "verified snapshot epoch {} with {} records -> {}",
                db.epoch,
                db.len(),
                out.display()
            );
            Ok(0)
        }
        ClientCmd::Check {
            config,
            server,
            db,
            pir,
            file,
            now,
        } => {
            let cfg = Config::load(&config)?;
            let verdict = check_object(
                &cfg,
                server.as_deref(),
                db.as_deref(),
                pir,
                &file,
                now.unwrap_or_else(unix_now),
            )?;
            println!("{}", verdict_json(&verdict));
            Ok(if verdict.is_harmful() { 1 } else { 0 })
        }
        ClientCmd::Appeal {
            config,
            server,
            db,
            out,
            file,
            now,
        } => {
            let cfg = Config::load(&config)?;
            let verdict = check_object(
                &cfg,
                server.as_deref(),
                db.as_deref(),
                false,
                &file,
                now.unwrap_or_else(unix_now),
            )?;
            if verdict.status != VerdictStatus::Harmful {
                bail!("object is not under enforcement; nothing to appeal");
            }
            let object = std::fs::read(&file)?;
            let bundle = export_appeal(&object, &verdict)?;
            std::fs::write(&out, bundle.encode())?;
            println!(
                "appeal bundle with {} signatures -> {}",
                bundle.signatures.len(),
                out.display()
            );
            Ok(1)
        }
    }
}
