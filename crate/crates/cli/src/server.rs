//! Enforcer endpoint: PSI, snapshot streaming, bucketed retrieval, and
//! checkpoint gossip over the binary wire protocol.
//!
//! Connections are handled by a bounded worker pool. A malformed frame
//! gets an error frame back and the connection survives; an oversized
//! frame closes the connection.

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock};

use anyhow::Result;

use veilblock_core::crypto::{GroupElement, Scalar};
use veilblock_core::enforcer::{psi_response, NoRateLimit, PsiRateLimiter};
use veilblock_core::pir::{server_pir_answer, BucketedDb, NotPrivateReferenceBackend};
use veilblock_core::transparency::Checkpoint;

use crate::wire::{
    decode_pir_query, encode_checkpoints, encode_pir_answer, read_frame, write_frame, Frame,
    FrameKind, WireError, PSI_BODY_LEN, SERVER_MAX_FRAME,
};

pub struct ServerState {
    blind_b: Scalar,
    /// Pre-encoded snapshot bytes; swapped atomically on update. Absent
    /// when the deployment distributes buckets instead.
    snapshot: RwLock<Option<Arc<Vec<u8>>>>,
    bucketed: RwLock<Option<Arc<BucketedDb>>>,
    checkpoints: Mutex<Vec<Checkpoint>>,
    backend: NotPrivateReferenceBackend,
    rate_limiter: Box<dyn PsiRateLimiter>,
    shutdown: AtomicBool,
}

impl ServerState {
    pub fn new(
        blind_b: Scalar,
        snapshot_bytes: Option<Vec<u8>>,
        bucketed: Option<BucketedDb>,
        checkpoints: Vec<Checkpoint>,
        backend: NotPrivateReferenceBackend,
    ) -> Self {
        ServerState {
            blind_b,
            snapshot: RwLock::new(snapshot_bytes.map(Arc::new)),
            bucketed: RwLock::new(bucketed.map(Arc::new)),
            checkpoints: Mutex::new(checkpoints),
            backend,
            rate_limiter: Box::new(NoRateLimit),
            shutdown: AtomicBool::new(false),
        }
    }

    pub fn with_rate_limiter(mut self, limiter: Box<dyn PsiRateLimiter>) -> Self {
        self.rate_limiter = limiter;
        self
    }

    /// Swaps in a new snapshot; in-flight queries keep the old one.
    pub fn publish(
        &self,
        snapshot_bytes: Option<Vec<u8>>,
        bucketed: Option<BucketedDb>,
        chkpt: Checkpoint,
    ) {
        *self.snapshot.write().unwrap() = snapshot_bytes.map(Arc::new);
        *self.bucketed.write().unwrap() = bucketed.map(Arc::new);
        self.checkpoints.lock().unwrap().push(chkpt);
    }

    pub fn request_shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
    }

    fn handle(&self, frame: Frame, peer: &str) -> Frame {
        match frame.kind {
            FrameKind::PsiReq => {
                if !self.rate_limiter.allow(peer) {
                    return Frame::error("rate limited");
                }
                if frame.body.len() != PSI_BODY_LEN {
                    return Frame::error(format!(
                        "psi request body must be {PSI_BODY_LEN} bytes, got {}",
                        frame.body.len()
                    ));
                }
                let request = match GroupElement::decode(&frame.body) {
                    Ok(el) => el,
                    Err(e) => return Frame::error(format!("psi request rejected: {e}")),
                };
                match psi_response(&self.blind_b, &request) {
                    Ok(resp) => Frame::new(FrameKind::PsiResp, resp.encode().to_vec()),
                    Err(e) => Frame::error(e.to_string()),
                }
            }
            FrameKind::SnapshotReq => match self.snapshot.read().unwrap().clone() {
                Some(bytes) => Frame::new(FrameKind::Snapshot, bytes.as_ref().clone()),
                None => Frame::error("snapshot distribution not enabled"),
            },
            FrameKind::PirReq => {
                let Some(db) = self.bucketed.read().unwrap().clone() else {
                    return Frame::error("bucketed retrieval not enabled");
                };
                let query = match decode_pir_query(&self.backend, &frame.body) {
                    Ok(q) => q,
                    Err(e) => return Frame::error(format!("pir request rejected: {e}")),
                };
                match server_pir_answer(&self.backend, &query, &db) {
                    Ok(answer) => {
                        Frame::new(FrameKind::PirResp, encode_pir_answer(&self.backend, &answer))
                    }
                    Err(e) => Frame::error(e.to_string()),
                }
            }
            FrameKind::CheckpointReq => {
                let checkpoints = self.checkpoints.lock().unwrap().clone();
                Frame::new(FrameKind::Checkpoints, encode_checkpoints(&checkpoints))
            }
            other => Frame::error(format!("unexpected frame kind {:?}", other)),
        }
    }
}

fn serve_connection(state: &ServerState, stream: TcpStream) {
    let peer = stream
        .peer_addr()
        .map(|a| a.to_string())
        .unwrap_or_else(|_| "unknown".into());
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut writer = BufWriter::new(stream);
    loop {
        match read_frame(&mut reader, SERVER_MAX_FRAME) {
            Ok(frame) => {
                let reply = state.handle(frame, &peer);
                if write_frame(&mut writer, &reply).is_err() {
                    return;
                }
            }
            Err(WireError::Closed) => return,
            Err(WireError::Oversized { .. }) => return, // stream misaligned
            Err(WireError::Io(_)) => return,
            Err(e @ (WireError::BadVersion(_) | WireError::BadKind(_))) => {
                // Header is well-framed, so the stream stays aligned; report
                // and keep the connection.
                if write_frame(&mut writer, &Frame::error(e.to_string())).is_err() {
                    return;
                }
            }
            Err(e) => {
                let _ = write_frame(&mut writer, &Frame::error(e.to_string()));
                return;
            }
        }
    }
}

/// Runs the accept loop with `workers` handler threads. Returns when
/// `request_shutdown` has been called and one further connection arrives,
/// or on listener failure.
pub fn serve(listener: TcpListener, state: Arc<ServerState>, workers: usize) -> Result<()> {
    let (tx, rx) = mpsc::channel::<TcpStream>();
    let rx = Arc::new(Mutex::new(rx));
    let mut handles = Vec::new();
    for _ in 0..workers.max(1) {
        let rx = Arc::clone(&rx);
        let state = Arc::clone(&state);
        handles.push(std::thread::spawn(move || loop {
            let stream = match rx.lock().unwrap().recv() {
                Ok(s) => s,
                Err(_) => return,
            };
            serve_connection(&state, stream);
        }));
    }
    for stream in listener.incoming() {
        if state.shutdown.load(Ordering::SeqCst) {
            break;
        }
        match stream {
            Ok(s) => {
                let _ = tx.send(s);
            }
            Err(_) => continue,
        }
    }
    drop(tx);
    for handle in handles {
        let _ = handle.join();
    }
    Ok(())
}

/// Client-side helper: one request frame, one reply frame.
pub fn roundtrip(stream: &mut TcpStream, frame: &Frame, max_len: usize) -> Result<Frame, WireError> {
    let mut writer = stream.try_clone().map_err(WireError::Io)?;
    write_frame(&mut writer, frame)?;
    read_frame(stream, max_len)
}
