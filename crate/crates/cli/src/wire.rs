//! Length-prefixed binary wire protocol.
//!
//! Frame layout: `version (1) || kind (1) || length (4, BE) || body`.
//! PSI request and response bodies are exactly 32 bytes, which keeps the
//! per-query bandwidth accounting bit-exact.

use std::io::{Read, Write};

use thiserror::Error;

use veilblock_core::crypto::Digest;
use veilblock_core::enforcer::CuratorDirectoryEntry;
use veilblock_core::pir::{FheBackend, PirAnswer, PirQuery};
use veilblock_core::transparency::{
    decode_inclusion_proof, encode_inclusion_proof, Checkpoint, Reader,
};

pub const WIRE_VERSION: u8 = 1;
pub const PSI_BODY_LEN: usize = 32;

/// Inbound cap for a server: big enough for any query, small enough to
/// shed abuse.
pub const SERVER_MAX_FRAME: usize = 64 << 20;
/// Inbound cap for a client, which may legitimately stream a large
/// snapshot.
pub const CLIENT_MAX_FRAME: usize = 512 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameKind {
    PsiReq = 1,
    PsiResp = 2,
    SnapshotReq = 3,
    Snapshot = 4,
    PirReq = 5,
    PirResp = 6,
    CheckpointReq = 7,
    Checkpoints = 8,
    Error = 15,
}

impl FrameKind {
    pub fn from_u8(v: u8) -> Option<FrameKind> {
        Some(match v {
            1 => FrameKind::PsiReq,
            2 => FrameKind::PsiResp,
            3 => FrameKind::SnapshotReq,
            4 => FrameKind::Snapshot,
            5 => FrameKind::PirReq,
            6 => FrameKind::PirResp,
            7 => FrameKind::CheckpointReq,
            8 => FrameKind::Checkpoints,
            15 => FrameKind::Error,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub body: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameKind, body: Vec<u8>) -> Self {
        Frame { kind, body }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Frame {
            kind: FrameKind::Error,
            body: message.into().into_bytes(),
        }
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("peer closed the connection")]
    Closed,
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("unknown frame kind {0}")]
    BadKind(u8),
    #[error("frame of {got} bytes exceeds the {max} byte limit")]
    Oversized { got: usize, max: usize },
    #[error("malformed {0} body")]
    MalformedBody(&'static str),
    #[error("server error: {0}")]
    Remote(String),
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<(), WireError> {
    let mut header = [0u8; 6];
    header[0] = WIRE_VERSION;
    header[1] = frame.kind as u8;
    header[2..6].copy_from_slice(&(frame.body.len() as u32).to_be_bytes());
    w.write_all(&header)?;
    w.write_all(&frame.body)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Closed` means clean EOF at a frame boundary;
/// `Oversized` callers must drop the connection since the stream is no
/// longer aligned.
pub fn read_frame(r: &mut impl Read, max_len: usize) -> Result<Frame, WireError> {
    let mut header = [0u8; 6];
    let mut filled = 0;
    while filled < header.len() {
        let n = r.read(&mut header[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Err(WireError::Closed);
            }
            return Err(WireError::Io(std::io::Error::from(
                std::io::ErrorKind::UnexpectedEof,
            )));
        }
        filled += n;
    }
    if header[0] != WIRE_VERSION {
        return Err(WireError::BadVersion(header[0]));
    }
    let kind = FrameKind::from_u8(header[1]).ok_or(WireError::BadKind(header[1]))?;
    let len = u32::from_be_bytes(header[2..6].try_into().unwrap()) as usize;
    if len > max_len {
        return Err(WireError::Oversized { got: len, max: max_len });
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Frame { kind, body })
}

pub fn encode_pir_query<B: FheBackend>(backend: &B, query: &PirQuery<B>) -> Vec<u8> {
    let mut out = Vec::new();
    out.push(query.prefix_bits as u8);
    out.extend_from_slice(&(query.cts.len() as u32).to_be_bytes());
    for ct in &query.cts {
        let blob = backend.encode_ciphertext(ct);
        out.extend_from_slice(&(blob.len() as u32).to_be_bytes());
        out.extend_from_slice(&blob);
    }
    out
}

pub fn decode_pir_query<B: FheBackend>(
    backend: &B,
    body: &[u8],
) -> Result<PirQuery<B>, WireError> {
    let mut r = Reader::new(body);
    let prefix_bits = r.u8().map_err(|_| WireError::MalformedBody("pir-req"))? as u32;
    let count = r.u32().map_err(|_| WireError::MalformedBody("pir-req"))? as usize;
    if count > 1 << 24 {
        return Err(WireError::MalformedBody("pir-req"));
    }
    let mut cts = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32().map_err(|_| WireError::MalformedBody("pir-req"))? as usize;
        let blob = r.take(len).map_err(|_| WireError::MalformedBody("pir-req"))?;
        cts.push(
            backend
                .decode_ciphertext(blob)
                .map_err(|_| WireError::MalformedBody("pir-req"))?,
        );
    }
    r.finish().map_err(|_| WireError::MalformedBody("pir-req"))?;
    Ok(PirQuery { prefix_bits, cts })
}

/// Answer blob, then a fixed-layout trailer: bucket size, curator
/// directory, all bucket commitments, the checkpoint, and the inclusion
/// proof.
pub fn encode_pir_answer<B: FheBackend>(backend: &B, answer: &PirAnswer<B>) -> Vec<u8> {
    let mut out = Vec::new();
    let blob = backend.encode_ciphertext(&answer.answer);
    out.extend_from_slice(&(blob.len() as u32).to_be_bytes());
    out.extend_from_slice(&blob);
    out.extend_from_slice(&(answer.bucket_size as u32).to_be_bytes());
    out.push(answer.directory.len() as u8);
    for entry in &answer.directory {
        out.push(entry.id.len() as u8);
        out.extend_from_slice(entry.id.as_bytes());
        out.extend_from_slice(&entry.published_timestamp.to_be_bytes());
    }
    out.extend_from_slice(&(answer.coms.len() as u32).to_be_bytes());
    for com in &answer.coms {
        out.extend_from_slice(com.as_bytes());
    }
    let chk = answer.checkpoint.encode();
    out.extend_from_slice(&(chk.len() as u32).to_be_bytes());
    out.extend_from_slice(&chk);
    out.extend_from_slice(&encode_inclusion_proof(&answer.inclusion));
    out
}

pub fn decode_pir_answer<B: FheBackend>(
    backend: &B,
    body: &[u8],
) -> Result<PirAnswer<B>, WireError> {
    let bad = || WireError::MalformedBody("pir-resp");
    let mut r = Reader::new(body);
    let blob_len = r.u32().map_err(|_| bad())? as usize;
    let answer = backend
        .decode_ciphertext(r.take(blob_len).map_err(|_| bad())?)
        .map_err(|_| bad())?;
    let bucket_size = r.u32().map_err(|_| bad())? as usize;
    let dir_len = r.u8().map_err(|_| bad())? as usize;
    let mut directory = Vec::with_capacity(dir_len);
    for _ in 0..dir_len {
        let id_len = r.u8().map_err(|_| bad())? as usize;
        let id = String::from_utf8(r.take(id_len).map_err(|_| bad())?.to_vec())
            .map_err(|_| bad())?;
        let published_timestamp = r.u64().map_err(|_| bad())?;
        directory.push(CuratorDirectoryEntry {
            id,
            published_timestamp,
        });
    }
    let coms_len = r.u32().map_err(|_| bad())? as usize;
    if coms_len > 1 << 24 || coms_len * 32 > r.remaining() {
        return Err(bad());
    }
    let mut coms = Vec::with_capacity(coms_len);
    for _ in 0..coms_len {
        coms.push(Digest::from_slice(r.take(32).map_err(|_| bad())?).map_err(|_| bad())?);
    }
    let chk_len = r.u32().map_err(|_| bad())? as usize;
    let (checkpoint, used) = Checkpoint::decode(r.take(chk_len).map_err(|_| bad())?)
        .map_err(|_| bad())?;
    if used != chk_len {
        return Err(bad());
    }
    let inclusion = decode_inclusion_proof(&mut r).map_err(|_| bad())?;
    r.finish().map_err(|_| bad())?;
    Ok(PirAnswer {
        answer,
        bucket_size,
        directory,
        coms,
        checkpoint,
        inclusion,
    })
}

pub fn encode_checkpoints(checkpoints: &[Checkpoint]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(checkpoints.len() as u32).to_be_bytes());
    for chkpt in checkpoints {
        let bytes = chkpt.encode();
        out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

pub fn decode_checkpoints(body: &[u8]) -> Result<Vec<Checkpoint>, WireError> {
    let bad = || WireError::MalformedBody("checkpoints");
    let mut r = Reader::new(body);
    let count = r.u32().map_err(|_| bad())? as usize;
    // Each checkpoint is at least its canonical 48 bytes plus signature.
    if count > 1 << 24 || count * 112 > r.remaining() {
        return Err(bad());
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32().map_err(|_| bad())? as usize;
        let (chkpt, used) = Checkpoint::decode(r.take(len).map_err(|_| bad())?)
            .map_err(|_| bad())?;
        if used != len {
            return Err(bad());
        }
        out.push(chkpt);
    }
    r.finish().map_err(|_| bad())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn frame_round_trip() {
        let frame = Frame::new(FrameKind::PsiReq, vec![7u8; 32]);
        let mut buf = Vec::new();
        write_frame(&mut buf, &frame).unwrap();
        assert_eq!(buf.len(), 6 + 32);
        assert_eq!(buf[0], WIRE_VERSION);
        assert_eq!(buf[1], 1);
        let decoded = read_frame(&mut Cursor::new(&buf), 1024).unwrap();
        assert_eq!(decoded, frame);
    }

    #[test]
    fn oversized_frame_detected_before_read() {
        let frame = Frame::new(FrameKind::Snapshot, vec![0u8; 100]);
        let mut buf = Vec::new();
        write_frame(&mut buf, &frame).unwrap();
        match read_frame(&mut Cursor::new(&buf), 50) {
            Err(WireError::Oversized { got: 100, max: 50 }) => {}
            other => panic!("expected oversized, got {other:?}"),
        }
    }

    #[test]
    fn bad_version_and_kind_rejected() {
        let mut buf = vec![2u8, 1, 0, 0, 0, 0];
        assert!(matches!(
            read_frame(&mut Cursor::new(&buf), 1024),
            Err(WireError::BadVersion(2))
        ));
        buf[0] = WIRE_VERSION;
        buf[1] = 99;
        assert!(matches!(
            read_frame(&mut Cursor::new(&buf), 1024),
            Err(WireError::BadKind(99))
        ));
    }

    #[test]
    fn clean_eof_is_closed() {
        let empty: &[u8] = &[];
        assert!(matches!(
            read_frame(&mut Cursor::new(empty), 1024),
            Err(WireError::Closed)
        ));
    }

    #[test]
    fn pir_codecs_round_trip() {
        use rand::SeedableRng;
        use veilblock_core::pir::{client_pir_query, NotPrivateReferenceBackend};
        let backend = NotPrivateReferenceBackend::new(1024);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let key = Digest([9u8; 32]);
        let (query, _sk) = client_pir_query(&backend, &key, 4, &mut rng);
        let body = encode_pir_query(&backend, &query);
        let decoded = decode_pir_query(&backend, &body).unwrap();
        assert_eq!(decoded.prefix_bits, 4);
        assert_eq!(decoded.cts, query.cts);
        assert!(decode_pir_query(&backend, &body[..body.len() - 1]).is_err());
    }
}
