//! Prefix bucketing with padding and per-bucket commitments.
//!
//! Records land in the bucket named by the first `k` bits (big-endian) of
//! their blinded id. Every bucket is padded to the maximum occupancy `S`
//! with all-zero null slots, and every slot serializes to the same fixed
//! width. All buckets, and therefore all responses, are the same size
//! regardless of which one is retrieved.

use thiserror::Error;

use crate::crypto::{sha256, Digest, SigCiphertext, SigningKeypair, SIG_CIPHERTEXT_LEN};
use crate::enforcer::{BlindedRecord, CuratorDirectoryEntry};
use crate::transparency::{
    decode_inclusion_proof, encode_inclusion_proof, Checkpoint, CodecError, InclusionProof,
    LogError, Reader, TransparencyLog,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BucketError {
    #[error("prefix bits must be in 1..=24, got {0}")]
    BadPrefixBits(u32),
    #[error("commitment trailer of {need} bytes exceeds the response budget of {budget}")]
    ComsBudget { need: usize, budget: usize },
    #[error("records reference {got} curators but the directory has {max}")]
    CuratorCount { got: usize, max: usize },
    #[error(transparent)]
    Log(LogError),
}

/// One padded slot: a record, or the all-zero null sentinel. The ciphertext
/// list always has exactly one entry per directory curator; curators that
/// did not sign the record hold the zero ciphertext.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketSlot {
    pub blinded_id: Digest,
    pub enc_sigs: Vec<SigCiphertext>,
}

impl BucketSlot {
    pub fn null(n_curators: usize) -> Self {
        BucketSlot {
            blinded_id: Digest([0u8; 32]),
            enc_sigs: vec![SigCiphertext([0u8; SIG_CIPHERTEXT_LEN]); n_curators],
        }
    }

    pub fn is_null(&self) -> bool {
        self.blinded_id.is_zero()
    }

    fn from_record(record: &BlindedRecord, n_curators: usize) -> Self {
        let mut slot = BucketSlot::null(n_curators);
        slot.blinded_id = record.blinded_id;
        for (idx, ct) in &record.enc_sigs {
            slot.enc_sigs[*idx as usize] = *ct;
        }
        slot
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.blinded_id.as_bytes());
        for ct in &self.enc_sigs {
            out.extend_from_slice(ct.as_bytes());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bucket {
    pub slots: Vec<BucketSlot>,
}

/// Fixed serialized width of one slot given the directory size.
pub fn slot_width(n_curators: usize) -> usize {
    32 + n_curators * SIG_CIPHERTEXT_LEN
}

impl Bucket {
    /// Canonical concatenation of all slot serializations.
    pub fn to_bytes(&self, n_curators: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.slots.len() * slot_width(n_curators));
        for slot in &self.slots {
            slot.write_to(&mut out);
        }
        out
    }

    pub fn parse(bytes: &[u8], bucket_size: usize, n_curators: usize) -> Option<Bucket> {
        let width = slot_width(n_curators);
        if bytes.len() != bucket_size * width {
            return None;
        }
        let mut slots = Vec::with_capacity(bucket_size);
        for chunk in bytes.chunks_exact(width) {
            let blinded_id = Digest::from_slice(&chunk[..32]).ok()?;
            let enc_sigs = chunk[32..]
                .chunks_exact(SIG_CIPHERTEXT_LEN)
                .map(|c| SigCiphertext::from_slice(c).expect("exact chunks"))
                .collect();
            slots.push(BucketSlot {
                blinded_id,
                enc_sigs,
            });
        }
        Some(Bucket { slots })
    }
}

/// Integer value of the first `k` big-endian bits of a digest.
pub fn prefix_of(digest: &Digest, k: u32) -> u32 {
    let head = u32::from_be_bytes(digest.as_bytes()[..4].try_into().unwrap());
    head >> (32 - k)
}

/// The bucketed database: `2^k` uniformly sized buckets, their
/// commitments, and the committed database hash `H(h_1 || .. || h_2^k)`
/// appended to the transparency log.
#[derive(Clone, Debug)]
pub struct BucketedDb {
    pub prefix_bits: u32,
    pub bucket_size: usize,
    pub directory: Vec<CuratorDirectoryEntry>,
    pub buckets: Vec<Bucket>,
    pub coms: Vec<Digest>,
    pub db_hash: Digest,
    pub checkpoint: Checkpoint,
    pub inclusion: InclusionProof,
}

const BUCKETS_MAGIC: &[u8; 4] = b"VBB1";

impl BucketedDb {
    pub fn encode(&self) -> Vec<u8> {
        let n = self.directory.len();
        let mut out = Vec::new();
        out.extend_from_slice(BUCKETS_MAGIC);
        out.push(self.prefix_bits as u8);
        out.extend_from_slice(&(self.bucket_size as u32).to_be_bytes());
        out.push(n as u8);
        for entry in &self.directory {
            out.push(entry.id.len() as u8);
            out.extend_from_slice(entry.id.as_bytes());
            out.extend_from_slice(&entry.published_timestamp.to_be_bytes());
        }
        for bucket in &self.buckets {
            out.extend_from_slice(&bucket.to_bytes(n));
        }
        let chk = self.checkpoint.encode();
        out.extend_from_slice(&(chk.len() as u32).to_be_bytes());
        out.extend_from_slice(&chk);
        out.extend_from_slice(&encode_inclusion_proof(&self.inclusion));
        out
    }

    /// Commitments and the database hash are recomputed from the bucket
    /// payloads rather than trusted from the file.
    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != BUCKETS_MAGIC {
            return Err(CodecError::Malformed("buckets magic"));
        }
        let prefix_bits = r.u8()? as u32;
        if !(1..=24).contains(&prefix_bits) {
            return Err(CodecError::Malformed("prefix bits"));
        }
        let bucket_size = r.u32()? as usize;
        let n = r.u8()? as usize;
        let mut directory = Vec::with_capacity(n);
        for _ in 0..n {
            let id_len = r.u8()? as usize;
            let id = String::from_utf8(r.take(id_len)?.to_vec())
                .map_err(|_| CodecError::Malformed("curator id"))?;
            let published_timestamp = r.u64()?;
            directory.push(CuratorDirectoryEntry {
                id,
                published_timestamp,
            });
        }
        let width = slot_width(n);
        let mut buckets = Vec::with_capacity(1 << prefix_bits);
        for _ in 0..1usize << prefix_bits {
            let payload = r.take(bucket_size * width)?;
            buckets.push(
                Bucket::parse(payload, bucket_size, n)
                    .ok_or(CodecError::Malformed("bucket payload"))?,
            );
        }
        let chk_len = r.u32()? as usize;
        let (checkpoint, used) = Checkpoint::decode(r.take(chk_len)?)?;
        if used != chk_len {
            return Err(CodecError::Malformed("checkpoint length"));
        }
        let inclusion = decode_inclusion_proof(&mut r)?;
        r.finish()?;
        let coms: Vec<Digest> = buckets.iter().map(|b| sha256(&b.to_bytes(n))).collect();
        let db_hash = coms_hash(&coms);
        Ok(BucketedDb {
            prefix_bits,
            bucket_size,
            directory,
            buckets,
            coms,
            db_hash,
            checkpoint,
            inclusion,
        })
    }
}

/// Hash of the commitment list, the leaf committed to the log.
pub fn coms_hash(coms: &[Digest]) -> Digest {
    let mut input = Vec::with_capacity(coms.len() * 32);
    for c in coms {
        input.extend_from_slice(c.as_bytes());
    }
    sha256(&input)
}

/// Sorts records into prefix buckets, pads to uniform size, commits each
/// bucket and the whole collection, and appends the commitment to the log.
pub fn build_buckets(
    records: &[BlindedRecord],
    directory: &[CuratorDirectoryEntry],
    prefix_bits: u32,
    coms_budget_bytes: usize,
    log: &mut TransparencyLog,
    keypair: &SigningKeypair,
    now: u64,
) -> Result<BucketedDb, BucketError> {
    if !(1..=24).contains(&prefix_bits) {
        return Err(BucketError::BadPrefixBits(prefix_bits));
    }
    let bucket_count = 1usize << prefix_bits;
    let trailer = bucket_count * 32;
    if trailer > coms_budget_bytes {
        return Err(BucketError::ComsBudget {
            need: trailer,
            budget: coms_budget_bytes,
        });
    }
    let n_curators = directory.len();
    if let Some(max_idx) = records
        .iter()
        .flat_map(|r| r.enc_sigs.iter().map(|(idx, _)| *idx as usize))
        .max()
    {
        if max_idx >= n_curators {
            return Err(BucketError::CuratorCount {
                got: max_idx + 1,
                max: n_curators,
            });
        }
    }

    let mut buckets: Vec<Bucket> = (0..bucket_count)
        .map(|_| Bucket { slots: Vec::new() })
        .collect();
    for record in records {
        let idx = prefix_of(&record.blinded_id, prefix_bits) as usize;
        buckets[idx]
            .slots
            .push(BucketSlot::from_record(record, n_curators));
    }
    // Every bucket is padded to the maximum occupancy; an empty database
    // still yields one null slot per bucket.
    let bucket_size = buckets.iter().map(|b| b.slots.len()).max().unwrap().max(1);
    for bucket in &mut buckets {
        bucket
            .slots
            .resize_with(bucket_size, || BucketSlot::null(n_curators));
    }

    let coms: Vec<Digest> = buckets
        .iter()
        .map(|b| sha256(&b.to_bytes(n_curators)))
        .collect();
    let db_hash = coms_hash(&coms);
    let (checkpoint, inclusion) = log
        .append_leaf(db_hash, now, keypair)
        .map_err(BucketError::Log)?;

    Ok(BucketedDb {
        prefix_bits,
        bucket_size,
        directory: directory.to_vec(),
        buckets,
        coms,
        db_hash,
        checkpoint,
        inclusion,
    })
}
