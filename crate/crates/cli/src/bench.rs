//! Micro-benchmark harness: wall-clock distributions for the operations on
//! the query critical path, plus the storage and capacity calculators the
//! protocol's accounting is based on. Results go to CSV with a fixed
//! column order.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};

use veilblock_core::crypto::{
    blind, hash_to_group, object_hash, sha256, Digest, GroupElement, Scalar, SigCiphertext,
    SigningKeypair,
};
use veilblock_core::enforcer::{
    database_hash, psi_response, BlindedRecord, CuratorDirectoryEntry, DatabaseSnapshot,
};
use veilblock_core::pir::{
    client_pir_query, coms_hash, entries_per_slot, server_pir_answer, slot_width, Bucket,
    BucketSlot, BucketedDb, NotPrivateReferenceBackend,
};
use veilblock_core::transparency::TransparencyLog;

pub const MIN_ITERATIONS: usize = 200;

#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub operation: String,
    pub device: String,
    pub iterations: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p95_us: f64,
    pub payload_bytes: u64,
}

impl BenchRecord {
    pub const CSV_HEADER: &'static str =
        "operation,device,iterations,mean_us,p50_us,p95_us,payload_bytes";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.3},{:.3},{}",
            self.operation,
            self.device,
            self.iterations,
            self.mean_us,
            self.p50_us,
            self.p95_us,
            self.payload_bytes
        )
    }
}

/// Times `iterations` calls and summarizes the distribution.
pub fn measure(
    operation: &str,
    device: &str,
    iterations: usize,
    payload_bytes: u64,
    mut f: impl FnMut(),
) -> BenchRecord {
    assert!(iterations >= MIN_ITERATIONS, "methodology requires >= 200 iterations");
    // Warmup.
    for _ in 0..iterations.min(10) {
        f();
    }
    let mut samples = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        f();
        samples.push(start.elapsed().as_secs_f64() * 1e6);
    }
    summarize(operation, device, payload_bytes, samples)
}

fn summarize(operation: &str, device: &str, payload_bytes: u64, mut samples: Vec<f64>) -> BenchRecord {
    let iterations = samples.len();
    let mean = samples.iter().sum::<f64>() / iterations as f64;
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |p: f64| samples[(((iterations - 1) as f64) * p) as usize];
    BenchRecord {
        operation: operation.to_string(),
        device: device.to_string(),
        iterations,
        mean_us: mean,
        p50_us: pct(0.50),
        p95_us: pct(0.95),
        payload_bytes,
    }
}

/// Least-squares fit `y = slope*x + intercept` with its R².
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// Paper storage model: bits per entry are a 256-bit blinded hash, a
/// 16-bit nonce allowance, and one 512-bit signature per curator.
pub fn model_entry_bytes(curators: u64) -> u64 {
    (256 + 16 + 512 * curators) / 8
}

/// Bytes this implementation actually serializes per record.
pub fn measured_entry_bytes(curators: u64) -> u64 {
    33 + 65 * curators
}

/// A snapshot full of synthetic records. Snapshot verification cost does
/// not depend on how blinded ids were produced, so random ids stand in for
/// real blindings.
pub fn synthetic_snapshot(n: usize, curators: u8, rng: &mut impl RngCore) -> DatabaseSnapshot {
    let mut records: Vec<BlindedRecord> = (0..n)
        .map(|_| {
            let mut id = [0u8; 32];
            rng.fill_bytes(&mut id);
            let enc_sigs = (0..curators)
                .map(|c| {
                    let mut ct = [0u8; 64];
                    rng.fill_bytes(&mut ct);
                    (c, SigCiphertext(ct))
                })
                .collect();
            BlindedRecord {
                blinded_id: Digest(id),
                enc_sigs,
            }
        })
        .collect();
    records.sort_by(|a, b| a.blinded_id.cmp(&b.blinded_id));
    records.dedup_by(|a, b| a.blinded_id == b.blinded_id);

    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let keypair = SigningKeypair::from_seed(&seed);
    let mut log = TransparencyLog::new();
    let db_hash = database_hash(&records);
    let (checkpoint, inclusion) = log.append_leaf(db_hash, 1, &keypair).unwrap();
    DatabaseSnapshot {
        epoch: 1,
        enforcer_pk: keypair.public_key(),
        directory: (0..curators)
            .map(|c| CuratorDirectoryEntry {
                id: format!("c{c}"),
                published_timestamp: 0,
            })
            .collect(),
        records,
        db_hash,
        checkpoint,
        inclusion,
    }
}

/// A bucketed database with exactly `2^k` buckets of `bucket_size` random
/// slots, honestly committed.
pub fn synthetic_bucketed(prefix_bits: u32, bucket_size: usize, rng: &mut impl RngCore) -> BucketedDb {
    let n_curators = 1usize;
    let buckets: Vec<Bucket> = (0..1usize << prefix_bits)
        .map(|_| Bucket {
            slots: (0..bucket_size)
                .map(|_| {
                    let mut id = [0u8; 32];
                    rng.fill_bytes(&mut id);
                    let mut ct = [0u8; 64];
                    rng.fill_bytes(&mut ct);
                    BucketSlot {
                        blinded_id: Digest(id),
                        enc_sigs: vec![SigCiphertext(ct)],
                    }
                })
                .collect(),
        })
        .collect();
    let coms: Vec<Digest> = buckets.iter().map(|b| sha256(&b.to_bytes(n_curators))).collect();
    let db_hash = coms_hash(&coms);
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let keypair = SigningKeypair::from_seed(&seed);
    let mut log = TransparencyLog::new();
    let (checkpoint, inclusion) = log.append_leaf(db_hash, 1, &keypair).unwrap();
    BucketedDb {
        prefix_bits,
        bucket_size,
        directory: vec![CuratorDirectoryEntry {
            id: "c0".into(),
            published_timestamp: 0,
        }],
        buckets,
        coms,
        db_hash,
        checkpoint,
        inclusion,
    }
}

pub struct BenchOptions {
    pub device: String,
    pub iterations: usize,
    /// Inclusive prefix-bit range for the retrieval scaling sweep.
    pub pir_prefix_range: (u32, u32),
    pub slot_bytes: usize,
    /// Entry counts for the snapshot verification runs.
    pub snapshot_sizes: Vec<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            device: "local".into(),
            iterations: MIN_ITERATIONS,
            pir_prefix_range: (6, 15),
            slot_bytes: 10_240,
            snapshot_sizes: vec![50_000, 1_000_000],
        }
    }
}

/// Runs the whole suite. Progress lines go to stderr so stdout can stay
/// machine readable.
pub fn run_suite(opts: &BenchOptions) -> Vec<BenchRecord> {
    let mut rng = StdRng::seed_from_u64(0xbe7c);
    let mut records = Vec::new();
    let device = opts.device.as_str();
    let iters = opts.iterations.max(MIN_ITERATIONS);

    // Client blinding: hash the object, map into the group, exponentiate.
    let mut objects = Vec::new();
    for _ in 0..64 {
        let mut obj = [0u8; 32];
        rng.fill(&mut obj);
        objects.push(obj);
    }
    let scalar = Scalar::random(&mut rng);
    let mut i = 0;
    records.push(measure("client_blind_hash", device, iters, 32, || {
        let obj = &objects[i % objects.len()];
        i += 1;
        let h = object_hash(obj);
        let p = hash_to_group(&h);
        std::hint::black_box(blind(&p, &scalar).unwrap());
    }));
    eprintln!("bench: client_blind_hash done");

    // Client unblinding: decompress the response, invert, exponentiate.
    let resp_bytes: Vec<[u8; 32]> = objects
        .iter()
        .map(|obj| {
            let p = hash_to_group(&object_hash(obj));
            blind(&p, &scalar).unwrap().encode()
        })
        .collect();
    let mut i = 0;
    records.push(measure("client_unblind", device, iters, 32, || {
        let bytes = &resp_bytes[i % resp_bytes.len()];
        i += 1;
        let el = GroupElement::decode(bytes).unwrap();
        std::hint::black_box(veilblock_core::crypto::unblind(&el, &scalar).unwrap());
    }));
    eprintln!("bench: client_unblind done");

    // Server PSI response at two database scales. The handler never reads
    // the record set, so the means should be indistinguishable.
    for &db_size in &[1_000usize, 1_000_000] {
        let snapshot = synthetic_snapshot(db_size, 1, &mut rng);
        let b = Scalar::random(&mut rng);
        let mut i = 0;
        let label = format!("server_psi_{db_size}");
        records.push(measure(&label, device, iters, 32, || {
            let bytes = &resp_bytes[i % resp_bytes.len()];
            i += 1;
            let req = GroupElement::decode(bytes).unwrap();
            std::hint::black_box(psi_response(&b, &req).unwrap().encode());
        }));
        std::hint::black_box(snapshot.records.len());
        eprintln!("bench: {label} done");
    }

    // Reference-backend retrieval across the prefix sweep. Buckets are
    // filled to the slot capacity so element count tracks the published
    // scaling table.
    let backend = NotPrivateReferenceBackend::new(opts.slot_bytes);
    let capacity = entries_per_slot(opts.slot_bytes, slot_width(1));
    for s in opts.pir_prefix_range.0..=opts.pir_prefix_range.1 {
        let db = synthetic_bucketed(s, capacity, &mut rng);
        let elements = (1u64 << s) * capacity as u64;
        let mut key = [0u8; 32];
        rng.fill(&mut key);
        let (query, _sk) = client_pir_query(&backend, &Digest(key), s, &mut rng);
        let query_bytes: u64 = query.cts.iter().map(|c| c.len() as u64 + 4).sum();
        let label = format!("pir_answer_s{s}_n{elements}");
        let rec = measure(&label, device, iters, query_bytes, || {
            std::hint::black_box(server_pir_answer(&backend, &query, &db).unwrap());
        });
        records.push(rec);
        eprintln!("bench: {label} done");
    }

    // Snapshot verification at the published storage scales.
    for &n in &opts.snapshot_sizes {
        let snapshot = synthetic_snapshot(n, 1, &mut rng);
        let pk = snapshot.enforcer_pk;
        let bytes = snapshot.encode().len() as u64;
        let label = format!("verify_snapshot_{n}");
        let witness_pks = std::collections::BTreeMap::new();
        records.push(measure(&label, device, iters, bytes, || {
            std::hint::black_box(
                veilblock_core::client::verify_snapshot(&snapshot, &pk, &witness_pks, 0).unwrap(),
            );
        }));
        eprintln!("bench: {label} done");
    }

    records
}

/// Storage and capacity model lines printed alongside the CSV.
pub fn storage_model_report() -> Vec<String> {
    let mut out = Vec::new();
    for j in 1..=4u64 {
        out.push(format!(
            "entry bytes with {j} curator(s): model {} measured {}",
            model_entry_bytes(j),
            measured_entry_bytes(j)
        ));
    }
    out.push(format!(
        "50000-entry snapshot, 1 curator: model {:.1} MB measured {:.1} MB",
        50_000.0 * model_entry_bytes(1) as f64 / 1e6,
        50_000.0 * measured_entry_bytes(1) as f64 / 1e6,
    ));
    out.push(format!(
        "1000000-entry snapshot, 1 curator: model {:.1} MB measured {:.1} MB",
        1_000_000.0 * model_entry_bytes(1) as f64 / 1e6,
        1_000_000.0 * measured_entry_bytes(1) as f64 / 1e6,
    ));
    out.push(format!(
        "bucket capacity at 10240-byte slots, 98-byte entries: {}",
        entries_per_slot(10_240, 98)
    ));
    out
}
