//! Auditing. Unprivileged audits consume only public data: gossiped
//! checkpoints, consistency proofs, and appeal bundles. The privileged
//! audit additionally takes the blinding value and the raw objects and
//! reconstructs the published database from scratch.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::crypto::{
    blind, decrypt_sig, derive_id, derive_key, hash_to_group, object_hash, verify, Digest,
    PublicKey, Scalar,
};
use crate::client::AppealBundle;
use crate::curator::{entry_payload, CuratorTrust};
use crate::enforcer::{database_hash, DatabaseSnapshot};
use crate::transparency::{verify_consistency, Checkpoint, ConsistencyProof, MerkleTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuditPolicy {
    /// Publishing more than once inside this interval is an oscillation.
    pub min_update_interval_secs: u64,
    /// The newest checkpoint may not be older than this.
    pub max_checkpoint_age_secs: u64,
    pub witness_quorum: usize,
}

impl Default for AuditPolicy {
    fn default() -> Self {
        AuditPolicy {
            min_update_interval_secs: 3600,
            max_checkpoint_age_secs: 7 * 24 * 3600,
            witness_quorum: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Inconsistency,
    Oscillation,
    Stale,
    Signature,
    ContentMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Inconsistency => "inconsistency",
            ViolationKind::Oscillation => "oscillation",
            ViolationKind::Stale => "stale",
            ViolationKind::Signature => "signature",
            ViolationKind::ContentMismatch => "content-mismatch",
        };
        f.write_str(s)
    }
}

/// One violation with machine-verifiable evidence (e.g. the two
/// conflicting checkpoints, serialized).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
    pub evidence: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, detail: impl Into<String>, evidence: Vec<u8>) {
        self.violations.push(Violation {
            kind,
            detail: detail.into(),
            evidence,
        });
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_clean() {
            return writeln!(f, "verdict clean");
        }
        writeln!(f, "verdict violations {}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "violation {} {}", v.kind, v.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("proof refused: {0}")]
pub struct ProofRefused(pub String);

/// Where the auditor gets consistency proofs from. In a live deployment
/// this is the enforcer; an enforcer that will not answer is itself
/// evidence.
pub trait ConsistencyOracle {
    fn prove(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ProofRefused>;
}

/// Proof oracle backed by the log's leaf list (the enforcer's own tree, or
/// a copy of its leaves file).
pub struct LeafBackedOracle {
    tree: MerkleTree,
}

impl LeafBackedOracle {
    pub fn new(leaves: Vec<Digest>) -> Self {
        LeafBackedOracle {
            tree: MerkleTree::from_leaves(leaves),
        }
    }

    pub fn from_tree(tree: MerkleTree) -> Self {
        LeafBackedOracle { tree }
    }
}

impl ConsistencyOracle for LeafBackedOracle {
    fn prove(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof, ProofRefused> {
        self.tree
            .prove_consistency(old_size, new_size)
            .map_err(|e| ProofRefused(e.to_string()))
    }
}

/// An enforcer that stonewalls every request.
pub struct RefusingOracle;

impl ConsistencyOracle for RefusingOracle {
    fn prove(&self, _old: u64, _new: u64) -> Result<ConsistencyProof, ProofRefused> {
        Err(ProofRefused("enforcer did not supply a proof".into()))
    }
}

fn checkpoint_pair_evidence(a: &Checkpoint, b: &Checkpoint) -> Vec<u8> {
    let mut out = a.encode();
    out.extend_from_slice(&b.encode());
    out
}

/// Unprivileged log audit: signatures, pairwise consistency against the
/// latest checkpoint, timestamp monotonicity and freshness, and the update
/// interval policy.
pub fn audit_checkpoints(
    checkpoints: &[Checkpoint],
    oracle: &dyn ConsistencyOracle,
    enforcer_pk: &PublicKey,
    witness_pks: &BTreeMap<String, PublicKey>,
    policy: &AuditPolicy,
    now: u64,
) -> AuditReport {
    let mut report = AuditReport::default();
    if checkpoints.is_empty() {
        report.push(ViolationKind::Stale, "no checkpoints gossiped", Vec::new());
        return report;
    }

    for (i, chkpt) in checkpoints.iter().enumerate() {
        if !chkpt.verify_enforcer(enforcer_pk) {
            report.push(
                ViolationKind::Signature,
                format!("checkpoint {i} (size {}) enforcer signature invalid", chkpt.size),
                chkpt.encode(),
            );
        }
        let witnesses = chkpt.valid_witness_count(witness_pks);
        if witnesses < policy.witness_quorum {
            report.push(
                ViolationKind::Signature,
                format!(
                    "checkpoint {i} (size {}) has {witnesses} witness signatures, quorum {}",
                    chkpt.size, policy.witness_quorum
                ),
                chkpt.encode(),
            );
        }
    }

    let latest = checkpoints.last().unwrap();
    for (i, chkpt) in checkpoints[..checkpoints.len() - 1].iter().enumerate() {
        match oracle.prove(chkpt.size, latest.size) {
            Ok(proof) => {
                if !verify_consistency(chkpt, latest, &proof) {
                    report.push(
                        ViolationKind::Inconsistency,
                        format!(
                            "no valid consistency from size {} to size {}",
                            chkpt.size, latest.size
                        ),
                        checkpoint_pair_evidence(chkpt, latest),
                    );
                }
            }
            Err(refusal) => {
                report.push(
                    ViolationKind::Inconsistency,
                    format!(
                        "checkpoint {i}: enforcer refused proof {} -> {}: {refusal}",
                        chkpt.size, latest.size
                    ),
                    checkpoint_pair_evidence(chkpt, latest),
                );
            }
        }
    }

    for pair in checkpoints.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.timestamp < a.timestamp {
            report.push(
                ViolationKind::Inconsistency,
                format!("timestamp regressed from {} to {}", a.timestamp, b.timestamp),
                checkpoint_pair_evidence(a, b),
            );
        }
        if a.size == b.size && a.root != b.root {
            report.push(
                ViolationKind::Inconsistency,
                format!("split view at size {}", a.size),
                checkpoint_pair_evidence(a, b),
            );
        }
        if b.timestamp.saturating_sub(a.timestamp) < policy.min_update_interval_secs {
            report.push(
                ViolationKind::Oscillation,
                format!(
                    "updates {}s apart, policy requires {}s",
                    b.timestamp.saturating_sub(a.timestamp),
                    policy.min_update_interval_secs
                ),
                checkpoint_pair_evidence(a, b),
            );
        }
    }

    if now.saturating_sub(latest.timestamp) > policy.max_checkpoint_age_secs {
        report.push(
            ViolationKind::Stale,
            format!(
                "latest checkpoint is {}s old, policy allows {}s",
                now.saturating_sub(latest.timestamp),
                policy.max_checkpoint_age_secs
            ),
            latest.encode(),
        );
    }

    report
}

/// Privileged audit: reconstruct the database from the raw objects and the
/// blinding value, and re-run the client's checks on every record.
/// The object list comes from the curators' disclosure interface.
pub fn privileged_audit(
    snapshot: &DatabaseSnapshot,
    objects: &[Vec<u8>],
    blind_b: &Scalar,
    trust: &CuratorTrust,
    policy_m: usize,
    now: u64,
    skew_secs: u64,
) -> AuditReport {
    let mut report = AuditReport::default();

    if database_hash(&snapshot.records) != snapshot.db_hash {
        report.push(
            ViolationKind::ContentMismatch,
            "records do not hash to the committed database hash",
            snapshot.db_hash.as_bytes().to_vec(),
        );
    }
    if !snapshot.checkpoint.verify_enforcer(&snapshot.enforcer_pk) {
        report.push(
            ViolationKind::Signature,
            "checkpoint signature invalid",
            snapshot.checkpoint.encode(),
        );
    }

    // blinded id -> object
    let mut by_blinded: BTreeMap<Digest, &[u8]> = BTreeMap::new();
    for obj in objects {
        let h = object_hash(obj);
        let blinded = blind(&hash_to_group(&h), blind_b).expect("hash output is never identity");
        by_blinded.insert(derive_id(&blinded), obj.as_slice());
    }

    for record in &snapshot.records {
        let Some(obj) = by_blinded.get(&record.blinded_id) else {
            report.push(
                ViolationKind::ContentMismatch,
                format!("record {} matches no disclosed object", record.blinded_id),
                record.blinded_id.as_bytes().to_vec(),
            );
            continue;
        };
        let h = object_hash(obj);
        let blinded = blind(&hash_to_group(&h), blind_b).expect("hash output is never identity");
        let key = derive_key(&blinded);
        let mut verified = 0usize;
        for (dir_idx, ct) in &record.enc_sigs {
            let Some(dir_entry) = snapshot.directory.get(*dir_idx as usize) else {
                report.push(
                    ViolationKind::ContentMismatch,
                    format!("record {} references unknown curator slot", record.blinded_id),
                    record.blinded_id.as_bytes().to_vec(),
                );
                continue;
            };
            let Some(anchor) = trust.get(&dir_entry.id) else {
                report.push(
                    ViolationKind::Signature,
                    format!("no trust anchor for curator {}", dir_entry.id),
                    record.blinded_id.as_bytes().to_vec(),
                );
                continue;
            };
            let signed_at = dir_entry.published_timestamp;
            if let Some(window) = anchor.validity_window_secs {
                let fresh = signed_at > 0
                    && signed_at <= now + skew_secs
                    && now <= signed_at + window + skew_secs;
                if !fresh {
                    report.push(
                        ViolationKind::Stale,
                        format!(
                            "record {} carries a stale timestamp {signed_at} from {}",
                            record.blinded_id, dir_entry.id
                        ),
                        record.blinded_id.as_bytes().to_vec(),
                    );
                    continue;
                }
            }
            let sig = decrypt_sig(&key, ct, *dir_idx as u32);
            if verify(&anchor.public_key, &entry_payload(signed_at, &h), &sig) {
                verified += 1;
            } else {
                report.push(
                    ViolationKind::Signature,
                    format!(
                        "record {} has an unverifiable signature from {}",
                        record.blinded_id, dir_entry.id
                    ),
                    record.blinded_id.as_bytes().to_vec(),
                );
            }
        }
        if verified < policy_m {
            report.push(
                ViolationKind::Signature,
                format!(
                    "record {} has {verified} verifying signatures, policy requires {policy_m}",
                    record.blinded_id
                ),
                record.blinded_id.as_bytes().to_vec(),
            );
        }
    }

    report
}

/// Outcome of checking an appeal bundle against public keys only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppealCheck {
    pub accepted: bool,
    pub reasons: Vec<String>,
}

/// Accepts iff the bundle carries at least one signature and every
/// signature verifies over the bundle object's hash payload, with
/// freshness when timestamped.
pub fn verify_appeal(
    bundle: &AppealBundle,
    trust: &CuratorTrust,
    now: u64,
    skew_secs: u64,
) -> AppealCheck {
    let mut reasons = Vec::new();
    if bundle.signatures.is_empty() {
        reasons.push("bundle carries no signatures".to_string());
    }
    let obj_hash = object_hash(&bundle.object);
    for sig in &bundle.signatures {
        let Some(anchor) = trust.get(&sig.curator_id) else {
            reasons.push(format!("unknown curator {}", sig.curator_id));
            continue;
        };
        if let Some(window) = anchor.validity_window_secs {
            let fresh = sig.timestamp > 0
                && sig.timestamp <= now + skew_secs
                && now <= sig.timestamp + window + skew_secs;
            if !fresh {
                reasons.push(format!(
                    "signature from {} is stale (timestamp {})",
                    sig.curator_id, sig.timestamp
                ));
                continue;
            }
        }
        if !verify(
            &anchor.public_key,
            &entry_payload(sig.timestamp, &obj_hash),
            &sig.signature,
        ) {
            reasons.push(format!("signature from {} does not verify", sig.curator_id));
        }
    }
    AppealCheck {
        accepted: reasons.is_empty(),
        reasons,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::{evaluate, export_appeal, EvalOptions};
    use crate::crypto::{SigCiphertext, SigningKeypair};
    use crate::curator::{CuratorDb, RevocationMode, TrustedCurator};
    use crate::enforcer::{BlindedRecord, EnforcerState};
    use crate::transparency::TransparencyLog;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn rng() -> StdRng {
        StdRng::seed_from_u64(80)
    }

    fn honest_log(epochs: u64, gap: u64) -> (TransparencyLog, Vec<Checkpoint>, SigningKeypair) {
        let mut rng = rng();
        let kp = SigningKeypair::generate(&mut rng);
        let mut log = TransparencyLog::new();
        let mut checkpoints = Vec::new();
        for i in 0..epochs {
            let (chkpt, _) = log
                .append_leaf(object_hash(&i.to_be_bytes()), 1000 + i * gap, &kp)
                .unwrap();
            checkpoints.push(chkpt);
        }
        (log, checkpoints, kp)
    }

    #[test]
    fn honest_log_audits_clean() {
        let (log, checkpoints, kp) = honest_log(10, 4000);
        let oracle = LeafBackedOracle::from_tree(log.tree().clone());
        let report = audit_checkpoints(
            &checkpoints,
            &oracle,
            &kp.public_key(),
            &BTreeMap::new(),
            &AuditPolicy::default(),
            checkpoints.last().unwrap().timestamp + 10,
        );
        assert!(report.is_clean(), "{report}");
    }

    #[test]
    fn forked_checkpoints_flagged_as_inconsistency() {
        let (log, mut checkpoints, kp) = honest_log(5, 4000);
        // Replace the middle checkpoint with an equal-size fork.
        let fork_kp = SigningKeypair::from_seed(&kp.seed());
        let mut forked = TransparencyLog::new();
        for i in 0..3u64 {
            forked
                .append_leaf(object_hash(&(900 + i).to_be_bytes()), 1000 + i * 4000, &fork_kp)
                .unwrap();
        }
        let (fork_chkpt, _) = forked
            .append_leaf(object_hash(b"fork"), checkpoints[2].timestamp, &fork_kp)
            .unwrap();
        checkpoints.insert(3, fork_chkpt.clone());

        let oracle = LeafBackedOracle::from_tree(log.tree().clone());
        let report = audit_checkpoints(
            &checkpoints,
            &oracle,
            &kp.public_key(),
            &BTreeMap::new(),
            &AuditPolicy::default(),
            checkpoints.last().unwrap().timestamp,
        );
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Inconsistency));
        // Evidence is re-verifiable: it decodes to two signed checkpoints
        // of equal size and different roots.
        let v = report
            .violations
            .iter()
            .find(|v| v.detail.contains("split view"))
            .expect("split view violation");
        let (a, used) = Checkpoint::decode(&v.evidence).unwrap();
        let (b, _) = Checkpoint::decode(&v.evidence[used..]).unwrap();
        assert_eq!(a.size, b.size);
        assert_ne!(a.root, b.root);
        assert!(a.verify_enforcer(&kp.public_key()));
        assert!(b.verify_enforcer(&kp.public_key()));
    }

    #[test]
    fn rapid_updates_flagged_as_oscillation() {
        let (log, checkpoints, kp) = honest_log(4, 60); // one minute apart
        let oracle = LeafBackedOracle::from_tree(log.tree().clone());
        let report = audit_checkpoints(
            &checkpoints,
            &oracle,
            &kp.public_key(),
            &BTreeMap::new(),
            &AuditPolicy::default(), // 1h minimum interval
            checkpoints.last().unwrap().timestamp,
        );
        let oscillations = report
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::Oscillation)
            .count();
        assert_eq!(oscillations, 3);
    }

    #[test]
    fn refusing_enforcer_is_a_violation() {
        let (_, checkpoints, kp) = honest_log(3, 4000);
        let report = audit_checkpoints(
            &checkpoints,
            &RefusingOracle,
            &kp.public_key(),
            &BTreeMap::new(),
            &AuditPolicy::default(),
            checkpoints.last().unwrap().timestamp,
        );
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::Inconsistency && v.detail.contains("refused")));
    }

    #[test]
    fn stale_log_flagged() {
        let (log, checkpoints, kp) = honest_log(2, 4000);
        let oracle = LeafBackedOracle::from_tree(log.tree().clone());
        let policy = AuditPolicy::default();
        let report = audit_checkpoints(
            &checkpoints,
            &oracle,
            &kp.public_key(),
            &BTreeMap::new(),
            &policy,
            checkpoints.last().unwrap().timestamp + policy.max_checkpoint_age_secs + 1,
        );
        assert!(report.violations.iter().any(|v| v.kind == ViolationKind::Stale));
    }

    struct PrivFixture {
        snapshot: DatabaseSnapshot,
        objects: Vec<Vec<u8>>,
        blind_b: Scalar,
        trust: CuratorTrust,
    }

    fn priv_fixture(n: usize) -> PrivFixture {
        let mut rng = rng();
        let mut curator =
            CuratorDb::new("c1", RevocationMode::KeyRotation, 0, 0, &mut rng).unwrap();
        let objects: Vec<Vec<u8>> = (0..n).map(|i| format!("obj-{i}").into_bytes()).collect();
        for obj in &objects {
            curator.add_object(obj);
        }
        let mut trust = CuratorTrust::new();
        trust.insert(
            "c1".into(),
            TrustedCurator {
                public_key: curator.identity.public_key(),
                validity_window_secs: None,
            },
        );
        let mut enforcer = EnforcerState::new(1, &mut rng);
        let (snapshot, _) = enforcer
            .build_database(&[curator.export_set()], &trust, 50)
            .unwrap();
        PrivFixture {
            snapshot,
            objects,
            blind_b: enforcer.blinding_value().clone(),
            trust,
        }
    }

    #[test]
    fn privileged_audit_clean_on_honest_build() {
        let f = priv_fixture(20);
        let report = privileged_audit(&f.snapshot, &f.objects, &f.blind_b, &f.trust, 1, 60, 300);
        assert!(report.is_clean(), "{report}");
    }

    #[test]
    fn rogue_record_flagged_as_content_mismatch() {
        let mut f = priv_fixture(5);
        // Enforcer inserts a record with no curator signatures behind it.
        let rogue_id = object_hash(b"rogue");
        f.snapshot.records.push(BlindedRecord {
            blinded_id: rogue_id,
            enc_sigs: vec![(0, SigCiphertext([9u8; 64]))],
        });
        f.snapshot.records.sort_by(|a, b| a.blinded_id.cmp(&b.blinded_id));
        let report = privileged_audit(&f.snapshot, &f.objects, &f.blind_b, &f.trust, 1, 60, 300);
        assert!(!report.is_clean());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::ContentMismatch
                && v.detail.contains(&rogue_id.to_string())));
        // The tampering also breaks the commitment.
        assert!(report
            .violations
            .iter()
            .any(|v| v.detail.contains("database hash")));
    }

    #[test]
    fn withheld_object_names_exactly_its_record() {
        let f = priv_fixture(6);
        let withheld = f.objects[2].clone();
        let disclosed: Vec<Vec<u8>> =
            f.objects.iter().filter(|o| **o != withheld).cloned().collect();
        let report = privileged_audit(&f.snapshot, &disclosed, &f.blind_b, &f.trust, 1, 60, 300);
        let mismatches: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::ContentMismatch)
            .collect();
        assert_eq!(mismatches.len(), 1);
        let h = object_hash(&withheld);
        let blinded = blind(&hash_to_group(&h), &f.blind_b).unwrap();
        assert_eq!(mismatches[0].evidence, derive_id(&blinded).as_bytes().to_vec());
    }

    #[test]
    fn appeal_bundle_verifies_cross_module() {
        let f = priv_fixture(3);
        let pk = f.snapshot.enforcer_pk;
        let db = crate::client::verify_snapshot(&f.snapshot, &pk, &BTreeMap::new(), 0).unwrap();
        let obj = f.objects[1].clone();
        let h = object_hash(&obj);
        let unblinded = blind(&hash_to_group(&h), &f.blind_b).unwrap();
        let verdict = evaluate(&obj, &unblinded, &db, &f.trust, &EvalOptions::new(1, 60));
        assert!(verdict.is_harmful());
        let bundle = export_appeal(&obj, &verdict).unwrap();

        let check = verify_appeal(&bundle, &f.trust, 60, 300);
        assert!(check.accepted, "{:?}", check.reasons);

        // Replacing the object invalidates it.
        let mut tampered = bundle.clone();
        tampered.object = b"different".to_vec();
        assert!(!verify_appeal(&tampered, &f.trust, 60, 300).accepted);

        // Unknown curator is named.
        let mut unknown = bundle.clone();
        unknown.signatures[0].curator_id = "who".into();
        let check = verify_appeal(&unknown, &f.trust, 60, 300);
        assert!(!check.accepted);
        assert!(check.reasons[0].contains("unknown curator"));
    }

    #[test]
    fn expired_timestamped_appeal_rejected() {
        let mut rng = rng();
        let mut curator =
            CuratorDb::new("c1", RevocationMode::Timestamped, 100, 1000, &mut rng).unwrap();
        curator.add_object(b"stale threat");
        let mut trust = CuratorTrust::new();
        trust.insert(
            "c1".into(),
            TrustedCurator {
                public_key: curator.identity.public_key(),
                validity_window_secs: Some(100),
            },
        );
        let entry = &curator.entries()[0];
        let bundle = AppealBundle {
            object: b"stale threat".to_vec(),
            signatures: vec![crate::client::AppealSignature {
                curator_id: "c1".into(),
                signature: entry.sig,
                timestamp: entry.signed_at,
            }],
        };
        assert!(verify_appeal(&bundle, &trust, 1050, 0).accepted);
        let late = verify_appeal(&bundle, &trust, 1201, 0);
        assert!(!late.accepted);
        assert!(late.reasons[0].contains("stale"));
    }

    #[test]
    fn empty_bundle_rejected() {
        let bundle = AppealBundle {
            object: b"x".to_vec(),
            signatures: Vec::new(),
        };
        assert!(!verify_appeal(&bundle, &CuratorTrust::new(), 0, 0).accepted);
    }

    #[test]
    fn honest_traces_audit_clean_over_100_randomized_runs() {
        use rand::Rng;
        for run in 0..100u64 {
            let mut rng = StdRng::seed_from_u64(40_000 + run);
            let n_curators = rng.gen_range(1..=3);
            let n_objects = rng.gen_range(1..=40);
            let epochs = rng.gen_range(1..=3u64);

            let mut curators = Vec::new();
            let mut trust = CuratorTrust::new();
            for c in 0..n_curators {
                let id = format!("c{c}");
                let mut curator =
                    CuratorDb::new(&id, RevocationMode::KeyRotation, 0, 0, &mut rng).unwrap();
                for i in 0..n_objects {
                    curator.add_object(format!("run {run} object {i}").as_bytes());
                }
                trust.insert(
                    id,
                    TrustedCurator {
                        public_key: curator.identity.public_key(),
                        validity_window_secs: None,
                    },
                );
                curators.push(curator);
            }
            let policy_m = rng.gen_range(1..=n_curators);
            let mut enforcer = EnforcerState::new(policy_m, &mut rng);
            let sets: Vec<_> = curators.iter().map(|c| c.export_set()).collect();
            let mut checkpoints = Vec::new();
            let mut snapshot = None;
            for e in 0..epochs {
                let (s, report) = enforcer
                    .build_database(&sets, &trust, 10_000 + e * 7200)
                    .unwrap();
                assert!(report.dropped.is_empty());
                checkpoints.push(s.checkpoint.clone());
                snapshot = Some(s);
            }
            let snapshot = snapshot.unwrap();

            let oracle = LeafBackedOracle::from_tree(enforcer.log.tree().clone());
            let log_report = audit_checkpoints(
                &checkpoints,
                &oracle,
                &enforcer.public_key(),
                &BTreeMap::new(),
                &AuditPolicy::default(),
                checkpoints.last().unwrap().timestamp + 1,
            );
            assert!(log_report.is_clean(), "run {run}: {log_report}");

            let objects: Vec<Vec<u8>> = (0..n_objects)
                .map(|i| format!("run {run} object {i}").into_bytes())
                .collect();
            let priv_report = privileged_audit(
                &snapshot,
                &objects,
                enforcer.blinding_value(),
                &trust,
                policy_m,
                10_001,
                300,
            );
            assert!(priv_report.is_clean(), "run {run}: {priv_report}");
        }
    }
}
