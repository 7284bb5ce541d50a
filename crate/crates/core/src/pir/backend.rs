//! Abstract homomorphic backend for the space-efficient protocol.
//!
//! The protocol layer only ever calls `absorb` on encryptions of single
//! bytes (the one-hot selector) and `add` over the absorbed results; the
//! full six-algorithm interface is kept so a real lattice scheme can slot
//! in behind it.

use rand_core::{CryptoRng, RngCore};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("ciphertext blob is malformed")]
    MalformedCiphertext,
    #[error("message exceeds the plaintext slot capacity")]
    MessageTooLarge,
}

pub trait FheBackend {
    type SecretKey;
    type Ciphertext: Clone;

    fn name(&self) -> &'static str;

    /// Bytes one ciphertext can carry; determines how many blocklist
    /// entries fit per index.
    fn plaintext_slot_bytes(&self) -> usize;

    fn keygen<R: RngCore + CryptoRng>(&self, rng: &mut R) -> Self::SecretKey;

    fn encrypt(&self, sk: &Self::SecretKey, message: &[u8]) -> Self::Ciphertext;

    /// Encryption of the slotwise sum of the underlying messages.
    fn add(&self, cts: &[Self::Ciphertext]) -> Self::Ciphertext;

    /// Encryption of the slotwise product of the underlying messages.
    fn multiply(&self, cts: &[Self::Ciphertext]) -> Self::Ciphertext;

    /// Combines a ciphertext with a plaintext. For a ciphertext carrying a
    /// single byte this scales the plaintext, which is all the one-hot
    /// selection needs.
    fn absorb(&self, ct: &Self::Ciphertext, plaintext: &[u8]) -> Self::Ciphertext;

    fn decrypt(&self, sk: &Self::SecretKey, ct: &Self::Ciphertext) -> Vec<u8>;

    fn encode_ciphertext(&self, ct: &Self::Ciphertext) -> Vec<u8>;

    fn decode_ciphertext(&self, bytes: &[u8]) -> Result<Self::Ciphertext, BackendError>;
}

/// Plaintext stand-in backend. NOT PRIVATE: ciphertexts are the message
/// bytes themselves, so the server sees every query in the clear. It
/// exists to exercise the protocol logic and the equivalence tests; the
/// privacy guarantee of the space-efficient protocol holds only with a
/// real homomorphic scheme behind the trait.
#[derive(Clone, Debug)]
pub struct NotPrivateReferenceBackend {
    slot_bytes: usize,
}

impl NotPrivateReferenceBackend {
    pub fn new(slot_bytes: usize) -> Self {
        assert!(slot_bytes > 0);
        NotPrivateReferenceBackend { slot_bytes }
    }

    /// Backend sized like a BFV instance with the given ring dimension.
    pub fn with_ring_dimension(n: usize) -> Self {
        Self::new(bfv_plaintext_bytes(n))
    }
}

/// Bytes a BFV ciphertext can encode per index: `floor(N * 20 / 8)`.
pub fn bfv_plaintext_bytes(ring_dimension: usize) -> usize {
    ring_dimension * 20 / 8
}

/// How many fixed-size entries fit in one plaintext slot.
pub fn entries_per_slot(slot_bytes: usize, entry_bytes: usize) -> usize {
    slot_bytes / entry_bytes
}

impl FheBackend for NotPrivateReferenceBackend {
    type SecretKey = ();
    type Ciphertext = Vec<u8>;

    fn name(&self) -> &'static str {
        "reference-not-private"
    }

    fn plaintext_slot_bytes(&self) -> usize {
        self.slot_bytes
    }

    fn keygen<R: RngCore + CryptoRng>(&self, _rng: &mut R) -> Self::SecretKey {}

    fn encrypt(&self, _sk: &Self::SecretKey, message: &[u8]) -> Self::Ciphertext {
        message.to_vec()
    }

    fn add(&self, cts: &[Self::Ciphertext]) -> Self::Ciphertext {
        let len = cts.iter().map(|c| c.len()).max().unwrap_or(0);
        let mut out = vec![0u8; len];
        for ct in cts {
            for (o, b) in out.iter_mut().zip(ct.iter()) {
                *o = o.wrapping_add(*b);
            }
        }
        out
    }

    fn multiply(&self, cts: &[Self::Ciphertext]) -> Self::Ciphertext {
        let len = cts.iter().map(|c| c.len()).max().unwrap_or(0);
        let mut out = vec![1u8; len];
        for ct in cts {
            for (i, o) in out.iter_mut().enumerate() {
                *o = o.wrapping_mul(ct.get(i).copied().unwrap_or(0));
            }
        }
        out
    }

    fn absorb(&self, ct: &Self::Ciphertext, plaintext: &[u8]) -> Self::Ciphertext {
        if ct.len() == 1 {
            // Scalar case: Enc(b) absorbed with M' is Enc(b * M').
            let b = ct[0];
            plaintext.iter().map(|&x| x.wrapping_mul(b)).collect()
        } else {
            let len = ct.len().max(plaintext.len());
            (0..len)
                .map(|i| {
                    ct.get(i)
                        .copied()
                        .unwrap_or(0)
                        .wrapping_mul(plaintext.get(i).copied().unwrap_or(0))
                })
                .collect()
        }
    }

    fn decrypt(&self, _sk: &Self::SecretKey, ct: &Self::Ciphertext) -> Vec<u8> {
        ct.clone()
    }

    fn encode_ciphertext(&self, ct: &Self::Ciphertext) -> Vec<u8> {
        ct.clone()
    }

    fn decode_ciphertext(&self, bytes: &[u8]) -> Result<Self::Ciphertext, BackendError> {
        Ok(bytes.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn bfv_slot_sizes_match_known_parameters() {
        assert_eq!(bfv_plaintext_bytes(4096), 10_240);
        assert_eq!(bfv_plaintext_bytes(8192), 20_480);
    }

    #[test]
    fn capacity_calculator_reproduces_reference_figures() {
        assert_eq!(entries_per_slot(10_240, 98), 104);
        assert_eq!(entries_per_slot(20_480, 98), 208);
    }

    #[test]
    fn one_hot_selection_identity() {
        // dec(add(absorb(enc(v_j), B_j))) == sum of v_j * B_j.
        let mut rng = StdRng::seed_from_u64(50);
        let backend = NotPrivateReferenceBackend::new(64);
        let sk = backend.keygen(&mut rng);
        for target in 0..8usize {
            let buckets: Vec<Vec<u8>> = (0..8)
                .map(|_| {
                    let mut b = vec![0u8; 64];
                    rng.fill(&mut b[..]);
                    b
                })
                .collect();
            let absorbed: Vec<_> = (0..8)
                .map(|j| {
                    let bit = u8::from(j == target);
                    let ct = backend.encrypt(&sk, &[bit]);
                    backend.absorb(&ct, &buckets[j])
                })
                .collect();
            let sum = backend.add(&absorbed);
            assert_eq!(backend.decrypt(&sk, &sum), buckets[target]);
        }
    }

    #[test]
    fn multiply_matches_slotwise_product() {
        let backend = NotPrivateReferenceBackend::new(8);
        let a = backend.encrypt(&(), &[2, 3, 4]);
        let b = backend.encrypt(&(), &[5, 6, 7]);
        assert_eq!(backend.multiply(&[a, b]), vec![10, 18, 28]);
    }
}
