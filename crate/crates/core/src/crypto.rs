//! Cryptographic primitives shared by every role.
//!
//! The group is ristretto255: prime order `p ~ 2^252`, canonical 32-byte
//! encodings, and a constant-time verifiably-random hash-to-group map.
//! Decoding rejects non-canonical encodings and the identity element, so a
//! [`GroupElement`] obtained from the wire is always safe to exponentiate.
//!
//! Object hashing is SHA-256. Key derivation is HKDF (extract-then-expand)
//! over SHA-256. Signatures are Ed25519: 32-byte public keys, 64-byte
//! signatures.

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar as RawScalar;
use curve25519_dalek::traits::IsIdentity;
use ed25519_dalek::{Signer, Verifier};
use hkdf::Hkdf;
use rand_core::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256, Sha512};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const ELEMENT_LEN: usize = 32;
pub const SCALAR_LEN: usize = 32;
pub const SYM_KEY_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;
pub const SIG_CIPHERTEXT_LEN: usize = 64;

/// Parameters of the deployment's group, fixed for every party.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupParams {
    /// Prime group order `p`, little-endian. Scalars live in `[1, p-1]`.
    pub group_order: [u8; 32],
    pub element_encoding_len: usize,
    pub scalar_encoding_len: usize,
    pub security_param_lambda: u32,
}

/// ristretto255: prime order `2^252 + 27742317777372353535851937790883648493`.
pub const GROUP_PARAMS: GroupParams = GroupParams {
    group_order: [
        0xed, 0xd3, 0xf5, 0x5c, 0x1a, 0x63, 0x12, 0x58, 0xd6, 0x9c, 0xf7, 0xa2, 0xde, 0xf9,
        0xde, 0x14, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
        0x00, 0x00, 0x00, 0x10,
    ],
    element_encoding_len: ELEMENT_LEN,
    scalar_encoding_len: SCALAR_LEN,
    security_param_lambda: 128,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("encoding is not a canonical group element")]
    NonCanonicalElement,
    #[error("identity element rejected")]
    IdentityElement,
    #[error("scalar must be canonical and nonzero")]
    InvalidScalar,
    #[error("unknown domain-separation label")]
    UnknownLabel,
    #[error("wrong length for {0}")]
    WrongLength(&'static str),
}

/// 32-byte hash output. Also used as the blinded lookup key `C_i` and as
/// Merkle leaves and roots.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; DIGEST_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::WrongLength("digest"))?;
        Ok(Digest(arr))
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }
}

impl std::fmt::Debug for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

impl std::fmt::Display for Digest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// SHA-256 of the raw object bytes; `h_i` in the protocol.
pub fn object_hash(object: &[u8]) -> Digest {
    Digest(Sha256::digest(object).into())
}

pub fn sha256(input: &[u8]) -> Digest {
    Digest(Sha256::digest(input).into())
}

/// A valid, non-identity ristretto255 element with its canonical encoding.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupElement {
    point: RistrettoPoint,
    encoding: [u8; ELEMENT_LEN],
}

impl GroupElement {
    /// Decodes a canonical 32-byte encoding, rejecting non-canonical
    /// encodings and the identity.
    pub fn decode(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; ELEMENT_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::WrongLength("group element"))?;
        let point = CompressedRistretto(arr)
            .decompress()
            .ok_or(CryptoError::NonCanonicalElement)?;
        if point.is_identity() {
            return Err(CryptoError::IdentityElement);
        }
        Ok(GroupElement {
            point,
            encoding: arr,
        })
    }

    pub fn encode(&self) -> [u8; ELEMENT_LEN] {
        self.encoding
    }

    pub fn is_identity(&self) -> bool {
        self.point.is_identity()
    }

    fn from_point(point: RistrettoPoint) -> Self {
        GroupElement {
            encoding: point.compress().to_bytes(),
            point,
        }
    }
}

impl std::fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GroupElement(")?;
        for b in &self.encoding[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// Nonzero scalar in `[1, p-1]`; the blinding values `A` and `B`.
#[derive(Clone, PartialEq, Eq)]
pub struct Scalar {
    raw: RawScalar,
}

impl Scalar {
    /// Uniform over `[1, p-1]` by rejection sampling.
    pub fn random<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        loop {
            let raw = RawScalar::random(rng);
            if raw != RawScalar::ZERO {
                return Scalar { raw };
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SCALAR_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::WrongLength("scalar"))?;
        let raw = Option::<RawScalar>::from(RawScalar::from_canonical_bytes(arr))
            .ok_or(CryptoError::InvalidScalar)?;
        if raw == RawScalar::ZERO {
            return Err(CryptoError::InvalidScalar);
        }
        Ok(Scalar { raw })
    }

    pub fn to_bytes(&self) -> [u8; SCALAR_LEN] {
        self.raw.to_bytes()
    }

    pub fn invert(&self) -> Scalar {
        Scalar {
            raw: self.raw.invert(),
        }
    }

    pub fn one() -> Scalar {
        Scalar {
            raw: RawScalar::ONE,
        }
    }
}

impl std::fmt::Debug for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Never print scalar material; blinding values are secrets.
        write!(f, "Scalar(..)")
    }
}

/// Verifiably-random map from a digest into the group (Elligator on
/// ristretto255, via SHA-512 expansion). Deterministic and constant time.
pub fn hash_to_group(d: &Digest) -> GroupElement {
    GroupElement::from_point(RistrettoPoint::hash_from_bytes::<Sha512>(&d.0))
}

/// `P^s`. Rejects the identity so a blinded value never collapses.
pub fn blind(p: &GroupElement, s: &Scalar) -> Result<GroupElement, CryptoError> {
    if p.is_identity() {
        return Err(CryptoError::IdentityElement);
    }
    Ok(GroupElement::from_point(p.point * s.raw))
}

/// `Q^(s^-1 mod p)`, the inverse of [`blind`] under the same scalar.
pub fn unblind(q: &GroupElement, s: &Scalar) -> Result<GroupElement, CryptoError> {
    blind(q, &s.invert())
}

/// Domain-separation labels for deriving lookup ids and encryption keys
/// from a blinded element. Anything but the two fixed ASCII labels is
/// rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainLabel {
    Id,
    Key,
}

impl DomainLabel {
    pub fn from_bytes(label: &[u8]) -> Result<Self, CryptoError> {
        match label {
            b"id" => Ok(DomainLabel::Id),
            b"key" => Ok(DomainLabel::Key),
            _ => Err(CryptoError::UnknownLabel),
        }
    }

    pub fn as_bytes(&self) -> &'static [u8] {
        match self {
            DomainLabel::Id => b"id",
            DomainLabel::Key => b"key",
        }
    }
}

/// Framing hashed for both derivations: `encoding || 0x00 || label`.
fn derivation_input(elem: &GroupElement, label: DomainLabel) -> Vec<u8> {
    let label = label.as_bytes();
    let mut input = Vec::with_capacity(ELEMENT_LEN + 1 + label.len());
    input.extend_from_slice(&elem.encode());
    input.push(0x00);
    input.extend_from_slice(label);
    input
}

/// Blinded lookup id `C = H(h^B || "id")`.
pub fn derive_id(elem: &GroupElement) -> Digest {
    sha256(&derivation_input(elem, DomainLabel::Id))
}

/// 32-byte symmetric key.
#[derive(Clone, PartialEq, Eq)]
pub struct SymKey(pub [u8; SYM_KEY_LEN]);

impl std::fmt::Debug for SymKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SymKey(..)")
    }
}

/// Signature-encryption key `K = H_key(h^B || "key")`, HKDF over SHA-256.
pub fn derive_key(elem: &GroupElement) -> SymKey {
    let ikm = derivation_input(elem, DomainLabel::Key);
    let hk = Hkdf::<Sha256>::new(None, &ikm);
    let mut okm = [0u8; SYM_KEY_LEN];
    hk.expand(&[], &mut okm).expect("32 bytes is a valid HKDF length");
    SymKey(okm)
}

/// Ed25519 public key bytes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; PUBLIC_KEY_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::WrongLength("public key"))?;
        Ok(PublicKey(arr))
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

/// Ed25519 signature bytes.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SIGNATURE_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::WrongLength("signature"))?;
        Ok(Signature(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl std::fmt::Debug for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..")
    }
}

/// Signing keypair; the secret key stays opaque.
pub struct SigningKeypair {
    signing: ed25519_dalek::SigningKey,
}

impl SigningKeypair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        SigningKeypair {
            signing: ed25519_dalek::SigningKey::generate(rng),
        }
    }

    pub fn from_seed(seed: &[u8; 32]) -> Self {
        SigningKeypair {
            signing: ed25519_dalek::SigningKey::from_bytes(seed),
        }
    }

    pub fn seed(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl std::fmt::Debug for SigningKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SigningKeypair({:?})", self.public_key())
    }
}

/// Deterministic verification; malformed keys or signatures verify as 0.
pub fn verify(pk: &PublicKey, message: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&pk.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify(message, &sig).is_ok()
}

/// Encrypted curator signature; exactly as long as the signature itself.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SigCiphertext(pub [u8; SIG_CIPHERTEXT_LEN]);

impl SigCiphertext {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; SIG_CIPHERTEXT_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::WrongLength("signature ciphertext"))?;
        Ok(SigCiphertext(arr))
    }

    pub fn as_bytes(&self) -> &[u8; SIG_CIPHERTEXT_LEN] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }
}

impl std::fmt::Debug for SigCiphertext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SigCiphertext(..)")
    }
}

fn sig_keystream(key: &SymKey, slot: u32) -> [u8; SIG_CIPHERTEXT_LEN] {
    let hk = Hkdf::<Sha256>::from_prk(&key.0).expect("32-byte PRK");
    let mut info = [0u8; 12];
    info[..8].copy_from_slice(b"sig-slot");
    info[8..].copy_from_slice(&slot.to_be_bytes());
    let mut stream = [0u8; SIG_CIPHERTEXT_LEN];
    hk.expand(&info, &mut stream).expect("64 bytes is a valid HKDF length");
    stream
}

/// Deterministic keystream XOR keyed by `(key, slot)`. Length preserving;
/// there is no tag. Authenticity comes from verifying the decrypted
/// signature against the object hash, so a wrong key merely yields a
/// signature that fails verification. A key must encrypt at most one
/// signature per slot.
pub fn encrypt_sig(key: &SymKey, sig: &Signature, slot: u32) -> SigCiphertext {
    let stream = sig_keystream(key, slot);
    let mut out = [0u8; SIG_CIPHERTEXT_LEN];
    for (i, b) in out.iter_mut().enumerate() {
        *b = sig.0[i] ^ stream[i];
    }
    SigCiphertext(out)
}

pub fn decrypt_sig(key: &SymKey, ct: &SigCiphertext, slot: u32) -> Signature {
    let stream = sig_keystream(key, slot);
    let mut out = [0u8; SIGNATURE_LEN];
    for (i, b) in out.iter_mut().enumerate() {
        *b = ct.0[i] ^ stream[i];
    }
    Signature(out)
}
