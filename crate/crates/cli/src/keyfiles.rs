//! Hex-encoded key material on disk: signing seeds and the enforcer's
//! blinding scalar (the out-of-band channel to privileged auditors).

use std::path::Path;

use anyhow::{bail, Context, Result};

use veilblock_core::crypto::{Scalar, SigningKeypair};

pub fn write_hex(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, format!("{}\n", hex::encode(bytes)))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_hex(path: &Path, expect_len: usize) -> Result<Vec<u8>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let bytes = hex::decode(text.trim())
        .with_context(|| format!("decoding hex in {}", path.display()))?;
    if bytes.len() != expect_len {
        bail!(
            "{} holds {} bytes, expected {expect_len}",
            path.display(),
            bytes.len()
        );
    }
    Ok(bytes)
}

pub fn write_keypair(path: &Path, keypair: &SigningKeypair) -> Result<()> {
    write_hex(path, &keypair.seed())
}

pub fn read_keypair(path: &Path) -> Result<SigningKeypair> {
    let bytes = read_hex(path, 32)?;
    Ok(SigningKeypair::from_seed(&bytes.try_into().unwrap()))
}

pub fn write_scalar(path: &Path, scalar: &Scalar) -> Result<()> {
    write_hex(path, &scalar.to_bytes())
}

pub fn read_scalar(path: &Path) -> Result<Scalar> {
    let bytes = read_hex(path, 32)?;
    Scalar::from_bytes(&bytes).with_context(|| format!("invalid scalar in {}", path.display()))
}
