// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Whole-file authenticated encryption for gallery logs.
//!
//! ```text
//! +-------+-----+--------+---------+------------------+--------------+
//! | magic | ver |  salt  |  nonce  |    ciphertext    |     tag      |
//! |  4 B  | 1 B |  16 B  |  12 B   |     n bytes      |     32 B     |
//! +-------+-----+--------+---------+------------------+--------------+
//! ```
//!
//! The token is stretched with PBKDF2-HMAC-SHA256 over the per-file salt into
//! a ChaCha20 key and an HMAC-SHA256 key. The tag covers every byte before
//! it, so the file is authenticated as a unit: records cannot be reordered,
//! dropped or duplicated without detection. Every failure to open a file,
//! whether from a wrong token or from tampering, is the same
//! [`EnvelopeError::Integrity`].

use alloc::vec::Vec;

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

pub const MAGIC: [u8; 4] = *b"BKLG";
pub const VERSION: u8 = 1;
pub const SALT_LEN: usize = 16;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 32;
pub const HEADER_LEN: usize = MAGIC.len() + 1 + SALT_LEN;
/// Smallest well-formed envelope (empty plaintext).
pub const MIN_LEN: usize = HEADER_LEN + NONCE_LEN + TAG_LEN;
pub const KDF_ROUNDS: u32 = 4096;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EnvelopeError {
    #[error("integrity violation")]
    Integrity,
}

/// Keys derived from a token for one file.
#[derive(Clone)]
pub struct LogKey {
    salt: [u8; SALT_LEN],
    enc: [u8; 32],
    mac: [u8; 32],
}

impl LogKey {
    pub fn derive(token: &[u8], salt: [u8; SALT_LEN]) -> Self {
        let okm: [u8; 64] = pbkdf2::pbkdf2_hmac_array::<Sha256, 64>(token, &salt, KDF_ROUNDS);
        let mut enc = [0u8; 32];
        let mut mac = [0u8; 32];
        enc.copy_from_slice(&okm[..32]);
        mac.copy_from_slice(&okm[32..]);
        Self { salt, enc, mac }
    }

    pub fn salt(&self) -> &[u8; SALT_LEN] {
        &self.salt
    }

    fn tag(&self, authenticated: &[u8]) -> HmacSha256 {
        let mut mac = <HmacSha256 as KeyInit>::new_from_slice(&self.mac).expect("any key length");
        mac.update(authenticated);
        mac
    }
}

impl core::fmt::Debug for LogKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("LogKey").field("salt", &self.salt).finish_non_exhaustive()
    }
}

/// Encrypts `plaintext` under `key` with a caller-chosen fresh `nonce`.
pub fn seal(key: &LogKey, nonce: [u8; NONCE_LEN], plaintext: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(MIN_LEN + plaintext.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&key.salt);
    out.extend_from_slice(&nonce);
    let body = out.len();
    out.extend_from_slice(plaintext);
    let mut cipher = ChaCha20::new(&key.enc.into(), &nonce.into());
    cipher.apply_keystream(&mut out[body..]);
    let tag = key.tag(&out).finalize().into_bytes();
    out.extend_from_slice(&tag);
    out
}

/// Reads the salt from an envelope header without authenticating it.
pub fn header_salt(envelope: &[u8]) -> Result<[u8; SALT_LEN], EnvelopeError> {
    if envelope.len() < MIN_LEN || envelope[..4] != MAGIC || envelope[4] != VERSION {
        return Err(EnvelopeError::Integrity);
    }
    let mut salt = [0u8; SALT_LEN];
    salt.copy_from_slice(&envelope[5..HEADER_LEN]);
    Ok(salt)
}

/// Authenticates and decrypts with an already derived key.
pub fn open_with_key(key: &LogKey, envelope: &[u8]) -> Result<Vec<u8>, EnvelopeError> {
    let salt = header_salt(envelope)?;
    if salt != key.salt {
        return Err(EnvelopeError::Integrity);
    }
    let (authenticated, tag) = envelope.split_at(envelope.len() - TAG_LEN);
    key.tag(authenticated)
        .verify_slice(tag)
        .map_err(|_| EnvelopeError::Integrity)?;
    let mut nonce = [0u8; NONCE_LEN];
    nonce.copy_from_slice(&authenticated[HEADER_LEN..HEADER_LEN + NONCE_LEN]);
    let mut plaintext = authenticated[HEADER_LEN + NONCE_LEN..].to_vec();
    let mut cipher = ChaCha20::new(&key.enc.into(), &nonce.into());
    cipher.apply_keystream(&mut plaintext);
    Ok(plaintext)
}

/// Derives the key from `token` and the file's salt, then opens the file.
/// The key is returned so a rewrite can reuse it.
pub fn open(token: &[u8], envelope: &[u8]) -> Result<(LogKey, Vec<u8>), EnvelopeError> {
    let key = LogKey::derive(token, header_salt(envelope)?);
    let plaintext = open_with_key(&key, envelope)?;
    Ok((key, plaintext))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seal_then_open() {
        let key = LogKey::derive(b"secret", [7; SALT_LEN]);
        let env = seal(&key, [1; NONCE_LEN], b"hello gallery");
        assert_eq!(env.len(), MIN_LEN + 13);
        let (k2, pt) = open(b"secret", &env).unwrap();
        assert_eq!(pt, b"hello gallery");
        assert_eq!(k2.salt(), key.salt());
        assert!(!env.windows(7).any(|w| w == b"gallery"));
    }

    #[test]
    fn wrong_token_and_truncation_are_integrity_errors() {
        let key = LogKey::derive(b"secret", [7; SALT_LEN]);
        let env = seal(&key, [1; NONCE_LEN], b"x");
        assert_eq!(open(b"Secret", &env).unwrap_err(), EnvelopeError::Integrity);
        assert_eq!(open(b"secret", &env[..env.len() - 1]).unwrap_err(), EnvelopeError::Integrity);
        assert_eq!(open(b"secret", &[]).unwrap_err(), EnvelopeError::Integrity);
        let other = LogKey::derive(b"secret", [8; SALT_LEN]);
        assert_eq!(open_with_key(&other, &env).unwrap_err(), EnvelopeError::Integrity);
    }

    #[test]
    fn every_byte_is_authenticated() {
        let key = LogKey::derive(b"tok", [3; SALT_LEN]);
        let env = seal(&key, [9; NONCE_LEN], b"abc");
        for i in 0..env.len() {
            let mut bad = env.clone();
            bad[i] ^= 0x01;
            assert_eq!(open_with_key(&key, &bad).unwrap_err(), EnvelopeError::Integrity, "byte {i}");
        }
    }
}
