//! Digests, organization/user signing keys and the sealed-box construction
//! used to deliver security-association material.
//!
//! Signing is Ed25519 (64-byte deterministic signatures over a 32-byte
//! digest). Sealing reuses the same key pair: the recipient's Ed25519 key is
//! mapped to its X25519 form, an ephemeral X25519 key agrees a secret with
//! it, and ChaCha20-Poly1305 encrypts under a key hashed from that secret.
//!
//! Sealed layout: `ephemeral_pk (32) || ciphertext || tag (16)`.

use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use curve25519_dalek::montgomery::MontgomeryPoint;
use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;
pub const SEAL_OVERHEAD: usize = 32 + 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("invalid public key bytes")]
    InvalidKey,
    #[error("sealed payload could not be opened")]
    DecryptFailure,
}

/// SHA-256 output.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0; DIGEST_LEN]);

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn of_parts(parts: &[&[u8]]) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u32).to_be_bytes());
            h.update(p);
        }
        Digest(h.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First eight hex characters, for logs and transcripts.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.short())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..6]))
    }
}

/// A validated Ed25519 verifying key.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct PublicKey(VerifyingKey);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; PUBLIC_KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidKey)?;
        VerifyingKey::from_bytes(&arr)
            .map(PublicKey)
            .map_err(|_| CryptoError::InvalidKey)
    }

    pub fn from_hex(text: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(text.trim()).map_err(|_| CryptoError::InvalidKey)?;
        Self::from_bytes(&raw)
    }

    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        self.0.to_bytes()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn verify(&self, msg: &[u8], sig: &Signature) -> bool {
        let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
        self.0.verify(msg, &sig).is_ok()
    }

    fn to_montgomery(self) -> MontgomeryPoint {
        self.0.to_montgomery()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", &self.to_hex()[..12])
    }
}

#[derive(Clone)]
pub struct KeyPair(SigningKey);

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        KeyPair(SigningKey::generate(rng))
    }

    pub fn from_seed(seed: [u8; 32]) -> Self {
        KeyPair(SigningKey::from_bytes(&seed))
    }

    /// Deterministic key derived from a label; used for reproducible test
    /// networks and scenario scripts, never for real deployments.
    pub fn from_label(label: &str) -> Self {
        Self::from_seed(Digest::of(label.as_bytes()).0)
    }

    pub fn from_hex(text: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(text.trim()).map_err(|_| CryptoError::InvalidKey)?;
        let seed: [u8; 32] = raw.try_into().map_err(|_| CryptoError::InvalidKey)?;
        Ok(Self::from_seed(seed))
    }

    pub fn seed_hex(&self) -> String {
        hex::encode(self.0.to_bytes())
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.0.verifying_key())
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.0.sign(msg).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyPair({:?})", self.public())
    }
}

fn seal_key(shared: &MontgomeryPoint, ephemeral: &MontgomeryPoint, recipient: &MontgomeryPoint) -> Key {
    let mut h = Sha256::new();
    h.update(b"fedgbp-seal-v1");
    h.update(shared.as_bytes());
    h.update(ephemeral.as_bytes());
    h.update(recipient.as_bytes());
    let out: [u8; 32] = h.finalize().into();
    Key::from(out)
}

/// Encrypt `plaintext` so that only the holder of `recipient`'s private key
/// can read it. The sender is anonymous.
pub fn seal<R: RngCore + CryptoRng>(recipient: &PublicKey, plaintext: &[u8], rng: &mut R) -> Vec<u8> {
    let mut ephemeral_secret = [0u8; 32];
    rng.fill_bytes(&mut ephemeral_secret);
    let ephemeral = MontgomeryPoint::mul_base_clamped(ephemeral_secret);
    let recipient_point = recipient.to_montgomery();
    let shared = recipient_point.mul_clamped(ephemeral_secret);
    let cipher = ChaCha20Poly1305::new(&seal_key(&shared, &ephemeral, &recipient_point));
    // The key is fresh per message, so a fixed nonce is never reused under one key.
    let ct = cipher
        .encrypt(&Nonce::default(), plaintext)
        .expect("chacha20poly1305 encryption of in-memory buffer");
    let mut out = Vec::with_capacity(32 + ct.len());
    out.extend_from_slice(ephemeral.as_bytes());
    out.extend_from_slice(&ct);
    out
}

pub fn open(keys: &KeyPair, sealed: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if sealed.len() < SEAL_OVERHEAD {
        return Err(CryptoError::DecryptFailure);
    }
    let ephemeral = MontgomeryPoint(sealed[..32].try_into().expect("length checked"));
    let recipient_point = keys.public().to_montgomery();
    let shared = ephemeral.mul_clamped(keys.0.to_scalar_bytes());
    let cipher = ChaCha20Poly1305::new(&seal_key(&shared, &ephemeral, &recipient_point));
    cipher
        .decrypt(&Nonce::default(), &sealed[32..])
        .map_err(|_| CryptoError::DecryptFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn signatures_are_fixed_size_and_deterministic() {
        let kp = KeyPair::from_label("org1");
        let d = Digest::of(b"payload");
        let a = kp.sign(d.as_bytes());
        let b = kp.sign(d.as_bytes());
        assert_eq!(a, b);
        assert_eq!(a.0.len(), SIGNATURE_LEN);
        assert!(kp.public().verify(d.as_bytes(), &a));
        assert!(!kp.public().verify(Digest::of(b"other").as_bytes(), &a));
    }

    #[test]
    fn malformed_public_keys_rejected() {
        assert_eq!(PublicKey::from_bytes(&[1, 2, 3]), Err(CryptoError::InvalidKey));
        assert_eq!(PublicKey::from_hex("zz"), Err(CryptoError::InvalidKey));
        // y = 2 does not decompress to a curve point.
        let mut bad = [0u8; 32];
        bad[0] = 2;
        assert_eq!(PublicKey::from_bytes(&bad), Err(CryptoError::InvalidKey));
    }

    #[test]
    fn seal_round_trip_and_wrong_key() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alice = KeyPair::generate(&mut rng);
        let mallory = KeyPair::generate(&mut rng);
        let sealed = seal(&alice.public(), b"session secret", &mut rng);
        assert_eq!(sealed.len(), 14 + SEAL_OVERHEAD);
        assert_eq!(open(&alice, &sealed).unwrap(), b"session secret");
        assert_eq!(open(&mallory, &sealed), Err(CryptoError::DecryptFailure));
        let mut tampered = sealed.clone();
        tampered[40] ^= 1;
        assert_eq!(open(&alice, &tampered), Err(CryptoError::DecryptFailure));
        assert_eq!(open(&alice, &sealed[..10]), Err(CryptoError::DecryptFailure));
    }

    #[test]
    fn keypair_hex_round_trip() {
        let kp = KeyPair::from_label("x");
        let back = KeyPair::from_hex(&kp.seed_hex()).unwrap();
        assert_eq!(back.public(), kp.public());
        assert_eq!(PublicKey::from_hex(&kp.public().to_hex()).unwrap(), kp.public());
    }
}
