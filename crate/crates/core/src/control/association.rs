//! Security associations handed to users inside sealed map replies.

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};
use crate::crypto::{open, seal, KeyPair, PublicKey};
use crate::eid::Eid;

use super::wire::MapReply;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CipherSuite {
    ChaCha20Poly1305,
}

impl CipherSuite {
    pub fn tag(self) -> u8 {
        match self {
            CipherSuite::ChaCha20Poly1305 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(CipherSuite::ChaCha20Poly1305),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SecurityAssociation {
    pub shared_secret: [u8; 32],
    pub suite: CipherSuite,
    pub lifetime_secs: u32,
}

impl std::fmt::Debug for SecurityAssociation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SecurityAssociation")
            .field("suite", &self.suite)
            .field("lifetime_secs", &self.lifetime_secs)
            .finish_non_exhaustive()
    }
}

impl SecurityAssociation {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R, lifetime_secs: u32) -> Self {
        let mut shared_secret = [0; 32];
        rng.fill_bytes(&mut shared_secret);
        SecurityAssociation {
            shared_secret,
            suite: CipherSuite::ChaCha20Poly1305,
            lifetime_secs,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssociationError {
    #[error("reply payload could not be decrypted with this key")]
    DecryptFailure,
    #[error("reply payload is malformed: {0}")]
    MalformedPayload(DecodeError),
    #[error("reply payload was issued for a different request")]
    Mismatch,
}

/// Plaintext layout: nonce, src, dst (binding the SA to its request), then
/// secret, suite tag and lifetime.
fn encode_payload(nonce: u64, src: Eid, dst: Eid, sa: &SecurityAssociation) -> Vec<u8> {
    let mut w = Writer::with_capacity(53);
    w.u64(nonce)
        .u32(src.get())
        .u32(dst.get())
        .fixed(&sa.shared_secret)
        .u8(sa.suite.tag())
        .u32(sa.lifetime_secs);
    w.into_bytes()
}

fn decode_payload(bytes: &[u8]) -> Result<(u64, u32, u32, SecurityAssociation), DecodeError> {
    let mut r = Reader::new(bytes);
    let nonce = r.u64("nonce")?;
    let src = r.u32("src")?;
    let dst = r.u32("dst")?;
    let shared_secret = r.array::<32>("secret")?;
    let tag = r.u8("suite")?;
    let suite = CipherSuite::from_tag(tag).ok_or(DecodeError::UnknownTag { what: "cipher suite", tag })?;
    let lifetime_secs = r.u32("lifetime")?;
    r.finish()?;
    Ok((
        nonce,
        src,
        dst,
        SecurityAssociation {
            shared_secret,
            suite,
            lifetime_secs,
        },
    ))
}

/// Build the reply carrying `sa`, sealed to `recipient`.
pub fn seal_reply<R: RngCore + CryptoRng>(
    nonce: u64,
    src: Eid,
    dst: Eid,
    sa: &SecurityAssociation,
    recipient: &PublicKey,
    rng: &mut R,
) -> MapReply {
    MapReply {
        nonce,
        src,
        dst,
        payload: seal(recipient, &encode_payload(nonce, src, dst, sa), rng),
    }
}

/// Recover the association from a reply with the user's private key.
pub fn establish_association(reply: &MapReply, keys: &KeyPair) -> Result<SecurityAssociation, AssociationError> {
    let plain = open(keys, &reply.payload).map_err(|_| AssociationError::DecryptFailure)?;
    let (nonce, src, dst, sa) = decode_payload(&plain).map_err(AssociationError::MalformedPayload)?;
    if nonce != reply.nonce || src != reply.src.get() || dst != reply.dst.get() {
        return Err(AssociationError::Mismatch);
    }
    Ok(sa)
}
