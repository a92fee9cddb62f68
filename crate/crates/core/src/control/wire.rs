//! Datagram frames exchanged between users, routers and the map server.
//!
//! All integers are big-endian. Layout:
//!
//! ```text
//! 0      version (1)
//! 1      type (1): 1 = map request, 2 = map reply
//! 2..10  nonce (8)
//! 10..14 source eid (4)
//! 14..18 destination eid (4)
//! request: user-ref length (2) | user-ref (utf-8) | signature (64)
//! reply:   payload length (2) | sealed payload
//! ```

use thiserror::Error;

use crate::crypto::{KeyPair, PublicKey, Signature, SIGNATURE_LEN};
use crate::eid::Eid;
use crate::names::QualifiedName;

pub const WIRE_VERSION: u8 = 1;
pub const TYPE_MAP_REQUEST: u8 = 1;
pub const TYPE_MAP_REPLY: u8 = 2;
pub const HEADER_LEN: usize = 18;
/// Largest frame either message type can produce.
pub const MAX_FRAME: usize = HEADER_LEN + 2 + u16::MAX as usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    MalformedFrame(&'static str),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapRequest {
    pub nonce: u64,
    pub src: Eid,
    pub dst: Eid,
    pub user: QualifiedName,
    pub signature: Signature,
}

impl MapRequest {
    /// Build and sign a request with the user's key.
    pub fn signed(nonce: u64, src: Eid, dst: Eid, user: QualifiedName, keys: &KeyPair) -> Self {
        let mut req = MapRequest {
            nonce,
            src,
            dst,
            user,
            signature: Signature([0; SIGNATURE_LEN]),
        };
        req.signature = keys.sign(&req.signed_bytes());
        req
    }

    /// Every byte of the frame that precedes the signature.
    pub fn signed_bytes(&self) -> Vec<u8> {
        let user = self.user.to_string();
        let mut out = header(TYPE_MAP_REQUEST, self.nonce, self.src, self.dst, 2 + user.len() + SIGNATURE_LEN);
        out.extend_from_slice(&(user.len() as u16).to_be_bytes());
        out.extend_from_slice(user.as_bytes());
        out
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.verify(&self.signed_bytes(), &self.signature)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.signed_bytes();
        out.extend_from_slice(&self.signature.0);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapReply {
    pub nonce: u64,
    /// Echo of the request's source, so the user can match the reply.
    pub src: Eid,
    pub dst: Eid,
    /// Security-association material sealed to the requesting user.
    pub payload: Vec<u8>,
}

impl MapReply {
    pub fn encode(&self) -> Vec<u8> {
        assert!(self.payload.len() <= u16::MAX as usize, "reply payload too large");
        let mut out = header(TYPE_MAP_REPLY, self.nonce, self.src, self.dst, 2 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Request(MapRequest),
    Reply(MapReply),
}

fn header(kind: u8, nonce: u64, src: Eid, dst: Eid, extra: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + extra);
    out.push(WIRE_VERSION);
    out.push(kind);
    out.extend_from_slice(&nonce.to_be_bytes());
    out.extend_from_slice(&src.get().to_be_bytes());
    out.extend_from_slice(&dst.get().to_be_bytes());
    out
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    match msg {
        Message::Request(r) => r.encode(),
        Message::Reply(r) => r.encode(),
    }
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b.try_into().expect("four bytes"))
}

fn eid_at(frame: &[u8], at: usize) -> Result<Eid, WireError> {
    Eid::new(be_u32(&frame[at..at + 4])).map_err(|_| WireError::MalformedFrame("zero endpoint id"))
}

/// Split `len`-prefixed bytes off the front of `rest`.
fn prefixed(rest: &[u8]) -> Result<(&[u8], &[u8]), WireError> {
    if rest.len() < 2 {
        return Err(WireError::MalformedFrame("truncated length"));
    }
    let n = u16::from_be_bytes([rest[0], rest[1]]) as usize;
    let rest = &rest[2..];
    if rest.len() < n {
        return Err(WireError::MalformedFrame("truncated body"));
    }
    Ok(rest.split_at(n))
}

pub fn decode_message(frame: &[u8]) -> Result<Message, WireError> {
    if frame.len() < 2 {
        return Err(WireError::MalformedFrame("truncated header"));
    }
    if frame[0] != WIRE_VERSION {
        return Err(WireError::BadVersion(frame[0]));
    }
    let kind = frame[1];
    if kind != TYPE_MAP_REQUEST && kind != TYPE_MAP_REPLY {
        return Err(WireError::UnknownType(kind));
    }
    if frame.len() < HEADER_LEN {
        return Err(WireError::MalformedFrame("truncated header"));
    }
    let nonce = u64::from_be_bytes(frame[2..10].try_into().expect("eight bytes"));
    let src = eid_at(frame, 10)?;
    let dst = eid_at(frame, 14)?;
    let (body, rest) = prefixed(&frame[HEADER_LEN..])?;
    if kind == TYPE_MAP_REPLY {
        if !rest.is_empty() {
            return Err(WireError::MalformedFrame("trailing bytes"));
        }
        return Ok(Message::Reply(MapReply {
            nonce,
            src,
            dst,
            payload: body.to_vec(),
        }));
    }
    let raw = std::str::from_utf8(body).map_err(|_| WireError::MalformedFrame("user-ref is not utf-8"))?;
    let user = QualifiedName::parse(raw).map_err(|_| WireError::MalformedFrame("invalid user-ref"))?;
    // Only the canonical spelling is accepted, so re-encoding is exact.
    if user.to_string() != raw {
        return Err(WireError::MalformedFrame("user-ref not in canonical form"));
    }
    if rest.len() != SIGNATURE_LEN {
        return Err(WireError::MalformedFrame(if rest.len() < SIGNATURE_LEN {
            "truncated signature"
        } else {
            "trailing bytes"
        }));
    }
    Ok(Message::Request(MapRequest {
        nonce,
        src,
        dst,
        user,
        signature: Signature(rest.try_into().expect("signature length checked")),
    }))
}
