//! The user side of the handshake: sign a map request, wait for the sealed
//! reply, recover the association.

use std::collections::HashMap;
use std::io;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::crypto::KeyPair;
use crate::eid::Eid;
use crate::names::QualifiedName;

use super::association::{establish_association, AssociationError, SecurityAssociation};
use super::transport::Transport;
use super::wire::{decode_message, MapReply, MapRequest, Message, WireError};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Association(#[from] AssociationError),
    #[error("reply does not answer an outstanding request")]
    UnexpectedNonce,
    #[error("router sent an invalid frame: {0}")]
    Wire(#[from] WireError),
    #[error("transport failure: {0}")]
    Transport(#[from] io::Error),
}

#[derive(Debug)]
pub struct UserAgent {
    name: QualifiedName,
    keys: KeyPair,
    eid: Eid,
    outstanding: HashMap<u64, Eid>,
    rng: ChaCha20Rng,
}

impl UserAgent {
    pub fn new(name: QualifiedName, keys: KeyPair, eid: Eid) -> Self {
        Self::with_rng(name, keys, eid, ChaCha20Rng::from_entropy())
    }

    pub fn with_rng(name: QualifiedName, keys: KeyPair, eid: Eid, rng: ChaCha20Rng) -> Self {
        UserAgent {
            name,
            keys,
            eid,
            outstanding: HashMap::new(),
            rng,
        }
    }

    pub fn name(&self) -> &QualifiedName {
        &self.name
    }

    pub fn eid(&self) -> Eid {
        self.eid
    }

    pub fn keys(&self) -> &KeyPair {
        &self.keys
    }

    /// A freshly signed request for `dst`, remembered until answered.
    pub fn request(&mut self, dst: Eid) -> MapRequest {
        let nonce = self.rng.next_u64();
        self.outstanding.insert(nonce, dst);
        MapRequest::signed(nonce, self.eid, dst, self.name.clone(), &self.keys)
    }

    /// Match a reply to its request and open the association.
    pub fn accept_reply(&mut self, reply: &MapReply) -> Result<SecurityAssociation, ClientError> {
        if reply.src != self.eid || self.outstanding.get(&reply.nonce) != Some(&reply.dst) {
            return Err(ClientError::UnexpectedNonce);
        }
        let sa = establish_association(reply, &self.keys)?;
        self.outstanding.remove(&reply.nonce);
        Ok(sa)
    }

    /// Run the whole exchange. `Ok(None)` means the request went unanswered,
    /// which is how a denial looks from the outside.
    pub fn connect(&mut self, dst: Eid, transport: &dyn Transport) -> Result<Option<SecurityAssociation>, ClientError> {
        let req = self.request(dst);
        let Some(frame) = transport.exchange(&req.encode())? else {
            self.outstanding.remove(&req.nonce);
            return Ok(None);
        };
        match decode_message(&frame)? {
            Message::Reply(reply) => self.accept_reply(&reply).map(Some),
            Message::Request(_) => Err(ClientError::UnexpectedNonce),
        }
    }
}
