//! The edge router: relays map requests to the map server, issues the
//! security association for granted ones and enforces its lifetime.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::clock::{Clock, Timestamp};
use crate::eid::Eid;

use super::association::{seal_reply, SecurityAssociation};
use super::server::{request_event, DenyReason, Event, EventKind, MapServer};
use super::wire::{decode_message, MapReply, MapRequest, Message};

pub const DEFAULT_SA_LIFETIME_SECS: u32 = 3_600;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RouterConfig {
    pub sa_lifetime_secs: u32,
    /// Fixed seed for reproducible associations; `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            sa_lifetime_secs: DEFAULT_SA_LIFETIME_SECS,
            seed: None,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum AssociationCheck {
    #[error("no association for this pair")]
    Unknown,
    #[error("association secret does not match")]
    Mismatch,
    #[error("association lifetime elapsed")]
    Expired,
}

#[derive(Clone, Copy)]
struct Issued {
    secret: [u8; 32],
    expires_at: Timestamp,
}

pub struct Router {
    server: Arc<MapServer>,
    clock: Arc<dyn Clock>,
    config: RouterConfig,
    rng: Mutex<ChaCha20Rng>,
    associations: Mutex<HashMap<(Eid, Eid), Issued>>,
}

impl std::fmt::Debug for Router {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Router").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Router {
    pub fn new(server: Arc<MapServer>, clock: Arc<dyn Clock>, config: RouterConfig) -> Self {
        let rng = match config.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        Router {
            server,
            clock,
            config,
            rng: Mutex::new(rng),
            associations: Mutex::new(HashMap::new()),
        }
    }

    pub fn server(&self) -> &Arc<MapServer> {
        &self.server
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Handle one datagram; `None` means nothing is sent back.
    pub fn handle_frame(&self, frame: &[u8]) -> Option<Vec<u8>> {
        match decode_message(frame) {
            Ok(Message::Request(req)) => self.handle_map_request(&req).map(|r| r.encode()),
            Ok(Message::Reply(_)) | Err(_) => {
                self.server.events().record(Event {
                    at: self.clock.now().0,
                    nonce: None,
                    src: None,
                    dst: None,
                    user: None,
                    kind: EventKind::Denied(DenyReason::MalformedFrame),
                });
                None
            }
        }
    }

    /// Authorize `req` and, if granted, issue and seal a fresh association.
    pub fn handle_map_request(&self, req: &MapRequest) -> Option<MapReply> {
        let now = self.clock.now();
        let grant = self.server.authorize(req, now).ok()?;
        let mut lifetime = self.config.sa_lifetime_secs;
        if let Some(expiry) = grant.expiry {
            let remaining = expiry.saturating_sub(now.0) / 1_000;
            lifetime = lifetime.min(remaining.max(1).min(u64::from(u32::MAX)) as u32);
        }
        let mut rng = self.rng.lock().expect("router rng poisoned");
        let sa = SecurityAssociation::generate(&mut *rng, lifetime);
        let reply = seal_reply(req.nonce, req.src, req.dst, &sa, &grant.user_key, &mut *rng);
        drop(rng);
        self.associations.lock().expect("router state poisoned").insert(
            (req.src, req.dst),
            Issued {
                secret: sa.shared_secret,
                expires_at: now.plus_secs(u64::from(lifetime)),
            },
        );
        self.server.events().record(request_event(req, now, EventKind::Replied));
        Some(reply)
    }

    /// The router-side secret for a pair, if one was issued.
    pub fn association_secret(&self, src: Eid, dst: Eid) -> Option<[u8; 32]> {
        self.associations
            .lock()
            .expect("router state poisoned")
            .get(&(src, dst))
            .map(|i| i.secret)
    }

    /// Check a data-plane use of an association at the current time.
    pub fn check_association(&self, src: Eid, dst: Eid, secret: &[u8; 32]) -> Result<(), AssociationCheck> {
        let issued = *self
            .associations
            .lock()
            .expect("router state poisoned")
            .get(&(src, dst))
            .ok_or(AssociationCheck::Unknown)?;
        if &issued.secret != secret {
            return Err(AssociationCheck::Mismatch);
        }
        if self.clock.now() >= issued.expires_at {
            return Err(AssociationCheck::Expired);
        }
        Ok(())
    }
}
