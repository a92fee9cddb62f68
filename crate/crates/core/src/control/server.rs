//! The map server: verifies signed map requests and decides authorization,
//! either from its synced trie or by asking the ledger directly.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;

use crate::clock::Timestamp;
use crate::crypto::PublicKey;
use crate::eid::Eid;
use crate::ledger::{AccessDecision, EidGrant, User};
use crate::names::QualifiedName;

use super::nonce::{NonceCache, DEFAULT_REPLAY_WINDOW_MS};
use super::trie::{AllowRecord, PolicyTrie};
use super::view::{LedgerView, ViewError};
use super::wire::MapRequest;

/// Where authorization decisions come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthPath {
    /// The trie and key directory last synced from the ledger.
    #[default]
    Trie,
    /// A ledger query per request.
    Ledger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum DenyReason {
    MalformedFrame,
    UnknownUser,
    BadSignature,
    Replay,
    NoPolicy,
    ExplicitDeny,
    Expired,
    LedgerUnavailable,
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", content = "reason")]
pub enum EventKind {
    /// Signature checked against the registered key and nonce fresh.
    Verified,
    Replied,
    Denied(DenyReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Event {
    pub at: u64,
    pub nonce: Option<u64>,
    #[serde(serialize_with = "ser_opt_eid")]
    pub src: Option<Eid>,
    #[serde(serialize_with = "ser_opt_eid")]
    pub dst: Option<Eid>,
    pub user: Option<QualifiedName>,
    #[serde(flatten)]
    pub kind: EventKind,
}

fn ser_opt_eid<S: serde::Serializer>(v: &Option<Eid>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(e) => s.collect_str(e),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Default)]
pub struct EventLog {
    events: Mutex<Vec<Event>>,
}

impl EventLog {
    pub fn record(&self, event: Event) {
        tracing::debug!(kind = ?event.kind, nonce = ?event.nonce, "map server event");
        self.events.lock().expect("event log poisoned").push(event);
    }

    pub fn snapshot(&self) -> Vec<Event> {
        self.events.lock().expect("event log poisoned").clone()
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.lock().expect("event log poisoned").iter().filter(|e| pred(&e.kind)).count()
    }

    pub fn denials(&self) -> usize {
        self.count(|k| matches!(k, EventKind::Denied(_)))
    }

    pub fn replies(&self) -> usize {
        self.count(|k| *k == EventKind::Replied)
    }

    pub fn clear(&self) {
        self.events.lock().expect("event log poisoned").clear();
    }
}

/// Event for a decoded request.
pub fn request_event(req: &MapRequest, at: Timestamp, kind: EventKind) -> Event {
    Event {
        at: at.0,
        nonce: Some(req.nonce),
        src: Some(req.src),
        dst: Some(req.dst),
        user: Some(req.user.clone()),
        kind,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MapServerConfig {
    pub path: AuthPath,
    pub replay_window_ms: u64,
}

impl Default for MapServerConfig {
    fn default() -> Self {
        MapServerConfig {
            path: AuthPath::Trie,
            replay_window_ms: DEFAULT_REPLAY_WINDOW_MS,
        }
    }
}

/// A granted request, ready for the router to issue an association.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Authorization {
    pub user_key: PublicKey,
    /// Milliseconds; the association must not outlive the grant.
    pub expiry: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SyncStats {
    pub inserted: usize,
    pub updated: usize,
    pub removed: usize,
    pub users: usize,
}

#[derive(Clone, Copy, Debug)]
struct UserEntry {
    key: PublicKey,
    eid: Option<Eid>,
}

#[derive(Debug, Default)]
struct Synced {
    trie: PolicyTrie,
    users: HashMap<QualifiedName, UserEntry>,
}

pub struct MapServer {
    view: Arc<dyn LedgerView>,
    config: MapServerConfig,
    synced: RwLock<Synced>,
    nonces: NonceCache,
    events: EventLog,
}

impl fmt::Debug for MapServer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapServer").field("config", &self.config).finish_non_exhaustive()
    }
}

fn user_entry(u: &User) -> Option<UserEntry> {
    let key = PublicKey::from_bytes(u.public_key.as_ref()?).ok()?;
    Some(UserEntry { key, eid: u.ip })
}

impl MapServer {
    pub fn new(view: Arc<dyn LedgerView>, config: MapServerConfig) -> Self {
        MapServer {
            view,
            config,
            synced: RwLock::new(Synced::default()),
            nonces: NonceCache::new(config.replay_window_ms),
            events: EventLog::default(),
        }
    }

    pub fn config(&self) -> MapServerConfig {
        self.config
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn trie_len(&self) -> usize {
        self.synced.read().expect("map server lock poisoned").trie.len()
    }

    /// Run `f` against the synced trie under the read lock.
    pub fn with_trie<T>(&self, f: impl FnOnce(&PolicyTrie) -> T) -> T {
        f(&self.synced.read().expect("map server lock poisoned").trie)
    }

    /// Pull a full snapshot from the ledger and apply the difference.
    pub fn sync_from_ledger(&self, now: Timestamp) -> Result<SyncStats, ViewError> {
        let grants = self.view.eid_snapshot(now)?;
        let users = self.view.user_directory()?;
        Ok(self.apply_snapshot(&grants, &users))
    }

    /// Make the trie hold exactly `grants` and the key directory exactly
    /// `users`. Readers see either the old or the new contents.
    pub fn apply_snapshot(&self, grants: &[EidGrant], users: &[User]) -> SyncStats {
        let wanted: HashMap<(Eid, Eid), AllowRecord> = grants
            .iter()
            .map(|g| ((g.src, g.dst), AllowRecord { expiry: g.expiry }))
            .collect();
        let directory: HashMap<QualifiedName, UserEntry> =
            users.iter().filter_map(|u| Some((u.name.clone(), user_entry(u)?))).collect();

        let mut synced = self.synced.write().expect("map server lock poisoned");
        let mut stats = SyncStats {
            users: directory.len(),
            ..SyncStats::default()
        };
        let stale: Vec<(Eid, Eid)> = synced
            .trie
            .pairs()
            .map(|(s, d, _)| (s, d))
            .filter(|p| !wanted.contains_key(p))
            .collect();
        for (s, d) in stale {
            synced.trie.remove(s, d);
            stats.removed += 1;
        }
        for ((s, d), rec) in wanted {
            match synced.trie.insert(s, d, rec) {
                None => stats.inserted += 1,
                Some(old) if old != rec => stats.updated += 1,
                Some(_) => {}
            }
        }
        synced.users = directory;
        stats
    }

    fn deny(&self, req: &MapRequest, now: Timestamp, reason: DenyReason) -> DenyReason {
        self.events.record(request_event(req, now, EventKind::Denied(reason)));
        reason
    }

    fn lookup_user(&self, name: &QualifiedName) -> Result<Option<UserEntry>, ViewError> {
        match self.config.path {
            AuthPath::Trie => Ok(self.synced.read().expect("map server lock poisoned").users.get(name).copied()),
            AuthPath::Ledger => Ok(self.view.user(name)?.as_ref().and_then(user_entry)),
        }
    }

    fn decide(&self, req: &MapRequest, now: Timestamp) -> Result<Option<u64>, DenyReason> {
        match self.config.path {
            AuthPath::Trie => {
                let synced = self.synced.read().expect("map server lock poisoned");
                match synced.trie.get(req.src, req.dst).hit {
                    None => Err(DenyReason::NoPolicy),
                    Some(rec) if rec.expiry.is_some_and(|e| now.0 >= e) => Err(DenyReason::Expired),
                    Some(rec) => Ok(rec.expiry),
                }
            }
            AuthPath::Ledger => {
                let unavailable = |_| DenyReason::LedgerUnavailable;
                let dst = self
                    .view
                    .endpoint_for_eid(req.dst)
                    .map_err(unavailable)?
                    .ok_or(DenyReason::NoPolicy)?;
                match self.view.access_decision(&req.user, &dst, now).map_err(unavailable)? {
                    AccessDecision::Allow { expiry } => Ok(expiry),
                    AccessDecision::Deny => Err(DenyReason::ExplicitDeny),
                    AccessDecision::NoPolicy => Err(DenyReason::NoPolicy),
                    AccessDecision::Expired => Err(DenyReason::Expired),
                }
            }
        }
    }

    /// Verify `req` and decide whether it may be answered. Every outcome is
    /// logged; a denial must produce no reply.
    pub fn authorize(&self, req: &MapRequest, now: Timestamp) -> Result<Authorization, DenyReason> {
        let user = match self.lookup_user(&req.user) {
            Ok(Some(u)) => u,
            Ok(None) => return Err(self.deny(req, now, DenyReason::UnknownUser)),
            Err(_) => return Err(self.deny(req, now, DenyReason::LedgerUnavailable)),
        };
        if !req.verify(&user.key) {
            return Err(self.deny(req, now, DenyReason::BadSignature));
        }
        // The signer may only ask on behalf of its own registered address.
        if user.eid != Some(req.src) {
            return Err(self.deny(req, now, DenyReason::UnknownUser));
        }
        if !self.nonces.check_and_insert(req.src, req.nonce, now) {
            return Err(self.deny(req, now, DenyReason::Replay));
        }
        self.events.record(request_event(req, now, EventKind::Verified));
        match self.decide(req, now) {
            Ok(expiry) => Ok(Authorization {
                user_key: user.key,
                expiry,
            }),
            Err(reason) => Err(self.deny(req, now, reason)),
        }
    }
}
