//! The committing peer: validates ordered blocks, applies them to the world
//! state, and answers queries against committed state only.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::clock::Timestamp;
use crate::codec::Canonical;
use crate::crypto::{Digest, PublicKey};
use crate::eid::Eid;
use crate::names::QualifiedName;

use super::asset::{Action, Asset, AssetBody, AssetKind, Policy, StateKey, User};
use super::block::{Block, BlockData, NetworkConfig, TxValidity};
use super::log::{self, BlockLog};
use super::state::StateStore;
use super::tx::{EndorsedTransaction, Version, WriteOp};
use super::LedgerError;

/// One authorized (source endpoint, destination endpoint) pair, expanded
/// from group policies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EidGrant {
    pub src: Eid,
    pub dst: Eid,
    /// Milliseconds; `None` never expires.
    pub expiry: Option<u64>,
}

/// Outcome of an access check between a user and a destination endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessDecision {
    /// `expiry` is the latest instant (ms) any allowing path stays valid.
    Allow { expiry: Option<u64> },
    /// An explicit deny policy applies.
    Deny,
    /// No policy connects the user (or its groups) to the destination.
    NoPolicy,
    /// Policies exist but their validity or the group membership lapsed.
    Expired,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyPair {
    pub src: QualifiedName,
    pub dst: QualifiedName,
    pub action: Action,
}

/// Lookup structures derived from state; rebuilt by replay, never persisted.
#[derive(Debug, Default)]
struct Indexes {
    endpoints_by_eid: HashMap<Eid, QualifiedName>,
    groups_of: HashMap<QualifiedName, BTreeSet<QualifiedName>>,
}

impl Indexes {
    fn remove(&mut self, asset: &Asset) {
        match &asset.body {
            AssetBody::User(User { ip: Some(ip), name, .. }) => {
                if self.endpoints_by_eid.get(ip) == Some(name) {
                    self.endpoints_by_eid.remove(ip);
                }
            }
            AssetBody::Resource(r) => {
                if let Some(ip) = r.ip {
                    if self.endpoints_by_eid.get(&ip) == Some(&r.name) {
                        self.endpoints_by_eid.remove(&ip);
                    }
                }
            }
            AssetBody::Department(d) => {
                for m in &d.members {
                    if let Some(set) = self.groups_of.get_mut(&m.name) {
                        set.remove(&d.name);
                        if set.is_empty() {
                            self.groups_of.remove(&m.name);
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn insert(&mut self, asset: &Asset) {
        match &asset.body {
            AssetBody::User(User { ip: Some(ip), name, .. }) => {
                self.endpoints_by_eid.insert(*ip, name.clone());
            }
            AssetBody::Resource(r) => {
                if let Some(ip) = r.ip {
                    self.endpoints_by_eid.insert(ip, r.name.clone());
                }
            }
            AssetBody::Department(d) => {
                for m in &d.members {
                    self.groups_of.entry(m.name.clone()).or_default().insert(d.name.clone());
                }
            }
            _ => {}
        }
    }
}

#[derive(Debug)]
pub struct Ledger {
    config: NetworkConfig,
    state: StateStore,
    tip_height: u64,
    tip_digest: Digest,
    log: BlockLog,
    chain_bytes: u64,
    tx_count: u64,
    verifications: AtomicU64,
    indexes: Indexes,
}

impl Ledger {
    /// Create a chain whose genesis block carries `config`.
    pub fn genesis(config: NetworkConfig, timestamp: Timestamp, log: BlockLog) -> Result<Self, LedgerError> {
        config.policy.validate().map_err(LedgerError::InvalidPolicy)?;
        let block = Block::genesis(config.clone(), timestamp);
        let mut ledger = Ledger {
            config,
            state: StateStore::new(),
            tip_height: 0,
            tip_digest: block.digest(),
            log,
            chain_bytes: 0,
            tx_count: 0,
            verifications: AtomicU64::new(0),
            indexes: Indexes::default(),
        };
        ledger.persist(&block)?;
        Ok(ledger)
    }

    /// Rebuild a ledger by re-validating every block in `log_bytes`.
    /// Committed blocks are written to `log`.
    pub fn replay(log_bytes: &[u8], log: BlockLog) -> Result<Self, LedgerError> {
        let mut recs = log::records(log_bytes);
        let first = recs.next().ok_or(LedgerError::NotGenesis)??;
        let genesis = Block::from_bytes(first)?;
        let BlockData::Config(config) = &genesis.data else {
            return Err(LedgerError::NotGenesis);
        };
        if genesis.height != 0 {
            return Err(LedgerError::NotGenesis);
        }
        let mut ledger = Ledger::genesis(config.clone(), genesis.timestamp, log)?;
        for rec in recs {
            let block = Block::from_bytes(rec?)?;
            let recorded = block.validity.clone();
            let height = block.height;
            let computed = ledger.validate_and_commit(block)?;
            if computed != recorded {
                return Err(LedgerError::ReplayDivergence { height });
            }
        }
        Ok(ledger)
    }

    /// Replay the log file at `path` and keep appending to it.
    pub fn open(path: impl AsRef<std::path::Path>) -> Result<Self, LedgerError> {
        let bytes = log::read_file(&path)?;
        let mut ledger = Ledger::replay(&bytes, BlockLog::memory())?;
        ledger.log = BlockLog::open(path)?;
        Ok(ledger)
    }

    fn persist(&mut self, block: &Block) -> Result<(), LedgerError> {
        let bytes = block.to_bytes();
        self.log.append(&bytes)?;
        self.chain_bytes += bytes.len() as u64;
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn height(&self) -> u64 {
        self.tip_height
    }

    pub fn tip_digest(&self) -> Digest {
        self.tip_digest
    }

    pub fn state(&self) -> &StateStore {
        &self.state
    }

    pub fn log(&self) -> &BlockLog {
        &self.log
    }

    /// Sum of serialized block sizes, genesis included.
    pub fn chain_size_bytes(&self) -> u64 {
        self.chain_bytes
    }

    /// Transactions committed to the chain, valid or not.
    pub fn tx_count(&self) -> u64 {
        self.tx_count
    }

    /// Endorsement signatures checked by this committer so far.
    pub fn signature_verifications(&self) -> u64 {
        self.verifications.load(Ordering::Relaxed)
    }

    fn verified_endorsers(&self, tx: &EndorsedTransaction) -> BTreeSet<crate::names::OrgId> {
        let payload = tx.proposal.endorsement_payload();
        let mut out = BTreeSet::new();
        // Sequential on purpose: commit cost is one verification per endorsement.
        for e in &tx.endorsements {
            self.verifications.fetch_add(1, Ordering::Relaxed);
            if let Some(key) = self.config.msp.public_key(&e.endorser) {
                if key.verify(&payload, &e.signature) {
                    out.insert(e.endorser.clone());
                }
            }
        }
        out
    }

    fn check(&self, tx: &EndorsedTransaction) -> TxValidity {
        if !self.config.msp.contains(&tx.proposal.issuer) {
            return TxValidity::UnknownIssuer;
        }
        if !tx.proposal.id_is_consistent() {
            return TxValidity::Tampered;
        }
        if !self.config.policy.is_satisfied(&self.verified_endorsers(tx)) {
            return TxValidity::EndorsementPolicyFailure;
        }
        let current = tx
            .proposal
            .rwset
            .reads
            .iter()
            .all(|r| self.state.version(&r.key) == r.version);
        if !current {
            return TxValidity::MvccConflict;
        }
        TxValidity::Valid
    }

    fn apply(&mut self, tx: &EndorsedTransaction, version: Version) {
        for w in &tx.proposal.rwset.writes {
            if let Some(old) = self.state.get(&w.key).and_then(|e| Asset::from_bytes(&e.value).ok()) {
                self.indexes.remove(&old);
            }
            match &w.op {
                WriteOp::Create(v) | WriteOp::Update(v) => {
                    if let Ok(asset) = Asset::from_bytes(v) {
                        self.indexes.insert(&asset);
                    }
                    self.state.put(w.key.clone(), v.clone(), version);
                }
                WriteOp::Delete => self.state.delete(&w.key),
            }
        }
    }

    /// Validate every transaction of `block` in order, apply the valid ones
    /// and append the block (with its validity flags) to the chain.
    pub fn validate_and_commit(&mut self, mut block: Block) -> Result<Vec<TxValidity>, LedgerError> {
        if block.height != self.tip_height + 1 || block.prev_digest != self.tip_digest {
            return Err(LedgerError::BrokenChain {
                height: block.height,
                expected: self.tip_digest,
                found: block.prev_digest,
            });
        }
        let txs = match &block.data {
            BlockData::Transactions(txs) => txs.clone(),
            BlockData::Config(_) => return Err(LedgerError::UnexpectedConfigBlock(block.height)),
        };
        let mut flags = Vec::with_capacity(txs.len());
        for (i, tx) in txs.iter().enumerate() {
            let v = self.check(tx);
            if v == TxValidity::Valid {
                self.apply(
                    tx,
                    Version {
                        height: block.height,
                        tx_index: i as u32,
                    },
                );
            }
            flags.push(v);
        }
        block.validity = flags.clone();
        self.tip_height = block.height;
        self.tip_digest = block.digest();
        self.tx_count += txs.len() as u64;
        self.persist(&block)?;
        Ok(flags)
    }

    pub fn query_state(&self, key: &StateKey) -> Option<Asset> {
        self.state.get(key).and_then(|e| Asset::from_bytes(&e.value).ok())
    }

    pub fn user(&self, name: &QualifiedName) -> Option<User> {
        match self.query_state(&StateKey::user(name))?.body {
            AssetBody::User(u) => Some(u),
            _ => None,
        }
    }

    pub fn user_public_key(&self, name: &QualifiedName) -> Option<PublicKey> {
        self.user(name)?.public_key.and_then(|k| PublicKey::from_bytes(&k).ok())
    }

    /// Exact-match lookup of the policy keyed by `src|dst`, hiding policies
    /// outside their validity window.
    pub fn query_policy(&self, src: &QualifiedName, dst: &QualifiedName, now: Timestamp) -> Option<Policy> {
        let asset = self.query_state(&StateKey::policy(src, dst))?;
        match asset.body {
            AssetBody::Policy(p) if p.in_force_at(now) => Some(p),
            _ => None,
        }
    }

    /// Groups `user` belongs to at `now`.
    pub fn groups_of(&self, user: &QualifiedName, now: Timestamp) -> Vec<(QualifiedName, Option<u64>)> {
        let Some(groups) = self.indexes.groups_of.get(user) else {
            return Vec::new();
        };
        groups
            .iter()
            .filter_map(|g| {
                let dept = self.query_state(&StateKey::department(g))?;
                let member = dept.as_department()?.members.iter().find(|m| &m.name == user)?.clone();
                member.active_at(now).then(|| (g.clone(), member.expiry))
            })
            .collect()
    }

    /// Default-deny access decision. A matching deny (direct or through a
    /// group) overrides any allow.
    pub fn resolve_access(&self, user: &QualifiedName, resource: &QualifiedName, now: Timestamp) -> Action {
        match self.access_decision(user, resource, now) {
            AccessDecision::Allow { .. } => Action::Allow,
            _ => Action::Deny,
        }
    }

    /// Like [`Ledger::resolve_access`], but says why access is refused and
    /// when an allow lapses.
    pub fn access_decision(&self, user: &QualifiedName, resource: &QualifiedName, now: Timestamp) -> AccessDecision {
        let mut paths = vec![(user.clone(), None, true)];
        for g in self.indexes.groups_of.get(user).into_iter().flatten() {
            let Some(dept) = self.query_state(&StateKey::department(g)) else { continue };
            if let Some(m) = dept.as_department().and_then(|d| d.members.iter().find(|m| &m.name == user)) {
                paths.push((g.clone(), m.expiry, m.active_at(now)));
            }
        }
        let mut allow: Option<Option<u64>> = None;
        let mut lapsed = false;
        for (src, member_expiry, active) in paths {
            let Some(p) = self.query_state(&StateKey::policy(&src, resource)).and_then(|a| a.as_policy().cloned())
            else {
                continue;
            };
            if !active || !p.in_force_at(now) {
                lapsed = true;
                continue;
            }
            match p.action {
                Action::Deny => return AccessDecision::Deny,
                Action::Allow => {
                    let e = min_expiry(member_expiry, p.expiry);
                    allow = Some(allow.map_or(e, |acc| max_expiry(acc, e)));
                }
            }
        }
        match allow {
            Some(expiry) => AccessDecision::Allow { expiry },
            None if lapsed => AccessDecision::Expired,
            None => AccessDecision::NoPolicy,
        }
    }

    /// Every registered user with its key and address.
    pub fn user_directory(&self) -> Vec<User> {
        self.state
            .scan_prefix("user:")
            .filter_map(|(_, e)| Asset::from_bytes(&e.value).ok())
            .filter_map(|a| match a.body {
                AssetBody::User(u) => Some(u),
                _ => None,
            })
            .collect()
    }

    pub fn endpoint_for_eid(&self, eid: Eid) -> Option<QualifiedName> {
        self.indexes.endpoints_by_eid.get(&eid).cloned()
    }

    fn endpoint_ip(&self, name: &QualifiedName) -> Option<Eid> {
        [AssetKind::User, AssetKind::Resource]
            .into_iter()
            .find_map(|k| self.query_state(&StateKey::named(k, name)))
            .and_then(|a| a.endpoint_ip())
    }

    fn policies_in_force(&self, now: Timestamp) -> impl Iterator<Item = Policy> + '_ {
        self.state
            .scan_prefix("policy:")
            .filter_map(|(_, e)| Asset::from_bytes(&e.value).ok())
            .filter_map(|a| match a.body {
                AssetBody::Policy(p) => Some(p),
                _ => None,
            })
            .filter(move |p| p.in_force_at(now))
    }

    /// Committed allow policies in force at `now`, as reference pairs.
    pub fn export_policy_snapshot(&self, now: Timestamp) -> Vec<PolicyPair> {
        self.policies_in_force(now)
            .filter(|p| p.action == Action::Allow)
            .map(|p| PolicyPair {
                src: p.src,
                dst: p.dst,
                action: Action::Allow,
            })
            .collect()
    }

    /// Allow policies expanded to endpoint addresses: group sources become
    /// their active members, and pairs overridden by a deny are dropped.
    pub fn export_eid_snapshot(&self, now: Timestamp) -> Vec<EidGrant> {
        let mut grants: BTreeMap<(Eid, Eid), Option<u64>> = BTreeMap::new();
        for p in self.policies_in_force(now).filter(|p| p.action == Action::Allow) {
            let Some(dst_ip) = self.endpoint_ip(&p.dst) else { continue };
            let sources: Vec<(QualifiedName, Option<u64>)> =
                match self.query_state(&StateKey::department(&p.src)).and_then(|a| a.as_department().cloned()) {
                    Some(dept) => dept
                        .members
                        .into_iter()
                        .filter(|m| m.active_at(now))
                        .map(|m| (m.name, min_expiry(m.expiry, p.expiry)))
                        .collect(),
                    None => vec![(p.src.clone(), p.expiry)],
                };
            for (user, expiry) in sources {
                let Some(src_ip) = self.user(&user).and_then(|u| u.ip) else { continue };
                if self.resolve_access(&user, &p.dst, now) != Action::Allow {
                    continue;
                }
                grants
                    .entry((src_ip, dst_ip))
                    .and_modify(|e| *e = max_expiry(*e, expiry))
                    .or_insert(expiry);
            }
        }
        grants
            .into_iter()
            .map(|((src, dst), expiry)| EidGrant { src, dst, expiry })
            .collect()
    }
}

fn min_expiry(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) | (None, x) => x,
    }
}

fn max_expiry(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    }
}
