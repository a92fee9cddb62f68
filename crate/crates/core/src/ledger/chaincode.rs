//! Asset rules run by every endorser: creation only over absent keys,
//! mutation only by the creating organization, references must resolve.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::clock::Timestamp;
use crate::codec::Canonical;
use crate::names::{OrgId, QualifiedName};

use super::asset::{Asset, AssetBody, AssetKind, StateKey};
use super::msp::OrgIdentity;
use super::state::StateStore;
use super::tx::{Endorsement, Read, RwSet, TransactionProposal, Version, Write, WriteOp};
use super::LedgerError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChaincodeError {
    #[error("{issuer} may not modify {key}, owned by {owner}")]
    OwnershipViolation { key: StateKey, owner: OrgId, issuer: OrgId },
    #[error("{0} already exists")]
    KeyExists(StateKey),
    #[error("{0} does not exist")]
    KeyAbsent(StateKey),
    #[error("reference {0} does not resolve to an existing asset")]
    UnresolvableReference(QualifiedName),
    #[error("invalid asset at {key}: {reason}")]
    InvalidAsset { key: StateKey, reason: &'static str },
    #[error("proposal writes nothing")]
    EmptyWriteSet,
}

struct Simulation<'a> {
    state: &'a StateStore,
    pending: HashMap<StateKey, Option<Asset>>,
    reads: BTreeMap<StateKey, Option<Version>>,
}

impl<'a> Simulation<'a> {
    fn new(state: &'a StateStore) -> Self {
        Simulation {
            state,
            pending: HashMap::new(),
            reads: BTreeMap::new(),
        }
    }

    /// Current value of `key` as seen by this transaction, recording the
    /// committed version the first time the key is consulted.
    fn lookup(&mut self, key: &StateKey) -> Result<Option<Asset>, ChaincodeError> {
        if let Some(v) = self.pending.get(key) {
            return Ok(v.clone());
        }
        let entry = self.state.get(key);
        self.reads.entry(key.clone()).or_insert(entry.map(|e| e.version));
        match entry {
            None => Ok(None),
            Some(e) => Asset::from_bytes(&e.value).map(Some).map_err(|_| ChaincodeError::InvalidAsset {
                key: key.clone(),
                reason: "stored value does not decode",
            }),
        }
    }

    fn resolve(&mut self, name: &QualifiedName, kinds: &[AssetKind]) -> Result<(), ChaincodeError> {
        for &kind in kinds {
            if self.lookup(&StateKey::named(kind, name))?.is_some() {
                return Ok(());
            }
        }
        Err(ChaincodeError::UnresolvableReference(name.clone()))
    }

    fn check_body(&mut self, key: &StateKey, asset: &Asset) -> Result<(), ChaincodeError> {
        let invalid = |reason| ChaincodeError::InvalidAsset { key: key.clone(), reason };
        match &asset.body {
            AssetBody::Policy(p) => {
                self.resolve(&p.src, &AssetKind::NAMED)?;
                self.resolve(&p.dst, &[AssetKind::User, AssetKind::Resource])?;
                // Granting access to an endpoint associates it, so only its owner may.
                for kind in [AssetKind::User, AssetKind::Resource] {
                    let dst_key = StateKey::named(kind, &p.dst);
                    if let Some(dst) = self.lookup(&dst_key)? {
                        if dst.owner != asset.owner {
                            return Err(ChaincodeError::OwnershipViolation {
                                key: dst_key,
                                owner: dst.owner,
                                issuer: asset.owner.clone(),
                            });
                        }
                    }
                }
                if p.expiry.is_some_and(|e| e <= asset.created) {
                    return Err(invalid("expiry not after creation"));
                }
                if let (Some(from), Some(to)) = (p.valid_from, p.expiry) {
                    if from >= to {
                        return Err(invalid("empty validity window"));
                    }
                }
            }
            AssetBody::Department(d) => {
                for m in &d.members {
                    self.resolve(&m.name, &[AssetKind::User])?;
                    if m.expiry.is_some_and(|e| e <= asset.created) {
                        return Err(invalid("membership expiry not after creation"));
                    }
                }
            }
            AssetBody::User(_) | AssetBody::Resource(_) => {}
        }
        Ok(())
    }

    fn decode_for(&self, key: &StateKey, bytes: &[u8], issuer: &OrgId) -> Result<Asset, ChaincodeError> {
        let asset = Asset::from_bytes(bytes).map_err(|_| ChaincodeError::InvalidAsset {
            key: key.clone(),
            reason: "value does not decode",
        })?;
        if &asset.key() != key {
            return Err(ChaincodeError::InvalidAsset {
                key: key.clone(),
                reason: "value does not belong at this key",
            });
        }
        if asset.owner != *issuer || asset.body_org().is_some_and(|o| o != &asset.owner) {
            return Err(ChaincodeError::OwnershipViolation {
                key: key.clone(),
                owner: asset.body_org().unwrap_or(&asset.owner).clone(),
                issuer: issuer.clone(),
            });
        }
        Ok(asset)
    }

    fn apply(&mut self, issuer: &OrgId, write: &Write) -> Result<(), ChaincodeError> {
        let key = &write.key;
        let next = match &write.op {
            WriteOp::Create(bytes) => {
                let asset = self.decode_for(key, bytes, issuer)?;
                if self.lookup(key)?.is_some() {
                    return Err(ChaincodeError::KeyExists(key.clone()));
                }
                // One qualified name identifies at most one user, group or resource.
                if let Some(name) = named(&asset) {
                    for kind in AssetKind::NAMED {
                        let sibling = StateKey::named(kind, name);
                        if sibling != *key && self.lookup(&sibling)?.is_some() {
                            return Err(ChaincodeError::KeyExists(sibling));
                        }
                    }
                }
                self.check_body(key, &asset)?;
                Some(asset)
            }
            WriteOp::Update(bytes) => {
                let current = self.owned_by(key, issuer)?;
                let asset = self.decode_for(key, bytes, issuer)?;
                if asset.kind() != current.kind() {
                    return Err(ChaincodeError::InvalidAsset {
                        key: key.clone(),
                        reason: "update changes asset kind",
                    });
                }
                self.check_body(key, &asset)?;
                Some(asset)
            }
            WriteOp::Delete => {
                self.owned_by(key, issuer)?;
                None
            }
        };
        self.pending.insert(key.clone(), next);
        Ok(())
    }

    fn owned_by(&mut self, key: &StateKey, issuer: &OrgId) -> Result<Asset, ChaincodeError> {
        let current = self.lookup(key)?.ok_or_else(|| ChaincodeError::KeyAbsent(key.clone()))?;
        if current.owner != *issuer {
            return Err(ChaincodeError::OwnershipViolation {
                key: key.clone(),
                owner: current.owner,
                issuer: issuer.clone(),
            });
        }
        Ok(current)
    }

    fn into_rwset(self, writes: &[Write]) -> RwSet {
        RwSet {
            reads: self
                .reads
                .into_iter()
                .map(|(key, version)| Read { key, version })
                .collect(),
            writes: writes.to_vec(),
        }
    }
}

fn named(asset: &Asset) -> Option<&QualifiedName> {
    match &asset.body {
        AssetBody::User(u) => Some(&u.name),
        AssetBody::Department(d) => Some(&d.name),
        AssetBody::Resource(r) => Some(&r.name),
        AssetBody::Policy(_) => None,
    }
}

/// Run the asset rules over `writes`. The read set is returned even when a
/// rule fails, covering every key consulted up to the failure.
fn run(issuer: &OrgId, writes: &[Write], state: &StateStore) -> (RwSet, Result<(), ChaincodeError>) {
    let mut sim = Simulation::new(state);
    let mut outcome = if writes.is_empty() {
        Err(ChaincodeError::EmptyWriteSet)
    } else {
        Ok(())
    };
    for w in writes {
        if outcome.is_err() {
            break;
        }
        outcome = sim.apply(issuer, w);
    }
    (sim.into_rwset(writes), outcome)
}

/// Build a proposal for `writes`, recording the versions this issuer's view
/// of the state holds. Rule violations are left for endorsers to report.
pub fn propose(issuer: OrgId, timestamp: Timestamp, writes: Vec<Write>, state: &StateStore) -> TransactionProposal {
    let (rwset, _) = run(&issuer, &writes, state);
    TransactionProposal::new(issuer, timestamp, rwset)
}

/// Execute the proposal's writes against `state`, returning the resulting
/// read/write set or the first rule violation.
pub fn simulate_chaincode(proposal: &TransactionProposal, state: &StateStore) -> Result<RwSet, ChaincodeError> {
    let (rwset, outcome) = run(&proposal.issuer, &proposal.rwset.writes, state);
    outcome.map(|()| rwset)
}

/// Re-execute the proposal on the endorser's replica and sign it if the
/// effects match what the issuer observed.
pub fn endorse(
    proposal: &TransactionProposal,
    endorser: &OrgIdentity,
    state: &StateStore,
) -> Result<Endorsement, LedgerError> {
    let rwset = simulate_chaincode(proposal, state).map_err(LedgerError::ChaincodeRejection)?;
    if rwset.digest() != proposal.rwset.digest() {
        return Err(LedgerError::SimulationMismatch(endorser.id.clone()));
    }
    Ok(Endorsement {
        endorser: endorser.id.clone(),
        signature: endorser.sign(&proposal.endorsement_payload()),
    })
}
