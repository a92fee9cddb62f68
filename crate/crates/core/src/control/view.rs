//! What the map server needs from the ledger, whether it is linked in-process
//! or reached over the query socket.

use std::sync::RwLock;

use thiserror::Error;

use crate::clock::Timestamp;
use crate::eid::Eid;
use crate::ledger::{AccessDecision, EidGrant, Ledger, Network, User};
use crate::names::QualifiedName;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("ledger unavailable: {0}")]
pub struct ViewError(pub String);

pub trait LedgerView: Send + Sync {
    fn user(&self, name: &QualifiedName) -> Result<Option<User>, ViewError>;

    fn endpoint_for_eid(&self, eid: Eid) -> Result<Option<QualifiedName>, ViewError>;

    fn access_decision(&self, user: &QualifiedName, dst: &QualifiedName, now: Timestamp)
        -> Result<AccessDecision, ViewError>;

    fn eid_snapshot(&self, now: Timestamp) -> Result<Vec<EidGrant>, ViewError>;

    fn user_directory(&self) -> Result<Vec<User>, ViewError>;
}

impl LedgerView for Ledger {
    fn user(&self, name: &QualifiedName) -> Result<Option<User>, ViewError> {
        Ok(Ledger::user(self, name))
    }

    fn endpoint_for_eid(&self, eid: Eid) -> Result<Option<QualifiedName>, ViewError> {
        Ok(Ledger::endpoint_for_eid(self, eid))
    }

    fn access_decision(
        &self,
        user: &QualifiedName,
        dst: &QualifiedName,
        now: Timestamp,
    ) -> Result<AccessDecision, ViewError> {
        Ok(Ledger::access_decision(self, user, dst, now))
    }

    fn eid_snapshot(&self, now: Timestamp) -> Result<Vec<EidGrant>, ViewError> {
        Ok(self.export_eid_snapshot(now))
    }

    fn user_directory(&self) -> Result<Vec<User>, ViewError> {
        Ok(Ledger::user_directory(self))
    }
}

/// A network shared with a writer; queries take the read lock, so they see
/// only fully committed blocks.
impl LedgerView for RwLock<Network> {
    fn user(&self, name: &QualifiedName) -> Result<Option<User>, ViewError> {
        Ok(self.read().map_err(poisoned)?.ledger().user(name))
    }

    fn endpoint_for_eid(&self, eid: Eid) -> Result<Option<QualifiedName>, ViewError> {
        Ok(self.read().map_err(poisoned)?.ledger().endpoint_for_eid(eid))
    }

    fn access_decision(
        &self,
        user: &QualifiedName,
        dst: &QualifiedName,
        now: Timestamp,
    ) -> Result<AccessDecision, ViewError> {
        Ok(self.read().map_err(poisoned)?.ledger().access_decision(user, dst, now))
    }

    fn eid_snapshot(&self, now: Timestamp) -> Result<Vec<EidGrant>, ViewError> {
        Ok(self.read().map_err(poisoned)?.ledger().export_eid_snapshot(now))
    }

    fn user_directory(&self) -> Result<Vec<User>, ViewError> {
        Ok(self.read().map_err(poisoned)?.ledger().user_directory())
    }
}

fn poisoned<T>(_: T) -> ViewError {
    ViewError("ledger lock poisoned".into())
}
