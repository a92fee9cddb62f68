//! Simulated permissioned ledger: organizations, asset chaincode, the
//! endorse/order/validate pipeline and the versioned world state.

pub mod asset;
pub mod block;
pub mod chaincode;
pub mod committer;
pub mod endorsement_policy;
pub mod log;
pub mod msp;
pub mod network;
pub mod orderer;
pub mod state;
pub mod tx;

use thiserror::Error;

use crate::codec::DecodeError;
use crate::crypto::Digest;
use crate::names::OrgId;

pub use asset::{Action, Asset, AssetBody, AssetKind, Department, Member, Policy, Resource, StateKey, User};
pub use block::{Block, BlockData, CutReason, NetworkConfig, TxValidity};
pub use chaincode::{endorse, propose, simulate_chaincode, ChaincodeError};
pub use committer::{AccessDecision, EidGrant, Ledger, PolicyPair};
pub use endorsement_policy::{EndorsementPolicyExpr, PolicyExprError};
pub use log::BlockLog;
pub use msp::{Msp, OrgIdentity};
pub use network::{Network, TxReceipt};
pub use orderer::{Orderer, OrdererConfig};
pub use state::StateStore;
pub use tx::{EndorsedTransaction, Endorsement, Read, RwSet, TransactionProposal, Version, Write, WriteOp};

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("organization {0} already registered")]
    DuplicateOrg(OrgId),
    #[error("invalid public key for organization {0}")]
    InvalidKey(OrgId),
    #[error("organization {0} is not registered")]
    UnknownOrg(OrgId),
    #[error("chaincode rejected proposal: {0}")]
    ChaincodeRejection(ChaincodeError),
    #[error("endorser {0} simulated a different read/write set")]
    SimulationMismatch(OrgId),
    #[error("endorsements do not satisfy the endorsement policy")]
    PolicyUnsatisfied,
    #[error("block {height} does not extend the chain (expected prev {expected:?}, found {found:?})")]
    BrokenChain { height: u64, expected: Digest, found: Digest },
    #[error("configuration block at height {0} after genesis")]
    UnexpectedConfigBlock(u64),
    #[error("block log does not start with a genesis block")]
    NotGenesis,
    #[error("replayed validity flags differ from the log at height {height}")]
    ReplayDivergence { height: u64 },
    #[error("invalid endorsement policy: {0}")]
    InvalidPolicy(PolicyExprError),
    #[error("transaction {0:?} was submitted but never committed")]
    Lost(Digest),
    #[error("malformed block: {0}")]
    Decode(#[from] DecodeError),
    #[error("block log i/o: {0}")]
    Io(#[from] std::io::Error),
}
