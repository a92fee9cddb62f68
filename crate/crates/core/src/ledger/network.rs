//! A single-process consortium: the endorsing identities this node hosts,
//! one ordering service and one committed replica.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::clock::{Clock, Timestamp};
use crate::crypto::Digest;
use crate::names::OrgId;

use super::block::{NetworkConfig, TxValidity};
use super::chaincode::{endorse, propose};
use super::committer::Ledger;
use super::endorsement_policy::EndorsementPolicyExpr;
use super::log::BlockLog;
use super::msp::{Msp, OrgIdentity};
use super::orderer::{Orderer, OrdererConfig};
use super::tx::{EndorsedTransaction, Endorsement, TransactionProposal, Write};
use super::LedgerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxReceipt {
    pub tx_id: Digest,
    pub height: u64,
    pub index: u32,
    pub validity: TxValidity,
}

pub struct Network {
    clock: Arc<dyn Clock>,
    endorsers: BTreeMap<OrgId, OrgIdentity>,
    offline: BTreeSet<OrgId>,
    ledger: Ledger,
    orderer: Orderer,
    receipts: BTreeMap<Digest, TxReceipt>,
}

impl std::fmt::Debug for Network {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network")
            .field("endorsers", &self.endorsers.keys().collect::<Vec<_>>())
            .field("height", &self.ledger.height())
            .finish()
    }
}

impl Network {
    /// Register every identity, write the genesis block and start ordering.
    /// Without an explicit policy every registered organization must endorse.
    pub fn bootstrap(
        identities: Vec<OrgIdentity>,
        policy: Option<EndorsementPolicyExpr>,
        orderer: OrdererConfig,
        clock: Arc<dyn Clock>,
        log: BlockLog,
    ) -> Result<Self, LedgerError> {
        let mut msp = Msp::new();
        for id in &identities {
            msp.register_identity(id)?;
        }
        let policy = match policy {
            Some(p) => p,
            None => EndorsementPolicyExpr::all_of(msp.orgs().cloned()).map_err(LedgerError::InvalidPolicy)?,
        };
        let ledger = Ledger::genesis(NetworkConfig { msp, policy }, clock.now(), log)?;
        Ok(Self::from_ledger(ledger, identities, orderer, clock))
    }

    /// Resume on top of an existing (typically replayed) ledger.
    pub fn from_ledger(ledger: Ledger, identities: Vec<OrgIdentity>, orderer: OrdererConfig, clock: Arc<dyn Clock>) -> Self {
        let orderer = Orderer::new(
            orderer,
            ledger.config().policy.clone(),
            ledger.height(),
            ledger.tip_digest(),
        );
        Network {
            clock,
            endorsers: identities.into_iter().map(|i| (i.id.clone(), i)).collect(),
            offline: BTreeSet::new(),
            ledger,
            orderer,
            receipts: BTreeMap::new(),
        }
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn into_ledger(self) -> Ledger {
        self.ledger
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn endorser_ids(&self) -> impl Iterator<Item = &OrgId> {
        self.endorsers.keys()
    }

    pub fn identity(&self, org: &OrgId) -> Option<&OrgIdentity> {
        self.endorsers.get(org)
    }

    /// Stop (or resume) collecting endorsements from `org`.
    pub fn set_offline(&mut self, org: &OrgId, offline: bool) {
        if offline {
            self.offline.insert(org.clone());
        } else {
            self.offline.remove(org);
        }
    }

    pub fn propose(&self, issuer: &OrgId, writes: Vec<Write>) -> TransactionProposal {
        propose(issuer.clone(), self.now(), writes, self.ledger.state())
    }

    /// Ask every online endorser to simulate and sign. A chaincode rejection
    /// from any of them fails the whole collection.
    pub fn collect_endorsements(&self, proposal: &TransactionProposal) -> Result<Vec<Endorsement>, LedgerError> {
        if !self.ledger.config().msp.contains(&proposal.issuer) {
            return Err(LedgerError::UnknownOrg(proposal.issuer.clone()));
        }
        self.endorsers
            .values()
            .filter(|e| !self.offline.contains(&e.id))
            .map(|e| endorse(proposal, e, self.ledger.state()))
            .collect()
    }

    pub fn submit(&mut self, tx: EndorsedTransaction) -> Result<(), LedgerError> {
        let now = self.now();
        self.orderer.submit(tx, now)
    }

    /// Cut and commit whatever the orderer releases at the current time.
    pub fn poll(&mut self) -> Result<Vec<TxReceipt>, LedgerError> {
        let mut out = Vec::new();
        while let Some(block) = self.orderer.cut_block(self.clock.now()) {
            let height = block.height;
            let ids: Vec<Digest> = block.transactions().iter().map(EndorsedTransaction::id).collect();
            let flags = self.ledger.validate_and_commit(block)?;
            for (i, (tx_id, validity)) in ids.into_iter().zip(flags).enumerate() {
                let r = TxReceipt {
                    tx_id,
                    height,
                    index: i as u32,
                    validity,
                };
                self.receipts.insert(tx_id, r);
                out.push(r);
            }
        }
        Ok(out)
    }

    /// Wait for the block timeout if needed and commit everything queued.
    pub fn flush(&mut self) -> Result<Vec<TxReceipt>, LedgerError> {
        let mut out = Vec::new();
        while let Some(deadline) = self.orderer.deadline() {
            self.clock.wait_until(deadline);
            out.extend(self.poll()?);
        }
        Ok(out)
    }

    pub fn receipt(&self, tx_id: &Digest) -> Option<TxReceipt> {
        self.receipts.get(tx_id).copied()
    }

    /// When the orderer will next cut a block if nothing else arrives.
    pub fn next_deadline(&self) -> Option<Timestamp> {
        self.orderer.deadline()
    }

    /// Order an endorsed transaction and wait for the block containing it.
    pub fn commit(&mut self, tx: EndorsedTransaction) -> Result<TxReceipt, LedgerError> {
        let id = tx.id();
        self.submit(tx)?;
        self.poll()?;
        if self.receipt(&id).is_none() {
            self.flush()?;
        }
        self.receipt(&id).ok_or(LedgerError::Lost(id))
    }

    /// Endorse, order and commit one proposal, waiting for its block.
    pub fn execute(&mut self, proposal: TransactionProposal) -> Result<TxReceipt, LedgerError> {
        let endorsements = self.collect_endorsements(&proposal)?;
        self.commit(EndorsedTransaction { proposal, endorsements })
    }

    pub fn execute_writes(&mut self, issuer: &OrgId, writes: Vec<Write>) -> Result<TxReceipt, LedgerError> {
        let proposal = self.propose(issuer, writes);
        self.execute(proposal)
    }
}
