//! Single-sequencer ordering service: endorsed transactions are queued in
//! arrival order and cut into blocks on timeout or when the queue is full.

use std::collections::{BTreeSet, VecDeque};

use crate::clock::Timestamp;
use crate::crypto::Digest;

use super::block::{Block, BlockData, CutReason};
use super::endorsement_policy::EndorsementPolicyExpr;
use super::tx::EndorsedTransaction;
use super::LedgerError;

pub const DEFAULT_BLOCK_TIMEOUT_MS: u64 = 100;
pub const DEFAULT_MAX_BLOCK_TXS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrdererConfig {
    pub block_timeout_ms: u64,
    pub max_block_txs: usize,
}

impl Default for OrdererConfig {
    fn default() -> Self {
        OrdererConfig {
            block_timeout_ms: DEFAULT_BLOCK_TIMEOUT_MS,
            max_block_txs: DEFAULT_MAX_BLOCK_TXS,
        }
    }
}

#[derive(Debug)]
pub struct Orderer {
    config: OrdererConfig,
    policy: EndorsementPolicyExpr,
    queue: VecDeque<(Timestamp, EndorsedTransaction)>,
    next_height: u64,
    prev_digest: Digest,
}

impl Orderer {
    /// Start ordering after the block at `tip_height` with digest `tip_digest`.
    pub fn new(config: OrdererConfig, policy: EndorsementPolicyExpr, tip_height: u64, tip_digest: Digest) -> Self {
        assert!(config.max_block_txs > 0, "blocks must hold at least one transaction");
        Orderer {
            config,
            policy,
            queue: VecDeque::new(),
            next_height: tip_height + 1,
            prev_digest: tip_digest,
        }
    }

    pub fn config(&self) -> OrdererConfig {
        self.config
    }

    /// Accept a transaction whose endorser set satisfies the policy.
    /// Signatures are checked by committers, not here.
    pub fn submit(&mut self, tx: EndorsedTransaction, now: Timestamp) -> Result<(), LedgerError> {
        let endorsers: BTreeSet<_> = tx.endorsements.iter().map(|e| e.endorser.clone()).collect();
        if !self.policy.is_satisfied(&endorsers) {
            return Err(LedgerError::PolicyUnsatisfied);
        }
        self.queue.push_back((now, tx));
        Ok(())
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Time at which the oldest queued transaction forces a timeout cut.
    pub fn deadline(&self) -> Option<Timestamp> {
        self.queue
            .front()
            .map(|(t, _)| t.plus_millis(self.config.block_timeout_ms))
    }

    pub fn cut_block(&mut self, now: Timestamp) -> Option<Block> {
        let reason = if self.queue.len() >= self.config.max_block_txs {
            CutReason::MaxCount
        } else if self.deadline().is_some_and(|d| now >= d) {
            CutReason::Timeout
        } else {
            return None;
        };
        let n = self.queue.len().min(self.config.max_block_txs);
        let txs: Vec<_> = self.queue.drain(..n).map(|(_, tx)| tx).collect();
        let block = Block {
            height: self.next_height,
            prev_digest: self.prev_digest,
            timestamp: now,
            cut_reason: reason,
            data: BlockData::Transactions(txs),
            validity: Vec::new(),
        };
        self.next_height += 1;
        self.prev_digest = block.digest();
        Some(block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Timestamp;
    use crate::crypto::Signature;
    use crate::ledger::asset::StateKey;
    use crate::ledger::tx::{Endorsement, RwSet, TransactionProposal, Write};
    use crate::names::OrgId;

    fn tx(i: u64) -> EndorsedTransaction {
        let proposal = TransactionProposal::new(
            OrgId::new("org1").unwrap(),
            Timestamp(i),
            RwSet {
                reads: vec![],
                writes: vec![Write::delete(StateKey::from_raw(format!("k{i}")))],
            },
        );
        EndorsedTransaction {
            proposal,
            endorsements: vec![Endorsement {
                endorser: OrgId::new("org1").unwrap(),
                signature: Signature([0; 64]),
            }],
        }
    }

    fn orderer() -> Orderer {
        let policy = EndorsementPolicyExpr::Org(OrgId::new("org1").unwrap());
        Orderer::new(OrdererConfig::default(), policy, 0, Digest::ZERO)
    }

    // Event-trace oracle: txs at 0 and 50 ms with a 100 ms timeout produce
    // exactly one block, at 100 ms, holding both.
    #[test]
    fn timeout_cut_collects_everything_queued() {
        let mut o = orderer();
        o.submit(tx(0), Timestamp(0)).unwrap();
        assert!(o.cut_block(Timestamp(0)).is_none());
        o.submit(tx(1), Timestamp(50)).unwrap();
        assert!(o.cut_block(Timestamp(50)).is_none());
        assert!(o.cut_block(Timestamp(99)).is_none());
        let b = o.cut_block(Timestamp(100)).unwrap();
        assert_eq!(b.cut_reason, CutReason::Timeout);
        assert_eq!(b.transactions().len(), 2);
        assert_eq!(b.height, 1);
        assert!(o.cut_block(Timestamp(1000)).is_none());
    }

    #[test]
    fn empty_queue_never_cuts() {
        let mut o = orderer();
        for t in [0, 100, 10_000] {
            assert!(o.cut_block(Timestamp(t)).is_none());
        }
    }

    #[test]
    fn full_queue_cuts_immediately() {
        let mut o = orderer();
        for i in 0..DEFAULT_MAX_BLOCK_TXS as u64 + 1 {
            o.submit(tx(i), Timestamp(0)).unwrap();
        }
        let b = o.cut_block(Timestamp(0)).unwrap();
        assert_eq!(b.cut_reason, CutReason::MaxCount);
        assert_eq!(b.transactions().len(), DEFAULT_MAX_BLOCK_TXS);
        assert!(o.cut_block(Timestamp(0)).is_none());
        let rest = o.cut_block(Timestamp(100)).unwrap();
        assert_eq!(rest.transactions().len(), 1);
        assert_eq!(rest.prev_digest, b.digest());
        assert_eq!(rest.height, 2);
    }

    #[test]
    fn unsatisfied_policy_refused() {
        let mut o = orderer();
        let mut t = tx(0);
        t.endorsements.clear();
        assert!(matches!(o.submit(t, Timestamp(0)), Err(LedgerError::PolicyUnsatisfied)));
        assert_eq!(o.pending(), 0);
    }
}
