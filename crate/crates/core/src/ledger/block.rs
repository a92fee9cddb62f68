use crate::clock::Timestamp;
use crate::codec::{Canonical, DecodeError, Reader, Writer};
use crate::crypto::Digest;

use super::endorsement_policy::EndorsementPolicyExpr;
use super::msp::Msp;
use super::tx::EndorsedTransaction;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutReason {
    Genesis,
    Timeout,
    MaxCount,
}

/// Per-transaction outcome assigned at commit; kept in the block so invalid
/// transactions remain part of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TxValidity {
    Valid,
    /// Verified endorsements do not satisfy the endorsement policy.
    EndorsementPolicyFailure,
    /// A read-set version is no longer current.
    MvccConflict,
    /// Proposal id does not match its content.
    Tampered,
    UnknownIssuer,
}

impl TxValidity {
    pub(crate) fn tag(self) -> u8 {
        match self {
            TxValidity::Valid => 0,
            TxValidity::EndorsementPolicyFailure => 1,
            TxValidity::MvccConflict => 2,
            TxValidity::Tampered => 3,
            TxValidity::UnknownIssuer => 4,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        Ok(match tag {
            0 => TxValidity::Valid,
            1 => TxValidity::EndorsementPolicyFailure,
            2 => TxValidity::MvccConflict,
            3 => TxValidity::Tampered,
            4 => TxValidity::UnknownIssuer,
            tag => return Err(DecodeError::UnknownTag { what: "validity", tag }),
        })
    }
}

/// Channel configuration carried by the genesis block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub msp: Msp,
    pub policy: EndorsementPolicyExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockData {
    Config(NetworkConfig),
    Transactions(Vec<EndorsedTransaction>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_digest: Digest,
    pub timestamp: Timestamp,
    pub cut_reason: CutReason,
    pub data: BlockData,
    /// Filled in by the committer; not covered by the block digest.
    pub validity: Vec<TxValidity>,
}

impl Block {
    pub fn genesis(config: NetworkConfig, timestamp: Timestamp) -> Self {
        Block {
            height: 0,
            prev_digest: Digest::ZERO,
            timestamp,
            cut_reason: CutReason::Genesis,
            data: BlockData::Config(config),
            validity: Vec::new(),
        }
    }

    pub fn transactions(&self) -> &[EndorsedTransaction] {
        match &self.data {
            BlockData::Transactions(txs) => txs,
            BlockData::Config(_) => &[],
        }
    }

    fn encode_body(&self, w: &mut Writer) {
        w.u64(self.height).fixed(self.prev_digest.as_bytes()).u64(self.timestamp.0);
        w.u8(match self.cut_reason {
            CutReason::Genesis => 0,
            CutReason::Timeout => 1,
            CutReason::MaxCount => 2,
        });
        match &self.data {
            BlockData::Config(cfg) => {
                w.u8(0);
                cfg.msp.encode(w);
                cfg.policy.encode(w);
            }
            BlockData::Transactions(txs) => {
                w.u8(1).seq(txs, |w, tx| tx.encode(w));
            }
        }
    }

    pub fn digest(&self) -> Digest {
        let mut w = Writer::new();
        self.encode_body(&mut w);
        Digest::of(&w.into_bytes())
    }
}

impl Canonical for Block {
    fn encode(&self, w: &mut Writer) {
        let mut body = Writer::new();
        self.encode_body(&mut body);
        let body = body.into_bytes();
        w.fixed(&body).fixed(Digest::of(&body).as_bytes());
        w.seq(&self.validity, |w, v| {
            w.u8(v.tag());
        });
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let start = r.clone();
        let height = r.u64("height")?;
        let prev_digest = Digest(r.array("prev digest")?);
        let timestamp = Timestamp(r.u64("block timestamp")?);
        let cut_reason = match r.u8("cut reason")? {
            0 => CutReason::Genesis,
            1 => CutReason::Timeout,
            2 => CutReason::MaxCount,
            tag => return Err(DecodeError::UnknownTag { what: "cut reason", tag }),
        };
        let data = match r.u8("block data")? {
            0 => BlockData::Config(NetworkConfig {
                msp: Msp::decode(r)?,
                policy: EndorsementPolicyExpr::decode(r)?,
            }),
            1 => BlockData::Transactions(r.seq("transactions", EndorsedTransaction::decode)?),
            tag => return Err(DecodeError::UnknownTag { what: "block data", tag }),
        };
        let body_len = start.remaining() - r.remaining();
        let body = {
            let mut s = start;
            s.fixed(body_len, "block body")?
        };
        let stored = Digest(r.array("block digest")?);
        if stored != Digest::of(body) {
            return Err(DecodeError::Invalid("block digest"));
        }
        let validity = r.seq("validity", |r| TxValidity::from_tag(r.u8("validity")?))?;
        Ok(Block {
            height,
            prev_digest,
            timestamp,
            cut_reason,
            data,
            validity,
        })
    }
}
