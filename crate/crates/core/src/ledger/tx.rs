//! Proposals, read/write sets and endorsements.

use std::fmt;

use crate::clock::Timestamp;
use crate::codec::{Canonical, DecodeError, Reader, Writer};
use crate::crypto::{Digest, Signature, SIGNATURE_LEN};
use crate::names::OrgId;

use super::asset::{Asset, StateKey};

/// Commit position of a state entry: (block height, index within block).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Version {
    pub height: u64,
    pub tx_index: u32,
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.height, self.tx_index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Read {
    pub key: StateKey,
    /// `None` when the key was absent at simulation time.
    pub version: Option<Version>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WriteOp {
    Create(Vec<u8>),
    Update(Vec<u8>),
    Delete,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Write {
    pub key: StateKey,
    pub op: WriteOp,
}

impl Write {
    pub fn create(asset: &Asset) -> Self {
        Write {
            key: asset.key(),
            op: WriteOp::Create(asset.to_bytes()),
        }
    }

    pub fn update(asset: &Asset) -> Self {
        Write {
            key: asset.key(),
            op: WriteOp::Update(asset.to_bytes()),
        }
    }

    pub fn delete(key: StateKey) -> Self {
        Write { key, op: WriteOp::Delete }
    }
}

/// The effects of simulating a proposal: what it read and what it writes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RwSet {
    pub reads: Vec<Read>,
    pub writes: Vec<Write>,
}

fn put_key(w: &mut Writer, k: &StateKey) {
    w.str(k.as_str());
}

fn get_key(r: &mut Reader<'_>) -> Result<StateKey, DecodeError> {
    Ok(StateKey::from_raw(r.string("state key")?))
}

fn put_version(w: &mut Writer, v: &Version) {
    w.u64(v.height).u32(v.tx_index);
}

fn get_version(r: &mut Reader<'_>) -> Result<Version, DecodeError> {
    Ok(Version {
        height: r.u64("height")?,
        tx_index: r.u32("tx index")?,
    })
}

impl Canonical for RwSet {
    fn encode(&self, w: &mut Writer) {
        w.seq(&self.reads, |w, rd| {
            put_key(w, &rd.key);
            w.option(rd.version.as_ref(), put_version);
        });
        w.seq(&self.writes, |w, wr| {
            put_key(w, &wr.key);
            match &wr.op {
                WriteOp::Create(v) => {
                    w.u8(1).bytes(v);
                }
                WriteOp::Update(v) => {
                    w.u8(2).bytes(v);
                }
                WriteOp::Delete => {
                    w.u8(3);
                }
            }
        });
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let reads = r.seq("reads", |r| {
            Ok(Read {
                key: get_key(r)?,
                version: r.option("version", get_version)?,
            })
        })?;
        let writes = r.seq("writes", |r| {
            let key = get_key(r)?;
            let op = match r.u8("write op")? {
                1 => WriteOp::Create(r.bytes("value")?.to_vec()),
                2 => WriteOp::Update(r.bytes("value")?.to_vec()),
                3 => WriteOp::Delete,
                tag => return Err(DecodeError::UnknownTag { what: "write op", tag }),
            };
            Ok(Write { key, op })
        })?;
        Ok(RwSet { reads, writes })
    }
}

impl RwSet {
    pub fn digest(&self) -> Digest {
        Digest::of(&self.to_bytes())
    }
}

/// A state change proposed by one organization, before endorsement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionProposal {
    id: Digest,
    pub issuer: OrgId,
    pub timestamp: Timestamp,
    pub rwset: RwSet,
}

impl TransactionProposal {
    pub fn new(issuer: OrgId, timestamp: Timestamp, rwset: RwSet) -> Self {
        let id = Self::compute_id(&issuer, timestamp, &rwset);
        TransactionProposal {
            id,
            issuer,
            timestamp,
            rwset,
        }
    }

    fn compute_id(issuer: &OrgId, timestamp: Timestamp, rwset: &RwSet) -> Digest {
        let mut w = Writer::new();
        w.str(issuer.as_str()).u64(timestamp.0);
        rwset.encode(&mut w);
        Digest::of(&w.into_bytes())
    }

    pub fn id(&self) -> Digest {
        self.id
    }

    /// True when the stored id matches the content (detects tampering).
    pub fn id_is_consistent(&self) -> bool {
        self.id == Self::compute_id(&self.issuer, self.timestamp, &self.rwset)
    }

    /// The bytes an endorser signs: proposal id followed by the rw-set digest.
    pub fn endorsement_payload(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(self.id.as_bytes());
        out[32..].copy_from_slice(self.rwset.digest().as_bytes());
        out
    }
}

impl Canonical for TransactionProposal {
    fn encode(&self, w: &mut Writer) {
        w.fixed(self.id.as_bytes()).str(self.issuer.as_str()).u64(self.timestamp.0);
        self.rwset.encode(w);
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let id = Digest(r.array("proposal id")?);
        let issuer = OrgId::new(&r.string("issuer")?).map_err(|_| DecodeError::Invalid("issuer"))?;
        let timestamp = Timestamp(r.u64("timestamp")?);
        let rwset = RwSet::decode(r)?;
        Ok(TransactionProposal {
            id,
            issuer,
            timestamp,
            rwset,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Endorsement {
    pub endorser: OrgId,
    pub signature: Signature,
}

/// A proposal together with the endorsements collected for it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndorsedTransaction {
    pub proposal: TransactionProposal,
    pub endorsements: Vec<Endorsement>,
}

impl EndorsedTransaction {
    pub fn id(&self) -> Digest {
        self.proposal.id()
    }
}

impl Canonical for EndorsedTransaction {
    fn encode(&self, w: &mut Writer) {
        self.proposal.encode(w);
        w.seq(&self.endorsements, |w, e| {
            w.str(e.endorser.as_str()).fixed(&e.signature.0);
        });
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let proposal = TransactionProposal::decode(r)?;
        let endorsements = r.seq("endorsements", |r| {
            Ok(Endorsement {
                endorser: OrgId::new(&r.string("endorser")?).map_err(|_| DecodeError::Invalid("endorser"))?,
                signature: Signature(r.array::<SIGNATURE_LEN>("signature")?),
            })
        })?;
        Ok(EndorsedTransaction { proposal, endorsements })
    }
}
