use std::io::{self, Read, Write as IoWrite};

use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Reader, Writer};
use crate::crypto::{Digest, KeyPair, PublicKey, Signature, SIGNATURE_LEN};
use crate::eid::Eid;
use crate::ledger::asset::{get_qname, put_qname};
use crate::ledger::{
    AccessDecision, Action, Asset, EidGrant, EndorsedTransaction, PolicyPair, RwSet, StateKey, TxReceipt, TxValidity,
    Write,
};
use crate::names::{OrgId, QualifiedName};

/// Records larger than this are refused rather than allocated.
pub const MAX_RECORD: usize = 64 << 20;

pub fn write_record(out: &mut impl IoWrite, body: &[u8]) -> io::Result<()> {
    let len = u32::try_from(body.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "record too large"))?;
    out.write_all(&len.to_be_bytes())?;
    out.write_all(body)?;
    out.flush()
}

/// Read one record; `Ok(None)` on a clean end of stream.
pub fn read_record(input: &mut impl Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match input.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_RECORD {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "record exceeds size limit"));
    }
    let mut body = vec![0; len];
    input.read_exact(&mut body)?;
    Ok(Some(body))
}

/// A transaction an organization asks the ledger's endorsers to simulate.
/// The creator signature proves the request comes from the issuing org.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProposalRequest {
    pub issuer: OrgId,
    pub timestamp: u64,
    pub writes: Vec<Write>,
    pub creator_signature: Signature,
}

impl ProposalRequest {
    fn digest(issuer: &OrgId, timestamp: u64, writes: &[Write]) -> Digest {
        let rw = RwSet {
            reads: Vec::new(),
            writes: writes.to_vec(),
        };
        Digest::of_parts(&[issuer.as_str().as_bytes(), &timestamp.to_be_bytes(), &rw.to_bytes()])
    }

    pub fn signed(issuer: OrgId, timestamp: u64, writes: Vec<Write>, keys: &KeyPair) -> Self {
        let d = Self::digest(&issuer, timestamp, &writes);
        ProposalRequest {
            creator_signature: keys.sign(d.as_bytes()),
            issuer,
            timestamp,
            writes,
        }
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.verify(
            Self::digest(&self.issuer, self.timestamp, &self.writes).as_bytes(),
            &self.creator_signature,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Request {
    GetPolicy { src: QualifiedName, dst: QualifiedName },
    GetUser { user: QualifiedName },
    GetUserPubkey { user: QualifiedName },
    EndpointForEid { eid: Eid },
    AccessDecision { user: QualifiedName, dst: QualifiedName },
    ExportPolicySnapshot,
    ExportEidSnapshot,
    UserDirectory,
    QueryState { key: StateKey },
    Status,
    Endorse(ProposalRequest),
    Submit(EndorsedTransaction),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    BadRequest,
    UnknownOrg,
    Unauthorized,
    ChaincodeRejection,
    PolicyUnsatisfied,
    Internal,
}

impl ErrorCode {
    fn tag(self) -> u8 {
        match self {
            ErrorCode::BadRequest => 1,
            ErrorCode::UnknownOrg => 2,
            ErrorCode::Unauthorized => 3,
            ErrorCode::ChaincodeRejection => 4,
            ErrorCode::PolicyUnsatisfied => 5,
            ErrorCode::Internal => 6,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, DecodeError> {
        Ok(match tag {
            1 => ErrorCode::BadRequest,
            2 => ErrorCode::UnknownOrg,
            3 => ErrorCode::Unauthorized,
            4 => ErrorCode::ChaincodeRejection,
            5 => ErrorCode::PolicyUnsatisfied,
            6 => ErrorCode::Internal,
            tag => return Err(DecodeError::UnknownTag { what: "error code", tag }),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{code:?}: {message}")]
pub struct RemoteError {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Status {
    pub height: u64,
    pub tx_count: u64,
    pub chain_bytes: u64,
    pub now: u64,
    pub orgs: Vec<OrgId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Response {
    Asset(Option<Asset>),
    PublicKey(Option<[u8; 32]>),
    Endpoint(Option<QualifiedName>),
    Decision(AccessDecision),
    Policies(Vec<PolicyPair>),
    Grants(Vec<EidGrant>),
    Assets(Vec<Asset>),
    Status(Status),
    Endorsed(EndorsedTransaction),
    Receipt(TxReceipt),
    Error(RemoteError),
}

fn put_org(w: &mut Writer, o: &OrgId) {
    w.str(o.as_str());
}

fn get_org(r: &mut Reader<'_>) -> Result<OrgId, DecodeError> {
    OrgId::new(&r.string("org")?).map_err(|_| DecodeError::Invalid("org id"))
}

fn get_eid(r: &mut Reader<'_>) -> Result<Eid, DecodeError> {
    Eid::new(r.u32("eid")?).map_err(|_| DecodeError::Invalid("eid"))
}

fn put_opt_u64(w: &mut Writer, v: Option<u64>) {
    w.option(v.as_ref(), |w, x| {
        w.u64(*x);
    });
}

fn put_asset(w: &mut Writer, a: &Asset) {
    w.bytes(&a.to_bytes());
}

fn get_asset(r: &mut Reader<'_>) -> Result<Asset, DecodeError> {
    Asset::from_bytes(r.bytes("asset")?)
}

fn put_writes(w: &mut Writer, writes: &[Write]) {
    RwSet {
        reads: Vec::new(),
        writes: writes.to_vec(),
    }
    .encode(w);
}

fn get_writes(r: &mut Reader<'_>) -> Result<Vec<Write>, DecodeError> {
    let rw = RwSet::decode(r)?;
    if !rw.reads.is_empty() {
        return Err(DecodeError::Invalid("proposal request carries reads"));
    }
    Ok(rw.writes)
}

impl Canonical for Request {
    fn encode(&self, w: &mut Writer) {
        match self {
            Request::GetPolicy { src, dst } => {
                w.u8(1);
                put_qname(w, src);
                put_qname(w, dst);
            }
            Request::GetUser { user } => {
                w.u8(2);
                put_qname(w, user);
            }
            Request::GetUserPubkey { user } => {
                w.u8(3);
                put_qname(w, user);
            }
            Request::EndpointForEid { eid } => {
                w.u8(4).u32(eid.get());
            }
            Request::AccessDecision { user, dst } => {
                w.u8(5);
                put_qname(w, user);
                put_qname(w, dst);
            }
            Request::ExportPolicySnapshot => {
                w.u8(6);
            }
            Request::ExportEidSnapshot => {
                w.u8(7);
            }
            Request::UserDirectory => {
                w.u8(8);
            }
            Request::QueryState { key } => {
                w.u8(9).str(key.as_str());
            }
            Request::Status => {
                w.u8(10);
            }
            Request::Endorse(p) => {
                w.u8(11);
                put_org(w, &p.issuer);
                w.u64(p.timestamp);
                put_writes(w, &p.writes);
                w.fixed(&p.creator_signature.0);
            }
            Request::Submit(tx) => {
                w.u8(12);
                tx.encode(w);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8("request")? {
            1 => Request::GetPolicy {
                src: get_qname(r)?,
                dst: get_qname(r)?,
            },
            2 => Request::GetUser { user: get_qname(r)? },
            3 => Request::GetUserPubkey { user: get_qname(r)? },
            4 => Request::EndpointForEid { eid: get_eid(r)? },
            5 => Request::AccessDecision {
                user: get_qname(r)?,
                dst: get_qname(r)?,
            },
            6 => Request::ExportPolicySnapshot,
            7 => Request::ExportEidSnapshot,
            8 => Request::UserDirectory,
            9 => Request::QueryState {
                key: StateKey::from_raw(r.string("key")?),
            },
            10 => Request::Status,
            11 => Request::Endorse(ProposalRequest {
                issuer: get_org(r)?,
                timestamp: r.u64("timestamp")?,
                writes: get_writes(r)?,
                creator_signature: Signature(r.array::<SIGNATURE_LEN>("creator signature")?),
            }),
            12 => Request::Submit(EndorsedTransaction::decode(r)?),
            tag => return Err(DecodeError::UnknownTag { what: "request", tag }),
        })
    }
}

fn put_decision(w: &mut Writer, d: &AccessDecision) {
    match d {
        AccessDecision::Allow { expiry } => {
            w.u8(1);
            put_opt_u64(w, *expiry);
        }
        AccessDecision::Deny => {
            w.u8(2);
        }
        AccessDecision::NoPolicy => {
            w.u8(3);
        }
        AccessDecision::Expired => {
            w.u8(4);
        }
    }
}

fn get_decision(r: &mut Reader<'_>) -> Result<AccessDecision, DecodeError> {
    Ok(match r.u8("decision")? {
        1 => AccessDecision::Allow {
            expiry: r.option("expiry", |r| r.u64("expiry"))?,
        },
        2 => AccessDecision::Deny,
        3 => AccessDecision::NoPolicy,
        4 => AccessDecision::Expired,
        tag => return Err(DecodeError::UnknownTag { what: "decision", tag }),
    })
}

impl Canonical for Response {
    fn encode(&self, w: &mut Writer) {
        match self {
            Response::Asset(a) => {
                w.u8(1).option(a.as_ref(), put_asset);
            }
            Response::PublicKey(k) => {
                w.u8(2).option(k.as_ref(), |w, k| {
                    w.fixed(k);
                });
            }
            Response::Endpoint(n) => {
                w.u8(3).option(n.as_ref(), put_qname);
            }
            Response::Decision(d) => {
                w.u8(4);
                put_decision(w, d);
            }
            Response::Policies(ps) => {
                w.u8(5).seq(ps, |w, p| {
                    put_qname(w, &p.src);
                    put_qname(w, &p.dst);
                    w.u8(match p.action {
                        Action::Allow => 1,
                        Action::Deny => 2,
                    });
                });
            }
            Response::Grants(gs) => {
                w.u8(6).seq(gs, |w, g| {
                    w.u32(g.src.get()).u32(g.dst.get());
                    put_opt_u64(w, g.expiry);
                });
            }
            Response::Assets(xs) => {
                w.u8(7).seq(xs, put_asset);
            }
            Response::Status(s) => {
                w.u8(8).u64(s.height).u64(s.tx_count).u64(s.chain_bytes).u64(s.now);
                w.seq(&s.orgs, put_org);
            }
            Response::Endorsed(tx) => {
                w.u8(9);
                tx.encode(w);
            }
            Response::Receipt(rc) => {
                w.u8(10)
                    .fixed(rc.tx_id.as_bytes())
                    .u64(rc.height)
                    .u32(rc.index)
                    .u8(rc.validity.tag());
            }
            Response::Error(e) => {
                w.u8(255).u8(e.code.tag()).str(&e.message);
            }
        }
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8("response")? {
            1 => Response::Asset(r.option("asset", get_asset)?),
            2 => Response::PublicKey(r.option("public key", |r| r.array::<32>("public key"))?),
            3 => Response::Endpoint(r.option("endpoint", get_qname)?),
            4 => Response::Decision(get_decision(r)?),
            5 => Response::Policies(r.seq("policies", |r| {
                Ok(PolicyPair {
                    src: get_qname(r)?,
                    dst: get_qname(r)?,
                    action: match r.u8("action")? {
                        1 => Action::Allow,
                        2 => Action::Deny,
                        tag => return Err(DecodeError::UnknownTag { what: "action", tag }),
                    },
                })
            })?),
            6 => Response::Grants(r.seq("grants", |r| {
                Ok(EidGrant {
                    src: get_eid(r)?,
                    dst: get_eid(r)?,
                    expiry: r.option("expiry", |r| r.u64("expiry"))?,
                })
            })?),
            7 => Response::Assets(r.seq("assets", get_asset)?),
            8 => Response::Status(Status {
                height: r.u64("height")?,
                tx_count: r.u64("tx count")?,
                chain_bytes: r.u64("chain bytes")?,
                now: r.u64("now")?,
                orgs: r.seq("orgs", get_org)?,
            }),
            9 => Response::Endorsed(EndorsedTransaction::decode(r)?),
            10 => Response::Receipt(TxReceipt {
                tx_id: Digest(r.array("tx id")?),
                height: r.u64("height")?,
                index: r.u32("index")?,
                validity: TxValidity::from_tag(r.u8("validity")?)?,
            }),
            255 => Response::Error(RemoteError {
                code: ErrorCode::from_tag(r.u8("error code")?)?,
                message: r.string("message")?,
            }),
            tag => return Err(DecodeError::UnknownTag { what: "response", tag }),
        })
    }
}
