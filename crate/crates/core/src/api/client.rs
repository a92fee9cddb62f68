use std::io::{self, BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

use crate::clock::Timestamp;
use crate::codec::{Canonical, DecodeError};
use crate::control::{LedgerView, ViewError};
use crate::eid::Eid;
use crate::ledger::{AccessDecision, Asset, AssetBody, EidGrant, EndorsedTransaction, Policy, PolicyPair, StateKey, TxReceipt, User};
use crate::names::QualifiedName;

use super::messages::{read_record, write_record, ProposalRequest, RemoteError, Request, Response, Status};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("ledger connection failed: {0}")]
    Io(#[from] io::Error),
    #[error("ledger sent an undecodable response: {0}")]
    Decode(#[from] DecodeError),
    #[error("ledger closed the connection")]
    Closed,
    #[error("ledger returned {0}")]
    Remote(RemoteError),
    #[error("ledger answered with an unexpected response kind")]
    Unexpected,
}

struct Conn {
    input: BufReader<TcpStream>,
    output: BufWriter<TcpStream>,
}

/// One persistent connection to the ledger socket; calls are serialized.
pub struct LedgerClient {
    conn: Mutex<Conn>,
}

impl std::fmt::Debug for LedgerClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LedgerClient").finish_non_exhaustive()
    }
}

impl LedgerClient {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self, ClientError> {
        let mut last = io::Error::new(io::ErrorKind::AddrNotAvailable, "no address to connect to");
        for a in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(stream) => {
                    stream.set_nodelay(true)?;
                    let input = BufReader::new(stream.try_clone()?);
                    return Ok(LedgerClient {
                        conn: Mutex::new(Conn {
                            input,
                            output: BufWriter::new(stream),
                        }),
                    });
                }
                Err(e) => last = e,
            }
        }
        Err(ClientError::Io(last))
    }

    pub fn call(&self, req: &Request) -> Result<Response, ClientError> {
        let mut conn = self.conn.lock().map_err(|_| ClientError::Closed)?;
        write_record(&mut conn.output, &req.to_bytes())?;
        let body = read_record(&mut conn.input)?.ok_or(ClientError::Closed)?;
        match Response::from_bytes(&body)? {
            Response::Error(e) => Err(ClientError::Remote(e)),
            r => Ok(r),
        }
    }

    fn asset(&self, req: Request) -> Result<Option<Asset>, ClientError> {
        match self.call(&req)? {
            Response::Asset(a) => Ok(a),
            _ => Err(ClientError::Unexpected),
        }
    }

    pub fn get_policy(&self, src: &QualifiedName, dst: &QualifiedName) -> Result<Option<Policy>, ClientError> {
        let a = self.asset(Request::GetPolicy {
            src: src.clone(),
            dst: dst.clone(),
        })?;
        Ok(a.and_then(|a| match a.body {
            AssetBody::Policy(p) => Some(p),
            _ => None,
        }))
    }

    pub fn get_user_pubkey(&self, user: &QualifiedName) -> Result<Option<[u8; 32]>, ClientError> {
        match self.call(&Request::GetUserPubkey { user: user.clone() })? {
            Response::PublicKey(k) => Ok(k),
            _ => Err(ClientError::Unexpected),
        }
    }

    pub fn get_user(&self, user: &QualifiedName) -> Result<Option<User>, ClientError> {
        let a = self.asset(Request::GetUser { user: user.clone() })?;
        Ok(a.and_then(|a| match a.body {
            AssetBody::User(u) => Some(u),
            _ => None,
        }))
    }

    pub fn query_state(&self, key: &StateKey) -> Result<Option<Asset>, ClientError> {
        self.asset(Request::QueryState { key: key.clone() })
    }

    pub fn export_policy_snapshot(&self) -> Result<Vec<PolicyPair>, ClientError> {
        match self.call(&Request::ExportPolicySnapshot)? {
            Response::Policies(p) => Ok(p),
            _ => Err(ClientError::Unexpected),
        }
    }

    pub fn export_eid_snapshot(&self) -> Result<Vec<EidGrant>, ClientError> {
        match self.call(&Request::ExportEidSnapshot)? {
            Response::Grants(g) => Ok(g),
            _ => Err(ClientError::Unexpected),
        }
    }

    pub fn status(&self) -> Result<Status, ClientError> {
        match self.call(&Request::Status)? {
            Response::Status(s) => Ok(s),
            _ => Err(ClientError::Unexpected),
        }
    }

    pub fn endorse(&self, req: ProposalRequest) -> Result<EndorsedTransaction, ClientError> {
        match self.call(&Request::Endorse(req))? {
            Response::Endorsed(tx) => Ok(tx),
            _ => Err(ClientError::Unexpected),
        }
    }

    /// Submit for ordering and wait until the transaction's block commits.
    pub fn submit(&self, tx: EndorsedTransaction) -> Result<TxReceipt, ClientError> {
        match self.call(&Request::Submit(tx))? {
            Response::Receipt(r) => Ok(r),
            _ => Err(ClientError::Unexpected),
        }
    }
}

fn view_err(e: ClientError) -> ViewError {
    ViewError(e.to_string())
}

/// The map server's slow path over the socket. The ledger applies its own
/// clock to time-dependent answers.
impl LedgerView for LedgerClient {
    fn user(&self, name: &QualifiedName) -> Result<Option<User>, ViewError> {
        self.get_user(name).map_err(view_err)
    }

    fn endpoint_for_eid(&self, eid: Eid) -> Result<Option<QualifiedName>, ViewError> {
        match self.call(&Request::EndpointForEid { eid }).map_err(view_err)? {
            Response::Endpoint(n) => Ok(n),
            _ => Err(view_err(ClientError::Unexpected)),
        }
    }

    fn access_decision(
        &self,
        user: &QualifiedName,
        dst: &QualifiedName,
        _now: Timestamp,
    ) -> Result<AccessDecision, ViewError> {
        let req = Request::AccessDecision {
            user: user.clone(),
            dst: dst.clone(),
        };
        match self.call(&req).map_err(view_err)? {
            Response::Decision(d) => Ok(d),
            _ => Err(view_err(ClientError::Unexpected)),
        }
    }

    fn eid_snapshot(&self, _now: Timestamp) -> Result<Vec<EidGrant>, ViewError> {
        self.export_eid_snapshot().map_err(view_err)
    }

    fn user_directory(&self) -> Result<Vec<User>, ViewError> {
        match self.call(&Request::UserDirectory).map_err(view_err)? {
            Response::Assets(xs) => Ok(xs
                .into_iter()
                .filter_map(|a| match a.body {
                    AssetBody::User(u) => Some(u),
                    _ => None,
                })
                .collect()),
            _ => Err(view_err(ClientError::Unexpected)),
        }
    }
}
