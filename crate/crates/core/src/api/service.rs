use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::clock::Timestamp;
use crate::codec::Canonical;
use crate::ledger::{propose, Asset, AssetBody, EndorsedTransaction, LedgerError, Network, StateKey};

use super::messages::{read_record, write_record, ErrorCode, ProposalRequest, RemoteError, Request, Response, Status};

fn error(code: ErrorCode, message: impl ToString) -> Response {
    Response::Error(RemoteError {
        code,
        message: message.to_string(),
    })
}

fn ledger_error(e: LedgerError) -> Response {
    let code = match &e {
        LedgerError::UnknownOrg(_) => ErrorCode::UnknownOrg,
        LedgerError::ChaincodeRejection(_) | LedgerError::SimulationMismatch(_) => ErrorCode::ChaincodeRejection,
        LedgerError::PolicyUnsatisfied => ErrorCode::PolicyUnsatisfied,
        _ => ErrorCode::Internal,
    };
    error(code, e)
}

/// Answer one request against a shared network. Writers hold the lock only
/// while touching the network, never while waiting for a block to be cut.
pub fn handle_request(network: &RwLock<Network>, req: Request) -> Response {
    match req {
        Request::Endorse(p) => endorse_request(network, p),
        Request::Submit(tx) => submit(network, tx),
        query => {
            let Ok(net) = network.read() else {
                return error(ErrorCode::Internal, "ledger lock poisoned");
            };
            let ledger = net.ledger();
            let now = net.now();
            match query {
                Request::GetPolicy { src, dst } => Response::Asset(
                    ledger
                        .query_state(&StateKey::policy(&src, &dst))
                        .filter(|a| matches!(&a.body, AssetBody::Policy(p) if p.in_force_at(now))),
                ),
                Request::GetUser { user } => Response::Asset(ledger.query_state(&StateKey::user(&user))),
                Request::GetUserPubkey { user } => {
                    Response::PublicKey(ledger.user_public_key(&user).map(|k| k.to_bytes()))
                }
                Request::EndpointForEid { eid } => Response::Endpoint(ledger.endpoint_for_eid(eid)),
                Request::AccessDecision { user, dst } => Response::Decision(ledger.access_decision(&user, &dst, now)),
                Request::ExportPolicySnapshot => Response::Policies(ledger.export_policy_snapshot(now)),
                Request::ExportEidSnapshot => Response::Grants(ledger.export_eid_snapshot(now)),
                Request::UserDirectory => Response::Assets(
                    ledger
                        .state()
                        .scan_prefix("user:")
                        .filter_map(|(_, e)| Asset::from_bytes(&e.value).ok())
                        .collect(),
                ),
                Request::QueryState { key } => Response::Asset(ledger.query_state(&key)),
                Request::Status => Response::Status(Status {
                    height: ledger.height(),
                    tx_count: ledger.tx_count(),
                    chain_bytes: ledger.chain_size_bytes(),
                    now: now.0,
                    orgs: ledger.config().msp.orgs().cloned().collect(),
                }),
                Request::Endorse(_) | Request::Submit(_) => unreachable!("handled above"),
            }
        }
    }
}

fn endorse_request(network: &RwLock<Network>, p: ProposalRequest) -> Response {
    let Ok(net) = network.read() else {
        return error(ErrorCode::Internal, "ledger lock poisoned");
    };
    let ledger = net.ledger();
    let Some(key) = ledger.config().msp.public_key(&p.issuer) else {
        return error(ErrorCode::UnknownOrg, format!("organization {} is not registered", p.issuer));
    };
    if !p.verify(key) {
        return error(ErrorCode::Unauthorized, format!("request is not signed by {}", p.issuer));
    }
    let proposal = propose(p.issuer, Timestamp(p.timestamp), p.writes, ledger.state());
    match net.collect_endorsements(&proposal) {
        Ok(endorsements) => Response::Endorsed(EndorsedTransaction { proposal, endorsements }),
        Err(e) => ledger_error(e),
    }
}

fn submit(network: &RwLock<Network>, tx: EndorsedTransaction) -> Response {
    let id = tx.id();
    let deadline = {
        let Ok(mut net) = network.write() else {
            return error(ErrorCode::Internal, "ledger lock poisoned");
        };
        if let Err(e) = net.submit(tx) {
            return ledger_error(e);
        }
        if let Err(e) = net.poll() {
            return ledger_error(e);
        }
        if let Some(r) = net.receipt(&id) {
            return Response::Receipt(r);
        }
        (Arc::clone(net.clock()), net.next_deadline())
    };
    let (clock, mut next) = deadline;
    loop {
        if let Some(d) = next {
            clock.wait_until(d);
        }
        let Ok(mut net) = network.write() else {
            return error(ErrorCode::Internal, "ledger lock poisoned");
        };
        if let Err(e) = net.poll() {
            return ledger_error(e);
        }
        if let Some(r) = net.receipt(&id) {
            return Response::Receipt(r);
        }
        next = net.next_deadline();
        if next.is_none() {
            return error(ErrorCode::Internal, format!("transaction {} was lost", id.short()));
        }
    }
}

fn serve_connection(network: &RwLock<Network>, stream: TcpStream) -> io::Result<()> {
    let mut input = BufReader::new(stream.try_clone()?);
    let mut output = BufWriter::new(stream);
    while let Some(body) = read_record(&mut input)? {
        let response = match Request::from_bytes(&body) {
            Ok(req) => handle_request(network, req),
            Err(e) => error(ErrorCode::BadRequest, e),
        };
        write_record(&mut output, &response.to_bytes())?;
    }
    Ok(())
}

/// The ledger's query and submission socket, served from background threads.
#[derive(Debug)]
pub struct LedgerService {
    local: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl LedgerService {
    pub fn bind(network: Arc<RwLock<Network>>, addr: impl ToSocketAddrs) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let local = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let acceptor = std::thread::Builder::new().name("ledger-api".into()).spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let net = Arc::clone(&network);
                        let spawned = std::thread::Builder::new().name("ledger-api-conn".into()).spawn(move || {
                            let _ = stream.set_nonblocking(false);
                            let _ = stream.set_nodelay(true);
                            if let Err(e) = serve_connection(&net, stream) {
                                tracing::debug!(%peer, error = %e, "ledger api connection closed");
                            }
                        });
                        if let Err(e) = spawned {
                            tracing::warn!(error = %e, "could not spawn connection handler");
                        }
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    Err(e) => tracing::warn!(error = %e, "ledger api accept failed"),
                }
            }
        })?;
        Ok(LedgerService {
            local,
            stop,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local
    }

    /// Block until the acceptor thread exits.
    pub fn join(mut self) {
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
    }

    fn stop_acceptor(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
    }
}

impl Drop for LedgerService {
    fn drop(&mut self) {
        self.stop_acceptor();
    }
}
