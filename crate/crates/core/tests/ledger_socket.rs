mod common;

use std::io::Write as _;
use std::net::TcpStream;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use common::*;
use fedgbp_core::api::{
    read_record, write_record, ClientError, ErrorCode, LedgerClient, LedgerService, ProposalRequest, Request, Response,
};
use fedgbp_core::codec::Canonical;
use fedgbp_core::crypto::KeyPair;
use fedgbp_core::ledger::{OrgIdentity, StateKey, TxValidity, Write};
use fedgbp_core::policy::{parse_command, render_writes};
use fedgbp_core::QualifiedName;

fn q(s: &str) -> QualifiedName {
    QualifiedName::parse(s).unwrap()
}

fn serve() -> (Arc<RwLock<fedgbp_core::ledger::Network>>, LedgerService) {
    let (net, _) = network(&["orga", "orgb"]);
    let net = Arc::new(RwLock::new(net));
    let service = LedgerService::bind(Arc::clone(&net), "127.0.0.1:0").unwrap();
    (net, service)
}

fn client(service: &LedgerService) -> LedgerClient {
    LedgerClient::connect(service.local_addr(), Duration::from_secs(2)).unwrap()
}

fn writes_for(net: &RwLock<fedgbp_core::ledger::Network>, issuer: &str, line: &str) -> Vec<Write> {
    let net = net.read().unwrap();
    let intent = parse_command(line).unwrap();
    render_writes(&intent, &org(issuer), net.ledger().state(), net.now()).unwrap()
}

fn signed(issuer: &str, writes: Vec<Write>) -> ProposalRequest {
    let keys = OrgIdentity::from_label(issuer).keys().clone();
    ProposalRequest::signed(org(issuer), T0, writes, &keys)
}

fn remote_code(e: ClientError) -> ErrorCode {
    match e {
        ClientError::Remote(r) => r.code,
        other => panic!("expected a remote error, got {other:?}"),
    }
}

#[test]
fn endorse_then_submit_commits() {
    let (net, service) = serve();
    let c = client(&service);
    let writes = writes_for(&net, "orga", "gbp member-create alice --ip 10.0.0.2");
    let tx = c.endorse(signed("orga", writes)).unwrap();
    assert_eq!(tx.endorsements.len(), 2);
    let receipt = c.submit(tx).unwrap();
    assert_eq!(receipt.validity, TxValidity::Valid);
    let user = c.get_user(&q("orga.alice")).unwrap().unwrap();
    assert_eq!(user.ip, Some("10.0.0.2".parse().unwrap()));
    assert_eq!(c.status().unwrap().height, receipt.height);
    assert!(c.query_state(&StateKey::user(&q("orga.bob"))).unwrap().is_none());
}

#[test]
fn requests_signed_by_another_key_are_refused() {
    let (net, service) = serve();
    let c = client(&service);
    let writes = writes_for(&net, "orga", "gbp member-create alice");
    let forged = ProposalRequest::signed(org("orga"), T0, writes, &KeyPair::from_label("impostor"));
    assert_eq!(remote_code(c.endorse(forged).unwrap_err()), ErrorCode::Unauthorized);
    let unknown = signed("orgz", writes_for(&net, "orgz", "gbp member-create eve"));
    assert_eq!(remote_code(c.endorse(unknown).unwrap_err()), ErrorCode::UnknownOrg);
}

#[test]
fn chaincode_rejection_is_reported() {
    let (net, service) = serve();
    let c = client(&service);
    let tx = c.endorse(signed("orga", writes_for(&net, "orga", "gbp member-create alice"))).unwrap();
    c.submit(tx).unwrap();
    let foreign = writes_for(&net, "orgb", "gbp member-delete orga.alice");
    assert_eq!(
        remote_code(c.endorse(signed("orgb", foreign)).unwrap_err()),
        ErrorCode::ChaincodeRejection
    );
}

#[test]
fn offline_endorser_is_policy_unsatisfied() {
    let (net, service) = serve();
    net.write().unwrap().set_offline(&org("orgb"), true);
    let c = client(&service);
    let tx = c.endorse(signed("orga", writes_for(&net, "orga", "gbp member-create alice"))).unwrap();
    assert_eq!(tx.endorsements.len(), 1);
    assert_eq!(remote_code(c.submit(tx).unwrap_err()), ErrorCode::PolicyUnsatisfied);
}

#[test]
fn concurrent_clients_commit_in_one_chain() {
    let (net, service) = serve();
    let addr = service.local_addr();
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let net = Arc::clone(&net);
            std::thread::spawn(move || {
                let c = LedgerClient::connect(addr, Duration::from_secs(2)).unwrap();
                for j in 0..5 {
                    let writes = writes_for(&net, "orga", &format!("gbp member-create u{i}x{j}"));
                    let tx = c.endorse(signed("orga", writes)).unwrap();
                    assert_eq!(c.submit(tx).unwrap().validity, TxValidity::Valid);
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let net = net.read().unwrap();
    assert_eq!(net.ledger().user_directory().len(), 20);
    assert_eq!(net.ledger().tx_count(), 20);
}

#[test]
fn garbage_records_get_a_bad_request_error() {
    let (_net, service) = serve();
    let mut s = TcpStream::connect(service.local_addr()).unwrap();
    s.write_all(&3u32.to_be_bytes()).unwrap();
    s.write_all(&[0xff, 0, 1]).unwrap();
    let body = read_record(&mut s).unwrap().unwrap();
    let Response::Error(e) = Response::from_bytes(&body).unwrap() else { panic!("expected an error") };
    assert_eq!(e.code, ErrorCode::BadRequest);
    // The connection survives and a well-formed request still works.
    write_record(&mut s, &Request::Status.to_bytes()).unwrap();
    let body = read_record(&mut s).unwrap().unwrap();
    assert!(matches!(Response::from_bytes(&body).unwrap(), Response::Status(_)));
}
