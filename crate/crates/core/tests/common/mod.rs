#![allow(dead_code)]

use std::sync::Arc;

use fedgbp_core::admin::{run_command, CommandError, CommandOutcome};
use fedgbp_core::crypto::KeyPair;
use fedgbp_core::ledger::{BlockLog, EndorsementPolicyExpr, Network, OrdererConfig, OrgIdentity, TxReceipt};
use fedgbp_core::{ManualClock, OrgId, Timestamp};

pub const T0: u64 = 1_700_000_000_000;

pub fn org(s: &str) -> OrgId {
    OrgId::new(s).unwrap()
}

pub fn identities(names: &[&str]) -> Vec<OrgIdentity> {
    names.iter().map(|n| OrgIdentity::from_label(n)).collect()
}

pub fn network_with(names: &[&str], policy: Option<EndorsementPolicyExpr>) -> (Network, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(Timestamp(T0)));
    let net = Network::bootstrap(
        identities(names),
        policy,
        OrdererConfig::default(),
        clock.clone(),
        BlockLog::memory(),
    )
    .unwrap();
    (net, clock)
}

pub fn network(names: &[&str]) -> (Network, Arc<ManualClock>) {
    network_with(names, None)
}

pub fn user_keys(name: &str) -> KeyPair {
    KeyPair::from_label(&format!("user:{name}"))
}

pub fn run(net: &mut Network, issuer: &str, line: &str) -> Result<CommandOutcome, CommandError> {
    run_command(net, &org(issuer), line)
}

pub fn commit(net: &mut Network, issuer: &str, line: &str) -> TxReceipt {
    match run(net, issuer, line) {
        Ok(CommandOutcome::Committed(r)) => r,
        other => panic!("{line:?} as {issuer}: {other:?}"),
    }
}

/// Two organizations, alice at orga in orgb's dbaccess group, allowed to
/// reach orgb's internaldb.
pub fn cross_org_scenario(net: &mut Network) {
    let alice = user_keys("orga.alice").public().to_hex();
    commit(net, "orga", &format!("gbp member-create alice --ip 10.0.0.2 --pubkey {alice}"));
    commit(net, "orgb", "gbp group-create dbaccess --add:orga.alice --timeout 1w");
    commit(net, "orgb", "gbp member-create internalDB --ip 10.0.1.7");
    commit(
        net,
        "orgb",
        "gbp policy-rule-create external-human-res --src:dbaccess --dst:internalDB --actions allow",
    );
}
