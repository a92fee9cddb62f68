mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use common::*;
use fedgbp_core::admin::{CommandError, CommandOutcome};
use fedgbp_core::ledger::{
    AccessDecision, Action, BlockLog, ChaincodeError, EndorsedTransaction, EndorsementPolicyExpr, Ledger,
    LedgerError, Network, OrdererConfig, StateKey, TxValidity, Write,
};
use fedgbp_core::policy::{parse_command, render_writes};
use fedgbp_core::{ManualClock, QualifiedName, Timestamp};
use proptest::prelude::*;

fn q(s: &str) -> QualifiedName {
    QualifiedName::parse(s).unwrap()
}

#[test]
fn cross_org_grant_then_membership_lapses() {
    let (mut net, clock) = network(&["orga", "orgb"]);
    cross_org_scenario(&mut net);
    let ledger = net.ledger();
    let now = net.now();
    let week = 7 * 24 * 3600 * 1000;
    // The group was created in the second transaction, one block after start.
    let dept = ledger.query_state(&StateKey::department(&q("orgb.dbaccess"))).unwrap();
    let expiry = dept.as_department().unwrap().members[0].expiry.unwrap();
    assert!(expiry > T0 + week && expiry <= now.0 + week);
    assert_eq!(
        ledger.access_decision(&q("orga.alice"), &q("orgb.internaldb"), now),
        AccessDecision::Allow { expiry: Some(expiry) }
    );
    assert_eq!(ledger.resolve_access(&q("orga.alice"), &q("orgb.internaldb"), now), Action::Allow);
    assert_eq!(dept.owner, org("orgb"));

    clock.set(fedgbp_core::Timestamp(expiry + 1));
    let later = net.now();
    assert_eq!(
        net.ledger().access_decision(&q("orga.alice"), &q("orgb.internaldb"), later),
        AccessDecision::Expired
    );
    assert_eq!(net.ledger().resolve_access(&q("orga.alice"), &q("orgb.internaldb"), later), Action::Deny);
}

#[test]
fn explicit_deny_overrides_group_allow() {
    let (mut net, _) = network(&["orga", "orgb"]);
    cross_org_scenario(&mut net);
    commit(&mut net, "orgb", "gbp policy-rule-create block --src:orga.alice --dst:internalDB --actions deny");
    let now = net.now();
    assert_eq!(
        net.ledger().access_decision(&q("orga.alice"), &q("orgb.internaldb"), now),
        AccessDecision::Deny
    );
}

#[test]
fn unrelated_user_has_no_policy() {
    let (mut net, _) = network(&["orga", "orgb"]);
    cross_org_scenario(&mut net);
    commit(&mut net, "orga", "gbp member-create bob --ip 10.0.0.3");
    let now = net.now();
    assert_eq!(
        net.ledger().access_decision(&q("orga.bob"), &q("orgb.internaldb"), now),
        AccessDecision::NoPolicy
    );
}

const ORGS: [&str; 4] = ["orga", "orgb", "orgc", "orgd"];

/// One create command per asset kind, owned by `o`; the policy needs the
/// user and resource to exist first.
fn create_commands(o: &str) -> Vec<(&'static str, String)> {
    vec![
        ("member", format!("gbp member-create {o}.u")),
        ("resource", format!("gbp resource-create {o}.r")),
        ("group", format!("gbp group-create {o}.g --add:{o}.u")),
        ("policy", format!("gbp policy-rule-create p --src:{o}.u --dst:{o}.r --actions allow")),
    ]
}

fn delete_command(kind: &str, o: &str) -> String {
    match kind {
        "member" => format!("gbp member-delete {o}.u"),
        "resource" => format!("gbp resource-delete {o}.r"),
        "group" => format!("gbp group-delete {o}.g"),
        _ => format!("gbp policy-rule-delete --src:{o}.u --dst:{o}.r"),
    }
}

fn is_ownership_violation(r: &Result<CommandOutcome, CommandError>) -> bool {
    matches!(
        r,
        Err(CommandError::Ledger(LedgerError::ChaincodeRejection(ChaincodeError::OwnershipViolation { .. })))
    )
}

#[test]
fn ownership_matrix() {
    let (mut net, _) = network(&ORGS);
    let mut owner_ok = 0;
    for o in ORGS {
        for (_, cmd) in create_commands(o) {
            assert!(matches!(run(&mut net, o, &cmd), Ok(CommandOutcome::Committed(_))), "{o}: {cmd}");
            owner_ok += 1;
        }
    }
    // Every foreign organization tries to delete every asset of every owner,
    // and to create inside another organization's namespace.
    let mut foreign_rejected = 0;
    let height = net.ledger().height();
    for owner in ORGS {
        for kind in ["member", "resource", "group", "policy"] {
            for intruder in ORGS.iter().filter(|&&x| x != owner) {
                let r = run(&mut net, intruder, &delete_command(kind, owner));
                assert!(is_ownership_violation(&r), "{intruder} deleting {owner}'s {kind}: {r:?}");
                foreign_rejected += 1;
            }
        }
        let intruder = ORGS.iter().find(|&&x| x != owner).unwrap();
        let r = run(&mut net, intruder, &format!("gbp member-create {owner}.squatter"));
        assert!(is_ownership_violation(&r), "{r:?}");
    }
    // Rejected proposals never reach the orderer.
    assert_eq!(net.ledger().height(), height);
    // Owners can remove what they own, dependants first.
    for o in ORGS {
        for kind in ["policy", "group", "resource", "member"] {
            let r = run(&mut net, o, &delete_command(kind, o));
            assert!(matches!(r, Ok(CommandOutcome::Committed(_))), "{o} deleting its {kind}: {r:?}");
            owner_ok += 1;
        }
    }
    assert_eq!(owner_ok, 32);
    assert_eq!(foreign_rejected, 48);
}

#[test]
fn queries_leave_the_chain_alone() {
    let (mut net, _) = network(&["orga", "orgb"]);
    cross_org_scenario(&mut net);
    let height = net.ledger().height();
    let r = run(&mut net, "orgb", "gbp show group dbaccess").unwrap();
    let CommandOutcome::Query(Some(asset)) = r else { panic!("{r:?}") };
    assert_eq!(asset.owner, org("orgb"));
    let r = run(&mut net, "orgb", "gbp show policy --src:dbaccess --dst:internalDB").unwrap();
    assert!(matches!(r, CommandOutcome::Query(Some(_))));
    assert_eq!(net.ledger().height(), height);
}

#[test]
fn offline_endorser_blocks_submission_under_all_of() {
    let (mut net, _) = network(&["orga", "orgb"]);
    net.set_offline(&org("orgb"), true);
    let height = net.ledger().height();
    let r = run(&mut net, "orga", "gbp member-create alice");
    assert!(matches!(r, Err(CommandError::Ledger(LedgerError::PolicyUnsatisfied))), "{r:?}");
    assert_eq!(net.ledger().height(), height);
    assert!(net.ledger().query_state(&StateKey::user(&q("orga.alice"))).is_none());
}

#[test]
fn majority_tolerates_one_offline_endorser() {
    let orgs: Vec<_> = ["orga", "orgb", "orgc"].iter().map(|s| org(s)).collect();
    let (mut net, _) = network_with(&["orga", "orgb", "orgc"], Some(EndorsementPolicyExpr::majority(orgs).unwrap()));
    net.set_offline(&org("orgc"), true);
    commit(&mut net, "orga", "gbp member-create alice");
    net.set_offline(&org("orgb"), true);
    let r = run(&mut net, "orga", "gbp member-create bob");
    assert!(matches!(r, Err(CommandError::Ledger(LedgerError::PolicyUnsatisfied))), "{r:?}");
}

#[test]
fn replay_reproduces_state_byte_for_byte() {
    let (mut net, clock) = network(&["orga", "orgb"]);
    cross_org_scenario(&mut net);
    for i in 0..20 {
        commit(&mut net, "orga", &format!("gbp member-create m{i} --ip 10.1.0.{i}"));
        clock.advance(7);
    }
    commit(&mut net, "orgb", "gbp policy-rule-delete --src:dbaccess --dst:internalDB");
    let log = net.ledger().log().read_all().unwrap();
    let replayed = Ledger::replay(&log, BlockLog::memory()).unwrap();
    assert_eq!(replayed.state().snapshot_bytes(), net.ledger().state().snapshot_bytes());
    assert_eq!(replayed.tip_digest(), net.ledger().tip_digest());
    assert_eq!(replayed.height(), net.ledger().height());
    assert_eq!(replayed.tx_count(), net.ledger().tx_count());
    assert_eq!(replayed.log().read_all().unwrap(), log);
}

#[test]
fn replay_rejects_a_truncated_genesis() {
    let (net, _) = network(&["orga"]);
    let log = net.ledger().log().read_all().unwrap();
    assert!(Ledger::replay(&log[..log.len() / 2], BlockLog::memory()).is_err());
}

#[derive(Clone, Debug)]
struct Op {
    issuer: usize,
    slot: usize,
}

const MVCC_ORGS: [&str; 2] = ["orga", "orgb"];

fn name_of(op: &Op) -> String {
    format!("{}.k{}", MVCC_ORGS[op.issuer], op.slot)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// Transactions simulated against the same snapshot and ordered into one
    /// block: a transaction commits exactly when no earlier committed
    /// transaction in the block wrote a key it read, and the final state is
    /// what running the committed transactions one after another produces.
    #[test]
    fn mvcc_matches_serial_execution(
        seeded in proptest::collection::vec(any::<bool>(), 4),
        ops in proptest::collection::vec((0..2usize, 0..4usize).prop_map(|(issuer, slot)| Op { issuer, slot }), 1..10),
    ) {
        let (mut net, _) = network(&MVCC_ORGS);
        let mut present: BTreeMap<String, bool> = BTreeMap::new();
        for (slot, &on) in seeded.iter().enumerate() {
            for (issuer, o) in MVCC_ORGS.iter().enumerate() {
                let name = name_of(&Op { issuer, slot });
                if on {
                    commit(&mut net, o, &format!("gbp member-create {name}"));
                }
                present.insert(name, on);
            }
        }

        let snapshot = present.clone();
        let mut txs = Vec::new();
        for op in &ops {
            let o = MVCC_ORGS[op.issuer];
            let name = name_of(op);
            let line = if snapshot[&name] {
                format!("gbp member-delete {name}")
            } else {
                format!("gbp member-create {name}")
            };
            let intent = parse_command(&line).unwrap();
            let writes: Vec<Write> = render_writes(&intent, &org(o), net.ledger().state(), net.now()).unwrap();
            let proposal = net.propose(&org(o), writes);
            let endorsements = net.collect_endorsements(&proposal).unwrap();
            txs.push(EndorsedTransaction { proposal, endorsements });
        }
        let read_sets: Vec<BTreeSet<StateKey>> =
            txs.iter().map(|t| t.proposal.rwset.reads.iter().map(|r| r.key.clone()).collect()).collect();
        let write_sets: Vec<BTreeSet<StateKey>> =
            txs.iter().map(|t| t.proposal.rwset.writes.iter().map(|w| w.key.clone()).collect()).collect();

        let height = net.ledger().height();
        for tx in txs {
            net.submit(tx).unwrap();
        }
        let receipts = net.flush().unwrap();
        prop_assert_eq!(receipts.len(), ops.len());
        prop_assert!(receipts.iter().all(|r| r.height == height + 1));

        let mut written: BTreeSet<StateKey> = BTreeSet::new();
        let mut model = snapshot;
        for (i, r) in receipts.iter().enumerate() {
            let expect_valid = read_sets[i].is_disjoint(&written);
            let expected = if expect_valid { TxValidity::Valid } else { TxValidity::MvccConflict };
            prop_assert_eq!(r.validity, expected, "tx {}", i);
            if expect_valid {
                written.extend(write_sets[i].iter().cloned());
                let name = name_of(&ops[i]);
                let was = model[&name];
                model.insert(name, !was);
            }
        }
        for (name, &on) in &model {
            let key = StateKey::user(&q(name));
            prop_assert_eq!(net.ledger().query_state(&key).is_some(), on, "{}", name);
        }
    }
}

#[test]
fn file_backed_ledger_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.log");
    let clock = Arc::new(ManualClock::new(Timestamp(T0)));
    let mut net = Network::bootstrap(
        identities(&["orga", "orgb"]),
        None,
        OrdererConfig::default(),
        clock.clone(),
        BlockLog::open(&path).unwrap(),
    )
    .unwrap();
    cross_org_scenario(&mut net);
    let (digest, height, bytes) = {
        let l = net.ledger();
        (l.state().snapshot_digest(), l.height(), l.chain_size_bytes())
    };
    drop(net);

    let ledger = Ledger::open(&path).unwrap();
    assert_eq!(ledger.state().snapshot_digest(), digest);
    assert_eq!(ledger.height(), height);
    // Chain size counts blocks; the file adds a length prefix per block.
    assert_eq!(std::fs::metadata(&path).unwrap().len(), bytes + 4 * (height + 1));

    // Appends after reopening land in the same file.
    let mut net = Network::from_ledger(
        ledger,
        identities(&["orga", "orgb"]),
        OrdererConfig::default(),
        clock,
    );
    commit(&mut net, "orga", "gbp member-create bob --ip 10.0.0.3");
    let height = net.ledger().height();
    drop(net);
    let ledger = Ledger::open(&path).unwrap();
    assert_eq!(ledger.height(), height);
    assert!(ledger.query_state(&StateKey::user(&q("orga.bob"))).is_some());
}
