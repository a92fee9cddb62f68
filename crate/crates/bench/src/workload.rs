//! Synthetic consortia and bulk loading shared by the experiments.

use std::sync::Arc;

use serde::Serialize;

use fedgbp_core::ledger::{
    Action, Asset, AssetBody, BlockLog, EndorsedTransaction, EndorsementPolicyExpr, Ledger, Network, OrdererConfig,
    OrgIdentity, Policy, Resource, TxValidity, User, Write,
};
use fedgbp_core::{ManualClock, Name, OrgId, QualifiedName, Timestamp};

use crate::error::BenchError;

/// Logical start time of every synthetic network.
pub const T0: Timestamp = Timestamp(1_700_000_000_000);

/// `org01`, `org02`, ... Fixed width keeps transaction sizes independent of
/// which organization issued or endorsed them.
pub fn org_ids(k: usize) -> Vec<OrgId> {
    (1..=k).map(|i| OrgId::new(&format!("org{i:02}")).expect("valid org id")).collect()
}

pub fn org(name: &str) -> OrgId {
    OrgId::new(name).expect("valid org id")
}

pub fn qname(org: &OrgId, name: &str) -> QualifiedName {
    QualifiedName::new(org.clone(), Name::new(name).expect("valid name"))
}

/// A network of `orgs` on a memory log whose policy defaults to every org.
pub fn consortium(
    orgs: &[OrgId],
    policy: Option<EndorsementPolicyExpr>,
) -> Result<(Network, Arc<ManualClock>), BenchError> {
    let clock = Arc::new(ManualClock::new(T0));
    let ids = orgs.iter().map(|o| OrgIdentity::from_label(o.as_str())).collect();
    let net = Network::bootstrap(ids, policy, OrdererConfig::default(), clock.clone(), BlockLog::memory())?;
    Ok((net, clock))
}

pub fn asset(owner: &OrgId, now: Timestamp, body: AssetBody) -> Asset {
    Asset {
        owner: owner.clone(),
        created: now.0,
        body,
    }
}

pub fn user_write(owner: &OrgId, name: &str, now: Timestamp) -> Write {
    Write::create(&asset(
        owner,
        now,
        AssetBody::User(User {
            name: qname(owner, name),
            public_key: None,
            ip: None,
            department: None,
        }),
    ))
}

pub fn resource_write(owner: &OrgId, name: &str, now: Timestamp) -> Write {
    Write::create(&asset(
        owner,
        now,
        AssetBody::Resource(Resource {
            name: qname(owner, name),
            ip: None,
        }),
    ))
}

pub fn allow_write(owner: &OrgId, src: QualifiedName, dst: QualifiedName, now: Timestamp) -> Write {
    Write::create(&asset(
        owner,
        now,
        AssetBody::Policy(Policy {
            label: Name::new("p").expect("valid label"),
            src,
            dst,
            action: Action::Allow,
            valid_from: None,
            expiry: None,
        }),
    ))
}

/// Endorse and queue one transaction per write set, cutting a block after
/// every `per_block` of them and flushing the remainder. Every transaction
/// must commit as valid.
pub fn load(net: &mut Network, issuer: &OrgId, batches: Vec<Vec<Write>>, per_block: usize) -> Result<usize, BenchError> {
    let mut committed = 0;
    let mut check = |receipts: Vec<fedgbp_core::ledger::TxReceipt>| -> Result<(), BenchError> {
        for r in receipts {
            if r.validity != TxValidity::Valid {
                return Err(BenchError::Invalidated(format!("{} ({:?})", r.tx_id.short(), r.validity)));
            }
            committed += 1;
        }
        Ok(())
    };
    for (i, writes) in batches.into_iter().enumerate() {
        let proposal = net.propose(issuer, writes);
        let endorsements = net.collect_endorsements(&proposal)?;
        net.submit(EndorsedTransaction { proposal, endorsements })?;
        check(net.poll()?)?;
        if (i + 1) % per_block.max(1) == 0 {
            check(net.flush()?)?;
        }
    }
    check(net.flush()?)?;
    Ok(committed)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayCheck {
    pub height: u64,
    pub tx_count: u64,
    pub state_entries: usize,
    pub state_digest: String,
    pub identical: bool,
}

/// Rebuild a ledger from `ledger`'s block log and compare it with the live one.
pub fn replay_identical(ledger: &Ledger) -> Result<ReplayCheck, BenchError> {
    let bytes = ledger.log().read_all()?;
    let rebuilt = Ledger::replay(&bytes, BlockLog::memory())?;
    let live = ledger.state().snapshot_digest();
    let identical = rebuilt.state().snapshot_digest() == live
        && rebuilt.tip_digest() == ledger.tip_digest()
        && rebuilt.height() == ledger.height()
        && rebuilt.chain_size_bytes() == ledger.chain_size_bytes()
        && rebuilt.tx_count() == ledger.tx_count();
    Ok(ReplayCheck {
        height: ledger.height(),
        tx_count: ledger.tx_count(),
        state_entries: ledger.state().len(),
        state_digest: live.to_hex(),
        identical,
    })
}
