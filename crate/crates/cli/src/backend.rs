//! Where commands run: an in-process network or a ledger node's socket.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use fedgbp_core::admin::{run_intent, CommandOutcome};
use fedgbp_core::api::{ClientError, LedgerClient, ProposalRequest};
use fedgbp_core::crypto::KeyPair;
use fedgbp_core::ledger::{Asset, BlockLog, Network, OrdererConfig, OrgIdentity, StateKey, TxReceipt, TxValidity};
use fedgbp_core::policy::{render_writes, target_key, Intent};
use fedgbp_core::{ManualClock, OrgId, Timestamp};
use serde::Serialize;

use crate::exit::{invalidated, Failure};

/// Start of the logical clock used for in-process runs.
pub const LOCAL_EPOCH_MS: u64 = 1_700_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Committed { tx: String, height: u64, index: u32 },
    Found { asset: Asset },
}

impl Outcome {
    fn committed(r: &TxReceipt) -> Result<Self, Failure> {
        if r.validity != TxValidity::Valid {
            return Err(invalidated(r));
        }
        Ok(Outcome::Committed {
            tx: r.tx_id.to_hex(),
            height: r.height,
            index: r.index,
        })
    }

    fn found(asset: Option<Asset>, intent: &Intent, issuer: &OrgId) -> Result<Self, Failure> {
        match asset {
            Some(asset) => Ok(Outcome::Found { asset }),
            None => Err(Failure::new(
                crate::exit::REJECTED,
                format!("{} not found", target_key(intent, issuer)),
            )),
        }
    }
}

pub trait Backend {
    fn execute(&mut self, issuer: &OrgId, intent: &Intent) -> Result<Outcome, Failure>;
}

/// Stands in when a script names no organization at all.
pub struct NoLedger;

impl Backend for NoLedger {
    fn execute(&mut self, _: &OrgId, _: &Intent) -> Result<Outcome, Failure> {
        Err(Failure::usage("no ledger: the script names no issuing organization"))
    }
}

/// A private network whose endorsers are derived from the org names, on a
/// logical clock. Runs are reproducible byte for byte.
pub struct LocalBackend {
    pub network: Network,
    pub clock: Arc<ManualClock>,
}

impl LocalBackend {
    pub fn new(orgs: &[OrgId]) -> Result<Self, Failure> {
        let clock = Arc::new(ManualClock::new(Timestamp(LOCAL_EPOCH_MS)));
        let identities = orgs.iter().map(|o| OrgIdentity::from_label(o.as_str())).collect();
        let network = Network::bootstrap(identities, None, OrdererConfig::default(), clock.clone(), BlockLog::memory())?;
        Ok(LocalBackend { network, clock })
    }
}

impl Backend for LocalBackend {
    fn execute(&mut self, issuer: &OrgId, intent: &Intent) -> Result<Outcome, Failure> {
        match run_intent(&mut self.network, issuer, intent)? {
            CommandOutcome::Committed(r) => Outcome::committed(&r),
            CommandOutcome::Query(a) => Outcome::found(a, intent, issuer),
        }
    }
}

/// A ledger node reached over its socket, signing as whichever organization
/// issues the command.
pub struct RemoteBackend {
    client: LedgerClient,
    keys: BTreeMap<OrgId, KeyPair>,
}

impl RemoteBackend {
    pub fn new(client: LedgerClient) -> Self {
        RemoteBackend {
            client,
            keys: BTreeMap::new(),
        }
    }

    pub fn with_key(mut self, org: OrgId, keys: KeyPair) -> Self {
        self.keys.insert(org, keys);
        self
    }

    pub fn client(&self) -> &LedgerClient {
        &self.client
    }
}

impl Backend for RemoteBackend {
    fn execute(&mut self, issuer: &OrgId, intent: &Intent) -> Result<Outcome, Failure> {
        if intent.is_query() {
            let asset = self.client.query_state(&target_key(intent, issuer))?;
            return Outcome::found(asset, intent, issuer);
        }
        let keys = self
            .keys
            .get(issuer)
            .ok_or_else(|| Failure::usage(format!("no signing key for {issuer}")))?;
        let status = self.client.status()?;
        if !status.orgs.contains(issuer) {
            return Err(Failure::usage(format!("organization {issuer} is not registered with the ledger")));
        }
        let first_error: RefCell<Option<ClientError>> = RefCell::new(None);
        let lookup = |key: &StateKey| match self.client.query_state(key) {
            Ok(a) => a.is_some(),
            Err(e) => {
                first_error.borrow_mut().get_or_insert(e);
                false
            }
        };
        let rendered = render_writes(intent, issuer, &lookup, Timestamp(status.now));
        if let Some(e) = first_error.into_inner() {
            return Err(e.into());
        }
        let request = ProposalRequest::signed(issuer.clone(), status.now, rendered?, keys);
        let tx = self.client.endorse(request)?;
        let receipt = self.client.submit(tx)?;
        Outcome::committed(&receipt)
    }
}
