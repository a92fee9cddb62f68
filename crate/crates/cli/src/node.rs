//! A ledger node on disk: `init` lays out keys and the genesis block, `serve`
//! replays the chain and answers on the ledger socket (and optionally runs a
//! map server and router on UDP).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use fedgbp_core::api::LedgerService;
use fedgbp_core::control::{LedgerView, MapServer, MapServerConfig, Router, RouterConfig, UdpRouterService};
use fedgbp_core::crypto::KeyPair;
use fedgbp_core::ledger::{BlockLog, EndorsementPolicyExpr, Ledger, Network, OrdererConfig, OrgIdentity};
use fedgbp_core::{Clock, OrgId, SystemClock};
use rand::rngs::{OsRng, StdRng};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::exit::Failure;

pub const CONFIG_FILE: &str = "network.json";
pub const CHAIN_FILE: &str = "chain.log";
pub const KEY_DIR: &str = "keys";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub orgs: Vec<String>,
    pub endorsement_policy: String,
    pub block_timeout_ms: u64,
    pub max_block_txs: usize,
}

impl NodeConfig {
    fn orderer(&self) -> OrdererConfig {
        OrdererConfig {
            block_timeout_ms: self.block_timeout_ms,
            max_block_txs: self.max_block_txs,
        }
    }
}

pub fn key_path(dir: &Path, org: &OrgId) -> PathBuf {
    dir.join(KEY_DIR).join(format!("{org}.key"))
}

pub fn load_key(path: &Path) -> Result<KeyPair, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read key {}: {e}", path.display())))?;
    KeyPair::from_hex(text.trim()).map_err(|e| Failure::usage(format!("bad key in {}: {e}", path.display())))
}

pub fn write_key(path: &Path, keys: &KeyPair) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Failure::usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, format!("{}\n", keys.seed_hex()))
        .map_err(|e| Failure::usage(format!("cannot write key {}: {e}", path.display())))
}

#[derive(Clone, Debug)]
pub struct InitOptions {
    pub dir: PathBuf,
    pub orgs: Vec<OrgId>,
    pub policy: Option<String>,
    pub orderer: OrdererConfig,
    /// Derive keys from this seed instead of the OS generator.
    pub seed: Option<u64>,
}

pub fn init(opts: &InitOptions) -> Result<(NodeConfig, Vec<(OrgId, KeyPair)>), Failure> {
    if opts.orgs.is_empty() {
        return Err(Failure::usage("at least one organization is required"));
    }
    let chain = opts.dir.join(CHAIN_FILE);
    if chain.exists() {
        return Err(Failure::usage(format!("{} already holds a chain", opts.dir.display())));
    }
    let policy = match &opts.policy {
        Some(text) => Some(EndorsementPolicyExpr::parse(text).map_err(|e| Failure::usage(format!("endorsement policy: {e}")))?),
        None => None,
    };
    let mut seeded = opts.seed.map(StdRng::seed_from_u64);
    let keys: Vec<(OrgId, KeyPair)> = opts
        .orgs
        .iter()
        .map(|o| {
            let k = match seeded.as_mut() {
                Some(rng) => KeyPair::generate(rng),
                None => KeyPair::generate(&mut OsRng),
            };
            (o.clone(), k)
        })
        .collect();
    fs::create_dir_all(&opts.dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", opts.dir.display())))?;
    for (o, k) in &keys {
        write_key(&key_path(&opts.dir, o), k)?;
    }
    let identities = keys.iter().map(|(o, k)| OrgIdentity::new(o.clone(), k.clone())).collect();
    let log = BlockLog::open(&chain).map_err(|e| Failure::usage(format!("cannot create {}: {e}", chain.display())))?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let net = Network::bootstrap(identities, policy, opts.orderer, clock, log)?;
    let config = NodeConfig {
        orgs: opts.orgs.iter().map(ToString::to_string).collect(),
        endorsement_policy: net.ledger().config().policy.to_string(),
        block_timeout_ms: opts.orderer.block_timeout_ms,
        max_block_txs: opts.orderer.max_block_txs,
    };
    let json = serde_json::to_string_pretty(&config).expect("config serializes");
    fs::write(opts.dir.join(CONFIG_FILE), json + "\n").map_err(|e| Failure::usage(format!("cannot write config: {e}")))?;
    Ok((config, keys))
}

pub fn read_config(dir: &Path) -> Result<NodeConfig, Failure> {
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("bad {}: {e}", path.display())))
}

/// Replay the node's chain and attach every endorser key found on disk.
pub fn open_network(dir: &Path, clock: Arc<dyn Clock>) -> Result<Network, Failure> {
    let config = read_config(dir)?;
    let ledger = Ledger::open(dir.join(CHAIN_FILE))?;
    let mut identities = Vec::new();
    for name in &config.orgs {
        let org = OrgId::new(name).map_err(|e| Failure::usage(format!("bad organization {name:?} in config: {e}")))?;
        let path = key_path(dir, &org);
        if path.exists() {
            identities.push(OrgIdentity::new(org, load_key(&path)?));
        }
    }
    Ok(Network::from_ledger(ledger, identities, config.orderer(), clock))
}

#[derive(Clone, Debug)]
pub struct ServeOptions {
    pub dir: PathBuf,
    pub listen: String,
    /// UDP address for the map server and router, if any.
    pub control: Option<String>,
    pub sync_interval: Duration,
    pub offline: Vec<OrgId>,
}

/// Run until the process is killed. Bound addresses go to stdout first so a
/// supervisor can pick up ephemeral ports.
pub fn serve(opts: &ServeOptions) -> Result<(), Failure> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let mut net = open_network(&opts.dir, Arc::clone(&clock))?;
    for o in &opts.offline {
        net.set_offline(o, true);
    }
    let net = Arc::new(RwLock::new(net));
    let service = LedgerService::bind(Arc::clone(&net), opts.listen.as_str())
        .map_err(|e| Failure::transport(format!("cannot listen on {}: {e}", opts.listen)))?;
    let mut stdout = std::io::stdout();
    let _ = writeln!(stdout, "ledger listening on {}", service.local_addr());

    let _control = match &opts.control {
        Some(addr) => {
            let view: Arc<dyn LedgerView> = net.clone();
            let server = Arc::new(MapServer::new(view, MapServerConfig::default()));
            server
                .sync_from_ledger(clock.now())
                .map_err(|e| Failure::transport(e))?;
            let router = Arc::new(Router::new(Arc::clone(&server), Arc::clone(&clock), RouterConfig::default()));
            let udp = UdpRouterService::bind(router, addr.as_str())
                .map_err(|e| Failure::transport(format!("cannot listen on {addr}: {e}")))?;
            let _ = writeln!(stdout, "router listening on {}", udp.local_addr());
            let interval = opts.sync_interval;
            let sync_clock = Arc::clone(&clock);
            std::thread::spawn(move || loop {
                std::thread::sleep(interval);
                if let Err(e) = server.sync_from_ledger(sync_clock.now()) {
                    eprintln!("map server sync failed: {e}");
                }
            });
            Some(udp)
        }
        None => None,
    };
    let _ = stdout.flush();
    service.join();
    Ok(())
}
