//! Exact-match policy reads over the ledger socket as the policy count grows.

use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use fedgbp_core::api::{LedgerClient, LedgerService};
use fedgbp_core::ledger::{Network, StateKey, Write};
use fedgbp_core::QualifiedName;

use super::{check_grid, nanos_since, RunConfig};
use crate::error::BenchError;
use crate::report::{BenchReport, Point, Sample, MIN_SAMPLES};
use crate::stats;
use crate::workload::{self, org, qname};

pub const EXPERIMENT: &str = "read_latency";
pub const SERIES: &str = "get_policy";
pub const DEFAULT_GRID: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];

/// A query takes microseconds, so a point needs thousands of samples before
/// one scheduler hiccup stops moving its median.
pub fn default_config() -> RunConfig {
    RunConfig {
        samples: 2_000,
        warmup: 200,
        ..RunConfig::default()
    }
}

/// Writes per loading transaction.
const WRITES_PER_TX: usize = 1_000;
/// Loading transactions per block.
const TXS_PER_BLOCK: usize = 10;

/// Users on one side and resources on the other; policy `i` links user
/// `i / side` to resource `i % side`.
struct Population {
    side: u64,
    users: Vec<QualifiedName>,
    resources: Vec<QualifiedName>,
}

impl Population {
    fn new(max: u64) -> Self {
        let mut side = (max as f64).sqrt().ceil() as u64;
        while side * side < max {
            side += 1;
        }
        let (a, b) = (org("orga"), org("orgb"));
        Population {
            side,
            users: (0..side).map(|i| qname(&a, &format!("u{i:07}"))).collect(),
            resources: (0..side).map(|i| qname(&b, &format!("r{i:07}"))).collect(),
        }
    }

    fn pair(&self, i: u64) -> (&QualifiedName, &QualifiedName) {
        (&self.users[(i / self.side) as usize], &self.resources[(i % self.side) as usize])
    }
}

fn chunks(writes: Vec<Write>) -> Vec<Vec<Write>> {
    let mut out = Vec::new();
    let mut it = writes.into_iter().peekable();
    while it.peek().is_some() {
        out.push(it.by_ref().take(WRITES_PER_TX).collect());
    }
    out
}

fn populate(net: &mut Network, pop: &Population) -> Result<(), BenchError> {
    let (a, b) = (org("orga"), org("orgb"));
    let now = net.now();
    let users = pop.users.iter().map(|u| workload::user_write(&a, u.name.as_str(), now)).collect();
    workload::load(net, &a, chunks(users), TXS_PER_BLOCK)?;
    let res = pop
        .resources
        .iter()
        .map(|r| workload::resource_write(&b, r.name.as_str(), now))
        .collect();
    workload::load(net, &b, chunks(res), TXS_PER_BLOCK)?;
    Ok(())
}

fn grow(net: &mut Network, pop: &Population, from: u64, to: u64) -> Result<(), BenchError> {
    let b = org("orgb");
    let now = net.now();
    let writes = (from..to)
        .map(|i| {
            let (s, d) = pop.pair(i);
            workload::allow_write(&b, s.clone(), d.clone(), now)
        })
        .collect();
    workload::load(net, &b, chunks(writes), TXS_PER_BLOCK)?;
    Ok(())
}

/// Measurement alternates between the stores in this many blocks, so that
/// drift in machine speed lands on every size alike.
const ROUNDS: usize = 20;

/// `total` split over `ROUNDS` blocks.
fn share(total: usize, round: usize) -> usize {
    total / ROUNDS + usize::from(round < total % ROUNDS)
}

/// One ledger holding exactly `n` policies, served on its own socket.
struct Store {
    n: u64,
    pop: Population,
    net: Arc<RwLock<Network>>,
    client: LedgerClient,
    _service: LedgerService,
    samples: Vec<Sample>,
}

impl Store {
    fn build(n: u64) -> Result<Self, BenchError> {
        let pop = Population::new(n);
        let (mut net, _clock) = workload::consortium(&[org("orga"), org("orgb")], None)?;
        populate(&mut net, &pop)?;
        grow(&mut net, &pop, 0, n)?;
        let net = Arc::new(RwLock::new(net));
        let service = LedgerService::bind(Arc::clone(&net), "127.0.0.1:0")?;
        let client = LedgerClient::connect(service.local_addr(), Duration::from_secs(5))?;
        Ok(Store {
            n,
            pop,
            net,
            client,
            _service: service,
            samples: Vec::new(),
        })
    }

    fn read_ops(&self) -> u64 {
        self.net.read().expect("ledger lock").ledger().state().read_ops()
    }

    fn query(&mut self, rng: &mut ChaCha20Rng, keep: bool) -> Result<(), BenchError> {
        let (src, dst) = self.pop.pair(rng.gen_range(0..self.n));
        let before = self.read_ops();
        let t = Instant::now();
        let found = self.client.get_policy(src, dst)?;
        let latency_ns = nanos_since(t);
        let ops = self.read_ops() - before;
        if found.is_none() {
            return Err(BenchError::InvalidGrid(format!("policy {src}|{dst} missing after load")));
        }
        if keep {
            let key = StateKey::policy(src, dst);
            let bytes = self
                .net
                .read()
                .expect("ledger lock")
                .ledger()
                .state()
                .get(&key)
                .map_or(0, |e| key.as_str().len() + e.value.len());
            self.samples.push(Sample {
                latency_ns,
                bytes: bytes as u64,
                ops,
            });
        }
        Ok(())
    }
}

/// Load one ledger per size in `grid` and time random `get_policy` round
/// trips against each. Each sample's `ops` is the number of state-store
/// reads the ledger performed for that query. Warmup queries are spread
/// over the measurement blocks like the samples.
pub fn run(grid: &[u64], cfg: &RunConfig) -> Result<BenchReport, BenchError> {
    check_grid(grid, "entry count")?;
    cfg.require_samples(SERIES)?;
    if grid[0] == 0 {
        return Err(BenchError::InvalidGrid("entry counts must be positive".into()));
    }
    let mut stores = grid.iter().map(|&n| Store::build(n)).collect::<Result<Vec<_>, _>>()?;

    let mut report = BenchReport::new(EXPERIMENT, cfg.seed, grid.to_vec(), MIN_SAMPLES);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    for round in 0..ROUNDS {
        for store in &mut stores {
            for _ in 0..share(cfg.warmup, round) {
                store.query(&mut rng, false)?;
            }
            for _ in 0..share(cfg.samples, round) {
                store.query(&mut rng, true)?;
            }
        }
    }
    let mut replays = Vec::new();
    for store in stores {
        replays.push(workload::replay_identical(store.net.read().expect("ledger lock").ledger())?);
        report.push(Point::new(SERIES, store.n, cfg.warmup, store.samples))?;
    }

    let medians: Vec<f64> = report.series(SERIES).map(Point::median_ns).collect();
    let cov = stats::cov(&medians);
    report.set_context("cov_of_medians", cov);
    report.check("cov_of_medians_below_0.25", cov < 0.25, format!("cov {cov:.4}"));
    let ops: Vec<u64> = report.series(SERIES).flat_map(Point::ops).collect();
    let same_ops = ops.windows(2).all(|w| w[0] == w[1]);
    report.check(
        "store_ops_constant",
        same_ops,
        format!("ops per query in [{}, {}]", ops.iter().min().unwrap_or(&0), ops.iter().max().unwrap_or(&0)),
    );

    let identical = replays.iter().all(|r| r.identical);
    report.check("replay_identical", identical, format!("{} ledgers", replays.len()));
    report.set_context("replay", serde_json::to_value(&replays)?);
    Ok(report)
}
