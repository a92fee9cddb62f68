//! Map-server query delay against the number of authorized pairs, on the
//! synced-trie fast path and on the per-request ledger slow path.

use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use fedgbp_core::api::{LedgerClient, LedgerService};
use fedgbp_core::control::{
    AuthPath, InProcessTransport, LedgerView, MapRequest, MapServer, MapServerConfig, PolicyTrie, Router,
    RouterConfig, Transport, ViewError, MAX_VISITS,
};
use fedgbp_core::crypto::KeyPair;
use fedgbp_core::ledger::{AccessDecision, AssetBody, EidGrant, Resource, User, Write};
use fedgbp_core::{Eid, ManualClock, QualifiedName, Timestamp};

use super::{check_grid, nanos_since, RunConfig};
use crate::error::BenchError;
use crate::report::{BenchReport, Point, Sample, MIN_SAMPLES};
use crate::workload::{self, org, qname, T0};

pub const EXPERIMENT: &str = "trie_cdf";
/// Full map request handling (verify, trie decision, sealed reply).
pub const FAST_SERIES: &str = "fast_path";
/// The same requests answered by querying the ledger socket.
pub const SLOW_SERIES: &str = "slow_path";
/// The bare trie lookup inside the fast path.
pub const LOOKUP_SERIES: &str = "trie_lookup";
/// The ledger queries the slow path makes per request, in place of the
/// trie lookup.
pub const LEDGER_QUERY_SERIES: &str = "ledger_query";
pub const DEFAULT_GRID: [u64; 3] = [1_000, 10_000, 100_000];

const USERS: u32 = 64;
const DSTS_PER_USER: u32 = 8;
const USER_BASE: u32 = 0x0a40_0000;
const DST_BASE: u32 = 0x0a41_0000;
/// Largest trie checked against a linear scan.
const BRUTE_FORCE_MAX: u64 = 10_000;
const BRUTE_FORCE_QUERIES: usize = 100_000;
/// Random queries behind the node-visit distribution.
const VISIT_QUERIES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrieConfig {
    pub run: RunConfig,
    /// Concurrent clients on the fast path; 1 measures in isolation.
    pub clients: usize,
    pub brute_force_queries: usize,
}

impl Default for TrieConfig {
    fn default() -> Self {
        TrieConfig {
            run: RunConfig {
                samples: 1_000,
                warmup: 100,
                ..RunConfig::default()
            },
            clients: 1,
            brute_force_queries: BRUTE_FORCE_QUERIES,
        }
    }
}

struct Agent {
    name: QualifiedName,
    keys: KeyPair,
    eid: Eid,
}

fn eid(raw: u32) -> Eid {
    Eid::new(raw).expect("non-zero endpoint id")
}

fn agents() -> Vec<Agent> {
    let a = org("orga");
    (0..USERS)
        .map(|i| {
            let name = qname(&a, &format!("user{i:02}"));
            Agent {
                keys: KeyPair::from_label(&format!("user:{name}")),
                name,
                eid: eid(USER_BASE + i + 1),
            }
        })
        .collect()
}

fn dst(i: u32) -> Eid {
    eid(DST_BASE + i + 1)
}

fn directory(agents: &[Agent]) -> Vec<User> {
    agents
        .iter()
        .map(|a| User {
            name: a.name.clone(),
            public_key: Some(a.keys.public().to_bytes()),
            ip: Some(a.eid),
            department: None,
        })
        .collect()
}

/// Every agent may reach every destination, padded with random pairs up to
/// `n` grants in total.
fn grants(n: u64, agents: &[Agent], rng: &mut ChaCha20Rng) -> Vec<EidGrant> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n as usize);
    for a in agents {
        for d in 0..DSTS_PER_USER {
            seen.insert((a.eid, dst(d)));
            out.push(EidGrant {
                src: a.eid,
                dst: dst(d),
                expiry: None,
            });
        }
    }
    while (out.len() as u64) < n {
        let pair = (eid(rng.gen_range(1..=u32::MAX)), eid(rng.gen_range(1..=u32::MAX)));
        if seen.insert(pair) {
            out.push(EidGrant {
                src: pair.0,
                dst: pair.1,
                expiry: None,
            });
        }
    }
    out
}

/// Requests signed ahead of time so signing stays out of the measurement.
fn signed_requests(agents: &[Agent], count: usize, first_nonce: u64, rng: &mut ChaCha20Rng) -> Vec<(MapRequest, Vec<u8>)> {
    (0..count)
        .map(|j| {
            let a = &agents[rng.gen_range(0..agents.len())];
            let req = MapRequest::signed(
                first_nonce + j as u64,
                a.eid,
                dst(rng.gen_range(0..DSTS_PER_USER)),
                a.name.clone(),
                &a.keys,
            );
            let frame = req.encode();
            (req, frame)
        })
        .collect()
}

/// A ledger view for a map server that only ever answers from its trie.
struct Detached;

impl LedgerView for Detached {
    fn user(&self, _: &QualifiedName) -> Result<Option<User>, ViewError> {
        Err(ViewError("detached".into()))
    }

    fn endpoint_for_eid(&self, _: Eid) -> Result<Option<QualifiedName>, ViewError> {
        Err(ViewError("detached".into()))
    }

    fn access_decision(&self, _: &QualifiedName, _: &QualifiedName, _: Timestamp) -> Result<AccessDecision, ViewError> {
        Err(ViewError("detached".into()))
    }

    fn eid_snapshot(&self, _: Timestamp) -> Result<Vec<EidGrant>, ViewError> {
        Err(ViewError("detached".into()))
    }

    fn user_directory(&self) -> Result<Vec<User>, ViewError> {
        Err(ViewError("detached".into()))
    }
}

fn router(view: Arc<dyn LedgerView>, path: AuthPath, seed: u64) -> (Arc<MapServer>, Arc<Router>) {
    let server = Arc::new(MapServer::new(
        view,
        MapServerConfig {
            path,
            ..MapServerConfig::default()
        },
    ));
    let router = Arc::new(Router::new(
        Arc::clone(&server),
        Arc::new(ManualClock::new(T0)),
        RouterConfig {
            seed: Some(seed),
            ..RouterConfig::default()
        },
    ));
    (server, router)
}

/// Time each pre-signed request through `transport`; every one must be
/// answered. `ops` comes from `ops_of` evaluated around the exchange.
fn measure(
    transport: &dyn Transport,
    requests: &[(MapRequest, Vec<u8>)],
    warmup: usize,
    mut ops_of: impl FnMut(&MapRequest) -> u64,
) -> Result<Vec<Sample>, BenchError> {
    let mut out = Vec::with_capacity(requests.len().saturating_sub(warmup));
    for (j, (req, frame)) in requests.iter().enumerate() {
        let before = ops_of(req);
        let t = Instant::now();
        let reply = transport.exchange(frame)?;
        let latency_ns = nanos_since(t);
        let after = ops_of(req);
        let Some(reply) = reply else {
            return Err(BenchError::Denied(format!("nonce {} from {}", req.nonce, req.user)));
        };
        if j >= warmup {
            out.push(Sample {
                latency_ns,
                bytes: reply.len() as u64,
                ops: after.wrapping_sub(before),
            });
        }
    }
    Ok(out)
}

/// Background load from other clients, each cycling its own signed frames.
/// Once a frame repeats it is denied as a replay, which still costs a
/// signature check.
struct Load {
    stop: Arc<AtomicBool>,
    threads: Vec<std::thread::JoinHandle<()>>,
}

impl Load {
    fn start(clients: usize, router: &Arc<Router>, agents: &[Agent], rng: &mut ChaCha20Rng) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let threads = (1..clients)
            .map(|c| {
                let frames: Vec<Vec<u8>> = signed_requests(agents, 256, (c as u64) << 40, rng)
                    .into_iter()
                    .map(|(_, f)| f)
                    .collect();
                let transport = InProcessTransport::new(Arc::clone(router));
                let stop = Arc::clone(&stop);
                std::thread::spawn(move || {
                    for f in frames.iter().cycle() {
                        if stop.load(Ordering::Relaxed) {
                            break;
                        }
                        let _ = transport.exchange(f);
                    }
                })
            })
            .collect();
        Load { stop, threads }
    }

    fn finish(self) {
        self.stop.store(true, Ordering::Relaxed);
        for t in self.threads {
            let _ = t.join();
        }
    }
}

fn visit_histogram(trie: &PolicyTrie, grants: &[EidGrant], rng: &mut ChaCha20Rng) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for i in 0..VISIT_QUERIES {
        let (s, d) = if i % 2 == 0 {
            let g = &grants[rng.gen_range(0..grants.len())];
            (g.src, g.dst)
        } else {
            (eid(rng.gen_range(1..=u32::MAX)), eid(rng.gen_range(1..=u32::MAX)))
        };
        *hist.entry(trie.get(s, d).visits).or_insert(0) += 1;
    }
    hist
}

/// Half the queries are stored pairs, half random; the trie must agree with
/// a linear scan of the grant list on every one.
fn brute_force_mismatches(trie: &PolicyTrie, grants: &[EidGrant], queries: usize, rng: &mut ChaCha20Rng) -> usize {
    let mut mismatches = 0;
    for i in 0..queries {
        let (s, d) = if i % 2 == 0 {
            let g = &grants[rng.gen_range(0..grants.len())];
            (g.src, g.dst)
        } else {
            (eid(rng.gen_range(1..=u32::MAX)), eid(rng.gen_range(1..=u32::MAX)))
        };
        let scanned = grants.iter().any(|g| g.src == s && g.dst == d);
        if trie.get(s, d).hit.is_some() != scanned {
            mismatches += 1;
        }
    }
    mismatches
}

/// A ledger holding exactly the agents, destinations and allow policies the
/// fast path grants, served on a local socket.
fn slow_path(
    agents: &[Agent],
    cfg: &TrieConfig,
    rng: &mut ChaCha20Rng,
    report: &mut BenchReport,
) -> Result<workload::ReplayCheck, BenchError> {
    let (a, b) = (org("orga"), org("orgb"));
    let (mut net, _clock) = workload::consortium(&[a.clone(), b.clone()], None)?;
    let now = net.now();
    let users: Vec<Write> = directory(agents)
        .into_iter()
        .map(|u| Write::create(&workload::asset(&a, now, AssetBody::User(u))))
        .collect();
    let dsts: Vec<QualifiedName> = (0..DSTS_PER_USER).map(|d| qname(&b, &format!("db{d:02}"))).collect();
    let resources: Vec<Write> = dsts
        .iter()
        .enumerate()
        .map(|(d, name)| {
            let body = AssetBody::Resource(Resource {
                name: name.clone(),
                ip: Some(dst(d as u32)),
            });
            Write::create(&workload::asset(&b, now, body))
        })
        .collect();
    let policies: Vec<Write> = agents
        .iter()
        .flat_map(|ag| dsts.iter().map(|d| workload::allow_write(&b, ag.name.clone(), d.clone(), now)))
        .collect();
    let n_policies = policies.len() as u64;
    workload::load(&mut net, &a, vec![users], 1)?;
    workload::load(&mut net, &b, vec![resources, policies], 1)?;

    let net = Arc::new(RwLock::new(net));
    let service = LedgerService::bind(Arc::clone(&net), "127.0.0.1:0")?;
    let client = LedgerClient::connect(service.local_addr(), Duration::from_secs(5))?;
    let client = Arc::new(client);
    let (_server, router) = router(Arc::clone(&client) as Arc<dyn LedgerView>, AuthPath::Ledger, cfg.run.seed);
    let transport = InProcessTransport::new(router);
    let read_ops = || net.read().expect("ledger lock").ledger().state().read_ops();
    let requests = signed_requests(agents, cfg.run.warmup + cfg.run.samples, 1 << 48, rng);
    let samples = measure(&transport, &requests, cfg.run.warmup, |_| read_ops())?;
    report.push(Point::new(SLOW_SERIES, n_policies, cfg.run.warmup, samples))?;

    let mut queries = Vec::with_capacity(cfg.run.samples);
    for (j, (req, _)) in requests.iter().enumerate() {
        let before = read_ops();
        let t = Instant::now();
        let user = client.user(&req.user).map_err(|e| BenchError::Denied(e.0))?;
        let endpoint = client.endpoint_for_eid(req.dst).map_err(|e| BenchError::Denied(e.0))?;
        let decision = match (&user, &endpoint) {
            (Some(_), Some(d)) => client.access_decision(&req.user, d, T0).map_err(|e| BenchError::Denied(e.0))?,
            _ => AccessDecision::NoPolicy,
        };
        let latency_ns = nanos_since(t);
        if !matches!(decision, AccessDecision::Allow { .. }) {
            return Err(BenchError::Denied(format!("ledger refused {} -> {}", req.user, req.dst)));
        }
        if j >= cfg.run.warmup {
            queries.push(Sample {
                latency_ns,
                bytes: 0,
                ops: read_ops() - before,
            });
        }
    }
    report.push(Point::new(LEDGER_QUERY_SERIES, n_policies, cfg.run.warmup, queries))?;
    drop(transport);
    drop(service);
    let replay = workload::replay_identical(net.read().expect("ledger lock").ledger())?;
    Ok(replay)
}

/// Fast-path delay per trie size, bare lookup cost, node visits and a
/// brute-force agreement check, followed by the slow path for comparison.
/// Fast-path `ops` is the node visits of the queried pair, slow-path `ops`
/// the ledger's state reads.
pub fn run(grid: &[u64], cfg: &TrieConfig) -> Result<BenchReport, BenchError> {
    check_grid(grid, "pair count")?;
    let min_pairs = u64::from(USERS * DSTS_PER_USER);
    if grid[0] < min_pairs {
        return Err(BenchError::InvalidGrid(format!("pair counts must be at least {min_pairs}")));
    }
    cfg.run.require_samples(FAST_SERIES)?;
    let agents = agents();
    let users = directory(&agents);
    let mut report = BenchReport::new(EXPERIMENT, cfg.run.seed, grid.to_vec(), MIN_SAMPLES);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.run.seed);
    let mut max_visits = 0;
    let mut mismatches = 0;
    let mut brute_checked = Vec::new();
    let mut nonce = 1;

    for &n in grid {
        let grants = grants(n, &agents, &mut rng);
        let (server, router) = router(Arc::new(Detached), AuthPath::Trie, cfg.run.seed);
        server.apply_snapshot(&grants, &users);
        let transport = InProcessTransport::new(Arc::clone(&router));
        let requests = signed_requests(&agents, cfg.run.warmup + cfg.run.samples, nonce, &mut rng);
        nonce += requests.len() as u64;

        let load = Load::start(cfg.clients, &router, &agents, &mut rng);
        let fast = measure(&transport, &requests, cfg.run.warmup, |_| 0);
        load.finish();
        let mut fast = fast?;
        server.with_trie(|t| {
            for (s, (req, _)) in fast.iter_mut().zip(&requests[cfg.run.warmup..]) {
                s.ops = t.get(req.src, req.dst).visits as u64;
            }
        });
        report.push(Point::new(FAST_SERIES, n, cfg.run.warmup, fast))?;

        let lookups = server.with_trie(|t| {
            requests
                .iter()
                .map(|(req, _)| {
                    let start = Instant::now();
                    let hit = t.get(req.src, req.dst);
                    Sample {
                        latency_ns: nanos_since(start),
                        bytes: 0,
                        ops: hit.visits as u64,
                    }
                })
                .skip(cfg.run.warmup)
                .collect::<Vec<_>>()
        });
        report.push(Point::new(LOOKUP_SERIES, n, cfg.run.warmup, lookups))?;

        let hist = server.with_trie(|t| visit_histogram(t, &grants, &mut rng));
        let size_max = hist.keys().max().copied().unwrap_or(0);
        max_visits = max_visits.max(size_max);
        report.set_context(&format!("visits_histogram_{n}"), serde_json::json!(hist));
        report.set_context(&format!("max_visits_{n}"), size_max);
        report.set_context(&format!("trie_nodes_{n}"), server.with_trie(PolicyTrie::node_count));

        if n <= BRUTE_FORCE_MAX {
            let m = server.with_trie(|t| brute_force_mismatches(t, &grants, cfg.brute_force_queries, &mut rng));
            mismatches += m;
            brute_checked.push(n);
            report.set_context(&format!("brute_force_mismatches_{n}"), m);
        }
    }

    let replay = slow_path(&agents, cfg, &mut rng, &mut report)?;
    report.check("replay_identical", replay.identical, format!("{} blocks", replay.height));
    report.set_context("replay", serde_json::to_value(&replay)?);

    let first = report.point(FAST_SERIES, grid[0]).map(Point::median_ns).unwrap_or(f64::NAN);
    let last = report.point(FAST_SERIES, *grid.last().expect("non-empty")).map(Point::median_ns).unwrap_or(f64::NAN);
    let ratio = last / first;
    report.set_context("median_ratio_largest_to_smallest", ratio);
    report.check("median_ratio_at_most_2", ratio <= 2.0, format!("ratio {ratio:.3}"));
    report.set_context("max_visits", max_visits);
    report.check("max_visits_bounded", max_visits <= MAX_VISITS, format!("max {max_visits} <= {MAX_VISITS}"));
    // Signature checks and reply sealing cost the same on both paths, so
    // the ordering is asserted on what differs: the decision source.
    let trie_p99 = report.series(LOOKUP_SERIES).map(|p| p.quantile_ns(0.99)).fold(0.0, f64::max);
    let ledger_median = report.series(LEDGER_QUERY_SERIES).map(Point::median_ns).fold(f64::NAN, f64::min);
    report.set_context("trie_lookup_p99_ns", trie_p99);
    report.set_context("ledger_query_median_ns", ledger_median);
    report.check(
        "fast_p99_below_slow_median",
        trie_p99 < ledger_median,
        format!("trie lookup p99 {trie_p99:.0} ns, ledger query median {ledger_median:.0} ns"),
    );
    let fast_p99 = report.series(FAST_SERIES).map(|p| p.quantile_ns(0.99)).fold(0.0, f64::max);
    let slow_median = report.series(SLOW_SERIES).map(Point::median_ns).fold(f64::NAN, f64::min);
    report.set_context("full_request_fast_p99_ns", fast_p99);
    report.set_context("full_request_slow_median_ns", slow_median);
    report.check(
        "trie_matches_linear_scan",
        mismatches == 0 && !brute_checked.is_empty(),
        format!("{mismatches} mismatches at sizes {brute_checked:?}"),
    );
    report.set_context("clients", cfg.clients);
    Ok(report)
}
