//! The acceptance gate. Every criterion runs at its stated tolerance and
//! prints one PASS or FAIL line; the test fails if any criterion does.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use fedgbp_bench::experiments::chain_size::{self, ChainGrid};
use fedgbp_bench::experiments::trie_cdf::{self, TrieConfig};
use fedgbp_bench::experiments::{read_latency, write_latency};
use fedgbp_bench::fuzz::parser_fuzz;
use fedgbp_bench::BenchReport;
use fedgbp_core::admin::{run_command, CommandError, CommandOutcome};
use fedgbp_core::control::{
    CapturingTransport, EventKind, InProcessTransport, LedgerView, MapRequest, MapServer, MapServerConfig, Router,
    RouterConfig, Transport, UserAgent,
};
use fedgbp_core::crypto::KeyPair;
use fedgbp_core::ledger::{
    BlockLog, ChaincodeError, EndorsementPolicyExpr, LedgerError, Network, OrdererConfig, OrgIdentity,
};
use fedgbp_core::{Clock, Eid, ManualClock, OrgId, QualifiedName, Timestamp};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn org(s: &str) -> OrgId {
    OrgId::new(s).unwrap()
}

fn q(s: &str) -> QualifiedName {
    QualifiedName::parse(s).unwrap()
}

fn ip(s: &str) -> Eid {
    s.parse().unwrap()
}

fn user_keys(name: &str) -> KeyPair {
    KeyPair::from_label(&format!("user:{name}"))
}

fn network(names: &[&str]) -> (Network, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(Timestamp(1_700_000_000_000)));
    let ids = names.iter().map(|n| OrgIdentity::from_label(n)).collect();
    let net = Network::bootstrap(ids, None, OrdererConfig::default(), clock.clone(), BlockLog::memory()).unwrap();
    (net, clock)
}

fn is_ownership_violation(r: &Result<CommandOutcome, CommandError>) -> bool {
    matches!(
        r,
        Err(CommandError::Ledger(LedgerError::ChaincodeRejection(ChaincodeError::OwnershipViolation { .. })))
    )
}

const ALICE_IP: &str = "10.0.0.2";
const DB_IP: &str = "10.0.1.7";

struct Plane {
    server: Arc<MapServer>,
    router: Arc<Router>,
}

/// Run the scenario script line by line. Each command is prefixed with the
/// issuing organization as `@org`.
fn run_scenario() -> Result<(Plane, String), String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/cross-org-dbaccess.gbp");
    let script = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (mut net, clock) = network(&["orga", "orgb"]);
    let (mut committed, mut shown, mut rejected) = (0, 0, 0);
    for line in script.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (issuer, command) = line
            .strip_prefix('@')
            .and_then(|l| l.split_once(' '))
            .ok_or_else(|| format!("no issuer on {line:?}"))?;
        let r = run_command(&mut net, &org(issuer), command);
        match &r {
            Ok(CommandOutcome::Committed(_)) => committed += 1,
            Ok(CommandOutcome::Query(Some(_))) => shown += 1,
            _ if is_ownership_violation(&r) => rejected += 1,
            other => return Err(format!("{line:?}: {other:?}")),
        }
    }
    ensure(
        (committed, shown, rejected) == (4, 2, 1),
        format!("{committed} committed, {shown} shown, {rejected} rejected"),
    )?;

    let net = Arc::new(RwLock::new(net));
    let view: Arc<dyn LedgerView> = net;
    let server = Arc::new(MapServer::new(view, MapServerConfig::default()));
    server.sync_from_ledger(clock.now()).map_err(|e| e.to_string())?;
    let router = Arc::new(Router::new(
        Arc::clone(&server),
        clock.clone(),
        RouterConfig {
            seed: Some(42),
            ..RouterConfig::default()
        },
    ));
    let detail = format!("{committed} committed, {shown} shown, {rejected} rejected");
    Ok((Plane { server, router }, detail))
}

fn alice() -> UserAgent {
    UserAgent::with_rng(q("orga.alice"), user_keys("orga.alice"), ip(ALICE_IP), ChaCha20Rng::seed_from_u64(1))
}

fn end_to_end() -> Outcome {
    let started = Instant::now();
    let (plane, detail) = run_scenario()?;
    let transport = CapturingTransport::new(InProcessTransport::new(Arc::clone(&plane.router)));
    let sa = alice()
        .connect(ip(DB_IP), &transport)
        .map_err(|e| e.to_string())?
        .ok_or("alice was not granted")?;
    ensure(
        plane.router.association_secret(ip(ALICE_IP), ip(DB_IP)) == Some(sa.shared_secret),
        "router holds a different association secret",
    )?;
    let kinds: Vec<EventKind> = plane.server.events().snapshot().into_iter().map(|e| e.kind).collect();
    ensure(kinds == [EventKind::Verified, EventKind::Replied], format!("events {kinds:?}"))?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("{detail}; association shared; {elapsed:.2?}"))
}

fn deny_by_silence() -> Outcome {
    let (plane, _) = run_scenario()?;
    let transport = CapturingTransport::new(InProcessTransport::new(Arc::clone(&plane.router)));
    let mut agent = alice();
    let spent = agent.request(ip(DB_IP));
    ensure(transport.exchange(&spent.encode()).map_err(|e| e.to_string())?.is_some(), "genuine request unanswered")?;
    transport.clear();
    plane.server.events().clear();

    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let stranger = KeyPair::from_label("stranger");
    for _ in 0..1000 {
        let frame = match rng.gen_range(0..5) {
            0 => MapRequest::signed(rng.next_u64(), ip(ALICE_IP), ip(DB_IP), q("orga.alice"), &stranger).encode(),
            1 => MapRequest::signed(rng.next_u64(), ip("10.0.0.9"), ip(DB_IP), q("orgc.mallory"), &stranger).encode(),
            2 => agent.request(Eid::new(rng.gen::<u32>() | 0x8000_0000).unwrap()).encode(),
            3 => spent.encode(),
            _ => {
                let mut f = agent.request(ip(DB_IP)).encode();
                let i = rng.gen_range(0..f.len());
                f[i] ^= 1 << rng.gen_range(0..8);
                f
            }
        };
        transport.exchange(&frame).map_err(|e| e.to_string())?;
    }
    let (bytes, denials, replies) =
        (transport.reply_bytes(), plane.server.events().denials(), plane.server.events().replies());
    ensure(bytes == 0 && denials == 1000 && replies == 0, format!("{bytes} reply bytes, {denials} denials"))?;
    Ok(format!("{bytes} reply bytes, {denials} denials"))
}

fn ownership() -> Outcome {
    const ORGS: [&str; 4] = ["orga", "orgb", "orgc", "orgd"];
    let creates = |o: &str| {
        [
            format!("gbp member-create {o}.u"),
            format!("gbp resource-create {o}.r"),
            format!("gbp group-create {o}.g --add:{o}.u"),
            format!("gbp policy-rule-create p --src:{o}.u --dst:{o}.r --actions allow"),
        ]
    };
    let deletes = |o: &str| {
        [
            format!("gbp policy-rule-delete --src:{o}.u --dst:{o}.r"),
            format!("gbp group-delete {o}.g"),
            format!("gbp resource-delete {o}.r"),
            format!("gbp member-delete {o}.u"),
        ]
    };
    let (mut net, _) = network(&ORGS);
    let mut accepted = 0;
    for o in ORGS {
        for cmd in creates(o) {
            let r = run_command(&mut net, &org(o), &cmd);
            ensure(matches!(r, Ok(CommandOutcome::Committed(_))), format!("{o}: {cmd}: {r:?}"))?;
            accepted += 1;
        }
    }
    let mut rejected = 0;
    for owner in ORGS {
        for intruder in ORGS.iter().filter(|&&x| x != owner) {
            let mut attempts = deletes(owner).to_vec();
            attempts.push(format!("gbp member-create {owner}.squatter"));
            attempts.push(format!("gbp policy-rule-create x --src:{intruder}.u --dst:{owner}.r"));
            for cmd in attempts {
                let r = run_command(&mut net, &org(intruder), &cmd);
                ensure(is_ownership_violation(&r), format!("{intruder}: {cmd}: {r:?}"))?;
                rejected += 1;
            }
        }
    }
    for o in ORGS {
        for cmd in deletes(o) {
            let r = run_command(&mut net, &org(o), &cmd);
            ensure(matches!(r, Ok(CommandOutcome::Committed(_))), format!("{o}: {cmd}: {r:?}"))?;
            accepted += 1;
        }
    }
    ensure(accepted == 32, format!("{accepted} owner operations accepted"))?;
    Ok(format!("{accepted} owner operations accepted, {rejected} cross-org mutations rejected"))
}

const N: usize = 5;

fn orgn(i: usize) -> OrgId {
    org(&format!("org{i}"))
}

fn random_orgs(rng: &mut ChaCha20Rng) -> Vec<OrgId> {
    let mut idx: Vec<usize> = (0..N).collect();
    for i in (1..N).rev() {
        idx.swap(i, rng.gen_range(0..=i));
    }
    idx.truncate(rng.gen_range(1..=N));
    idx.into_iter().map(orgn).collect()
}

fn random_expr(rng: &mut ChaCha20Rng, depth: usize) -> EndorsementPolicyExpr {
    let choice = if depth == 1 { rng.gen_range(0..3) } else { rng.gen_range(0..5) };
    match choice {
        0 => EndorsementPolicyExpr::Org(orgn(rng.gen_range(0..N))),
        1 => {
            let orgs = random_orgs(rng);
            EndorsementPolicyExpr::KOfN {
                k: rng.gen_range(1..=orgs.len()),
                orgs,
            }
        }
        2 => {
            let orgs = random_orgs(rng);
            EndorsementPolicyExpr::TwoFPlusOne {
                f: rng.gen_range(0..=(orgs.len() - 1) / 3),
                orgs,
            }
        }
        c => {
            let xs = (0..rng.gen_range(1..4)).map(|_| random_expr(rng, depth - 1)).collect();
            if c == 3 {
                EndorsementPolicyExpr::And(xs)
            } else {
                EndorsementPolicyExpr::Or(xs)
            }
        }
    }
}

/// Bit `s` is set when endorser subset `s` satisfies `e`, built from set
/// algebra over the subsets instead of evaluating the expression.
fn oracle(e: &EndorsementPolicyExpr) -> u32 {
    let index = |o: &OrgId| o.as_str()[3..].parse::<usize>().unwrap();
    let supersets = |m: u32| (0..1u32 << N).filter(|s| s & m == m).fold(0u32, |a, s| a | 1 << s);
    let threshold = |k: usize, orgs: &[OrgId]| {
        let bits: Vec<u32> = orgs.iter().map(|o| 1 << index(o)).collect();
        (0..1u32 << bits.len())
            .filter(|p| p.count_ones() as usize == k)
            .map(|p| bits.iter().enumerate().filter(|(i, _)| p >> i & 1 == 1).fold(0, |a, (_, b)| a | b))
            .fold(0, |a, m| a | supersets(m))
    };
    match e {
        EndorsementPolicyExpr::Org(o) => supersets(1 << index(o)),
        EndorsementPolicyExpr::And(xs) => xs.iter().fold(u32::MAX, |a, x| a & oracle(x)),
        EndorsementPolicyExpr::Or(xs) => xs.iter().fold(0, |a, x| a | oracle(x)),
        EndorsementPolicyExpr::KOfN { k, orgs } => threshold(*k, orgs),
        EndorsementPolicyExpr::TwoFPlusOne { f, orgs } => threshold(2 * f + 1, orgs),
    }
}

fn endorsement_policies() -> Outcome {
    const EXPRESSIONS: usize = 10_000;
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..EXPRESSIONS {
        let e = random_expr(&mut rng, 3);
        ensure(e.depth() <= 3, format!("depth of {e}"))?;
        e.validate().map_err(|err| format!("{e}: {err}"))?;
        let expected = oracle(&e);
        for mask in 0..1u32 << N {
            let set: BTreeSet<OrgId> = (0..N).filter(|i| mask >> i & 1 == 1).map(orgn).collect();
            ensure(e.is_satisfied(&set) == (expected >> mask & 1 == 1), format!("{e} with {set:?}"))?;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("{EXPRESSIONS} expressions x 32 subsets agree, {elapsed:.2?}"))
}

fn check(report: &BenchReport, name: &str) -> Result<String, String> {
    let c = report
        .find_check(name)
        .ok_or_else(|| format!("{}: no check {name}", report.experiment))?;
    ensure(c.passed, format!("{}: {name}: {}", report.experiment, c.detail))?;
    Ok(c.detail.clone())
}

fn checks(report: &BenchReport, names: &[&str]) -> Outcome {
    names.iter().map(|n| check(report, n)).collect::<Result<Vec<_>, _>>().map(|d| d.join("; "))
}

struct Reports {
    write: Option<BenchReport>,
    chain: Option<BenchReport>,
    read: Option<BenchReport>,
    trie: Option<BenchReport>,
}

fn got(r: &Option<BenchReport>) -> Result<&BenchReport, String> {
    r.as_ref().ok_or_else(|| "experiment did not complete".to_owned())
}

struct Gate {
    results: Vec<(usize, &'static str, bool)>,
}

impl Gate {
    fn run(&mut self, n: usize, name: &'static str, f: impl FnOnce() -> Outcome) {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        // Written to the raw handle so the lines show even when output is captured.
        let line = format!("{} criterion {n:>2} {name}: {detail}\n", if passed { "PASS" } else { "FAIL" });
        let _ = std::io::stderr().write_all(line.as_bytes());
        self.results.push((n, name, passed));
    }
}

#[test]
fn acceptance() {
    let mut gate = Gate { results: Vec::new() };
    let mut reports = Reports {
        write: None,
        chain: None,
        read: None,
        trie: None,
    };

    gate.run(1, "end_to_end", end_to_end);
    gate.run(2, "deny_by_silence", deny_by_silence);
    gate.run(3, "ownership", ownership);
    gate.run(4, "endorsement_policies", endorsement_policies);

    gate.run(5, "write_latency", || {
        let r = write_latency::run(&write_latency::default_grid(), &write_latency::default_config())
            .map_err(|e| e.to_string())?;
        let out = checks(&r, &["linear_r2_at_least_0.9", "verifications_equal_endorsers"]);
        reports.write = Some(r);
        out
    });
    gate.run(6, "chain_size", || {
        let r = chain_size::run(&ChainGrid::default(), 1).map_err(|e| e.to_string())?;
        let out = checks(&r, &["tx_linear_r2_at_least_0.99", "doubling_ratio_at_5000"]);
        reports.chain = Some(r);
        out
    });
    gate.run(7, "endorser_residuals", || checks(got(&reports.chain)?, &["endorser_residuals_below_1pct"]));
    gate.run(8, "read_latency", || {
        let started = Instant::now();
        let r = read_latency::run(&read_latency::DEFAULT_GRID, &read_latency::default_config())
            .map_err(|e| e.to_string())?;
        let elapsed = started.elapsed();
        let out = checks(&r, &["cov_of_medians_below_0.25", "store_ops_constant"]);
        reports.read = Some(r);
        ensure(elapsed < Duration::from_secs(600), format!("took {elapsed:?}"))?;
        out.map(|d| format!("{d}; {elapsed:.1?}"))
    });
    gate.run(9, "trie_cdf", || {
        let r = trie_cdf::run(&trie_cdf::DEFAULT_GRID, &TrieConfig::default()).map_err(|e| e.to_string())?;
        let out = checks(&r, &["median_ratio_at_most_2", "max_visits_bounded", "trie_matches_linear_scan"]);
        let mismatches = r.context.get("brute_force_mismatches_10000").cloned();
        reports.trie = Some(r);
        ensure(
            mismatches == Some(serde_json::json!(0)),
            format!("brute force at 10000: {mismatches:?}"),
        )?;
        out
    });
    gate.run(10, "replay_identical", || {
        let all = [&reports.write, &reports.chain, &reports.read, &reports.trie];
        let mut details = Vec::new();
        for r in all {
            let r = got(r)?;
            details.push(format!("{} {}", r.experiment, check(r, "replay_identical")?));
        }
        Ok(details.join("; "))
    });
    gate.run(11, "parser_fuzz", || {
        let s = parser_fuzz(100_000, 1);
        ensure(
            s.panics == 0 && s.intents + s.errors == 100_000,
            format!("{} panics, {} intents + {} errors", s.panics, s.intents, s.errors),
        )?;
        Ok(format!("{} lines: {} intents, {} errors, 0 panics", s.lines, s.intents, s.errors))
    });

    let failed: Vec<_> = gate.results.iter().filter(|r| !r.2).map(|r| format!("{} {}", r.0, r.1)).collect();
    assert_eq!(gate.results.len(), 11);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
