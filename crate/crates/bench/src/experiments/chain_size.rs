//! Chain growth against transaction count and against endorser count.

use std::time::Instant;

use fedgbp_core::ledger::orderer::DEFAULT_MAX_BLOCK_TXS;
use fedgbp_core::ledger::Network;
use fedgbp_core::OrgId;

use super::{check_grid, nanos_since};
use crate::error::BenchError;
use crate::report::{BenchReport, Point, Sample};
use crate::stats::{linear_fit, mean};
use crate::workload::{self, ReplayCheck};

pub const EXPERIMENT: &str = "chain_size";
pub const TX_SERIES: &str = "tx_count";
pub const ENDORSER_SERIES: &str = "endorsers";
pub const TX_FIT: &str = "bytes_vs_tx_count";
pub const ENDORSER_FIT: &str = "bytes_per_tx_vs_endorsers";

pub const DEFAULT_TX_COUNTS: [u64; 4] = [1_000, 2_000, 5_000, 10_000];
/// Endorsing organizations while the transaction count varies.
pub const TX_SERIES_ENDORSERS: usize = 4;
/// Chain length at which per-transaction size is measured for each `k`.
pub const DEFAULT_TXS_PER_ENDORSER_POINT: u64 = 5_000;

/// Figures observed on a multi-peer reference deployment with a different
/// serialization; reported for comparison only.
const REFERENCE_BYTES_1M_TX: f64 = 10e9;
const REFERENCE_BYTES_1K_ENDORSERS: f64 = 25e9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainGrid {
    pub tx_counts: Vec<u64>,
    pub endorsers: Vec<u64>,
    pub txs_per_endorser_point: u64,
}

impl Default for ChainGrid {
    fn default() -> Self {
        ChainGrid {
            tx_counts: DEFAULT_TX_COUNTS.to_vec(),
            endorsers: (1..=15).collect(),
            txs_per_endorser_point: DEFAULT_TXS_PER_ENDORSER_POINT,
        }
    }
}

/// Append user creations `from..to` issued by `issuer`, one per transaction.
/// Names have a fixed width so every transaction has the same size.
fn append(net: &mut Network, issuer: &OrgId, from: u64, to: u64) -> Result<(), BenchError> {
    let now = net.now();
    let batches = (from..to)
        .map(|i| vec![workload::user_write(issuer, &format!("u{i:09}"), now)])
        .collect();
    workload::load(net, issuer, batches, DEFAULT_MAX_BLOCK_TXS)?;
    Ok(())
}

/// Chain size is deterministic, so each point carries a single sample:
/// `bytes` is the chain size (genesis excluded for the endorser series),
/// `ops` the transaction count and `latency_ns` the time spent loading.
pub fn run(grid: &ChainGrid, seed: u64) -> Result<BenchReport, BenchError> {
    check_grid(&grid.tx_counts, "transaction count")?;
    check_grid(&grid.endorsers, "endorser count")?;
    if grid.tx_counts[0] == 0 || grid.endorsers[0] == 0 || grid.txs_per_endorser_point == 0 {
        return Err(BenchError::InvalidGrid("counts must be positive".into()));
    }
    let mut all_params = grid.tx_counts.clone();
    all_params.extend(&grid.endorsers);
    let mut report = BenchReport::new(EXPERIMENT, seed, all_params, 1);
    let mut replays: Vec<ReplayCheck> = Vec::new();

    let orgs = workload::org_ids(TX_SERIES_ENDORSERS);
    let (mut net, _clock) = workload::consortium(&orgs, None)?;
    let mut done = 0;
    for &n in &grid.tx_counts {
        let t = Instant::now();
        append(&mut net, &orgs[0], done, n)?;
        done = n;
        let sample = Sample {
            latency_ns: nanos_since(t),
            bytes: net.ledger().chain_size_bytes(),
            ops: net.ledger().tx_count(),
        };
        report.push(Point::new(TX_SERIES, n, 0, vec![sample]))?;
    }
    replays.push(workload::replay_identical(net.ledger())?);
    drop(net);

    let per = grid.txs_per_endorser_point;
    for &k in &grid.endorsers {
        let orgs = workload::org_ids(k as usize);
        let (mut net, _clock) = workload::consortium(&orgs, None)?;
        let genesis = net.ledger().chain_size_bytes();
        let t = Instant::now();
        append(&mut net, &orgs[0], 0, per)?;
        let sample = Sample {
            latency_ns: nanos_since(t),
            bytes: net.ledger().chain_size_bytes() - genesis,
            ops: net.ledger().tx_count(),
        };
        report.push(Point::new(ENDORSER_SERIES, k, 0, vec![sample]))?;
        replays.push(workload::replay_identical(net.ledger())?);
    }

    summarize(&mut report, grid);
    let identical = replays.iter().all(|r| r.identical);
    report.check("replay_identical", identical, format!("{} ledgers", replays.len()));
    report.set_context("replay", serde_json::to_value(&replays)?);
    Ok(report)
}

fn bytes(p: &Point) -> f64 {
    p.samples[0].bytes as f64
}

fn summarize(report: &mut BenchReport, grid: &ChainGrid) {
    let xs: Vec<f64> = report.series(TX_SERIES).map(|p| p.param as f64).collect();
    let ys: Vec<f64> = report.series(TX_SERIES).map(bytes).collect();
    if xs.len() >= 2 {
        let fit = linear_fit(&xs, &ys);
        report.check("tx_linear_r2_at_least_0.99", fit.r2 >= 0.99, format!("r2 {:.6}", fit.r2));
        report.set_context("bytes_per_tx", fit.slope);
        report.set_context("extrapolated_bytes_1m_tx", fit.predict(1e6));
        report.set_context("reference_bytes_1m_tx", REFERENCE_BYTES_1M_TX);
        report.fits.insert(TX_FIT.to_owned(), fit);
    }
    let mut ratios = Vec::new();
    for &n in &grid.tx_counts {
        if let (Some(a), Some(b)) = (report.point(TX_SERIES, n), report.point(TX_SERIES, 2 * n)) {
            ratios.push((n, bytes(b) / bytes(a)));
        }
    }
    for (n, r) in &ratios {
        let ok = (1.95..=2.05).contains(r);
        report.check(&format!("doubling_ratio_at_{n}"), ok, format!("size({})/size({n}) = {r:.4}", 2 * n));
    }
    report.set_context("doubling_ratios", serde_json::json!(ratios));

    let per = grid.txs_per_endorser_point as f64;
    let ks: Vec<f64> = report.series(ENDORSER_SERIES).map(|p| p.param as f64).collect();
    let per_tx: Vec<f64> = report.series(ENDORSER_SERIES).map(|p| bytes(p) / per).collect();
    if ks.len() >= 2 {
        let fit = linear_fit(&ks, &per_tx);
        let rel = fit.max_abs_residual / mean(&per_tx);
        report.check(
            "endorser_residuals_below_1pct",
            rel < 0.01,
            format!("max residual {:.4} bytes = {:.5} of mean", fit.max_abs_residual, rel),
        );
        report.set_context("bytes_per_endorsement", fit.slope);
        report.set_context("max_relative_residual", rel);
        let at_1k = fit.predict(1_000.0);
        report.set_context("extrapolated_bytes_per_tx_1k_endorsers", at_1k);
        report.set_context("extrapolated_bytes_1m_tx_1k_endorsers", at_1k * 1e6);
        report.set_context("reference_bytes_1k_endorsers", REFERENCE_BYTES_1K_ENDORSERS);
        report.fits.insert(ENDORSER_FIT.to_owned(), fit);
    }
    report.set_context("per_tx_bytes", serde_json::json!(ks.iter().zip(&per_tx).collect::<Vec<_>>()));
}
