//! Add-user latency as the number of required endorsers grows.

use std::time::Instant;

use fedgbp_core::ledger::TxValidity;

use super::{check_grid, nanos_since, RunConfig};
use crate::error::BenchError;
use crate::report::{BenchReport, Point, Sample, MIN_SAMPLES};
use crate::stats::linear_fit;
use crate::workload;

pub const EXPERIMENT: &str = "write_latency";
pub const SERIES: &str = "add_user";
pub const FIT: &str = "median_latency_vs_endorsers";

pub fn default_grid() -> Vec<u64> {
    (1..=15).collect()
}

/// Each sample commits a block, so fewer are needed than for reads.
pub fn default_config() -> RunConfig {
    RunConfig {
        samples: 50,
        warmup: 5,
        ..RunConfig::default()
    }
}

/// For each endorser count `k`, a fresh consortium of `k` organizations that
/// all must endorse commits one new user per sample. `ops` is the number of
/// endorsement signatures the committer verified for that transaction and
/// `bytes` the growth of the chain.
///
/// Samples are taken round-robin across the consortia so that drift in
/// machine speed lands on every `k` alike.
pub fn run(grid: &[u64], cfg: &RunConfig) -> Result<BenchReport, BenchError> {
    check_grid(grid, "endorser count")?;
    if grid[0] == 0 {
        return Err(BenchError::InvalidGrid(
            "k=0: a transaction needs at least one endorsement".into(),
        ));
    }
    cfg.require_samples(SERIES)?;
    let mut report = BenchReport::new(EXPERIMENT, cfg.seed, grid.to_vec(), MIN_SAMPLES);
    let mut consortia = Vec::with_capacity(grid.len());
    for &k in grid {
        let orgs = workload::org_ids(k as usize);
        let (net, _clock) = workload::consortium(&orgs, None)?;
        consortia.push((orgs[0].clone(), net, Vec::with_capacity(cfg.samples)));
    }
    for j in 0..cfg.warmup + cfg.samples {
        for (issuer, net, samples) in &mut consortia {
            let write = workload::user_write(issuer, &format!("u{j:07}"), net.now());
            let verified = net.ledger().signature_verifications();
            let size = net.ledger().chain_size_bytes();
            let t = Instant::now();
            let receipt = net.execute_writes(issuer, vec![write])?;
            let latency_ns = nanos_since(t);
            if receipt.validity != TxValidity::Valid {
                return Err(BenchError::Invalidated(format!("{:?}", receipt.validity)));
            }
            if j >= cfg.warmup {
                samples.push(Sample {
                    latency_ns,
                    bytes: net.ledger().chain_size_bytes() - size,
                    ops: net.ledger().signature_verifications() - verified,
                });
            }
        }
    }
    let mut replays = Vec::new();
    for (&k, (_, net, samples)) in grid.iter().zip(consortia) {
        report.push(Point::new(SERIES, k, cfg.warmup, samples))?;
        replays.push(workload::replay_identical(net.ledger())?);
    }

    let ks: Vec<f64> = report.series(SERIES).map(|p| p.param as f64).collect();
    let medians: Vec<f64> = report.series(SERIES).map(Point::median_ns).collect();
    if ks.len() >= 2 {
        let fit = linear_fit(&ks, &medians);
        report.check("linear_r2_at_least_0.9", fit.r2 >= 0.9, format!("r2 {:.4}", fit.r2));
        report.fits.insert(FIT.to_owned(), fit);
    }
    let exact = report.series(SERIES).all(|p| p.ops().all(|o| o == p.param));
    report.check("verifications_equal_endorsers", exact, "one verification per endorsement");
    let identical = replays.iter().all(|r| r.identical);
    report.check("replay_identical", identical, format!("{} ledgers", replays.len()));
    report.set_context("replay", serde_json::to_value(&replays)?);
    Ok(report)
}
