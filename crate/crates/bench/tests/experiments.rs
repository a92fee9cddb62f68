use fedgbp_bench::experiments::chain_size::{self, ChainGrid};
use fedgbp_bench::experiments::trie_cdf::{self, TrieConfig};
use fedgbp_bench::experiments::{read_latency, write_latency, RunConfig};
use fedgbp_bench::report::{CSV_HEADER, CSV_SCHEMA_VERSION};
use fedgbp_bench::{BenchError, BenchReport};

fn quick(seed: u64) -> RunConfig {
    RunConfig {
        seed,
        samples: 30,
        warmup: 2,
    }
}

/// Everything except the timings.
fn deterministic_columns(r: &BenchReport) -> Vec<(String, u64, Vec<(u64, u64)>)> {
    r.points
        .iter()
        .map(|p| (p.series.clone(), p.param, p.samples.iter().map(|s| (s.bytes, s.ops)).collect()))
        .collect()
}

#[test]
fn zero_endorsers_is_rejected() {
    let err = write_latency::run(&[0, 1], &quick(1)).unwrap_err();
    assert!(matches!(err, BenchError::InvalidGrid(_)), "{err}");
}

#[test]
fn too_few_samples_is_rejected() {
    let cfg = RunConfig {
        samples: 29,
        ..quick(1)
    };
    for err in [
        write_latency::run(&[1], &cfg).unwrap_err(),
        read_latency::run(&[10], &cfg).unwrap_err(),
        trie_cdf::run(&[512], &TrieConfig { run: cfg, ..TrieConfig::default() }).unwrap_err(),
    ] {
        assert!(matches!(err, BenchError::InsufficientSamples { got: 29, need: 30, .. }), "{err}");
    }
}

#[test]
fn grids_must_increase() {
    assert!(matches!(write_latency::run(&[2, 1], &quick(1)), Err(BenchError::InvalidGrid(_))));
    assert!(matches!(read_latency::run(&[], &quick(1)), Err(BenchError::InvalidGrid(_))));
    let grid = ChainGrid {
        tx_counts: vec![10, 10],
        ..ChainGrid::default()
    };
    assert!(matches!(chain_size::run(&grid, 1), Err(BenchError::InvalidGrid(_))));
    assert!(matches!(trie_cdf::run(&[100], &TrieConfig::default()), Err(BenchError::InvalidGrid(_))));
}

#[test]
fn same_seed_same_bytes_and_ops() {
    let grid = ChainGrid {
        tx_counts: vec![20, 40],
        endorsers: vec![1, 2, 3],
        txs_per_endorser_point: 20,
    };
    let a = chain_size::run(&grid, 3).unwrap();
    let b = chain_size::run(&grid, 3).unwrap();
    assert_eq!(deterministic_columns(&a), deterministic_columns(&b));

    let a = read_latency::run(&[50, 200], &quick(5)).unwrap();
    let b = read_latency::run(&[50, 200], &quick(5)).unwrap();
    assert_eq!(deterministic_columns(&a), deterministic_columns(&b));

    let cfg = TrieConfig {
        run: quick(9),
        brute_force_queries: 1_000,
        ..TrieConfig::default()
    };
    let a = trie_cdf::run(&[512, 2_048], &cfg).unwrap();
    let b = trie_cdf::run(&[512, 2_048], &cfg).unwrap();
    assert_eq!(deterministic_columns(&a), deterministic_columns(&b));
    assert_eq!(a.context.get("visits_histogram_2048"), b.context.get("visits_histogram_2048"));
}

#[test]
fn small_runs_pass_their_exact_checks() {
    let r = write_latency::run(&[1, 2, 4], &quick(1)).unwrap();
    assert!(r.find_check("verifications_equal_endorsers").unwrap().passed);
    assert!(r.find_check("replay_identical").unwrap().passed);
    for p in &r.points {
        assert!(p.samples.iter().all(|s| s.ops == p.param && s.bytes > 0));
    }

    let r = read_latency::run(&[50, 200], &quick(1)).unwrap();
    assert!(r.find_check("store_ops_constant").unwrap().passed);
    assert!(r.find_check("replay_identical").unwrap().passed);

    let cfg = TrieConfig {
        run: quick(1),
        brute_force_queries: 5_000,
        ..TrieConfig::default()
    };
    let r = trie_cdf::run(&[512, 4_096], &cfg).unwrap();
    for name in ["trie_matches_linear_scan", "max_visits_bounded", "replay_identical"] {
        assert!(r.find_check(name).unwrap().passed, "{name}");
    }
}

#[test]
fn doubling_ratio_is_reported_for_every_doubled_count() {
    let grid = ChainGrid {
        tx_counts: vec![50, 100, 150, 200],
        endorsers: vec![1, 2],
        txs_per_endorser_point: 50,
    };
    let r = chain_size::run(&grid, 1).unwrap();
    let names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
    assert!(names.contains(&"doubling_ratio_at_50"));
    assert!(names.contains(&"doubling_ratio_at_100"));
    assert!(!names.contains(&"doubling_ratio_at_150"));
    // Every transaction has the same size, so the chain is affine in its length.
    assert!(r.fits["bytes_vs_tx_count"].r2 > 0.9999);
}

#[test]
fn written_report_follows_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let r = write_latency::run(&[1, 2], &quick(1)).unwrap();
    r.write_to(dir.path()).unwrap();

    let mut rows = csv::Reader::from_path(dir.path().join("report.csv")).unwrap();
    assert_eq!(rows.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 60);
    for rec in &records {
        assert_eq!(&rec[0], CSV_SCHEMA_VERSION.to_string());
        assert_eq!(&rec[1], "write_latency");
        assert_eq!(&rec[2], "add_user");
        assert_eq!(rec[7], rec[3]);
    }

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], CSV_SCHEMA_VERSION);
    assert_eq!(summary["points"].as_array().unwrap().len(), 2);
    assert_eq!(summary["points"][0]["samples"], 30);
    assert_eq!(summary["points"][0]["warmup"], 2);
}
