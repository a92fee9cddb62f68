use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use fedgbp_bench::experiments::chain_size::{self, ChainGrid};
use fedgbp_bench::experiments::trie_cdf::{self, TrieConfig};
use fedgbp_bench::experiments::{read_latency, write_latency, RunConfig};
use fedgbp_bench::fuzz::parser_fuzz;
use fedgbp_bench::{BenchError, BenchReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Experiment {
    ReadLatency,
    WriteLatency,
    ChainSize,
    TrieCdf,
    ParserFuzz,
    All,
}

/// Run a scaling experiment and write report.csv and summary.json.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Args {
    experiment: Experiment,
    /// Grid points: entry counts, endorser counts, transaction counts or pair
    /// counts depending on the experiment.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<u64>>,
    /// Endorser counts for the chain-size experiment.
    #[arg(long, value_delimiter = ',')]
    endorsers: Option<Vec<u64>>,
    /// Chain length per endorser count in the chain-size experiment.
    #[arg(long, default_value_t = chain_size::DEFAULT_TXS_PER_ENDORSER_POINT)]
    txs_per_point: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Measured samples per grid point (at least 30).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Concurrent clients for the map-server experiment.
    #[arg(long, default_value_t = 1)]
    clients: usize,
    /// Lines for the parser fuzz run.
    #[arg(long, default_value_t = 100_000)]
    lines: usize,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

impl Args {
    fn run_config(&self, base: RunConfig) -> RunConfig {
        RunConfig {
            seed: self.seed,
            samples: self.samples.unwrap_or(base.samples),
            warmup: self.warmup.unwrap_or(base.warmup),
        }
    }

    fn grid_or(&self, default: Vec<u64>) -> Vec<u64> {
        self.grid.clone().unwrap_or(default)
    }
}

fn run_one(args: &Args, exp: Experiment) -> Result<bool, BenchError> {
    let report: BenchReport = match exp {
        Experiment::ReadLatency => {
            read_latency::run(&args.grid_or(read_latency::DEFAULT_GRID.to_vec()), &args.run_config(read_latency::default_config()))?
        }
        Experiment::WriteLatency => {
            write_latency::run(&args.grid_or(write_latency::default_grid()), &args.run_config(write_latency::default_config()))?
        }
        Experiment::ChainSize => {
            let d = ChainGrid::default();
            let grid = ChainGrid {
                tx_counts: args.grid_or(d.tx_counts),
                endorsers: args.endorsers.clone().unwrap_or(d.endorsers),
                txs_per_endorser_point: args.txs_per_point,
            };
            chain_size::run(&grid, args.seed)?
        }
        Experiment::TrieCdf => {
            let d = TrieConfig::default();
            let cfg = TrieConfig {
                run: args.run_config(d.run),
                clients: args.clients.max(1),
                ..d
            };
            trie_cdf::run(&args.grid_or(trie_cdf::DEFAULT_GRID.to_vec()), &cfg)?
        }
        Experiment::ParserFuzz => {
            let stats = parser_fuzz(args.lines, args.seed);
            let dir = args.out.join("parser_fuzz");
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
            println!(
                "parser_fuzz: {} lines, {} intents, {} errors, {} panics",
                stats.lines, stats.intents, stats.errors, stats.panics
            );
            return Ok(stats.panics == 0);
        }
        Experiment::All => unreachable!("expanded by the caller"),
    };
    let dir = args.out.join(&report.experiment);
    report.write_to(&dir)?;
    println!("{}: wrote {}", report.experiment, dir.display());
    for c in &report.checks {
        println!("  {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(report.checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let experiments = match args.experiment {
        Experiment::All => vec![
            Experiment::ParserFuzz,
            Experiment::WriteLatency,
            Experiment::ChainSize,
            Experiment::TrieCdf,
            Experiment::ReadLatency,
        ],
        e => vec![e],
    };
    if args.grid.is_some() && experiments.len() > 1 {
        eprintln!("bench: --grid applies to a single experiment");
        return ExitCode::from(2);
    }
    let mut ok = true;
    for e in experiments {
        match run_one(&args, e) {
            Ok(passed) => ok &= passed,
            Err(err) => {
                eprintln!("bench: {err}");
                return ExitCode::from(2);
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
