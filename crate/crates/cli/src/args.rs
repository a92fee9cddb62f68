use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub const DEFAULT_ENDPOINT: &str = "127.0.0.1:7051";

/// Administer group-based access policies shared across organizations.
///
/// Policy commands are given directly, e.g.
/// `gbp member-create alice --ip 10.0.0.2 --org orga --key orga.key`.
#[derive(Debug, Parser)]
#[command(name = "gbp", version, disable_help_subcommand = true)]
pub struct Cli {
    /// Issuing organization.
    #[arg(long, global = true, env = "GBP_ORG")]
    pub org: Option<String>,
    /// The issuing organization's signing key file.
    #[arg(long, global = true, env = "GBP_KEY")]
    pub key: Option<PathBuf>,
    /// Ledger socket address.
    #[arg(long, global = true, env = "GBP_ENDPOINT")]
    pub endpoint: Option<String>,
    /// One JSON object per line instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create keys and the genesis block for a new ledger node.
    Init {
        #[arg(long)]
        dir: PathBuf,
        /// Comma-separated organization names.
        #[arg(long, value_delimiter = ',', required = true)]
        orgs: Vec<String>,
        /// Endorsement policy, e.g. `OUTOF(2, orga, orgb, orgc)`; all orgs by default.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, default_value_t = 100)]
        block_timeout_ms: u64,
        #[arg(long, default_value_t = 500)]
        max_block_txs: usize,
        /// Derive keys from a seed (reproducible, not secret).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve a node's ledger socket until killed.
    Serve {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        listen: String,
        /// Also run a map server and router on this UDP address.
        #[arg(long)]
        control: Option<String>,
        /// How often the map server resynchronizes from the ledger.
        #[arg(long, default_value_t = 1000)]
        sync_ms: u64,
        /// Do not collect endorsements from this organization (repeatable).
        #[arg(long)]
        offline: Vec<String>,
    },
    /// Run a script of commands, one per line, each optionally prefixed by `@org`.
    ///
    /// Without --endpoint the script runs on a private in-process ledger
    /// whose organizations are the ones the script names.
    Run {
        script: PathBuf,
        /// Directory holding `<org>.key` for each issuing organization.
        #[arg(long)]
        key_dir: Option<PathBuf>,
    },
    /// Chain height, transaction count and registered organizations.
    Status,
    /// Whether a user may reach a destination right now.
    Access { user: String, dst: String },
    /// Generate a signing key and print its public half.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Send a signed map request as a user and print the security association.
    Connect {
        #[arg(long)]
        user: String,
        #[arg(long)]
        user_key: PathBuf,
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        #[arg(long)]
        router: String,
        #[arg(long, default_value_t = 1000)]
        timeout_ms: u64,
    },
    #[command(external_subcommand)]
    Policy(Vec<String>),
}

const GLOBAL_VALUED: [&str; 3] = ["--org", "--key", "--endpoint"];

/// Move global flags in front of the subcommand so they are also honoured
/// after a policy verb, whose remaining words are passed through untouched.
pub fn hoist_globals(argv: Vec<OsString>) -> Vec<OsString> {
    let mut it = argv.into_iter();
    let Some(program) = it.next() else {
        return Vec::new();
    };
    let mut globals = Vec::new();
    let mut rest = Vec::new();
    while let Some(arg) = it.next() {
        let text = arg.to_string_lossy();
        if text == "--json" {
            globals.push(arg);
        } else if GLOBAL_VALUED.contains(&text.as_ref()) {
            globals.push(arg);
            globals.extend(it.next());
        } else if GLOBAL_VALUED.iter().any(|g| text.starts_with(&format!("{g}="))) {
            globals.push(arg);
        } else {
            rest.push(arg);
        }
    }
    std::iter::once(program).chain(globals).chain(rest).collect()
}
