use std::io::{self, Write as _};
use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use fedgbp_cli::args::{hoist_globals, Cli, Command, DEFAULT_ENDPOINT};
use fedgbp_cli::backend::{Backend, LocalBackend, NoLedger, Outcome, RemoteBackend};
use fedgbp_cli::exit::{self, Failure};
use fedgbp_cli::node::{self, InitOptions, ServeOptions};
use fedgbp_cli::script::{issuers, parse_script, run_script};
use fedgbp_core::api::{LedgerClient, Request, Response};
use fedgbp_core::control::{ClientError as AgentError, UdpTransport, UserAgent};
use fedgbp_core::crypto::KeyPair;
use fedgbp_core::ledger::{AccessDecision, OrdererConfig};
use fedgbp_core::policy::parse_command;
use fedgbp_core::{Eid, OrgId, QualifiedName};
use serde::Serialize;
use serde_json::json;

struct Out {
    json: bool,
}

impl Out {
    /// Write one record. A closed stdout is not worth a panic.
    fn emit<T: Serialize>(&self, value: &T, human: impl FnOnce() -> String) {
        let line = if self.json {
            serde_json::to_string(value).expect("output serializes")
        } else {
            human()
        };
        let _ = writeln!(io::stdout().lock(), "{line}");
    }

    fn fail(&self, f: &Failure) {
        if self.json {
            self.emit(&json!({"status": "error", "code": f.code, "error": f.message}), String::new);
        } else {
            let _ = writeln!(io::stderr().lock(), "gbp: {}", f.message);
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(hoist_globals(std::env::args_os().collect())) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = Out { json: cli.json };
    match dispatch(&cli, &out) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            out.fail(&f);
            ExitCode::from(f.code)
        }
    }
}

fn org_id(name: &str) -> Result<OrgId, Failure> {
    OrgId::new(name).map_err(|e| Failure::usage(format!("bad organization {name:?}: {e}")))
}

fn endpoint(cli: &Cli) -> &str {
    cli.endpoint.as_deref().unwrap_or(DEFAULT_ENDPOINT)
}

fn connect(cli: &Cli) -> Result<LedgerClient, Failure> {
    let addr = endpoint(cli);
    LedgerClient::connect(addr, Duration::from_secs(5)).map_err(|e| Failure::transport(format!("{addr}: {e}")))
}

fn dispatch(cli: &Cli, out: &Out) -> Result<u8, Failure> {
    match &cli.command {
        Command::Init {
            dir,
            orgs,
            policy,
            block_timeout_ms,
            max_block_txs,
            seed,
        } => {
            let opts = InitOptions {
                dir: dir.clone(),
                orgs: orgs.iter().map(|o| org_id(o)).collect::<Result<_, _>>()?,
                policy: policy.clone(),
                orderer: OrdererConfig {
                    block_timeout_ms: *block_timeout_ms,
                    max_block_txs: *max_block_txs,
                },
                seed: *seed,
            };
            let (config, keys) = node::init(&opts)?;
            for (o, k) in &keys {
                let path = node::key_path(dir, o);
                out.emit(
                    &json!({"org": o.to_string(), "public_key": k.public().to_hex(), "key_file": path}),
                    || format!("{o}  {}  {}", k.public().to_hex(), path.display()),
                );
            }
            out.emit(&json!({"endorsement_policy": config.endorsement_policy}), || {
                format!("endorsement policy {}", config.endorsement_policy)
            });
            Ok(exit::OK)
        }
        Command::Serve {
            dir,
            listen,
            control,
            sync_ms,
            offline,
        } => {
            let opts = ServeOptions {
                dir: dir.clone(),
                listen: listen.clone(),
                control: control.clone(),
                sync_interval: Duration::from_millis(*sync_ms),
                offline: offline.iter().map(|o| org_id(o)).collect::<Result<_, _>>()?,
            };
            node::serve(&opts)?;
            Ok(exit::OK)
        }
        Command::Run { script, key_dir } => run(cli, out, script, key_dir.as_deref()),
        Command::Status => {
            let s = connect(cli)?.status()?;
            let orgs: Vec<String> = s.orgs.iter().map(ToString::to_string).collect();
            out.emit(
                &json!({"height": s.height, "tx_count": s.tx_count, "chain_bytes": s.chain_bytes, "now": s.now, "orgs": orgs}),
                || {
                    format!(
                        "height {}\ntransactions {}\nchain bytes {}\norganizations {}",
                        s.height,
                        s.tx_count,
                        s.chain_bytes,
                        orgs.join(", ")
                    )
                },
            );
            Ok(exit::OK)
        }
        Command::Access { user, dst } => {
            let name = |s: &str| QualifiedName::parse(s).map_err(|e| Failure::usage(format!("{s:?}: {e}")));
            let req = Request::AccessDecision {
                user: name(user)?,
                dst: name(dst)?,
            };
            let Response::Decision(d) = connect(cli)?.call(&req)? else {
                return Err(Failure::transport("ledger answered with an unexpected response"));
            };
            let (decision, expiry) = match d {
                AccessDecision::Allow { expiry } => ("allow", expiry),
                AccessDecision::Deny => ("deny", None),
                AccessDecision::NoPolicy => ("no-policy", None),
                AccessDecision::Expired => ("expired", None),
            };
            out.emit(&json!({"decision": decision, "expiry": expiry}), || match expiry {
                Some(ms) => format!("{decision} until {ms}"),
                None => decision.to_owned(),
            });
            Ok(exit::OK)
        }
        Command::Keygen { out: path } => {
            let keys = KeyPair::generate(&mut rand::rngs::OsRng);
            node::write_key(path, &keys)?;
            out.emit(&json!({"public_key": keys.public().to_hex()}), || keys.public().to_hex());
            Ok(exit::OK)
        }
        Command::Connect {
            user,
            user_key,
            src,
            dst,
            router,
            timeout_ms,
        } => {
            let eid = |s: &str| s.parse::<Eid>().map_err(|e| Failure::usage(format!("{s:?}: {e}")));
            let name = QualifiedName::parse(user).map_err(|e| Failure::usage(format!("{user:?}: {e}")))?;
            let keys = node::load_key(user_key)?;
            let transport = UdpTransport::connect(router.as_str(), Duration::from_millis(*timeout_ms))
                .map_err(|e| Failure::transport(format!("{router}: {e}")))?;
            let mut agent = UserAgent::new(name, keys, eid(src)?);
            match agent.connect(eid(dst)?, &transport) {
                Ok(Some(sa)) => {
                    let secret = hex::encode(sa.shared_secret);
                    out.emit(
                        &json!({"status": "granted", "secret": secret, "lifetime_secs": sa.lifetime_secs}),
                        || format!("granted: secret {secret}, lifetime {}s", sa.lifetime_secs),
                    );
                    Ok(exit::OK)
                }
                Ok(None) => Err(Failure::new(exit::REJECTED, "no reply from the router: access denied")),
                Err(AgentError::Transport(e)) => Err(Failure::transport(e)),
                Err(e) => Err(Failure::new(exit::REJECTED, e)),
            }
        }
        Command::Policy(words) => policy_command(cli, out, words),
    }
}

fn policy_command(cli: &Cli, out: &Out, words: &[String]) -> Result<u8, Failure> {
    let line = format!("gbp {}", words.join(" "));
    let intent = parse_command(&line)?;
    let org = org_id(cli.org.as_deref().ok_or_else(|| Failure::usage("--org (or GBP_ORG) is required"))?)?;
    let keys = if intent.is_query() {
        None
    } else {
        let path = cli.key.as_deref().ok_or_else(|| Failure::usage("--key (or GBP_KEY) is required"))?;
        Some(node::load_key(path)?)
    };
    let mut backend = RemoteBackend::new(connect(cli)?);
    if let Some(k) = keys {
        backend = backend.with_key(org.clone(), k);
    }
    let outcome = backend.execute(&org, &intent)?;
    out.emit(&outcome, || match &outcome {
        Outcome::Committed { tx, height, .. } => format!("committed at height {height}, tx {tx}"),
        Outcome::Found { asset } => serde_json::to_string_pretty(asset).expect("assets serialize"),
    });
    Ok(exit::OK)
}

fn run(cli: &Cli, out: &Out, script: &Path, key_dir: Option<&Path>) -> Result<u8, Failure> {
    let bytes = std::fs::read(script).map_err(|e| Failure::usage(format!("cannot read {}: {e}", script.display())))?;
    let text = String::from_utf8(bytes).map_err(|_| Failure::usage(format!("{} is not UTF-8", script.display())))?;
    let lines = parse_script(&text);
    let default = cli.org.as_deref().map(org_id).transpose()?;
    let orgs = issuers(&lines, default.as_ref());

    let mut backend: Box<dyn Backend> = if cli.endpoint.is_some() {
        let mut remote = RemoteBackend::new(connect(cli)?);
        for o in &orgs {
            let path = match (key_dir, &default, &cli.key) {
                (_, Some(d), Some(k)) if d == o => k.clone(),
                (Some(dir), _, _) => dir.join(format!("{o}.key")),
                _ => continue,
            };
            if path.exists() {
                remote = remote.with_key(o.clone(), node::load_key(&path)?);
            }
        }
        Box::new(remote)
    } else if orgs.is_empty() {
        // Nothing can be issued; every line is rejected on its own.
        Box::new(NoLedger)
    } else {
        let orgs: Vec<OrgId> = orgs.into_iter().collect();
        Box::new(LocalBackend::new(&orgs)?)
    };

    let transcript = run_script(&lines, default.as_ref(), backend.as_mut());
    for e in &transcript.entries {
        out.emit(e, || e.to_human());
    }
    match transcript.aborted {
        Some(f) => Err(f),
        None => Ok(exit::OK),
    }
}
