//! Scenario scripts: one command per line, each optionally prefixed with the
//! issuing organization as `@org`. Blank lines and `#` comments are skipped.

use std::collections::BTreeSet;

use fedgbp_core::ledger::Asset;
use fedgbp_core::policy::parse_command;
use fedgbp_core::OrgId;
use serde::Serialize;

use crate::backend::{Backend, Outcome};
use crate::exit::Failure;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptLine {
    /// 1-based line number in the file.
    pub number: usize,
    pub org: Option<String>,
    pub command: String,
}

pub fn parse_script(text: &str) -> Vec<ScriptLine> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                return None;
            }
            let (org, command) = match line.strip_prefix('@') {
                Some(rest) => {
                    let (org, cmd) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                    (Some(org.to_owned()), cmd.trim().to_owned())
                }
                None => (None, line.to_owned()),
            };
            Some(ScriptLine {
                number: i + 1,
                org,
                command,
            })
        })
        .collect()
}

/// Every organization named by an `@org` prefix, plus the default.
pub fn issuers(lines: &[ScriptLine], default: Option<&OrgId>) -> BTreeSet<OrgId> {
    lines
        .iter()
        .filter_map(|l| l.org.as_deref().and_then(|o| OrgId::new(o).ok()))
        .chain(default.cloned())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum EntryOutcome {
    Committed { tx: String, height: u64, index: u32 },
    Found { asset: Asset },
    Rejected { code: u8, error: String },
}

impl From<Result<Outcome, Failure>> for EntryOutcome {
    fn from(r: Result<Outcome, Failure>) -> Self {
        match r {
            Ok(Outcome::Committed { tx, height, index }) => EntryOutcome::Committed { tx, height, index },
            Ok(Outcome::Found { asset }) => EntryOutcome::Found { asset },
            Err(f) => EntryOutcome::Rejected {
                code: f.code,
                error: f.message,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Entry {
    pub line: usize,
    pub org: Option<String>,
    pub command: String,
    #[serde(flatten)]
    pub outcome: EntryOutcome,
}

impl Entry {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript entries serialize")
    }

    pub fn to_human(&self) -> String {
        let org = self.org.as_deref().map(|o| format!("@{o} ")).unwrap_or_default();
        let head = format!("{:>3} {org}{}", self.line, self.command);
        match &self.outcome {
            EntryOutcome::Committed { tx, height, .. } => format!("{head}\n    committed at height {height}, tx {}", &tx[..16]),
            EntryOutcome::Found { asset } => format!("{head}\n    {}", serde_json::to_string(asset).expect("assets serialize")),
            EntryOutcome::Rejected { code, error } => format!("{head}\n    rejected ({code}): {error}"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Transcript {
    pub entries: Vec<Entry>,
    /// Set when a transport failure stopped the run early.
    pub aborted: Option<Failure>,
}

/// Run every line in order. Rejections are recorded and the run goes on; a
/// transport failure ends it.
pub fn run_script(lines: &[ScriptLine], default: Option<&OrgId>, backend: &mut dyn Backend) -> Transcript {
    let mut out = Transcript::default();
    for l in lines {
        let result = execute_line(l, default, backend);
        if let Err(f) = &result {
            if f.is_transport() {
                out.aborted = Some(f.clone());
            }
        }
        out.entries.push(Entry {
            line: l.number,
            org: l.org.clone().or_else(|| default.map(|o| o.to_string())),
            command: l.command.clone(),
            outcome: result.into(),
        });
        if out.aborted.is_some() {
            break;
        }
    }
    out
}

fn execute_line(l: &ScriptLine, default: Option<&OrgId>, backend: &mut dyn Backend) -> Result<Outcome, Failure> {
    let issuer = match &l.org {
        Some(o) => OrgId::new(o).map_err(|e| Failure::usage(format!("bad issuer @{o}: {e}")))?,
        None => default
            .cloned()
            .ok_or_else(|| Failure::usage("no issuing organization: prefix the line with @org or pass --org"))?,
    };
    let intent = parse_command(&l.command)?;
    backend.execute(&issuer, &intent)
}
