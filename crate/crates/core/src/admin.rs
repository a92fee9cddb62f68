//! Running administrative commands against an in-process network.

use thiserror::Error;

use crate::ledger::{Asset, LedgerError, Network, TxReceipt, TxValidity};
use crate::names::OrgId;
use crate::policy::{parse_command, render_writes, target_key, Intent, ParseError, RenderError};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("transaction committed as invalid: {0:?}")]
    Invalidated(TxReceipt),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommandOutcome {
    Committed(TxReceipt),
    Query(Option<Asset>),
}

/// Parse, render and (for mutations) endorse, order and commit `line` as
/// `issuer`. Queries read committed state and leave the chain untouched.
pub fn run_command(net: &mut Network, issuer: &OrgId, line: &str) -> Result<CommandOutcome, CommandError> {
    let intent = parse_command(line)?;
    run_intent(net, issuer, &intent)
}

pub fn run_intent(net: &mut Network, issuer: &OrgId, intent: &Intent) -> Result<CommandOutcome, CommandError> {
    if intent.is_query() {
        let key = target_key(intent, issuer);
        return Ok(CommandOutcome::Query(net.ledger().query_state(&key)));
    }
    let now = net.now();
    let writes = render_writes(intent, issuer, net.ledger().state(), now)?;
    let receipt = net.execute_writes(issuer, writes)?;
    if receipt.validity != TxValidity::Valid {
        return Err(CommandError::Invalidated(receipt));
    }
    Ok(CommandOutcome::Committed(receipt))
}
