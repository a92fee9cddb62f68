//! Exit codes and the mapping from every failure to exactly one of them.

use std::fmt;

use fedgbp_core::admin::CommandError;
use fedgbp_core::api::{ClientError, ErrorCode};
use fedgbp_core::ledger::{LedgerError, TxReceipt, TxValidity};
use fedgbp_core::policy::{ParseError, RenderError};

pub const OK: u8 = 0;
/// Malformed command, bad usage or configuration.
pub const USAGE: u8 = 1;
/// Chaincode rejection, MVCC conflict, unresolvable reference or missing asset.
pub const REJECTED: u8 = 2;
pub const ENDORSEMENT: u8 = 3;
/// Ledger or router unreachable, or failing internally.
pub const TRANSPORT: u8 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl fmt::Display) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        Self::new(USAGE, message)
    }

    pub fn transport(message: impl fmt::Display) -> Self {
        Self::new(TRANSPORT, message)
    }

    pub fn is_transport(&self) -> bool {
        self.code == TRANSPORT
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::new(USAGE, format!("parse error: {e}"))
    }
}

impl From<RenderError> for Failure {
    fn from(e: RenderError) -> Self {
        Failure::new(REJECTED, e)
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        let code = match &e {
            LedgerError::ChaincodeRejection(_) | LedgerError::SimulationMismatch(_) => REJECTED,
            LedgerError::PolicyUnsatisfied => ENDORSEMENT,
            LedgerError::UnknownOrg(_) | LedgerError::DuplicateOrg(_) | LedgerError::InvalidKey(_) => USAGE,
            LedgerError::InvalidPolicy(_) => USAGE,
            _ => TRANSPORT,
        };
        Failure::new(code, e)
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Remote(r) => {
                let code = match r.code {
                    ErrorCode::ChaincodeRejection => REJECTED,
                    ErrorCode::PolicyUnsatisfied => ENDORSEMENT,
                    ErrorCode::UnknownOrg | ErrorCode::Unauthorized | ErrorCode::BadRequest => USAGE,
                    ErrorCode::Internal => TRANSPORT,
                };
                Failure::new(code, r.message)
            }
            other => Failure::transport(other),
        }
    }
}

impl From<CommandError> for Failure {
    fn from(e: CommandError) -> Self {
        match e {
            CommandError::Parse(e) => e.into(),
            CommandError::Render(e) => e.into(),
            CommandError::Ledger(e) => e.into(),
            CommandError::Invalidated(r) => invalidated(&r),
        }
    }
}

/// A committed transaction that the validators marked invalid.
pub fn invalidated(r: &TxReceipt) -> Failure {
    let code = match r.validity {
        TxValidity::EndorsementPolicyFailure => ENDORSEMENT,
        _ => REJECTED,
    };
    Failure::new(
        code,
        format!("transaction {} committed at height {} as {:?}", r.tx_id.short(), r.height, r.validity),
    )
}
