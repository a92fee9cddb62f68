//! The ledger's local socket: length-prefixed request/response records for
//! queries, endorsement and submission.

mod client;
mod messages;
mod service;

pub use client::{ClientError, LedgerClient};
pub use messages::{
    read_record, write_record, ErrorCode, ProposalRequest, RemoteError, Request, Response, Status, MAX_RECORD,
};
pub use service::{handle_request, LedgerService};
