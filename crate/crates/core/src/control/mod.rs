//! Map resolution: signed requests from users, authorization against the
//! ledger's policies, and sealed security associations in reply.

pub mod association;
pub mod client;
pub mod nonce;
pub mod router;
pub mod server;
pub mod transport;
pub mod trie;
pub mod view;
pub mod wire;

pub use association::{establish_association, AssociationError, CipherSuite, SecurityAssociation};
pub use client::{ClientError, UserAgent};
pub use nonce::NonceCache;
pub use router::{AssociationCheck, Router, RouterConfig};
pub use server::{AuthPath, Authorization, DenyReason, Event, EventKind, EventLog, MapServer, MapServerConfig, SyncStats};
pub use transport::{CapturingTransport, InProcessTransport, Transport, UdpRouterService, UdpTransport, DEFAULT_CONTROL_PORT};
pub use trie::{AllowRecord, Lookup, PolicyTrie, MAX_VISITS};
pub use view::{LedgerView, ViewError};
pub use wire::{decode_message, encode_message, MapReply, MapRequest, Message, WireError};
