//! Cross-organization access control: a group-based policy language whose
//! commands become transactions on a permissioned ledger, and a signed
//! map-resolution control plane that enforces the committed policies.

pub mod admin;
pub mod api;
pub mod clock;
pub mod codec;
pub mod control;
pub mod crypto;
pub mod eid;
pub mod ledger;
pub mod names;
pub mod policy;

pub use clock::{Clock, ManualClock, SystemClock, Timestamp};
pub use eid::Eid;
pub use names::{Name, NameRef, OrgId, QualifiedName};
