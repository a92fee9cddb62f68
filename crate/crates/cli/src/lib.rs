//! The `gbp` administration tool.

pub mod args;
pub mod backend;
pub mod exit;
pub mod node;
pub mod script;
