//! The administrator-facing command language and its translation into
//! ledger transaction proposals.

mod duration;
mod intent;
mod parser;
mod render;

pub use duration::{parse_duration, DurationLiteral, DurationUnit, MalformedDuration};
pub use intent::{Intent, OptionKey, OptionSet, Verb};
pub use parser::{parse_command, parse_command_bytes, ParseError};
pub use render::{render_proposal, render_writes, target_key, RenderError, StateLookup};
