//! Scaling experiments for the policy ledger and the map server, with
//! reports written as CSV and JSON summaries.

pub mod error;
pub mod experiments;
pub mod fuzz;
pub mod report;
pub mod stats;
pub mod workload;

pub use error::BenchError;
pub use experiments::RunConfig;
pub use report::{BenchReport, Point, Sample};
