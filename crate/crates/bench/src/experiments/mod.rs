//! The four scaling experiments.

pub mod chain_size;
pub mod read_latency;
pub mod trie_cdf;
pub mod write_latency;

use std::time::Instant;

use crate::error::BenchError;
use crate::report::MIN_SAMPLES;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub seed: u64,
    /// Measured samples per grid point.
    pub samples: usize,
    /// Discarded samples taken before measuring each point.
    pub warmup: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            samples: 200,
            warmup: 20,
        }
    }
}

impl RunConfig {
    pub(crate) fn require_samples(&self, series: &str) -> Result<(), BenchError> {
        if self.samples < MIN_SAMPLES {
            return Err(BenchError::InsufficientSamples {
                series: series.to_owned(),
                param: 0,
                got: self.samples,
                need: MIN_SAMPLES,
            });
        }
        Ok(())
    }
}

/// Grids must be non-empty and strictly increasing.
pub(crate) fn check_grid(grid: &[u64], what: &str) -> Result<(), BenchError> {
    if grid.is_empty() {
        return Err(BenchError::InvalidGrid(format!("empty {what} grid")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::InvalidGrid(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

pub(crate) fn nanos_since(t: Instant) -> u64 {
    u64::try_from(t.elapsed().as_nanos()).unwrap_or(u64::MAX)
}
