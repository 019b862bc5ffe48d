//! Memory budget shared by every allocation-heavy routine.

use crate::error::{Error, Result};

/// Environment variable holding the budget in bytes.
pub const BUDGET_ENV: &str = "LMSV_LAB_BUDGET_BYTES";

/// Budget used when the environment variable is absent: 2 GiB.
pub const DEFAULT_BUDGET_BYTES: u64 = 2 << 30;

/// The active memory budget. Unparsable values fall back to the default
/// with a warning.
pub fn memory_budget() -> u64 {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v.trim().parse().unwrap_or_else(|_| {
            log::warn!("{BUDGET_ENV}={v:?} is not a byte count; using {DEFAULT_BUDGET_BYTES}");
            DEFAULT_BUDGET_BYTES
        }),
        Err(_) => DEFAULT_BUDGET_BYTES,
    }
}

/// Fail with [`Error::Budget`] when `needed` exceeds `budget`.
pub fn check(needed: u64, budget: u64) -> Result<()> {
    if needed > budget {
        Err(Error::Budget { needed, budget })
    } else {
        Ok(())
    }
}
