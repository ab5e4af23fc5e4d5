use serde::Serialize;

use super::run::{evaluate, Diagnostic, StoredTrace};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub diagnostics: Vec<Diagnostic>,
    /// Every asserted diagnostic passed.
    pub passed: bool,
    /// Recomputed diagnostics equal the stored ones.
    pub matches_stored: bool,
}

/// Re-runs the diagnostics of a stored trace.
pub fn check_trace(trace: &StoredTrace) -> Result<CheckReport> {
    let diagnostics = evaluate(trace)?;
    let passed = diagnostics.iter().all(|d| !d.asserted || d.passed);
    let matches_stored = diagnostics == trace.summary.diagnostics;
    Ok(CheckReport { diagnostics, passed, matches_stored })
}
