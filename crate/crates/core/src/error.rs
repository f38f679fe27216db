//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. The variants map
//! one-to-one onto the failure classes of the public API: input validation,
//! geometry construction, mesh budgets, solver convergence, and rule lookups.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Compact number formatting for error messages: plain decimal for small
/// magnitudes, scientific for large ones (doping levels, etc.).
fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar input fell outside its supported interval.
    /// Carries the field name, the offending value, and the valid interval.
    #[error(
        "{field} = {} outside supported range [{}, {}]",
        fmt_num(*value),
        fmt_num(*min),
        fmt_num(*max)
    )]
    Range {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// A layout could not be constructed (overlapping or inverted boxes,
    /// inconsistent placement parameters, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The mesh generator exceeded its cell budget.
    #[error("mesh budget exceeded: {cells} cells > budget {budget}")]
    Budget { cells: usize, budget: usize },

    /// The nonlinear solver failed to converge. Reports how far the bias
    /// ramp got and the final residual so the caller can diagnose or retry.
    #[error(
        "solver failed to converge at bias step {bias_step} \
         (outer iteration {iteration}, residual {residual:.3e} V)"
    )]
    Convergence {
        bias_step: String,
        iteration: usize,
        residual: f64,
    },

    /// A requested operating point is missing from a swept I-V curve.
    #[error("missing point: no converged sample at v_gs = {v_gs} V, v_ds = {v_ds} V")]
    MissingPoint { v_gs: f64, v_ds: f64 },

    /// Two results that must refer to the same device do not.
    #[error("mismatch: {0}")]
    Mismatch(String),

    /// A scan completed without satisfying its target condition.
    #[error("not found: {0}")]
    NotFound(String),

    /// A rule-table query outside the covered key range.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// Malformed configuration input (bad JSON, unknown keys, missing units).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Helper for range checks; returns `Ok(value)` when inside `[min, max]`.
    pub fn check_range(field: &'static str, value: f64, min: f64, max: f64) -> Result<f64> {
        if !value.is_finite() || value < min || value > max {
            Err(Error::Range {
                field,
                value,
                min,
                max,
            })
        } else {
            Ok(value)
        }
    }
}
