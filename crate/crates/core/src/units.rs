//! Strict unit-suffixed scalar parsing for configuration values.
//!
//! Config files never contain bare numbers for physical quantities; every
//! value carries its unit, e.g. `"50nm"`, `"1e17cm-3"`, `"0.5V"`, `"1e-7s"`.
//! Parsing is strict: a missing, unknown, or mismatched unit is an error, so
//! a config written in the wrong unit fails loudly instead of running with a
//! silently misscaled device.

use crate::error::{Error, Result};

/// Physical dimension a config value must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Lengths, in nanometres (`nm`).
    Nanometre,
    /// Doping / carrier concentrations, in per cubic centimetre (`cm-3`).
    PerCubicCentimetre,
    /// Potentials, in volts (`V`).
    Volt,
    /// Times, in seconds (`s`).
    Second,
}

impl Unit {
    pub fn suffix(self) -> &'static str {
        match self {
            Unit::Nanometre => "nm",
            Unit::PerCubicCentimetre => "cm-3",
            Unit::Volt => "V",
            Unit::Second => "s",
        }
    }
}

/// Parses `text` as a scalar carrying exactly `unit`. Returns the numeric
/// value in that unit (no rescaling is performed).
pub fn parse_scalar(text: &str, unit: Unit) -> Result<f64> {
    let text = text.trim();
    let suffix = unit.suffix();
    let body = text.strip_suffix(suffix).ok_or_else(|| {
        Error::Config(format!(
            "value '{text}' must carry unit '{suffix}' (e.g. \"50{suffix}\")"
        ))
    })?;
    let body = body.trim_end();
    if body.is_empty() {
        return Err(Error::Config(format!("value '{text}' has no magnitude")));
    }
    let value: f64 = body.parse().map_err(|_| {
        Error::Config(format!("value '{text}': '{body}' is not a valid number"))
    })?;
    if !value.is_finite() {
        return Err(Error::Config(format!("value '{text}' is not finite")));
    }
    Ok(value)
}

/// Formats a scalar with its unit suffix, the inverse of [`parse_scalar`].
pub fn format_scalar(value: f64, unit: Unit) -> String {
    format!("{}{}", value, unit.suffix())
}
