use std::f64::consts::PI;

use anyhow::{bail, Context, Result};

/// Parses an angular frequency. Bare numbers are rad/s; `hz`, `khz` and
/// `rad/s` suffixes are accepted, case-insensitive.
pub fn parse_frequency(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let (num, factor) = if let Some(v) = t.strip_suffix("khz") {
        (v, 2000.0 * PI)
    } else if let Some(v) = t.strip_suffix("hz") {
        (v, 2.0 * PI)
    } else if let Some(v) = t.strip_suffix("rad/s") {
        (v, 1.0)
    } else {
        (t.as_str(), 1.0)
    };
    let x: f64 = num.trim().parse().with_context(|| format!("not a frequency: `{s}`"))?;
    if !x.is_finite() {
        bail!("frequency must be finite, got `{s}`");
    }
    Ok(x * factor)
}

/// Parses a duration in seconds; `s` and `ms` suffixes are accepted.
pub fn parse_seconds(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let (num, factor) = if let Some(v) = t.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else {
        (t.as_str(), 1.0)
    };
    let x: f64 = num.trim().parse().with_context(|| format!("not a duration: `{s}`"))?;
    if !x.is_finite() {
        bail!("duration must be finite, got `{s}`");
    }
    Ok(x * factor)
}
