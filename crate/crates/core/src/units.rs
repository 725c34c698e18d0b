//! Decimal SI quantities: data volumes in bytes and rates in bytes per second.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitError {
    pub input: String,
    pub expected: &'static str,
}

impl fmt::Display for UnitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot read `{}` (expected {})", self.input, self.expected)
    }
}

impl std::error::Error for UnitError {}

const DATA_UNITS: [(&str, f64); 5] = [
    ("TB", 1e12),
    ("GB", 1e9),
    ("MB", 1e6),
    ("KB", 1e3),
    ("B", 1.0),
];

const RATE_UNITS: [(&str, f64); 4] = [
    ("GBps", 1e9),
    ("MBps", 1e6),
    ("KBps", 1e3),
    ("Bps", 1.0),
];

fn split_number(s: &str) -> (&str, &str) {
    let end = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || ((c == 'e' || c == 'E')
                    && s[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
                || ((c == '-' || c == '+') && (i == 0 || s[..i].ends_with(['e', 'E']))))
        })
        .map_or(s.len(), |(i, _)| i);
    (s[..end].trim(), s[end..].trim())
}

fn parse_with(
    input: &str,
    table: &[(&str, f64)],
    expected: &'static str,
) -> Result<f64, UnitError> {
    let err = || UnitError {
        input: input.to_string(),
        expected,
    };
    let (num, suffix) = split_number(input.trim());
    let value: f64 = num.parse().map_err(|_| err())?;
    let scale = table
        .iter()
        .find(|(name, _)| *name == suffix)
        .map(|&(_, s)| s)
        .ok_or_else(err)?;
    let bytes = value * scale;
    if bytes.is_finite() {
        Ok(bytes)
    } else {
        Err(err())
    }
}

/// Parses a data volume such as `150GB` into bytes.
pub fn parse_data(s: &str) -> Result<f64, UnitError> {
    parse_with(s, &DATA_UNITS, "a number followed by B, KB, MB, GB or TB")
}

/// Parses a rate such as `100MBps` into bytes per second.
pub fn parse_rate(s: &str) -> Result<f64, UnitError> {
    parse_with(s, &RATE_UNITS, "a number followed by Bps, KBps, MBps or GBps")
}

/// Formats bytes exactly, so that [`parse_data`] returns the same value.
pub fn format_data(bytes: f64) -> String {
    format!("{bytes}B")
}

/// Formats a rate exactly, so that [`parse_rate`] returns the same value.
pub fn format_rate(bps: f64) -> String {
    format!("{bps}Bps")
}

pub const KB: f64 = 1e3;
pub const MB: f64 = 1e6;
pub const GB: f64 = 1e9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_suffixes() {
        assert_eq!(parse_rate("100MBps").unwrap(), 100e6);
        assert_eq!(parse_rate("2267 KBps").unwrap(), 2_267_000.0);
        assert_eq!(parse_data("150GB").unwrap(), 150e9);
        assert_eq!(parse_data("1.5e3KB").unwrap(), 1.5e6);
        assert_eq!(parse_data("42B").unwrap(), 42.0);
    }

    #[test]
    fn rejects_unknown_or_mixed_suffixes() {
        assert!(parse_rate("5MiBps/sec").is_err());
        assert!(parse_rate("5MB").is_err());
        assert!(parse_data("5MBps").is_err());
        assert!(parse_data("GB").is_err());
    }

    #[test]
    fn formatting_round_trips() {
        for v in [0.1 + 0.2, 123456789.123, 9.5e-3, 7e15] {
            assert_eq!(parse_data(&format_data(v)).unwrap(), v);
            assert_eq!(parse_rate(&format_rate(v)).unwrap(), v);
        }
    }
}
