//! Text extraction: builtin atlas OCR, external OCR adapters, role assignment and
//! tick-value parsing.

mod builtin;
mod external;
mod roles;

pub use builtin::{ocr_builtin, ocr_builtin_with_scale, estimate_text_scale};
pub use external::{normalize_external, ocr_external, ExternalOcrItem, FixtureOcrClient, OcrClient, SubprocessOcrClient, OCR_CMD_ENV};
pub use roles::{assign_roles, is_numeric_text, VALUE_LABEL_WINDOW_PX};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextRole {
    TickY,
    TickX,
    CategoryLabel,
    LegendEntry,
    Title,
    ValueLabel,
    Unknown,
}

impl TextRole {
    pub fn as_str(self) -> &'static str {
        match self {
            TextRole::TickY => "tick-y",
            TextRole::TickX => "tick-x",
            TextRole::CategoryLabel => "category-label",
            TextRole::LegendEntry => "legend-entry",
            TextRole::Title => "title",
            TextRole::ValueLabel => "value-label",
            TextRole::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<TextRole> {
        Some(match s {
            "tick-y" => TextRole::TickY,
            "tick-x" => TextRole::TickX,
            "category-label" => TextRole::CategoryLabel,
            "legend-entry" => TextRole::LegendEntry,
            "title" => TextRole::Title,
            "value-label" => TextRole::ValueLabel,
            "unknown" => TextRole::Unknown,
            _ => return None,
        })
    }
}

/// A recognized string with its box `(x, y, w, h)` in image pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextItem {
    pub text: String,
    pub bbox: BBox,
    pub confidence: f64,
    pub role: TextRole,
}

#[derive(Debug, Error)]
pub enum OcrError {
    #[error("ocr client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("ocr client returned malformed output: {0}")]
    MalformedOutput(String),
}

#[derive(Debug, Error, PartialEq)]
#[error("not numeric: {0:?}")]
pub struct NotNumeric(pub String);

/// Parses tick and value text: plain decimals, `,` thousands separators, a `%`
/// suffix (stripped, value kept) and `K`/`M`/`B` magnitude suffixes.
pub fn parse_tick_value(text: &str) -> Result<f64, NotNumeric> {
    let err = || NotNumeric(text.to_string());
    let mut s: String = text.trim().chars().filter(|c| *c != ',').collect();
    if let Some(stripped) = s.strip_suffix('%') {
        s = stripped.trim_end().to_string();
    }
    let mult = match s.chars().last() {
        Some('K') | Some('k') => 1e3,
        Some('M') => 1e6,
        Some('B') => 1e9,
        _ => 1.0,
    };
    if mult != 1.0 {
        s.pop();
    }
    let s = s.trim();
    // Reject things Rust's float parser would accept but charts never print.
    let valid = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || c == '.' || c == '-' || c == '+')
        && s.chars().any(|c| c.is_ascii_digit())
        && s.chars().skip(1).all(|c| c != '-' && c != '+');
    if !valid {
        return Err(err());
    }
    let v: f64 = s.parse().map_err(|_| err())?;
    Ok(v * mult)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::ticks::{format_tick, nice_ticks};

    #[test]
    fn parse_examples() {
        assert_eq!(parse_tick_value("1,200"), Ok(1200.0));
        assert_eq!(parse_tick_value("3.5K"), Ok(3500.0));
        assert_eq!(parse_tick_value("45%"), Ok(45.0));
        assert_eq!(parse_tick_value("2M"), Ok(2e6));
        assert_eq!(parse_tick_value("-7.5"), Ok(-7.5));
        assert!(parse_tick_value("abc").is_err());
        assert!(parse_tick_value("").is_err());
        assert!(parse_tick_value("1-2").is_err());
        assert!(parse_tick_value("inf").is_err());
    }

    #[test]
    fn tick_labels_round_trip() {
        for max in [1.0, 7.0, 20.0, 37.0, 100.0, 450.0, 1000.0, 0.05] {
            for t in nice_ticks(0.0, max) {
                assert_eq!(parse_tick_value(&format_tick(t)), Ok(t), "tick {t}");
            }
        }
    }
}
