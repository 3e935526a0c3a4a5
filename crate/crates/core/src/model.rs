//! Logical chart data model shared by the renderer, the extractor and the QA oracle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chart families handled by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Bar,
    Line,
    Pie,
}

impl ChartType {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartType::Bar => "bar",
            ChartType::Line => "line",
            ChartType::Pie => "pie",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bar" | "bar chart" => Some(ChartType::Bar),
            "line" | "line chart" => Some(ChartType::Line),
            "pie" | "pie chart" => Some(ChartType::Pie),
            _ => None,
        }
    }
}

impl std::fmt::Display for ChartType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An 8-bit RGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

/// Colors of data series use the plain RGB type.
pub type SeriesColor = Rgb;

/// Minimum Euclidean RGB distance separating series colors from each other and
/// from the background.
pub const MIN_COLOR_SEPARATION: f64 = 30.0;

impl Rgb {
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb { r, g, b }
    }

    pub fn distance(self, other: Rgb) -> f64 {
        let dr = self.r as f64 - other.r as f64;
        let dg = self.g as f64 - other.g as f64;
        let db = self.b as f64 - other.b as f64;
        (dr * dr + dg * dg + db * db).sqrt()
    }

    /// Uppercase `#RRGGBB`.
    pub fn to_hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }

    pub fn from_hex(s: &str) -> Option<Rgb> {
        let s = s.trim().strip_prefix('#')?;
        if s.len() != 6 || !s.is_ascii() {
            return None;
        }
        let c = |i: usize| u8::from_str_radix(&s[i..i + 2], 16).ok();
        Some(Rgb::new(c(0)?, c(2)?, c(4)?))
    }

    /// Linear blend: `t = 0` gives `self`, `t = 1` gives `other`.
    pub fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let m = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round().clamp(0.0, 255.0) as u8;
        Rgb::new(m(self.r, other.r), m(self.g, other.g), m(self.b, other.b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub name: String,
    pub color: SeriesColor,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YRange {
    pub min: f64,
    pub max: f64,
}

/// Ground-truth description of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    #[serde(default)]
    pub title: Option<String>,
    pub category_labels: Vec<String>,
    pub series: Vec<Series>,
    #[serde(default)]
    pub y_range: Option<YRange>,
    pub width_px: u32,
    pub height_px: u32,
    #[serde(default)]
    pub value_labels_drawn: bool,
}

pub const MIN_WIDTH_PX: u32 = 200;
pub const MIN_HEIGHT_PX: u32 = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NoSeries,
    EmptySeries,
    NonFiniteValue,
    NonPositivePieValue,
    ValueLabelArity,
    PieSeriesCount,
    MissingYRange,
    EmptyYRange,
    ValueOutOfRange,
    CanvasTooSmall,
    ColorTooCloseToBackground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            message: message.into(),
        });
    }
}

/// Checks every [`ChartSpec`] invariant against a white background.
pub fn validate_spec(spec: &ChartSpec) -> ValidationReport {
    validate_spec_with_background(spec, Rgb::WHITE)
}

pub fn validate_spec_with_background(spec: &ChartSpec, background: Rgb) -> ValidationReport {
    let mut report = ValidationReport::default();
    if spec.series.is_empty() {
        report.push(ViolationKind::NoSeries, "chart has no series");
    }
    if spec.width_px < MIN_WIDTH_PX || spec.height_px < MIN_HEIGHT_PX {
        report.push(
            ViolationKind::CanvasTooSmall,
            format!(
                "canvas {}x{} below minimum {MIN_WIDTH_PX}x{MIN_HEIGHT_PX}",
                spec.width_px, spec.height_px
            ),
        );
    }
    if spec.chart_type == ChartType::Pie && spec.series.len() > 1 {
        report.push(ViolationKind::PieSeriesCount, "pie charts have exactly one series");
    }
    let range = match spec.chart_type {
        ChartType::Pie => None,
        _ => match spec.y_range {
            None => {
                report.push(ViolationKind::MissingYRange, "bar and line charts need a y_range");
                None
            }
            Some(r) if !(r.min.is_finite() && r.max.is_finite() && r.min < r.max) => {
                report.push(ViolationKind::EmptyYRange, "y_range.min must be below y_range.max");
                None
            }
            Some(r) => Some(r),
        },
    };
    for (si, series) in spec.series.iter().enumerate() {
        if series.values.is_empty() {
            report.push(ViolationKind::EmptySeries, format!("series {si} has no values"));
        }
        if series.values.len() != spec.category_labels.len() {
            report.push(
                ViolationKind::ValueLabelArity,
                format!(
                    "value/label arity: series {si} has {} values for {} category labels",
                    series.values.len(),
                    spec.category_labels.len()
                ),
            );
        }
        if series.values.iter().any(|v| !v.is_finite()) {
            report.push(ViolationKind::NonFiniteValue, format!("series {si} has a non-finite value"));
        }
        if spec.chart_type == ChartType::Pie && series.values.iter().any(|v| v.is_finite() && *v <= 0.0) {
            report.push(ViolationKind::NonPositivePieValue, "pie values must be positive");
        }
        if let Some(r) = range {
            if series
                .values
                .iter()
                .any(|v| v.is_finite() && (*v < r.min || *v > r.max))
            {
                report.push(
                    ViolationKind::ValueOutOfRange,
                    format!("series {si} has values outside y_range"),
                );
            }
        }
        if series.color.distance(background) <= MIN_COLOR_SEPARATION {
            report.push(
                ViolationKind::ColorTooCloseToBackground,
                format!("series {si} color is too close to the background"),
            );
        }
    }
    report
}

/// Where a recovered value came from, resolvable against the emitted document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryRef {
    Rect { x: f64, y: f64, width: f64, height: f64 },
    PathAt { series: usize, x: f64 },
    Arc { series: usize, start_angle: f64 },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredSeries {
    pub name: String,
    pub color: SeriesColor,
    pub values: Vec<f64>,
    pub confidences: Vec<f64>,
    pub geometry: Vec<GeometryRef>,
}

/// Chart data read back from an image. Pie values are fractions summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredChart {
    pub chart_type: ChartType,
    pub title: Option<String>,
    pub category_labels: Vec<String>,
    pub series: Vec<RecoveredSeries>,
    pub y_range: Option<YRange>,
    pub width_px: u32,
    pub height_px: u32,
    pub value_labels_drawn: bool,
    /// Set when no axis calibration was possible; values are then normalized to [0, 1].
    pub relative_only: bool,
}

impl RecoveredChart {
    /// Lossless recovery of a spec, which is what a perfect extractor would return.
    pub fn from_spec(spec: &ChartSpec) -> Self {
        let series = spec
            .series
            .iter()
            .map(|s| {
                let values = if spec.chart_type == ChartType::Pie {
                    let total: f64 = s.values.iter().sum();
                    s.values.iter().map(|v| v / total).collect()
                } else {
                    s.values.clone()
                };
                RecoveredSeries {
                    name: s.name.clone(),
                    color: s.color,
                    confidences: vec![1.0; values.len()],
                    geometry: vec![GeometryRef::None; values.len()],
                    values,
                }
            })
            .collect();
        RecoveredChart {
            chart_type: spec.chart_type,
            title: spec.title.clone(),
            category_labels: spec.category_labels.clone(),
            series,
            y_range: spec.y_range,
            width_px: spec.width_px,
            height_px: spec.height_px,
            value_labels_drawn: spec.value_labels_drawn,
            relative_only: false,
        }
    }

    /// Values as displayed to a reader: percentages for pies, raw values otherwise.
    pub fn display_values(&self, series: usize) -> Vec<f64> {
        let s = &self.series[series];
        match self.chart_type {
            ChartType::Pie => s.values.iter().map(|v| v * 100.0).collect(),
            _ => s.values.clone(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("chart type mismatch: truth is {truth}, recovered is {recovered}")]
    ChartTypeMismatch { truth: ChartType, recovered: ChartType },
}

/// Guard for relative errors against true-zero values.
pub const RELATIVE_ERROR_EPSILON: f64 = 1e-9;

pub fn relative_error(truth: f64, recovered: f64) -> f64 {
    (recovered - truth).abs() / truth.abs().max(RELATIVE_ERROR_EPSILON)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueMatch {
    pub series: usize,
    pub category: usize,
    pub truth: f64,
    /// `None` when the recovery has no value at the aligned position.
    pub recovered: Option<f64>,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub values: Vec<ValueMatch>,
    pub label_matches: Vec<bool>,
    pub mean_relative_error: f64,
    /// For each truth series, the recovered series index it was aligned with.
    pub series_assignment: Vec<Option<usize>>,
}

/// One-to-one greedy color matching, smallest distance first.
pub fn align_series_by_color(truth: &[SeriesColor], recovered: &[SeriesColor]) -> Vec<Option<usize>> {
    let mut pairs = Vec::with_capacity(truth.len() * recovered.len());
    for (i, t) in truth.iter().enumerate() {
        for (j, r) in recovered.iter().enumerate() {
            pairs.push((t.distance(*r), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; truth.len()];
    let mut used = vec![false; recovered.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(j);
            used[j] = true;
        }
    }
    out
}

/// Per-value comparison of a recovery against ground truth.
pub fn spec_distance(truth: &ChartSpec, recovered: &RecoveredChart) -> Result<MatchScore, ModelError> {
    if truth.chart_type != recovered.chart_type {
        return Err(ModelError::ChartTypeMismatch {
            truth: truth.chart_type,
            recovered: recovered.chart_type,
        });
    }
    let truth_colors: Vec<_> = truth.series.iter().map(|s| s.color).collect();
    let rec_colors: Vec<_> = recovered.series.iter().map(|s| s.color).collect();
    let series_assignment = align_series_by_color(&truth_colors, &rec_colors);

    // Align categories by label text when every truth label is present, else by order.
    let by_label: Option<Vec<usize>> = truth
        .category_labels
        .iter()
        .map(|l| recovered.category_labels.iter().position(|r| r == l))
        .collect();
    let category_index = |ci: usize| -> usize {
        match &by_label {
            Some(idx) => idx[ci],
            None => ci,
        }
    };
    let label_matches = (0..truth.category_labels.len())
        .map(|ci| {
            recovered
                .category_labels
                .get(category_index(ci))
                .is_some_and(|r| *r == truth.category_labels[ci])
        })
        .collect();

    let mut values = Vec::new();
    for (si, series) in truth.series.iter().enumerate() {
        let pie_total: f64 = series.values.iter().sum();
        for (ci, &v) in series.values.iter().enumerate() {
            let tv = if truth.chart_type == ChartType::Pie { v / pie_total } else { v };
            let rv = series_assignment[si]
                .and_then(|rs| recovered.series[rs].values.get(category_index(ci)).copied());
            let relative_error = match rv {
                Some(r) => relative_error(tv, r),
                None => 1.0,
            };
            values.push(ValueMatch {
                series: si,
                category: ci,
                truth: tv,
                recovered: rv,
                relative_error,
            });
        }
    }
    let mean_relative_error = if values.is_empty() {
        0.0
    } else {
        values.iter().map(|v| v.relative_error).sum::<f64>() / values.len() as f64
    };
    Ok(MatchScore {
        values,
        label_matches,
        mean_relative_error,
        series_assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar_spec() -> ChartSpec {
        ChartSpec {
            chart_type: ChartType::Bar,
            title: None,
            category_labels: vec!["A".into(), "B".into(), "C".into()],
            series: vec![Series {
                name: "S".into(),
                color: Rgb::new(220, 40, 40),
                values: vec![10.0, 20.0, 15.0],
            }],
            y_range: Some(YRange { min: 0.0, max: 20.0 }),
            width_px: 400,
            height_px: 300,
            value_labels_drawn: false,
        }
    }

    #[test]
    fn valid_bar_spec_has_empty_report() {
        assert!(validate_spec(&bar_spec()).is_valid());
    }

    #[test]
    fn zero_pie_value_is_one_violation() {
        let mut s = bar_spec();
        s.chart_type = ChartType::Pie;
        s.y_range = None;
        s.series[0].values = vec![1.0, 0.0, 2.0];
        let r = validate_spec(&s);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].message, "pie values must be positive");
    }

    #[test]
    fn arity_mismatch_is_one_violation() {
        let mut s = bar_spec();
        s.series[0].values = vec![1.0, 2.0];
        let r = validate_spec(&s);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::ValueLabelArity);
        assert!(r.violations[0].message.starts_with("value/label arity"));
    }

    #[test]
    fn distance_identity_and_arithmetic() {
        let s = bar_spec();
        let rec = RecoveredChart::from_spec(&s);
        let m = spec_distance(&s, &rec).unwrap();
        assert_eq!(m.mean_relative_error, 0.0);
        assert!(m.label_matches.iter().all(|b| *b));

        assert!((relative_error(100.0, 97.0) - 0.03).abs() < 1e-12);
    }

    #[test]
    fn chart_type_mismatch() {
        let s = bar_spec();
        let mut rec = RecoveredChart::from_spec(&s);
        rec.chart_type = ChartType::Line;
        assert!(matches!(spec_distance(&s, &rec), Err(ModelError::ChartTypeMismatch { .. })));
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn permuted_series_align_by_color() {
        let mut s = bar_spec();
        s.series = vec![
            Series { name: "a".into(), color: Rgb::new(220, 40, 40), values: vec![1.0, 2.0, 3.0] },
            Series { name: "b".into(), color: Rgb::new(40, 90, 220), values: vec![4.0, 5.0, 6.0] },
            Series { name: "c".into(), color: Rgb::new(40, 180, 60), values: vec![7.0, 8.0, 9.0] },
        ];
        let base = RecoveredChart::from_spec(&s);
        let mut rec = base.clone();
        rec.series = vec![base.series[2].clone(), base.series[0].clone(), base.series[1].clone()];
        let m = spec_distance(&s, &rec).unwrap();
        assert_eq!(m.mean_relative_error, 0.0);

        // Brute force: the zero-error assignment among all permutations matches the color one.
        let mut best = (f64::INFINITY, vec![]);
        for p in permutations(3) {
            let err: f64 = (0..3)
                .flat_map(|si| (0..3).map(move |ci| (si, ci)))
                .map(|(si, ci)| relative_error(s.series[si].values[ci], rec.series[p[si]].values[ci]))
                .sum();
            if err < best.0 {
                best = (err, p);
            }
        }
        assert_eq!(best.0, 0.0);
        let color_assign: Vec<usize> = m.series_assignment.iter().map(|a| a.unwrap()).collect();
        assert_eq!(color_assign, best.1);
    }

    #[test]
    fn unknown_json_fields_rejected() {
        let json = serde_json::to_string(&bar_spec()).unwrap();
        let back: ChartSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, bar_spec());
        let bad = json.replacen('{', "{\"extra\":1,", 1);
        assert!(serde_json::from_str::<ChartSpec>(&bad).is_err());
    }

    #[test]
    fn hex_round_trip() {
        let c = Rgb::new(0x4C, 0x72, 0xB0);
        assert_eq!(c.to_hex(), "#4C72B0");
        assert_eq!(Rgb::from_hex("#4c72b0"), Some(c));
        assert_eq!(Rgb::from_hex("4C72B0"), None);
    }
}
