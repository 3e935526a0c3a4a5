//! Candidate geometry extractors. Each chart type has several independent
//! variants whose outputs are reconciled by the critic.

mod bars;
mod line;
mod pie;

pub use bars::{extract_bars_cc, extract_bars_projection, extract_bars_rows};
pub use line::{extract_line, LineVariant};
pub use pie::{extract_pie, PieVariant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{series_masks, ChartProfile};
use crate::geom::BBox;
use crate::layout::LayoutMap;
use crate::model::{ChartType, Rgb};
use crate::raster::{BinaryMask, RasterImage};

/// Simplification tolerance for extracted polylines.
pub const RDP_EPSILON: f64 = 1.5;
/// Geometry may overhang the detected plot area by this much.
pub const PLOT_SLACK: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mark {
    Bar {
        series_index: usize,
        bbox: BBox,
        fill_ratio: f64,
    },
    LinePoint {
        series_index: usize,
        x: f64,
        y: f64,
    },
    PieSegment {
        series_index: usize,
        start_angle: f64,
        sweep_angle: f64,
        fraction: f64,
    },
}

impl Mark {
    pub fn series_index(&self) -> usize {
        match *self {
            Mark::Bar { series_index, .. } | Mark::LinePoint { series_index, .. } | Mark::PieSegment { series_index, .. } => series_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateExtraction {
    pub variant_id: String,
    pub chart_type: ChartType,
    pub marks: Vec<Mark>,
    pub confidence: f64,
    pub diagnostics: Vec<String>,
    /// Disk geometry of a pie, when the candidate found one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk: Option<PieDisk>,
}

/// Center and radii of a pie's disk in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PieDisk {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl CandidateExtraction {
    pub fn bars(&self) -> impl Iterator<Item = (usize, BBox)> + '_ {
        self.marks.iter().filter_map(|m| match m {
            Mark::Bar { series_index, bbox, .. } => Some((*series_index, *bbox)),
            _ => None,
        })
    }

    /// Points of one series' polyline in x order.
    pub fn line_points(&self, series: usize) -> Vec<(f64, f64)> {
        self.marks
            .iter()
            .filter_map(|m| match *m {
                Mark::LinePoint { series_index, x, y } if series_index == series => Some((x, y)),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("no bars found")]
    NoBarsFound,
    #[error("no line found")]
    NoLineFound,
    #[error("no pie found")]
    NoPieFound,
    #[error("extractor for {expected} charts applied to a {actual} profile")]
    WrongChartType { expected: ChartType, actual: ChartType },
}

fn require(profile: &ChartProfile, expected: ChartType) -> Result<(), ExtractError> {
    if profile.chart_type == expected {
        Ok(())
    } else {
        Err(ExtractError::WrongChartType {
            expected,
            actual: profile.chart_type,
        })
    }
}

/// Per-series masks limited to the plot area plus slack.
pub(crate) fn plot_masks(image: &RasterImage, profile: &ChartProfile, layout: &LayoutMap) -> Vec<BinaryMask> {
    let region = layout.plot_area.expand(PLOT_SLACK);
    series_masks(image, &profile.series_colors, profile.background)
        .into_iter()
        .map(|m| m.restrict_to(&region))
        .collect()
}

/// How much of `color` a pixel holds, measured along the background-to-color line.
pub(crate) fn coverage(p: Rgb, color: Rgb, background: Rgb) -> f64 {
    let d = [
        color.r as f64 - background.r as f64,
        color.g as f64 - background.g as f64,
        color.b as f64 - background.b as f64,
    ];
    let q = [
        p.r as f64 - background.r as f64,
        p.g as f64 - background.g as f64,
        p.b as f64 - background.b as f64,
    ];
    let len2: f64 = d.iter().map(|v| v * v).sum();
    if len2 == 0.0 {
        return 0.0;
    }
    ((q[0] * d[0] + q[1] * d[1] + q[2] * d[2]) / len2).clamp(0.0, 1.0)
}

/// Ramer–Douglas–Peucker simplification. Keeps both endpoints and never adds points.
pub fn rdp(points: &[(f64, f64)], epsilon: f64) -> Vec<(f64, f64)> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0usize, points.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        if b <= a + 1 {
            continue;
        }
        let (mut best, mut best_d) = (a, -1.0);
        for i in a + 1..b {
            let d = crate::geom::point_segment_distance(points[i], points[a], points[b]);
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        if best_d > epsilon {
            keep[best] = true;
            stack.push((a, best));
            stack.push((best, b));
        }
    }
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}
