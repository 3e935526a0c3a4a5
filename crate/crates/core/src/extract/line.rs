use serde::{Deserialize, Serialize};

use super::{plot_masks, rdp, require, CandidateExtraction, ExtractError, Mark, RDP_EPSILON};
use crate::classify::ChartProfile;
use crate::layout::{Axis, LayoutMap};
use crate::model::ChartType;
use crate::raster::{BinaryMask, RasterImage};

/// Column gaps up to this width count as supported when interpolated across.
const MAX_INTERPOLATED_GAP: usize = 3;
/// Dense points this close to a vertex are left out of segment line fits.
const FIT_END_MARGIN: f64 = 3.0;
/// A refined vertex may move at most this far from the simplified one.
const MAX_VERTEX_SHIFT: f64 = 8.0;
const OCCLUSION_MARGIN: u32 = 2;
/// Columns on each side used to estimate the local slope of an edge.
const SLOPE_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineVariant {
    /// Mean row of each column.
    Centerline,
    /// Topmost row of each column, lowered by half the stroke width.
    Peak,
    /// Bottommost row of each column, raised by half the stroke width.
    Trough,
}

impl LineVariant {
    pub fn id(self) -> &'static str {
        match self {
            LineVariant::Centerline => "line/centerline",
            LineVariant::Peak => "line/peak",
            LineVariant::Trough => "line/trough",
        }
    }
}

/// Vertical extent of a stroke: area over centerline length, in rows.
fn stroke_width(columns: &[(u32, Vec<u32>)]) -> f64 {
    let area: usize = columns.iter().map(|(_, r)| r.len()).sum();
    let centers: Vec<f64> = columns.iter().map(|(_, r)| r.iter().sum::<u32>() as f64 / r.len() as f64).collect();
    let length = 1.0 + centers.windows(2).map(|w| (1.0 + (w[1] - w[0]).powi(2)).sqrt()).sum::<f64>();
    area as f64 / length
}

/// A column is occluded when another series' stroke touches this one there;
/// readings in such columns are biased and are left out.
fn occluded(x: u32, rows: &[u32], others: &[&BinaryMask]) -> bool {
    let lo = rows[0].saturating_sub(OCCLUSION_MARGIN);
    let hi = rows[rows.len() - 1] + OCCLUSION_MARGIN;
    others.iter().any(|m| (lo..=hi.min(m.height() - 1)).any(|y| m.get(x, y)))
}

fn dense_points(mask: &BinaryMask, others: &[&BinaryMask], variant: LineVariant) -> (Vec<(f64, f64)>, usize) {
    let columns: Vec<(u32, Vec<u32>)> = (0..mask.width())
        .map(|x| (x, (0..mask.height()).filter(|&y| mask.get(x, y)).collect::<Vec<u32>>()))
        .filter(|(x, r)| !r.is_empty() && !occluded(*x, r, others))
        .collect();
    if columns.is_empty() {
        return (Vec::new(), 0);
    }
    let width = stroke_width(&columns);
    let edge = |rows: &Vec<u32>| match variant {
        LineVariant::Peak => rows[0] as f64,
        _ => rows[rows.len() - 1] as f64,
    };
    let points: Vec<(f64, f64)> = columns
        .iter()
        .enumerate()
        .map(|(i, (x, rows))| {
            let y = match variant {
                LineVariant::Centerline => rows.iter().sum::<u32>() as f64 / rows.len() as f64 + 0.5,
                LineVariant::Peak | LineVariant::Trough => {
                    // The edge sits half a stroke width from the centerline measured
                    // perpendicular to it, which is further in rows on steep parts.
                    let (a, b) = (i.saturating_sub(SLOPE_WINDOW), (i + SLOPE_WINDOW).min(columns.len() - 1));
                    let dx = columns[b].0 as f64 - columns[a].0 as f64;
                    let slope = if dx > 0.0 { (edge(&columns[b].1) - edge(&columns[a].1)) / dx } else { 0.0 };
                    let offset = width / 2.0 * (1.0 + slope * slope).sqrt() - 0.5;
                    if variant == LineVariant::Peak {
                        edge(rows) + 0.5 + offset
                    } else {
                        edge(rows) + 0.5 - offset
                    }
                }
            };
            (*x as f64 + 0.5, y)
        })
        .collect();
    // Supported columns: present ones plus short interpolated gaps.
    let mut support = columns.len();
    for w in columns.windows(2) {
        let gap = (w[1].0 - w[0].0 - 1) as usize;
        if gap <= MAX_INTERPOLATED_GAP {
            support += gap;
        }
    }
    (points, support)
}

/// Least-squares line `y = a + b x` through the points, if they span some x range.
fn fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-9 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Replaces simplified vertices by intersections of lines fitted to the dense
/// points of their adjacent segments, which removes the bias of per-column
/// readings at sharp corners. Endpoints keep their x and take the fitted y.
fn refine_vertices(dense: &[(f64, f64)], simplified: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if simplified.len() < 2 {
        return simplified.to_vec();
    }
    let fits: Vec<Option<(f64, f64)>> = simplified
        .windows(2)
        .map(|w| {
            let (x0, x1) = (w[0].0, w[1].0);
            let margin = FIT_END_MARGIN.min((x1 - x0) / 4.0);
            let inner: Vec<(f64, f64)> = dense.iter().copied().filter(|p| p.0 >= x0 + margin && p.0 <= x1 - margin).collect();
            fit(&inner)
        })
        .collect();
    let mut out = simplified.to_vec();
    let last = out.len() - 1;
    if let Some((a, b)) = fits[0] {
        out[0].1 = a + b * out[0].0;
    }
    if let Some((a, b)) = fits[last - 1] {
        out[last].1 = a + b * out[last].0;
    }
    for i in 1..last {
        let (Some((a1, b1)), Some((a2, b2))) = (fits[i - 1], fits[i]) else {
            continue;
        };
        if (b1 - b2).abs() < 1e-6 {
            continue;
        }
        let x = (a2 - a1) / (b1 - b2);
        let y = a1 + b1 * x;
        if (x - out[i].0).abs() <= MAX_VERTEX_SHIFT && (y - out[i].1).abs() <= MAX_VERTEX_SHIFT && x > out[i - 1].0 && x < out[i + 1].0 {
            out[i] = (x, y);
        }
    }
    out
}

/// Smoothness weight tying each knot to its neighbours so that knots without
/// nearby data stay determined.
const KNOT_SMOOTHING: f64 = 1e-3;
/// A knot fit is trusted when its RMS residual stays below this.
const MAX_KNOT_RMS: f64 = 1.0;

/// Least-squares piecewise-linear fit with vertices at the given x positions
/// (hat-function basis). Returns the vertices and the RMS residual.
fn knot_fit(dense: &[(f64, f64)], knots: &[f64]) -> Option<(Vec<(f64, f64)>, f64)> {
    let n = knots.len();
    if n < 2 || dense.len() < n {
        return None;
    }
    let weights = |x: f64| -> (usize, f64) {
        // Index of the segment holding x, and the weight of its right knot.
        let x = x.clamp(knots[0], knots[n - 1]);
        let i = knots.windows(2).position(|w| x <= w[1]).unwrap_or(n - 2);
        let t = (x - knots[i]) / (knots[i + 1] - knots[i]);
        (i, t)
    };
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for &(x, y) in dense {
        let (i, t) = weights(x);
        let (wl, wr) = (1.0 - t, t);
        a[i][i] += wl * wl;
        a[i][i + 1] += wl * wr;
        a[i + 1][i] += wl * wr;
        a[i + 1][i + 1] += wr * wr;
        rhs[i] += wl * y;
        rhs[i + 1] += wr * y;
    }
    for i in 0..n - 1 {
        a[i][i] += KNOT_SMOOTHING;
        a[i + 1][i + 1] += KNOT_SMOOTHING;
        a[i][i + 1] -= KNOT_SMOOTHING;
        a[i + 1][i] -= KNOT_SMOOTHING;
    }
    let ys = solve(a, rhs)?;
    let sq: f64 = dense
        .iter()
        .map(|&(x, y)| {
            let (i, t) = weights(x);
            (ys[i] * (1.0 - t) + ys[i + 1] * t - y).powi(2)
        })
        .sum();
    let rms = (sq / dense.len() as f64).sqrt();
    Some((knots.iter().copied().zip(ys).collect(), rms))
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Keypoints of one dense reading. Category tick positions, when present and
/// consistent with the stroke, serve as vertex positions; otherwise RDP vertices
/// are refined by segment line fits. Both end with RDP simplification.
fn keypoints(dense: &[(f64, f64)], knots: &[f64], diagnostics: &mut Vec<String>, si: usize) -> Vec<(f64, f64)> {
    if let Some((vertices, rms)) = knot_fit(dense, knots) {
        if rms <= MAX_KNOT_RMS {
            return rdp(&vertices, RDP_EPSILON);
        }
        diagnostics.push(format!("series {si}: tick-anchored fit rejected (rms {rms:.2} px)"));
    }
    refine_vertices(dense, &rdp(dense, RDP_EPSILON))
}

/// Per-series polyline keypoints from a dense per-column reading.
pub fn extract_line(image: &RasterImage, profile: &ChartProfile, layout: &LayoutMap, variant: LineVariant) -> Result<CandidateExtraction, ExtractError> {
    require(profile, ChartType::Line)?;
    let mut marks = Vec::new();
    let mut diagnostics = Vec::new();
    let (mut supported, mut span) = (0usize, 0usize);
    let masks = plot_masks(image, profile, layout);
    let mut knots: Vec<f64> = layout.ticks(Axis::X).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    for (si, mask) in masks.iter().enumerate() {
        let others: Vec<&BinaryMask> = masks.iter().enumerate().filter(|(j, _)| *j != si).map(|(_, m)| m).collect();
        let (dense, support) = dense_points(mask, &others, variant);
        if dense.len() < 2 {
            diagnostics.push(format!("series {si}: no stroke found"));
            continue;
        }
        supported += support;
        span += (dense[dense.len() - 1].0 - dense[0].0) as usize + 1;
        let simplified = keypoints(&dense, &knots, &mut diagnostics, si);
        marks.extend(simplified.into_iter().map(|(x, y)| Mark::LinePoint { series_index: si, x, y }));
    }
    if marks.is_empty() {
        return Err(ExtractError::NoLineFound);
    }
    Ok(CandidateExtraction {
        variant_id: variant.id().to_string(),
        chart_type: ChartType::Line,
        marks,
        confidence: if span == 0 { 0.0 } else { (supported as f64 / span as f64).min(1.0) },
        diagnostics,
        disk: None,
    })
}
