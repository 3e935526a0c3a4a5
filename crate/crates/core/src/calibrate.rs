//! Pixel-to-data mapping from tick labels, and value recovery from merged geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::ChartProfile;
use crate::extract::{CandidateExtraction, Mark};
use crate::geom::{polyline_y_at, BBox};
use crate::layout::{Axis, LayoutMap};
use crate::model::{ChartType, GeometryRef, RecoveredChart, RecoveredSeries, Rgb, YRange};
use crate::ocr::{parse_tick_value, TextItem, TextRole};
use crate::raster::RasterImage;
use crate::svgdoc::{SvgDocument, SvgElement};

/// Above this pixel-equivalent RMS the worst tick is dropped once.
pub const OUTLIER_RMS_PX: f64 = 1.5;
/// Legend swatches match a series color within this RGB distance.
pub const LEGEND_COLOR_TOLERANCE: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisCalibration {
    pub axis: Axis,
    /// `value = a * pixel + b`.
    pub a: f64,
    pub b: f64,
    pub support_ticks: Vec<(f64, f64)>,
    /// RMS residual in value units.
    pub residual_rms: f64,
}

impl AxisCalibration {
    pub fn value_at(&self, pixel: f64) -> f64 {
        self.a * pixel + self.b
    }

    pub fn pixel_rms(&self) -> f64 {
        self.residual_rms / self.a.abs()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrateError {
    #[error("need at least 2 ticks, have {0}")]
    InsufficientTicks(usize),
    #[error("all ticks share one pixel")]
    DegenerateTicks,
    #[error("bar and line recovery needs a y-axis calibration")]
    MissingCalibration,
}

fn least_squares(axis: Axis, ticks: &[(f64, f64)]) -> Result<AxisCalibration, CalibrateError> {
    let n = ticks.len() as f64;
    let mx = ticks.iter().map(|t| t.0).sum::<f64>() / n;
    let my = ticks.iter().map(|t| t.1).sum::<f64>() / n;
    let sxx: f64 = ticks.iter().map(|t| (t.0 - mx).powi(2)).sum();
    let sxy: f64 = ticks.iter().map(|t| (t.0 - mx) * (t.1 - my)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return Err(CalibrateError::DegenerateTicks);
    }
    let a = sxy / sxx;
    if a == 0.0 {
        return Err(CalibrateError::DegenerateTicks);
    }
    let b = my - a * mx;
    let residual_rms = (ticks.iter().map(|t| (a * t.0 + b - t.1).powi(2)).sum::<f64>() / n).sqrt();
    Ok(AxisCalibration {
        axis,
        a,
        b,
        support_ticks: ticks.to_vec(),
        residual_rms,
    })
}

/// Affine least-squares fit over `(pixel, value)` ticks with one pass of
/// worst-tick rejection.
pub fn fit_axis(axis: Axis, ticks: &[(f64, f64)]) -> Result<AxisCalibration, CalibrateError> {
    if ticks.len() < 2 {
        return Err(CalibrateError::InsufficientTicks(ticks.len()));
    }
    let fit = least_squares(axis, ticks)?;
    if fit.pixel_rms() <= OUTLIER_RMS_PX || ticks.len() < 4 {
        return Ok(fit);
    }
    let worst = ticks
        .iter()
        .enumerate()
        .max_by(|p, q| {
            let r = |t: &(f64, f64)| (fit.value_at(t.0) - t.1).abs();
            r(p.1).total_cmp(&r(q.1))
        })
        .map(|(i, _)| i)
        .expect("non-empty");
    let rest: Vec<(f64, f64)> = ticks.iter().enumerate().filter(|(i, _)| *i != worst).map(|(_, t)| *t).collect();
    least_squares(axis, &rest)
}

/// `(pixel, value)` pairs from numeric y-tick text, snapped to detected stubs.
pub fn y_tick_pairs(layout: &LayoutMap, texts: &[TextItem]) -> Vec<(f64, f64)> {
    let stubs: Vec<f64> = layout.ticks(Axis::Y).collect();
    let mut pairs: Vec<(f64, f64)> = texts
        .iter()
        .filter(|t| t.role == TextRole::TickY)
        .filter_map(|t| {
            let value = parse_tick_value(&t.text).ok()?;
            let cy = t.bbox.center().1;
            let snapped = stubs
                .iter()
                .copied()
                .filter(|s| (s - cy).abs() <= 0.6 * t.bbox.h)
                .min_by(|p, q| (p - cy).abs().total_cmp(&(q - cy).abs()))
                .unwrap_or(cy);
            Some((snapped, value))
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs
}

/// Everything value recovery reads besides the merged geometry.
#[derive(Clone, Copy)]
pub struct RecoveryContext<'a> {
    pub image: &'a RasterImage,
    pub profile: &'a ChartProfile,
    pub layout: &'a LayoutMap,
    pub texts: &'a [TextItem],
}

/// Legend entries paired with the series color of the swatch left of each.
pub fn legend_names(ctx: &RecoveryContext) -> Vec<(String, Rgb)> {
    let img = ctx.image;
    let colors = &ctx.profile.series_colors;
    let mut out = Vec::new();
    for t in ctx.texts.iter().filter(|t| t.role == TextRole::LegendEntry) {
        let b = t.bbox;
        let x0 = (b.x - 3.0 * b.h).max(0.0) as u32;
        let x1 = (b.x.max(0.0) as u32).min(img.width());
        let (y0, y1) = (b.y.max(0.0) as u32, (b.bottom().max(0.0) as u32).min(img.height()));
        let mut votes = vec![0usize; colors.len()];
        for y in y0..y1 {
            for x in x0..x1 {
                let p = img.get(x, y);
                if let Some((k, d)) = colors.iter().enumerate().map(|(k, c)| (k, c.distance(p))).min_by(|p, q| p.1.total_cmp(&q.1)) {
                    if d <= LEGEND_COLOR_TOLERANCE {
                        votes[k] += 1;
                    }
                }
            }
        }
        if let Some((k, _)) = votes.iter().enumerate().filter(|(_, v)| **v > 0).max_by_key(|(k, v)| (**v, usize::MAX - k)) {
            out.push((t.text.clone(), colors[k]));
        }
    }
    out
}

fn name_for(color: Rgb, legend: &[(String, Rgb)], k: usize) -> String {
    legend
        .iter()
        .map(|(n, c)| (n, c.distance(color)))
        .filter(|(_, d)| *d <= LEGEND_COLOR_TOLERANCE)
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .map(|(n, _)| n.clone())
        .unwrap_or_else(|| format!("series-{k}"))
}

/// Category centers along x with their labels: tick stubs when they agree
/// with the labels, else label centers, else `fallback_count` uniform slots.
fn categories(layout: &LayoutMap, texts: &[TextItem], fallback_count: usize) -> Vec<(f64, Option<String>)> {
    let mut labels: Vec<(f64, String)> = texts
        .iter()
        .filter(|t| matches!(t.role, TextRole::CategoryLabel | TextRole::TickX))
        .map(|t| (t.bbox.center().0, t.text.clone()))
        .collect();
    labels.sort_by(|p, q| p.0.total_cmp(&q.0));
    let ticks: Vec<f64> = layout.ticks(Axis::X).collect();
    let centers: Vec<f64> = if !ticks.is_empty() && (labels.is_empty() || labels.len() == ticks.len()) {
        ticks
    } else if !labels.is_empty() {
        labels.iter().map(|l| l.0).collect()
    } else {
        let p = layout.plot_area;
        let n = fallback_count.max(1);
        (0..n).map(|i| p.x + (i as f64 + 0.5) * p.w / n as f64).collect()
    };
    let slot = if centers.len() > 1 {
        (centers[centers.len() - 1] - centers[0]) / (centers.len() - 1) as f64
    } else {
        layout.plot_area.w
    };
    centers
        .iter()
        .map(|&c| {
            let label = labels
                .iter()
                .filter(|l| (l.0 - c).abs() <= slot / 2.0)
                .min_by(|p, q| (p.0 - c).abs().total_cmp(&(q.0 - c).abs()))
                .map(|l| l.1.clone());
            (c, label)
        })
        .collect()
}

fn nearest(centers: &[(f64, Option<String>)], x: f64) -> usize {
    centers
        .iter()
        .enumerate()
        .min_by(|p, q| (p.1 .0 - x).abs().total_cmp(&(q.1 .0 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// How pixel rows become values.
enum Scale<'a> {
    /// `baseline` is the x-axis row; a bar's own bottom edge stands in without one.
    Calibrated { cal: &'a AxisCalibration, baseline: Option<f64> },
    /// Heights above `baseline` in pixels, normalized at the end.
    Relative { baseline: f64 },
}

impl Scale<'_> {
    fn bar_value(&self, bbox: &BBox) -> f64 {
        match self {
            Scale::Calibrated { cal, baseline } => {
                let base = cal.value_at(baseline.unwrap_or(bbox.bottom()));
                // Bars grow from a labelled baseline (usually zero); the fitted
                // baseline value only corrects the fit's offset.
                let nominal = cal
                    .support_ticks
                    .iter()
                    .map(|t| t.1)
                    .filter(|v| (v - base).abs() <= 0.5 * cal.a.abs())
                    .min_by(|p, q| (p - base).abs().total_cmp(&(q - base).abs()))
                    .unwrap_or(0.0);
                cal.value_at(bbox.y) - base + nominal
            }
            Scale::Relative { .. } => bbox.h,
        }
    }

    fn point_value(&self, y: f64) -> f64 {
        match self {
            Scale::Calibrated { cal, .. } => cal.value_at(y),
            Scale::Relative { baseline } => baseline - y,
        }
    }
}

fn ordered_series(merged: &CandidateExtraction) -> Vec<usize> {
    let mut s: Vec<usize> = merged.marks.iter().map(Mark::series_index).collect();
    s.sort_unstable();
    s.dedup();
    s
}

fn base_chart(ctx: &RecoveryContext, chart_type: ChartType) -> RecoveredChart {
    let title = ctx.texts.iter().find(|t| t.role == TextRole::Title).map(|t| t.text.clone());
    RecoveredChart {
        chart_type,
        title,
        category_labels: Vec::new(),
        series: Vec::new(),
        y_range: None,
        width_px: ctx.image.width(),
        height_px: ctx.image.height(),
        value_labels_drawn: ctx.texts.iter().any(|t| t.role == TextRole::ValueLabel),
        relative_only: false,
    }
}

fn category_names(centers: &[(f64, Option<String>)]) -> Vec<String> {
    centers
        .iter()
        .enumerate()
        .map(|(k, (_, l))| l.clone().unwrap_or_else(|| format!("cat-{k}")))
        .collect()
}

fn axis_series(merged: &CandidateExtraction, ctx: &RecoveryContext, scale: &Scale, out: &mut RecoveredChart) {
    let legend = legend_names(ctx);
    let series = ordered_series(merged);
    let fallback = match merged.chart_type {
        ChartType::Bar => series.iter().map(|&s| merged.bars().filter(|b| b.0 == s).count()).max().unwrap_or(0),
        _ => series.iter().map(|&s| merged.line_points(s).len()).max().unwrap_or(0),
    };
    let centers = categories(ctx.layout, ctx.texts, fallback);
    out.category_labels = category_names(&centers);
    let n = centers.len();
    for (k, &si) in series.iter().enumerate() {
        let color = ctx.profile.series_colors.get(si).copied().unwrap_or(Rgb::BLACK);
        let mut values = vec![0.0; n];
        let mut confidences = vec![0.0; n];
        let mut geometry = vec![GeometryRef::None; n];
        match merged.chart_type {
            ChartType::Bar => {
                // Nearest category per bar; a second bar in one slot loses to the closer one.
                let mut best = vec![f64::INFINITY; n];
                for (_, bbox) in merged.bars().filter(|b| b.0 == si) {
                    let cx = bbox.center().0;
                    let c = nearest(&centers, cx);
                    let d = (centers[c].0 - cx).abs();
                    if d < best[c] {
                        best[c] = d;
                        values[c] = scale.bar_value(&bbox);
                        confidences[c] = merged.confidence;
                        geometry[c] = GeometryRef::Rect {
                            x: bbox.x,
                            y: bbox.y,
                            width: bbox.w,
                            height: bbox.h,
                        };
                    }
                }
            }
            _ => {
                let pts = merged.line_points(si);
                for (c, (x, _)) in centers.iter().enumerate() {
                    if let Some(y) = polyline_y_at(&pts, *x) {
                        values[c] = scale.point_value(y);
                        confidences[c] = merged.confidence;
                        geometry[c] = GeometryRef::PathAt { series: si, x: *x };
                    }
                }
            }
        }
        out.series.push(RecoveredSeries {
            name: name_for(color, &legend, k),
            color,
            values,
            confidences,
            geometry,
        });
    }
}

fn normalize_relative(out: &mut RecoveredChart) {
    let max = out.series.iter().flat_map(|s| s.values.iter().copied()).fold(0.0, f64::max);
    for s in &mut out.series {
        for v in &mut s.values {
            *v = if max > 0.0 { (*v / max).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
    out.relative_only = true;
}

fn pie_chart(merged: &CandidateExtraction, ctx: &RecoveryContext) -> RecoveredChart {
    let legend = legend_names(ctx);
    let mut segs: Vec<(f64, usize, f64)> = merged
        .marks
        .iter()
        .filter_map(|m| match *m {
            Mark::PieSegment { series_index, start_angle, fraction, .. } => Some((start_angle, series_index, fraction)),
            _ => None,
        })
        .collect();
    segs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let colors: Vec<Rgb> = segs.iter().map(|s| ctx.profile.series_colors.get(s.1).copied().unwrap_or(Rgb::BLACK)).collect();
    let mut out = base_chart(ctx, ChartType::Pie);
    out.category_labels = colors.iter().enumerate().map(|(k, c)| {
        legend
            .iter()
            .filter(|(_, lc)| lc.distance(*c) <= LEGEND_COLOR_TOLERANCE)
            .min_by(|p, q| p.1.distance(*c).total_cmp(&q.1.distance(*c)))
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| format!("cat-{k}"))
    }).collect();
    out.series.push(RecoveredSeries {
        name: "series-0".to_string(),
        color: colors.first().copied().unwrap_or(Rgb::BLACK),
        values: segs.iter().map(|s| s.2).collect(),
        confidences: vec![merged.confidence; segs.len()],
        geometry: segs.iter().map(|s| GeometryRef::Arc { series: s.1, start_angle: s.0 }).collect(),
    });
    out
}

/// Converts merged geometry to data values through the y calibration.
pub fn recover_values(merged: &CandidateExtraction, cal_y: Option<&AxisCalibration>, ctx: &RecoveryContext) -> Result<RecoveredChart, CalibrateError> {
    if merged.chart_type == ChartType::Pie {
        return Ok(pie_chart(merged, ctx));
    }
    let cal = cal_y.ok_or(CalibrateError::MissingCalibration)?;
    let mut out = base_chart(ctx, merged.chart_type);
    let baseline = ctx.layout.x_axis_y.map(|y| y as f64);
    axis_series(merged, ctx, &Scale::Calibrated { cal, baseline }, &mut out);
    let values: Vec<f64> = cal.support_ticks.iter().map(|t| t.1).collect();
    out.y_range = Some(YRange {
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    Ok(out)
}

/// Without a calibration: heights relative to the tallest mark, flagged as such.
pub fn recover_relative(merged: &CandidateExtraction, ctx: &RecoveryContext) -> RecoveredChart {
    if merged.chart_type == ChartType::Pie {
        return pie_chart(merged, ctx);
    }
    let baseline = ctx.layout.x_axis_y.map(|y| y as f64).unwrap_or_else(|| ctx.layout.plot_area.bottom());
    let mut out = base_chart(ctx, merged.chart_type);
    axis_series(merged, ctx, &Scale::Relative { baseline }, &mut out);
    normalize_relative(&mut out);
    out
}

/// Recovery from a document alone: y-tick text calibrates, category text orders.
/// Missing y-tick text leaves only relative values.
pub fn recover_from_svg(doc: &SvgDocument) -> RecoveredChart {
    let mut out = RecoveredChart {
        chart_type: doc.chart_type,
        title: doc.texts_with_role(TextRole::Title).next().map(|t| t.2.to_string()),
        category_labels: Vec::new(),
        series: Vec::new(),
        y_range: None,
        width_px: doc.width,
        height_px: doc.height,
        value_labels_drawn: doc.texts_with_role(TextRole::ValueLabel).next().is_some(),
        relative_only: false,
    };
    if doc.chart_type == ChartType::Pie {
        let mut arcs: Vec<(f64, f64, Rgb)> = doc
            .elements
            .iter()
            .filter_map(|e| match e {
                SvgElement::PieArc { start_angle, sweep_angle, fill, .. } => Some((*start_angle, *sweep_angle, *fill)),
                _ => None,
            })
            .collect();
        arcs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let total: f64 = arcs.iter().map(|a| a.1).sum();
        out.category_labels = (0..arcs.len()).map(|k| format!("cat-{k}")).collect();
        out.series.push(RecoveredSeries {
            name: "series-0".into(),
            color: arcs.first().map_or(Rgb::BLACK, |a| a.2),
            values: arcs.iter().map(|a| a.1 / total).collect(),
            confidences: vec![1.0; arcs.len()],
            geometry: arcs.iter().enumerate().map(|(k, a)| GeometryRef::Arc { series: k, start_angle: a.0 }).collect(),
        });
        return out;
    }

    let ticks: Vec<(f64, f64)> = doc
        .texts_with_role(TextRole::TickY)
        .filter_map(|(_, y, t)| parse_tick_value(t).ok().map(|v| (y, v)))
        .collect();
    let cal = fit_axis(Axis::Y, &ticks).ok();
    let axis_row = doc.elements.iter().find_map(|e| match e {
        SvgElement::AxisLine { y1, y2, x1, x2 } if (y2 - y1).abs() <= (x2 - x1).abs() => Some(*y1),
        _ => None,
    });
    let baseline = axis_row.unwrap_or_else(|| {
            doc.rects()
                .filter_map(|e| match e {
                    SvgElement::Rect { y, height, .. } => Some(y + height),
                    _ => None,
                })
                .fold(0.0, f64::max)
        });
    let scale = match &cal {
        Some(c) => Scale::Calibrated { cal: c, baseline: axis_row },
        None => Scale::Relative { baseline },
    };

    let mut labels: Vec<(f64, String)> = doc
        .elements
        .iter()
        .filter_map(|e| match e {
            SvgElement::Text { x, content, role: TextRole::CategoryLabel | TextRole::TickX, .. } => Some((*x, content.clone())),
            _ => None,
        })
        .collect();
    labels.sort_by(|p, q| p.0.total_cmp(&q.0));

    // Per series: (x, value, geometry) in x order.
    let mut series: Vec<(usize, Rgb, Vec<(f64, f64, GeometryRef)>)> = Vec::new();
    let mut entry = |si: usize, color: Rgb, item: (f64, f64, GeometryRef)| match series.iter_mut().find(|s| s.0 == si) {
        Some(s) => s.2.push(item),
        None => series.push((si, color, vec![item])),
    };
    let line_xs: Vec<f64> = labels.iter().map(|l| l.0).collect();
    for e in &doc.elements {
        match e {
            SvgElement::Rect { x, y, width, height, fill, data_series, .. } => {
                let b = BBox::new(*x, *y, *width, *height);
                entry(*data_series, *fill, (b.center().0, scale.bar_value(&b), GeometryRef::Rect { x: *x, y: *y, width: *width, height: *height }));
            }
            SvgElement::Path { points, stroke, data_series, .. } => {
                let xs: Vec<f64> = if line_xs.is_empty() { points.iter().map(|p| p.0).collect() } else { line_xs.clone() };
                for x in xs {
                    if let Some(y) = polyline_y_at(points, x) {
                        entry(*data_series, *stroke, (x, scale.point_value(y), GeometryRef::PathAt { series: *data_series, x }));
                    }
                }
            }
            _ => {}
        }
    }
    series.sort_by_key(|s| s.0);
    let n_cat = if labels.is_empty() { series.iter().map(|s| s.2.len()).max().unwrap_or(0) } else { labels.len() };
    out.category_labels = if labels.is_empty() {
        (0..n_cat).map(|k| format!("cat-{k}")).collect()
    } else {
        labels.iter().map(|l| l.1.clone()).collect()
    };
    for (k, (_, color, mut items)) in series.into_iter().enumerate() {
        items.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut values = vec![0.0; n_cat];
        let mut geometry = vec![GeometryRef::None; n_cat];
        for (rank, (x, v, g)) in items.into_iter().enumerate() {
            let c = if labels.is_empty() {
                rank
            } else {
                labels
                    .iter()
                    .enumerate()
                    .min_by(|p, q| (p.1 .0 - x).abs().total_cmp(&(q.1 .0 - x).abs()))
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            };
            if c < n_cat {
                values[c] = v;
                geometry[c] = g;
            }
        }
        out.series.push(RecoveredSeries {
            name: format!("series-{k}"),
            color,
            confidences: vec![1.0; n_cat],
            values,
            geometry,
        });
    }
    match &cal {
        Some(c) => {
            let vals: Vec<f64> = c.support_ticks.iter().map(|t| t.1).collect();
            out.y_range = Some(YRange {
                min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        None => normalize_relative(&mut out),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_fit() {
        let c = fit_axis(Axis::Y, &[(400.0, 0.0), (100.0, 100.0)]).unwrap();
        assert!((c.a + 1.0 / 3.0).abs() < 1e-12);
        assert!((c.b - 400.0 / 3.0).abs() < 1e-9);
        assert!((c.value_at(250.0) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_or_degenerate() {
        assert_eq!(fit_axis(Axis::Y, &[(1.0, 2.0)]), Err(CalibrateError::InsufficientTicks(1)));
        assert_eq!(fit_axis(Axis::Y, &[(5.0, 0.0), (5.0, 10.0), (5.0, 20.0)]), Err(CalibrateError::DegenerateTicks));
    }

    #[test]
    fn misread_tick_is_dropped() {
        let good: Vec<(f64, f64)> = (0..5).map(|i| (300.0 - 50.0 * i as f64, 20.0 * i as f64)).collect();
        let mut ticks = good.clone();
        ticks.push((50.0, 1000.0));
        let c = fit_axis(Axis::Y, &ticks).unwrap();
        let reference = fit_axis(Axis::Y, &good).unwrap();
        assert!((c.a - reference.a).abs() < 1e-12 && (c.b - reference.b).abs() < 1e-9);
        assert_eq!(c.support_ticks.len(), 5);
    }

    proptest! {
        #[test]
        fn exact_ticks_reproduce_map(a in prop_oneof![-5.0f64..-0.01, 0.01f64..5.0], b in -1000.0f64..1000.0, n in 2usize..8) {
            let ticks: Vec<(f64, f64)> = (0..n).map(|i| { let p = 20.0 + 37.0 * i as f64; (p, a * p + b) }).collect();
            let c = fit_axis(Axis::Y, &ticks).unwrap();
            prop_assert!((c.a - a).abs() < 1e-9);
            prop_assert!((c.b - b).abs() < 1e-9 * b.abs().max(1.0) * 10.0);
        }
    }
}
