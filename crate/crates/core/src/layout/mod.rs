//! Heuristic layout detection: axes, plot area, legend and tick stubs.

use serde::{Deserialize, Serialize};

use crate::geom::BBox;
use crate::model::Rgb;
use crate::raster::{connected_components, in_range, HsvRange, RasterImage};

pub const DEFAULT_AXIS_TOLERANCE: f64 = 40.0;
/// Accepted tick stub lengths. The upper bound leaves room for charts stretched
/// up to 2× along the stub direction.
pub const TICK_STUB_RANGE: std::ops::RangeInclusive<u32> = 3..=14;
const MAX_SWATCH: f64 = 20.0;
const LEGEND_TEXT_ROOM: f64 = 80.0;
const BORDER_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickMark {
    pub axis: Axis,
    /// Coordinate of the stub's center line along its axis.
    pub pixel: f64,
}

/// A detected axis stroke: the band of rows (x-axis) or columns (y-axis) it
/// occupies and the extent of its run along the other direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBand {
    pub first: u32,
    pub last: u32,
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Axes {
    pub x: Option<AxisBand>,
    pub y: Option<AxisBand>,
}

impl Axes {
    /// Row of the x-axis stroke nearest the plot.
    pub fn x_axis_y(&self) -> Option<u32> {
        self.x.map(|b| b.first)
    }

    /// Column of the y-axis stroke nearest the plot.
    pub fn y_axis_x(&self) -> Option<u32> {
        self.y.map(|b| b.last)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutMap {
    pub plot_area: BBox,
    pub x_axis_y: Option<u32>,
    pub y_axis_x: Option<u32>,
    pub legend_area: Option<BBox>,
    pub tick_marks: Vec<TickMark>,
}

impl LayoutMap {
    pub fn ticks(&self, axis: Axis) -> impl Iterator<Item = f64> + '_ {
        self.tick_marks.iter().filter(move |t| t.axis == axis).map(|t| t.pixel)
    }
}

fn axis_like(c: Rgb, tol: f64) -> bool {
    c.distance(Rgb::BLACK) <= tol
}

/// Longest run of axis-like pixels along one line; `(start, end_exclusive)`.
fn longest_run(len: u32, mut at: impl FnMut(u32) -> bool) -> (u32, u32) {
    let mut best = (0, 0);
    let mut start = None;
    for i in 0..=len {
        let on = i < len && at(i);
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s > best.1 - best.0 {
                    best = (s, i);
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Picks the line with the longest run and extends it to adjacent lines whose runs
/// are nearly as long, giving the full stroke band.
fn band(lines: std::ops::Range<u32>, min_len: u32, run: impl Fn(u32) -> (u32, u32)) -> Option<AxisBand> {
    let runs: Vec<(u32, (u32, u32))> = lines.map(|l| (l, run(l))).collect();
    let (best_line, best) = runs
        .iter()
        .copied()
        .max_by(|a, b| (a.1 .1 - a.1 .0).cmp(&(b.1 .1 - b.1 .0)).then(b.0.cmp(&a.0)))?;
    let best_len = best.1 - best.0;
    if best_len < min_len || best_len == 0 {
        return None;
    }
    let strong = |l: u32| runs.iter().find(|r| r.0 == l).is_some_and(|r| (r.1 .1 - r.1 .0) as f64 >= 0.9 * best_len as f64);
    let mut first = best_line;
    while first > 0 && strong(first - 1) {
        first -= 1;
    }
    let mut last = best_line;
    while strong(last + 1) {
        last += 1;
    }
    Some(AxisBand {
        first,
        last,
        start: best.0,
        end: best.1,
    })
}

/// Finds the x-axis (longest horizontal run in the lower half, at least half the
/// width) and the y-axis (longest vertical run in the left half, at least half the
/// height).
pub fn detect_axes(image: &RasterImage, axis_color_tolerance: f64) -> Axes {
    let (w, h) = (image.width(), image.height());
    let tol = axis_color_tolerance;
    let x = band(h / 2..h, w.div_ceil(2), |y| longest_run(w, |x| axis_like(image.get(x, y), tol)));
    let y = band(0..w / 2, h.div_ceil(2), |x| longest_run(h, |y| axis_like(image.get(x, y), tol)));
    Axes { x, y }
}

/// The region right of the y-axis and above the x-axis, bounded by the axis runs.
/// Without axes, the image inset by a small border margin.
pub fn detect_plot_area(image: &RasterImage, axes: &Axes) -> BBox {
    let (w, h) = (image.width() as f64, image.height() as f64);
    let inset = |m: f64| {
        if w > 4.0 * m && h > 4.0 * m {
            BBox::new(m, m, w - 2.0 * m, h - 2.0 * m)
        } else {
            BBox::new(0.0, 0.0, w, h)
        }
    };
    match (axes.x, axes.y) {
        (Some(xa), Some(ya)) => {
            let left = ya.last as f64 + 1.0;
            let top = ya.start as f64;
            let right = (xa.end as f64).max(left + 1.0);
            let bottom = (xa.first as f64).max(top + 1.0);
            BBox::from_edges(left, top, right, bottom)
        }
        (Some(xa), None) => BBox::from_edges(xa.start as f64, BORDER_MARGIN.min(xa.first as f64), xa.end as f64, xa.first as f64),
        (None, Some(ya)) => BBox::from_edges(ya.last as f64 + 1.0, ya.start as f64, (w - BORDER_MARGIN).max(ya.last as f64 + 2.0), ya.end as f64),
        (None, None) => inset(BORDER_MARGIN),
    }
}

/// Small solid series-colored components outside `exclude` form the legend; its box
/// spans the swatch column and the text room to the right.
pub fn detect_legend(image: &RasterImage, series_colors: &[Rgb], exclude: Option<&BBox>) -> Option<BBox> {
    let mut swatches: Vec<BBox> = Vec::new();
    for c in series_colors {
        let mask = in_range(image, &HsvRange::around(*c));
        for comp in connected_components(&mask) {
            let b = comp.bbox;
            let small = b.w <= MAX_SWATCH && b.h <= MAX_SWATCH && b.w >= 4.0 && b.h >= 4.0;
            let solid = comp.fill_ratio() >= 0.9;
            let outside = exclude.is_none_or(|p| p.intersection(&b).is_none_or(|i| i.area() < 1.0));
            if small && solid && outside {
                swatches.push(b);
            }
        }
    }
    if swatches.is_empty() {
        return None;
    }
    // Keep the best-populated column of swatches.
    let anchor = swatches
        .iter()
        .max_by_key(|s| swatches.iter().filter(|o| (o.x - s.x).abs() <= 2.0).count())
        .copied()
        .expect("non-empty");
    let column: Vec<BBox> = swatches.into_iter().filter(|s| (s.x - anchor.x).abs() <= 2.0).collect();
    let union = column.iter().skip(1).fold(column[0], |acc, b| acc.union(b));
    let right = (union.right() + LEGEND_TEXT_ROOM).max(image.width() as f64);
    Some(BBox::from_edges(union.x - 2.0, union.y - 2.0, right, union.bottom() + 2.0).clamp_to(image.width() as f64, image.height() as f64))
}

/// Centers of runs along one line where `on` holds, paired with the run's first and
/// last index.
fn runs_on(len: u32, on: impl Fn(u32) -> bool) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut start = None;
    for i in 0..=len {
        let hit = i < len && on(i);
        match (hit, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Tick stubs perpendicular to each axis, sorted by axis then position.
pub fn detect_ticks(image: &RasterImage, axes: &Axes, axis_color_tolerance: f64) -> Vec<TickMark> {
    let tol = axis_color_tolerance;
    let ax = |x: i64, y: i64| {
        x >= 0 && y >= 0 && x < image.width() as i64 && y < image.height() as i64 && axis_like(image.get(x as u32, y as u32), tol)
    };
    let mut out = Vec::new();
    if let Some(ya) = axes.y.filter(|b| b.first > 0) {
        let col = ya.first as i64 - 1;
        let lo = ya.start.saturating_sub(3);
        let hi = (ya.end + 3).min(image.height());
        for (a, b) in runs_on(hi.saturating_sub(lo), |i| ax(col, (lo + i) as i64)) {
            let (a, b) = (a + lo, b + lo);
            if b - a > 6 {
                continue;
            }
            let mid = ((a + b) / 2) as i64;
            let len = (0..).take_while(|k| ax(col - k, mid)).count() as u32;
            if TICK_STUB_RANGE.contains(&len) {
                out.push(TickMark {
                    axis: Axis::Y,
                    pixel: (a + b + 1) as f64 / 2.0,
                });
            }
        }
    }
    if let Some(xa) = axes.x {
        let row = xa.last as i64 + 1;
        let lo = axes.y.map_or(xa.start, |ya| (ya.last + 1).max(xa.start));
        for (a, b) in runs_on(xa.end.saturating_sub(lo), |i| ax((lo + i) as i64, row)) {
            let (a, b) = (a + lo, b + lo);
            if b - a > 6 {
                continue;
            }
            let mid = ((a + b) / 2) as i64;
            let len = (0..).take_while(|k| ax(mid, row + k)).count() as u32;
            if TICK_STUB_RANGE.contains(&len) {
                out.push(TickMark {
                    axis: Axis::X,
                    pixel: (a + b + 1) as f64 / 2.0,
                });
            }
        }
    }
    out
}

/// Full layout: axes, plot area, legend (outside the plot) and ticks. Without axes
/// the plot area is clipped to the left of a detected legend.
pub fn detect_layout(image: &RasterImage, series_colors: &[Rgb]) -> LayoutMap {
    let axes = detect_axes(image, DEFAULT_AXIS_TOLERANCE);
    let mut plot = detect_plot_area(image, &axes);
    let has_axes = axes.x.is_some() || axes.y.is_some();
    let legend = if has_axes {
        detect_legend(image, series_colors, Some(&plot))
    } else {
        let legend = detect_legend(image, series_colors, None);
        if let Some(l) = legend {
            if l.x > plot.x + 1.0 {
                plot = BBox::from_edges(plot.x, plot.y, plot.right().min(l.x - 1.0), plot.bottom());
            }
        }
        legend
    };
    let legend = legend.filter(|l| l.intersection(&plot).is_none_or(|i| i.area() == 0.0));
    LayoutMap {
        plot_area: plot,
        x_axis_y: axes.x_axis_y(),
        y_axis_x: axes.y_axis_x(),
        legend_area: legend,
        tick_marks: detect_ticks(image, &axes, DEFAULT_AXIS_TOLERANCE),
    }
}
