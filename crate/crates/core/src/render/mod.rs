//! Deterministic synthetic chart renderer. Its ground-truth geometry is the oracle
//! for every extraction test.

pub mod font;
pub mod ticks;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{point_segment_distance, BBox};
use crate::model::{validate_spec_with_background, ChartSpec, ChartType, Rgb, ValidationReport, YRange};
use crate::ocr::{is_numeric_text, TextRole};
use crate::raster::RasterImage;

pub use font::{draw_text, FontError, CELL_H, CELL_W};

/// Thickness of axis lines and tick stubs in pixels.
pub const AXIS_THICKNESS: i64 = 2;
/// Length of tick stubs in pixels.
pub const TICK_LENGTH: i64 = 5;
/// Gap between a tick stub and its label.
const TICK_LABEL_GAP: i64 = 3;
/// Vertical gap between a bar top and its value label.
pub const VALUE_LABEL_GAP: i64 = 3;
/// Half-width of line strokes; strokes are 2 px wide.
pub const LINE_HALF_WIDTH: f64 = 1.0;
pub const LEGEND_SWATCH: i64 = 10;
const LEGEND_PITCH: i64 = 16;
const LEGEND_OFFSET: i64 = 16;
const LEGEND_TEXT_GAP: i64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
    pub left: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderTheme {
    pub background: Rgb,
    pub axis_color: Rgb,
    pub margins: Margins,
    /// Fraction of each category slot left empty between bar groups.
    pub bar_gap_fraction: f64,
    /// Feather mark edges by one pixel.
    pub antialias: bool,
    /// Colors for pie segments after the first, which takes the series color.
    pub palette: Vec<Rgb>,
}

/// Categorical palette with hues at least 19° apart and no near-gray entries.
pub const DEFAULT_PALETTE: [Rgb; 8] = [
    Rgb::new(31, 119, 180),
    Rgb::new(255, 127, 14),
    Rgb::new(44, 160, 44),
    Rgb::new(214, 39, 40),
    Rgb::new(148, 103, 189),
    Rgb::new(227, 119, 194),
    Rgb::new(188, 189, 34),
    Rgb::new(23, 190, 207),
];

impl Default for RenderTheme {
    fn default() -> Self {
        RenderTheme {
            background: Rgb::WHITE,
            axis_color: Rgb::BLACK,
            margins: Margins {
                top: 32,
                right: 16,
                bottom: 34,
                left: 56,
            },
            bar_gap_fraction: 0.3,
            antialias: false,
            palette: DEFAULT_PALETTE.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBox {
    pub text: String,
    pub bbox: BBox,
    pub role: TextRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkTruth {
    Bar {
        series: usize,
        category: usize,
        bbox: BBox,
        value: f64,
    },
    Polyline {
        series: usize,
        points: Vec<(f64, f64)>,
    },
    PieArc {
        category: usize,
        color: Rgb,
        cx: f64,
        cy: f64,
        r: f64,
        start_angle: f64,
        sweep_angle: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickTruth {
    pub value: f64,
    /// Pixel coordinate of the stub's center line along the axis.
    pub pixel: f64,
}

/// Exact pixel geometry of everything the renderer drew.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub chart_type: ChartType,
    pub width: u32,
    pub height: u32,
    pub plot_area: BBox,
    /// Row of the x-axis stroke closest to the plot.
    pub x_axis_y: Option<u32>,
    /// Column of the y-axis stroke closest to the plot.
    pub y_axis_x: Option<u32>,
    pub y_ticks: Vec<TickTruth>,
    pub x_ticks: Vec<f64>,
    pub marks: Vec<MarkTruth>,
    pub text_boxes: Vec<TextBox>,
    pub legend_swatches: Vec<(BBox, Rgb)>,
    pub y_range: Option<YRange>,
}

impl GroundTruth {
    /// Continuous row coordinate of a data value.
    pub fn value_to_row(&self, v: f64) -> Option<f64> {
        let r = self.y_range?;
        let p = self.plot_area;
        Some(p.bottom() - (v - r.min) / (r.max - r.min) * p.h)
    }

    pub fn row_to_value(&self, row: f64) -> Option<f64> {
        let r = self.y_range?;
        let p = self.plot_area;
        Some(r.min + (p.bottom() - row) / p.h * (r.max - r.min))
    }

    pub fn bars(&self) -> impl Iterator<Item = (usize, usize, BBox, f64)> + '_ {
        self.marks.iter().filter_map(|m| match m {
            MarkTruth::Bar { series, category, bbox, value } => Some((*series, *category, *bbox, *value)),
            _ => None,
        })
    }

    pub fn texts_with_role(&self, role: TextRole) -> impl Iterator<Item = &TextBox> + '_ {
        self.text_boxes.iter().filter(move |t| t.role == role)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderResult {
    pub image: RasterImage,
    pub truth: GroundTruth,
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("spec invalid: {0:?}")]
    SpecInvalid(ValidationReport),
    #[error("theme invalid: {0}")]
    ThemeInvalid(String),
    #[error(transparent)]
    Font(#[from] FontError),
}

/// Segment colors of a pie: the series color followed by palette entries that are
/// clearly distinct from it.
pub fn pie_segment_colors(spec: &ChartSpec, theme: &RenderTheme) -> Vec<Rgb> {
    let base = spec.series[0].color;
    let mut colors = vec![base];
    for c in &theme.palette {
        if colors.len() >= spec.category_labels.len() {
            break;
        }
        if colors.iter().all(|e| e.distance(*c) > 60.0) {
            colors.push(*c);
        }
    }
    colors
}

struct Canvas<'a> {
    image: RasterImage,
    theme: &'a RenderTheme,
    texts: Vec<TextBox>,
}

impl Canvas<'_> {
    fn text(&mut self, s: &str, x: i64, y: i64, role: TextRole) -> Result<BBox, RenderError> {
        let bbox = draw_text(&mut self.image, s, x, y, 1, self.theme.axis_color)?;
        if !s.is_empty() {
            self.texts.push(TextBox {
                text: s.to_string(),
                bbox,
                role,
            });
        }
        Ok(bbox)
    }

    fn rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        self.image.fill_rect(x0, y0, x1, y1, c);
    }
}

fn text_width(s: &str) -> i64 {
    font::text_extent(s, 1).0 as i64
}

struct LegendEntry {
    name: String,
    color: Rgb,
}

fn legend_width(entries: &[LegendEntry]) -> i64 {
    if entries.is_empty() {
        return 0;
    }
    let max_name = entries.iter().map(|e| text_width(&e.name)).max().unwrap_or(0);
    LEGEND_OFFSET + LEGEND_SWATCH + LEGEND_TEXT_GAP + max_name + 8
}

fn draw_legend(
    canvas: &mut Canvas,
    entries: &[LegendEntry],
    x: i64,
    top: i64,
    swatches: &mut Vec<(BBox, Rgb)>,
) -> Result<(), RenderError> {
    for (i, e) in entries.iter().enumerate() {
        let y = top + 4 + i as i64 * LEGEND_PITCH;
        canvas.rect(x, y, x + LEGEND_SWATCH, y + LEGEND_SWATCH, e.color);
        swatches.push((BBox::new(x as f64, y as f64, LEGEND_SWATCH as f64, LEGEND_SWATCH as f64), e.color));
        canvas.text(&e.name, x + LEGEND_SWATCH + LEGEND_TEXT_GAP, y, TextRole::LegendEntry)?;
    }
    Ok(())
}

fn category_role(label: &str) -> TextRole {
    if is_numeric_text(label) {
        TextRole::TickX
    } else {
        TextRole::CategoryLabel
    }
}

/// Renders `spec` into pixels plus exact ground-truth geometry.
pub fn render(spec: &ChartSpec, theme: &RenderTheme) -> Result<RenderResult, RenderError> {
    let report = validate_spec_with_background(spec, theme.background);
    if !report.is_valid() {
        return Err(RenderError::SpecInvalid(report));
    }
    if theme.axis_color.distance(theme.background) <= 30.0 {
        return Err(RenderError::ThemeInvalid("axis color too close to background".into()));
    }
    let all_text = spec
        .title
        .iter()
        .chain(spec.category_labels.iter())
        .chain(spec.series.iter().map(|s| &s.name));
    for t in all_text {
        if let Some(c) = t.chars().find(|c| font::glyph(*c).is_none()) {
            return Err(FontError::UnsupportedGlyph(c).into());
        }
    }

    let mut canvas = Canvas {
        image: RasterImage::new(spec.width_px, spec.height_px, theme.background),
        theme,
        texts: Vec::new(),
    };
    if let Some(title) = &spec.title {
        let x = (spec.width_px as i64 - text_width(title)) / 2;
        canvas.text(title, x, 6, TextRole::Title)?;
    }
    let truth = match spec.chart_type {
        ChartType::Bar | ChartType::Line => render_axes_chart(spec, theme, &mut canvas)?,
        ChartType::Pie => render_pie(spec, theme, &mut canvas)?,
    };
    let mut truth = truth;
    if theme.antialias {
        feather(&mut canvas.image, theme);
    }
    truth.text_boxes = canvas.texts;
    Ok(RenderResult {
        image: canvas.image,
        truth,
    })
}

fn render_axes_chart(spec: &ChartSpec, theme: &RenderTheme, canvas: &mut Canvas) -> Result<GroundTruth, RenderError> {
    let range = spec.y_range.expect("validated");
    let (w, h) = (spec.width_px as i64, spec.height_px as i64);
    let m = theme.margins;
    let tick_values = ticks::nice_ticks(range.min, range.max);
    let tick_labels: Vec<String> = tick_values.iter().map(|v| ticks::format_tick(*v)).collect();
    let max_tick_w = tick_labels.iter().map(|s| text_width(s)).max().unwrap_or(0);

    let legend: Vec<LegendEntry> = if spec.series.len() > 1 {
        spec.series
            .iter()
            .map(|s| LegendEntry {
                name: s.name.clone(),
                color: s.color,
            })
            .collect()
    } else {
        Vec::new()
    };

    let left = (m.left as i64).max(AXIS_THICKNESS + TICK_LENGTH + TICK_LABEL_GAP + max_tick_w + 4);
    let right = w - m.right as i64 - legend_width(&legend);
    let top = m.top as i64;
    let bottom = h - m.bottom as i64;
    let plot = BBox::from_edges(left as f64, top as f64, right as f64, bottom as f64);
    let row_of = |v: f64| plot.bottom() - (v - range.min) / (range.max - range.min) * plot.h;

    let axis = theme.axis_color;
    // Axes hug the plot area from outside: x-axis rows [bottom, bottom+2), y-axis
    // columns [left-2, left).
    canvas.rect(left - AXIS_THICKNESS, bottom, right, bottom + AXIS_THICKNESS, axis);
    canvas.rect(left - AXIS_THICKNESS, top, left, bottom + AXIS_THICKNESS, axis);

    let mut y_ticks = Vec::new();
    for (v, label) in tick_values.iter().zip(&tick_labels) {
        let r = row_of(*v).round() as i64;
        let stub_right = left - AXIS_THICKNESS;
        canvas.rect(stub_right - TICK_LENGTH, r - 1, stub_right, r + 1, axis);
        let lx = stub_right - TICK_LENGTH - TICK_LABEL_GAP - text_width(label);
        canvas.text(label, lx, r - CELL_H as i64 / 2, TextRole::TickY)?;
        y_ticks.push(TickTruth {
            value: *v,
            pixel: r as f64,
        });
    }

    let n = spec.category_labels.len();
    let slot = plot.w / n as f64;
    let center_x = |i: usize| plot.x + (i as f64 + 0.5) * slot;
    let mut x_ticks = Vec::new();
    for (i, label) in spec.category_labels.iter().enumerate() {
        let c = center_x(i).round() as i64;
        canvas.rect(c - 1, bottom + AXIS_THICKNESS, c + 1, bottom + AXIS_THICKNESS + TICK_LENGTH, axis);
        x_ticks.push(c as f64);
        let ly = bottom + AXIS_THICKNESS + TICK_LENGTH + TICK_LABEL_GAP;
        let lx = (center_x(i) - text_width(label) as f64 / 2.0).round() as i64;
        canvas.text(label, lx, ly, category_role(label))?;
    }

    let mut marks = Vec::new();
    match spec.chart_type {
        ChartType::Bar => {
            let base_value = if range.min > 0.0 { range.min } else { 0.0_f64.min(range.max) };
            let base_row = row_of(base_value).round() as i64;
            let group = slot * (1.0 - theme.bar_gap_fraction);
            let bw = group / spec.series.len() as f64;
            // Labels go on last so later bars never paint over them.
            let mut labels = Vec::new();
            for ci in 0..n {
                let gx = plot.x + ci as f64 * slot + slot * theme.bar_gap_fraction / 2.0;
                for (si, s) in spec.series.iter().enumerate() {
                    let x0 = (gx + si as f64 * bw).round() as i64;
                    let x1 = ((gx + (si + 1) as f64 * bw).round() as i64).max(x0 + 1);
                    let v = s.values[ci];
                    let vr = row_of(v).round() as i64;
                    let (y0, y1) = if vr <= base_row { (vr, base_row) } else { (base_row, vr) };
                    canvas.rect(x0, y0, x1, y1, s.color);
                    let bbox = BBox::from_edges(x0 as f64, y0 as f64, x1 as f64, y1 as f64);
                    marks.push(MarkTruth::Bar {
                        series: si,
                        category: ci,
                        bbox,
                        value: v,
                    });
                    if spec.value_labels_drawn {
                        let label = ticks::format_value(v);
                        let lx = ((x0 + x1) as f64 / 2.0 - text_width(&label) as f64 / 2.0).round() as i64;
                        labels.push((label, lx, y0 - VALUE_LABEL_GAP - CELL_H as i64));
                    }
                }
            }
            for (label, x, y) in labels {
                canvas.text(&label, x, y, TextRole::ValueLabel)?;
            }
        }
        ChartType::Line => {
            for (si, s) in spec.series.iter().enumerate() {
                let points: Vec<(f64, f64)> = s.values.iter().enumerate().map(|(i, v)| (center_x(i), row_of(*v))).collect();
                draw_polyline(&mut canvas.image, &points, LINE_HALF_WIDTH, s.color);
                marks.push(MarkTruth::Polyline { series: si, points });
            }
            if spec.value_labels_drawn {
                for s in &spec.series {
                    for (i, v) in s.values.iter().enumerate() {
                        let label = ticks::format_value(*v);
                        let lx = (center_x(i) - text_width(&label) as f64 / 2.0).round() as i64;
                        let ly = row_of(*v).round() as i64 - 4 - CELL_H as i64;
                        canvas.text(&label, lx, ly, TextRole::ValueLabel)?;
                    }
                }
            }
        }
        ChartType::Pie => unreachable!(),
    }

    let mut legend_swatches = Vec::new();
    draw_legend(canvas, &legend, right + LEGEND_OFFSET, top, &mut legend_swatches)?;

    Ok(GroundTruth {
        chart_type: spec.chart_type,
        width: spec.width_px,
        height: spec.height_px,
        plot_area: plot,
        x_axis_y: Some(bottom as u32),
        y_axis_x: Some((left - 1) as u32),
        y_ticks,
        x_ticks,
        marks,
        text_boxes: Vec::new(),
        legend_swatches,
        y_range: Some(range),
    })
}

/// Pixels whose center lies within `half_width` of the polyline.
pub fn draw_polyline(image: &mut RasterImage, points: &[(f64, f64)], half_width: f64, color: Rgb) {
    let segs: Vec<((f64, f64), (f64, f64))> = if points.len() == 1 {
        vec![(points[0], points[0])]
    } else {
        points.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for (a, b) in segs {
        let x0 = (a.0.min(b.0) - half_width - 1.0).floor() as i64;
        let x1 = (a.0.max(b.0) + half_width + 1.0).ceil() as i64;
        let y0 = (a.1.min(b.1) - half_width - 1.0).floor() as i64;
        let y1 = (a.1.max(b.1) + half_width + 1.0).ceil() as i64;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if point_segment_distance((x as f64 + 0.5, y as f64 + 0.5), a, b) <= half_width {
                    image.put(x, y, color);
                }
            }
        }
    }
}

/// Clockwise angle from 12 o'clock in degrees, `[0, 360)`.
pub fn clock_angle(dx: f64, dy: f64) -> f64 {
    let a = dx.atan2(-dy).to_degrees();
    if a < 0.0 {
        a + 360.0
    } else if a >= 360.0 {
        a - 360.0
    } else {
        a
    }
}

fn render_pie(spec: &ChartSpec, theme: &RenderTheme, canvas: &mut Canvas) -> Result<GroundTruth, RenderError> {
    let (w, h) = (spec.width_px as i64, spec.height_px as i64);
    let colors = pie_segment_colors(spec, theme);
    let legend: Vec<LegendEntry> = if spec.category_labels.len() > 1 {
        spec.category_labels
            .iter()
            .zip(&colors)
            .map(|(name, c)| LegendEntry {
                name: name.clone(),
                color: *c,
            })
            .collect()
    } else {
        Vec::new()
    };
    let inset: i64 = if spec.value_labels_drawn { 44 } else { 20 };
    let top = theme.margins.top as i64;
    let plot = BBox::from_edges(inset as f64, top as f64, (w - inset - legend_width(&legend)) as f64, (h - 20) as f64);
    let (cx, cy) = plot.center();
    let radius = (0.45 * plot.w.min(plot.h)).floor();

    let values = &spec.series[0].values;
    let total: f64 = values.iter().sum();
    let mut ends = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for v in values {
        acc += v / total * 360.0;
        ends.push(acc);
    }
    *ends.last_mut().expect("non-empty") = 360.0;

    let x0 = (cx - radius - 1.0).floor() as i64;
    let x1 = (cx + radius + 1.0).ceil() as i64;
    let y0 = (cy - radius - 1.0).floor() as i64;
    let y1 = (cy + radius + 1.0).ceil() as i64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            if dx * dx + dy * dy > radius * radius {
                continue;
            }
            let a = clock_angle(dx, dy);
            let k = ends.iter().position(|e| a < *e).unwrap_or(ends.len() - 1);
            canvas.image.put(x, y, colors[k]);
        }
    }

    let mut marks = Vec::new();
    let mut start = 0.0;
    for (k, end) in ends.iter().enumerate() {
        marks.push(MarkTruth::PieArc {
            category: k,
            color: colors[k],
            cx,
            cy,
            r: radius,
            start_angle: start,
            sweep_angle: end - start,
        });
        if spec.value_labels_drawn {
            let label = format!("{}%", ticks::format_value(values[k] / total * 100.0));
            let mid = ((start + end) / 2.0).to_radians();
            let d = radius + 14.0;
            let (lx, ly) = (cx + d * mid.sin(), cy - d * mid.cos());
            let tx = (lx - text_width(&label) as f64 / 2.0).round() as i64;
            let ty = (ly - CELL_H as f64 / 2.0).round() as i64;
            canvas.text(&label, tx, ty, TextRole::ValueLabel)?;
        }
        start = *end;
    }

    let mut legend_swatches = Vec::new();
    draw_legend(canvas, &legend, plot.right() as i64 + LEGEND_OFFSET, top, &mut legend_swatches)?;

    Ok(GroundTruth {
        chart_type: ChartType::Pie,
        width: spec.width_px,
        height: spec.height_px,
        plot_area: plot,
        x_axis_y: None,
        y_axis_x: None,
        y_ticks: Vec::new(),
        x_ticks: Vec::new(),
        marks,
        text_boxes: Vec::new(),
        legend_swatches,
        y_range: None,
    })
}

// Background pixels 4-adjacent to a colored mark pixel take a 50% blend.
fn feather(image: &mut RasterImage, theme: &RenderTheme) {
    let src = image.clone();
    let is_mark = |c: Rgb| c != theme.background && c != theme.axis_color;
    for y in 0..src.height() {
        for x in 0..src.width() {
            if src.get(x, y) != theme.background {
                continue;
            }
            let neighbors = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)];
            let hit = neighbors.iter().find_map(|(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= src.width() as i64 || ny >= src.height() as i64 {
                    return None;
                }
                let c = src.get(nx as u32, ny as u32);
                is_mark(c).then_some(c)
            });
            if let Some(c) = hit {
                image.set(x, y, theme.background.lerp(c, 0.5));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Series;

    pub(crate) fn two_bar_spec() -> ChartSpec {
        ChartSpec {
            chart_type: ChartType::Bar,
            title: None,
            category_labels: vec!["A".into(), "B".into()],
            series: vec![Series {
                name: "S".into(),
                color: Rgb::new(220, 30, 30),
                values: vec![10.0, 20.0],
            }],
            y_range: Some(YRange { min: 0.0, max: 20.0 }),
            width_px: 400,
            height_px: 300,
            value_labels_drawn: false,
        }
    }

    #[test]
    fn bar_top_touches_range_max_tick() {
        let r = render(&two_bar_spec(), &RenderTheme::default()).unwrap();
        let bars: Vec<_> = r.truth.bars().collect();
        assert_eq!(bars.len(), 2);
        let tick20 = r.truth.y_ticks.iter().find(|t| t.value == 20.0).unwrap();
        assert_eq!(bars[1].2.y, tick20.pixel);
        let red = bars.iter().all(|b| r.image.get(b.2.x as u32 + 1, b.2.bottom() as u32 - 1) == Rgb::new(220, 30, 30));
        assert!(red);
    }

    #[test]
    fn equal_pie_is_four_right_angles() {
        let mut s = two_bar_spec();
        s.chart_type = ChartType::Pie;
        s.y_range = None;
        s.category_labels = vec!["a".into(), "b".into(), "c".into(), "d".into()];
        s.series[0].values = vec![1.0; 4];
        let r = render(&s, &RenderTheme::default()).unwrap();
        let sweeps: Vec<f64> = r
            .truth
            .marks
            .iter()
            .map(|m| match m {
                MarkTruth::PieArc { sweep_angle, .. } => *sweep_angle,
                _ => panic!(),
            })
            .collect();
        assert_eq!(sweeps.len(), 4);
        assert!(sweeps.iter().all(|s| (s - 90.0).abs() < 1e-9));
        assert!((sweeps.iter().sum::<f64>() - 360.0).abs() < 1e-6);
    }

    #[test]
    fn rendering_is_byte_identical() {
        let a = render(&two_bar_spec(), &RenderTheme::default()).unwrap();
        let b = render(&two_bar_spec(), &RenderTheme::default()).unwrap();
        assert_eq!(a.image.to_png_bytes().unwrap(), b.image.to_png_bytes().unwrap());
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn bar_tops_map_back_within_half_pixel() {
        let mut s = two_bar_spec();
        s.series[0].values = vec![3.3, 17.77];
        let r = render(&s, &RenderTheme::default()).unwrap();
        let px_per_unit = r.truth.plot_area.h / 20.0;
        for (_, _, bbox, v) in r.truth.bars() {
            let back = r.truth.row_to_value(bbox.y).unwrap();
            assert!((back - v).abs() * px_per_unit <= 0.5 + 1e-9);
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut s = two_bar_spec();
        s.series[0].values.pop();
        assert!(matches!(render(&s, &RenderTheme::default()), Err(RenderError::SpecInvalid(_))));
        let mut s = two_bar_spec();
        s.category_labels[0] = "A#".into();
        assert!(matches!(render(&s, &RenderTheme::default()), Err(RenderError::Font(_))));
    }

    #[test]
    fn clock_angles() {
        assert!((clock_angle(0.0, -1.0) - 0.0).abs() < 1e-9);
        assert!((clock_angle(1.0, 0.0) - 90.0).abs() < 1e-9);
        assert!((clock_angle(0.0, 1.0) - 180.0).abs() < 1e-9);
        assert!((clock_angle(-1.0, 0.0) - 270.0).abs() < 1e-9);
    }
}
