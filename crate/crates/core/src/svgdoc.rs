//! The SVG document model: assembly from extracted geometry, canonical
//! serialization and a closed-schema parser.

use std::cmp::Ordering;
use std::fmt::Write as _;

use thiserror::Error;

use crate::classify::ChartProfile;
use crate::extract::{CandidateExtraction, Mark};
use crate::geom::BBox;
use crate::layout::LayoutMap;
use crate::model::{ChartType, GeometryRef, RecoveredChart, Rgb};
use crate::ocr::{TextItem, TextRole};

pub const SVG_NS: &str = "http://www.w3.org/2000/svg";
pub const LINE_STROKE_WIDTH: f64 = 2.0;
pub const AXIS_STROKE_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SvgElement {
    Rect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
        fill: Rgb,
        data_series: usize,
        data_value: Option<f64>,
    },
    Path {
        points: Vec<(f64, f64)>,
        stroke: Rgb,
        stroke_width: f64,
        data_series: usize,
    },
    PieArc {
        cx: f64,
        cy: f64,
        r: f64,
        start_angle: f64,
        sweep_angle: f64,
        fill: Rgb,
        data_series: usize,
        data_fraction: f64,
    },
    /// Text anchored at the center of its box.
    Text { x: f64, y: f64, content: String, role: TextRole },
    AxisLine { x1: f64, y1: f64, x2: f64, y2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisSelector {
    X,
    Y,
    Both,
}

impl SvgElement {
    fn rank(&self) -> u8 {
        match self {
            SvgElement::AxisLine { .. } => 0,
            SvgElement::Text { .. } => 2,
            _ => 1,
        }
    }

    /// Sort key inside the element's rank group.
    fn key(&self) -> [f64; 4] {
        match self {
            SvgElement::AxisLine { x1, y1, x2, y2 } => [*x1, *y1, *x2, *y2],
            SvgElement::Rect { x, y, data_series, .. } => [*x, *y, *data_series as f64, 0.0],
            SvgElement::Path { points, data_series, .. } => {
                let (x, y) = points.first().copied().unwrap_or((0.0, 0.0));
                [x, y, *data_series as f64, 0.0]
            }
            SvgElement::PieArc { cx, cy, start_angle, data_series, .. } => [*cx, *cy, *start_angle, *data_series as f64],
            SvgElement::Text { x, y, .. } => [*y, *x, 0.0, 0.0],
        }
    }

    fn canonical_cmp(&self, other: &SvgElement) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| {
            let (a, b) = (self.key(), other.key());
            a.iter()
                .zip(b.iter())
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
                .then_with(|| match (self, other) {
                    (SvgElement::Text { content: p, .. }, SvgElement::Text { content: q, .. }) => p.cmp(q),
                    _ => Ordering::Equal,
                })
        })
    }

    fn is_valid(&self) -> bool {
        let fin = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            SvgElement::Rect { x, y, width, height, data_value, .. } => {
                fin(&[*x, *y, *width, *height]) && *width > 0.0 && *height > 0.0 && data_value.is_none_or(f64::is_finite)
            }
            SvgElement::Path { points, stroke_width, .. } => {
                points.len() >= 2 && points.iter().all(|p| fin(&[p.0, p.1])) && *stroke_width > 0.0 && stroke_width.is_finite()
            }
            SvgElement::PieArc { cx, cy, r, start_angle, sweep_angle, data_fraction, .. } => {
                fin(&[*cx, *cy, *r, *start_angle, *sweep_angle, *data_fraction]) && *sweep_angle > 0.0 && *sweep_angle <= 360.0 && *r > 0.0
            }
            SvgElement::Text { x, y, .. } => fin(&[*x, *y]),
            SvgElement::AxisLine { x1, y1, x2, y2 } => fin(&[*x1, *y1, *x2, *y2]),
        }
    }

    /// Rounds every number to the serialized precision.
    fn quantized(&self) -> SvgElement {
        let mut e = self.clone();
        match &mut e {
            SvgElement::Rect { x, y, width, height, data_value, .. } => {
                for v in [x, y, width, height] {
                    *v = q2(*v);
                }
                *data_value = data_value.map(q2);
            }
            SvgElement::Path { points, stroke_width, .. } => {
                for p in points.iter_mut() {
                    *p = (q2(p.0), q2(p.1));
                }
                *stroke_width = q2(*stroke_width);
            }
            SvgElement::PieArc { cx, cy, r, start_angle, sweep_angle, data_fraction, .. } => {
                for v in [cx, cy, r, start_angle, sweep_angle, data_fraction] {
                    *v = q2(*v);
                }
            }
            SvgElement::Text { x, y, .. } => {
                *x = q2(*x);
                *y = q2(*y);
            }
            SvgElement::AxisLine { x1, y1, x2, y2 } => {
                for v in [x1, y1, x2, y2] {
                    *v = q2(*v);
                }
            }
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgDocument {
    pub width: u32,
    pub height: u32,
    pub chart_type: ChartType,
    pub elements: Vec<SvgElement>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvgError {
    #[error("malformed svg at {line}:{column}: {message}")]
    MalformedSvg { line: u32, column: u32, message: String },
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
}

impl SvgDocument {
    pub fn new(width: u32, height: u32, chart_type: ChartType) -> Self {
        SvgDocument {
            width,
            height,
            chart_type,
            elements: Vec::new(),
        }
    }

    /// Sorts elements into serialization order and rounds numbers to two decimals.
    pub fn canonicalize(&mut self) {
        self.elements = self.elements.iter().map(SvgElement::quantized).collect();
        self.elements.sort_by(SvgElement::canonical_cmp);
    }

    pub fn is_canonical(&self) -> bool {
        self.elements.windows(2).all(|w| w[0].canonical_cmp(&w[1]) != Ordering::Greater)
    }

    pub fn is_valid(&self) -> bool {
        self.elements.iter().all(SvgElement::is_valid)
    }

    pub fn rects(&self) -> impl Iterator<Item = &SvgElement> + '_ {
        self.elements.iter().filter(|e| matches!(e, SvgElement::Rect { .. }))
    }

    pub fn rect_count(&self) -> usize {
        self.rects().count()
    }

    pub fn texts_with_role(&self, role: TextRole) -> impl Iterator<Item = (f64, f64, &str)> + '_ {
        self.elements.iter().filter_map(move |e| match e {
            SvgElement::Text { x, y, content, role: r } if *r == role => Some((*x, *y, content.as_str())),
            _ => None,
        })
    }
}

fn q2(v: f64) -> f64 {
    let q = (v * 100.0).round() / 100.0;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// Two decimals, no exponent, no negative zero.
fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Point on the circle at a clock angle (degrees clockwise from 12 o'clock).
fn clock_point(cx: f64, cy: f64, r: f64, angle: f64) -> (f64, f64) {
    let a = angle.to_radians();
    (cx + r * a.sin(), cy - r * a.cos())
}

fn arc_path(cx: f64, cy: f64, r: f64, start: f64, sweep: f64) -> String {
    let (sx, sy) = clock_point(cx, cy, r, start);
    let mut d = format!("M {} {} L {} {}", num(cx), num(cy), num(sx), num(sy));
    if sweep >= 360.0 {
        // A single arc cannot close on itself, so a full disk takes two halves.
        let (hx, hy) = clock_point(cx, cy, r, start + 180.0);
        let _ = write!(d, " A {r} {r} 0 1 1 {} {} A {r} {r} 0 1 1 {} {}", num(hx), num(hy), num(sx), num(sy), r = num(r));
    } else {
        let (ex, ey) = clock_point(cx, cy, r, start + sweep);
        let large = if sweep > 180.0 { 1 } else { 0 };
        let _ = write!(d, " A {r} {r} 0 {large} 1 {} {}", num(ex), num(ey), r = num(r));
    }
    d.push_str(" Z");
    d
}

fn element_line(e: &SvgElement) -> String {
    match e {
        SvgElement::Rect { x, y, width, height, fill, data_series, data_value } => {
            let mut s = format!(
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" data-series="{}""#,
                num(*x),
                num(*y),
                num(*width),
                num(*height),
                fill.to_hex(),
                data_series
            );
            if let Some(v) = data_value {
                let _ = write!(s, r#" data-value="{}""#, num(*v));
            }
            s.push_str("/>");
            s
        }
        SvgElement::Path { points, stroke, stroke_width, data_series } => {
            let d = points
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{} {} {}", if i == 0 { "M" } else { "L" }, num(p.0), num(p.1)))
                .collect::<Vec<_>>()
                .join(" ");
            format!(
                r#"<path d="{d}" fill="none" stroke="{}" stroke-width="{}" data-series="{}"/>"#,
                stroke.to_hex(),
                num(*stroke_width),
                data_series
            )
        }
        SvgElement::PieArc { cx, cy, r, start_angle, sweep_angle, fill, data_series, data_fraction } => format!(
            r#"<path d="{}" fill="{}" data-series="{}" data-start-angle="{}" data-sweep-angle="{}" data-fraction="{}"/>"#,
            arc_path(*cx, *cy, *r, *start_angle, *sweep_angle),
            fill.to_hex(),
            data_series,
            num(*start_angle),
            num(*sweep_angle),
            num(*data_fraction)
        ),
        SvgElement::Text { x, y, content, role } => format!(
            r#"<text x="{}" y="{}" text-anchor="middle" dominant-baseline="central" data-role="{}">{}</text>"#,
            num(*x),
            num(*y),
            role.as_str(),
            escape(content)
        ),
        SvgElement::AxisLine { x1, y1, x2, y2 } => format!(
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#000000" stroke-width="{}"/>"##,
            num(*x1),
            num(*y1),
            num(*x2),
            num(*y2),
            num(AXIS_STROKE_WIDTH)
        ),
    }
}

/// Canonical text form: one element per line in document order.
pub fn serialize(doc: &SvgDocument) -> String {
    let mut out = format!(
        "<svg xmlns=\"{SVG_NS}\" width=\"{}\" height=\"{}\" data-chart-type=\"{}\">\n",
        doc.width,
        doc.height,
        doc.chart_type.as_str()
    );
    for e in &doc.elements {
        out.push_str("  ");
        out.push_str(&element_line(e));
        out.push('\n');
    }
    out.push_str("</svg>\n");
    out
}

struct Parser<'a> {
    doc: &'a roxmltree::Document<'a>,
}

impl<'a> Parser<'a> {
    fn error(&self, node: roxmltree::Node, message: impl Into<String>) -> SvgError {
        let pos = self.doc.text_pos_at(node.range().start);
        SvgError::MalformedSvg {
            line: pos.row,
            column: pos.col,
            message: message.into(),
        }
    }

    fn attr<'n>(&self, node: roxmltree::Node<'n, 'n>, name: &str) -> Result<&'n str, SvgError> {
        node.attribute(name)
            .ok_or_else(|| self.error(node, format!("<{}> lacks attribute {name}", node.tag_name().name())))
    }

    fn number(&self, node: roxmltree::Node, name: &str) -> Result<f64, SvgError> {
        self.parse_f64(node, self.attr(node, name)?, name)
    }

    fn parse_f64(&self, node: roxmltree::Node, text: &str, what: &str) -> Result<f64, SvgError> {
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.error(node, format!("{what}: not a finite number: {text:?}")))
    }

    fn color(&self, node: roxmltree::Node, name: &str) -> Result<Rgb, SvgError> {
        let v = self.attr(node, name)?;
        Rgb::from_hex(v).ok_or_else(|| self.error(node, format!("{name}: not a #RRGGBB color: {v:?}")))
    }

    fn index(&self, node: roxmltree::Node, name: &str) -> Result<usize, SvgError> {
        let v = self.attr(node, name)?;
        v.parse().map_err(|_| self.error(node, format!("{name}: not an index: {v:?}")))
    }

    fn element(&self, node: roxmltree::Node) -> Result<SvgElement, SvgError> {
        let e = match node.tag_name().name() {
            "rect" => SvgElement::Rect {
                x: self.number(node, "x")?,
                y: self.number(node, "y")?,
                width: self.number(node, "width")?,
                height: self.number(node, "height")?,
                fill: self.color(node, "fill")?,
                data_series: self.index(node, "data-series")?,
                data_value: match node.attribute("data-value") {
                    Some(v) => Some(self.parse_f64(node, v, "data-value")?),
                    None => None,
                },
            },
            "path" if node.has_attribute("data-fraction") => self.pie_arc(node)?,
            "path" => self.polyline(node)?,
            "text" => {
                let role = self.attr(node, "data-role")?;
                SvgElement::Text {
                    x: self.number(node, "x")?,
                    y: self.number(node, "y")?,
                    content: node.text().unwrap_or("").to_string(),
                    role: TextRole::parse(role).ok_or_else(|| self.error(node, format!("unknown text role {role:?}")))?,
                }
            }
            "line" => SvgElement::AxisLine {
                x1: self.number(node, "x1")?,
                y1: self.number(node, "y1")?,
                x2: self.number(node, "x2")?,
                y2: self.number(node, "y2")?,
            },
            other => return Err(self.error(node, format!("unknown element <{other}>"))),
        };
        if !e.is_valid() {
            return Err(self.error(node, format!("invalid <{}> geometry", node.tag_name().name())));
        }
        Ok(e)
    }

    fn path_tokens<'n>(&self, node: roxmltree::Node<'n, 'n>) -> Result<Vec<&'n str>, SvgError> {
        Ok(self.attr(node, "d")?.split_whitespace().collect())
    }

    fn polyline(&self, node: roxmltree::Node) -> Result<SvgElement, SvgError> {
        let tokens = self.path_tokens(node)?;
        if tokens.len() % 3 != 0 || tokens.is_empty() {
            return Err(self.error(node, "path data must be M x y followed by L x y commands"));
        }
        let mut points = Vec::with_capacity(tokens.len() / 3);
        for (i, t) in tokens.chunks(3).enumerate() {
            let expected = if i == 0 { "M" } else { "L" };
            if t[0] != expected {
                return Err(self.error(node, format!("expected path command {expected}, found {:?}", t[0])));
            }
            points.push((self.parse_f64(node, t[1], "d")?, self.parse_f64(node, t[2], "d")?));
        }
        Ok(SvgElement::Path {
            points,
            stroke: self.color(node, "stroke")?,
            stroke_width: self.number(node, "stroke-width")?,
            data_series: self.index(node, "data-series")?,
        })
    }

    fn pie_arc(&self, node: roxmltree::Node) -> Result<SvgElement, SvgError> {
        let t = self.path_tokens(node)?;
        let well_formed = t.len() >= 14 && t[0] == "M" && t[3] == "L" && t[6] == "A" && t.last() == Some(&"Z");
        if !well_formed {
            return Err(self.error(node, "pie path data must be M cx cy L x y A r r ... Z"));
        }
        Ok(SvgElement::PieArc {
            cx: self.parse_f64(node, t[1], "d")?,
            cy: self.parse_f64(node, t[2], "d")?,
            r: self.parse_f64(node, t[7], "d")?,
            start_angle: self.number(node, "data-start-angle")?,
            sweep_angle: self.number(node, "data-sweep-angle")?,
            fill: self.color(node, "fill")?,
            data_series: self.index(node, "data-series")?,
            data_fraction: self.number(node, "data-fraction")?,
        })
    }
}

/// Parses the canonical form (or anything structurally equivalent to it).
pub fn parse(text: &str) -> Result<SvgDocument, SvgError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        SvgError::MalformedSvg {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let p = Parser { doc: &doc };
    let root = doc.root_element();
    if root.tag_name().name() != "svg" {
        return Err(p.error(root, format!("root element is <{}>, expected <svg>", root.tag_name().name())));
    }
    let dim = |name: &str| -> Result<u32, SvgError> {
        let v = p.attr(root, name)?;
        v.parse().map_err(|_| p.error(root, format!("{name}: not a pixel count: {v:?}")))
    };
    let chart_type = match root.attribute("data-chart-type") {
        Some(t) => ChartType::parse(t).ok_or_else(|| p.error(root, format!("unknown chart type {t:?}")))?,
        None => ChartType::Bar,
    };
    let mut out = SvgDocument::new(dim("width")?, dim("height")?, chart_type);
    for node in root.children() {
        if node.is_element() {
            out.elements.push(p.element(node)?);
        } else if node.is_text() && !node.text().unwrap_or("").trim().is_empty() {
            return Err(p.error(node, "unexpected text content"));
        }
    }
    Ok(out)
}

/// Removes one axis and its tick text. Category labels belong to the x axis.
pub fn strip_axis_elements(doc: &SvgDocument, which: AxisSelector) -> SvgDocument {
    let strip_x = matches!(which, AxisSelector::X | AxisSelector::Both);
    let strip_y = matches!(which, AxisSelector::Y | AxisSelector::Both);
    let keep = |e: &SvgElement| match e {
        SvgElement::AxisLine { x1, y1, x2, y2 } => {
            let horizontal = (y2 - y1).abs() <= (x2 - x1).abs();
            !(horizontal && strip_x || !horizontal && strip_y)
        }
        SvgElement::Text { role, .. } => match role {
            TextRole::TickX | TextRole::CategoryLabel => !strip_x,
            TextRole::TickY => !strip_y,
            _ => true,
        },
        _ => true,
    };
    SvgDocument {
        elements: doc.elements.iter().filter(|e| keep(e)).cloned().collect(),
        ..doc.clone()
    }
}

fn axis_lines(layout: &LayoutMap) -> Vec<SvgElement> {
    let p = layout.plot_area;
    let mut out = Vec::new();
    if let Some(y) = layout.x_axis_y {
        out.push(SvgElement::AxisLine {
            x1: p.x,
            y1: y as f64,
            x2: p.right(),
            y2: y as f64,
        });
    }
    if let Some(x) = layout.y_axis_x {
        out.push(SvgElement::AxisLine {
            x1: x as f64,
            y1: p.y,
            x2: x as f64,
            y2: p.bottom(),
        });
    }
    out
}

fn text_elements(texts: &[TextItem]) -> impl Iterator<Item = SvgElement> + '_ {
    texts.iter().map(|t| {
        let (x, y) = t.bbox.center();
        SvgElement::Text {
            x,
            y,
            content: t.text.clone(),
            role: t.role,
        }
    })
}

fn color_of(profile: &ChartProfile, series: usize) -> Result<Rgb, SvgError> {
    profile
        .series_colors
        .get(series)
        .copied()
        .ok_or_else(|| SvgError::InconsistentInputs(format!("series {series} has no color in the profile")))
}

fn same_rect(g: &GeometryRef, b: &BBox) -> bool {
    match *g {
        GeometryRef::Rect { x, y, width, height } => {
            (x - b.x).abs() < 0.5 && (y - b.y).abs() < 0.5 && (width - b.w).abs() < 0.5 && (height - b.h).abs() < 0.5
        }
        _ => false,
    }
}

/// Mark elements for one candidate. `value_of` supplies recovered bar values.
fn mark_elements(
    merged: &CandidateExtraction,
    profile: &ChartProfile,
    layout: &LayoutMap,
    value_of: impl Fn(usize, &BBox) -> Option<f64>,
) -> Result<Vec<SvgElement>, SvgError> {
    let mut out = Vec::new();
    match merged.chart_type {
        ChartType::Bar => {
            for (si, bbox) in merged.bars() {
                out.push(SvgElement::Rect {
                    x: bbox.x,
                    y: bbox.y,
                    width: bbox.w,
                    height: bbox.h,
                    fill: color_of(profile, si)?,
                    data_series: si,
                    data_value: value_of(si, &bbox),
                });
            }
        }
        ChartType::Line => {
            let mut series: Vec<usize> = merged.marks.iter().map(Mark::series_index).collect();
            series.sort_unstable();
            series.dedup();
            for si in series {
                let points = merged.line_points(si);
                if points.len() < 2 {
                    continue;
                }
                out.push(SvgElement::Path {
                    points,
                    stroke: color_of(profile, si)?,
                    stroke_width: LINE_STROKE_WIDTH,
                    data_series: si,
                });
            }
        }
        ChartType::Pie => {
            let (cx, cy, r) = match merged.disk {
                Some(d) => (d.cx, d.cy, (d.rx + d.ry) / 2.0),
                None => {
                    let (cx, cy) = layout.plot_area.center();
                    (cx, cy, layout.plot_area.w.min(layout.plot_area.h) / 2.0)
                }
            };
            for m in &merged.marks {
                if let Mark::PieSegment { series_index, start_angle, sweep_angle, fraction } = *m {
                    out.push(SvgElement::PieArc {
                        cx,
                        cy,
                        r,
                        start_angle,
                        sweep_angle: sweep_angle.min(360.0),
                        fill: color_of(profile, series_index)?,
                        data_series: series_index,
                        data_fraction: fraction,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Compiles merged geometry, recovered values, axes and text into one document.
pub fn assemble(
    merged: &CandidateExtraction,
    recovered: &RecoveredChart,
    profile: &ChartProfile,
    layout: &LayoutMap,
    texts: &[TextItem],
) -> Result<SvgDocument, SvgError> {
    if merged.chart_type != recovered.chart_type {
        return Err(SvgError::InconsistentInputs(format!(
            "extraction is {} but recovery is {}",
            merged.chart_type, recovered.chart_type
        )));
    }
    let value_of = |si: usize, b: &BBox| -> Option<f64> {
        recovered.series.iter().find_map(|s| {
            (s.color == *profile.series_colors.get(si)?)
                .then(|| s.geometry.iter().position(|g| same_rect(g, b)).map(|i| s.values[i]))
                .flatten()
        })
    };
    let mut doc = SvgDocument::new(recovered.width_px, recovered.height_px, merged.chart_type);
    doc.elements.extend(axis_lines(layout));
    doc.elements.extend(mark_elements(merged, profile, layout, value_of)?);
    doc.elements.extend(text_elements(texts));
    if !doc.is_valid() {
        return Err(SvgError::InconsistentInputs("assembled geometry is degenerate".into()));
    }
    doc.canonicalize();
    Ok(doc)
}

/// A geometry-only document for one candidate, as shown to an external critic.
pub fn candidate_document(candidate: &CandidateExtraction, profile: &ChartProfile, layout: &LayoutMap, width: u32, height: u32) -> Result<SvgDocument, SvgError> {
    let mut doc = SvgDocument::new(width, height, candidate.chart_type);
    doc.elements = mark_elements(candidate, profile, layout, |_, _| None)?;
    doc.elements.retain(SvgElement::is_valid);
    doc.canonicalize();
    Ok(doc)
}

/// Reads mark geometry back out of a document.
pub fn document_candidate(doc: &SvgDocument, variant_id: &str) -> CandidateExtraction {
    let mut marks = Vec::new();
    let mut disk = None;
    for e in &doc.elements {
        match e {
            SvgElement::Rect { x, y, width, height, data_series, .. } => marks.push(Mark::Bar {
                series_index: *data_series,
                bbox: BBox::new(*x, *y, *width, *height),
                fill_ratio: 1.0,
            }),
            SvgElement::Path { points, data_series, .. } => {
                marks.extend(points.iter().map(|&(x, y)| Mark::LinePoint { series_index: *data_series, x, y }));
            }
            SvgElement::PieArc { cx, cy, r, start_angle, sweep_angle, data_series, .. } => {
                disk = Some(crate::extract::PieDisk { cx: *cx, cy: *cy, rx: *r, ry: *r });
                marks.push(Mark::PieSegment {
                    series_index: *data_series,
                    start_angle: *start_angle,
                    sweep_angle: *sweep_angle,
                    fraction: sweep_angle / 360.0,
                })
            }
            _ => {}
        }
    }
    CandidateExtraction {
        variant_id: variant_id.to_string(),
        chart_type: doc.chart_type,
        marks,
        confidence: 1.0,
        diagnostics: Vec::new(),
        disk,
    }
}
