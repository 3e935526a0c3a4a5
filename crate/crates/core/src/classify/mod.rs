//! Chart type and series color identification.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ClientError, VlmClient};
use crate::model::{ChartType, Rgb, SeriesColor, MIN_COLOR_SEPARATION};
use crate::raster::{label_components, Component};
use crate::raster::{BinaryMask, RasterImage};

pub const DEFAULT_K_MAX: usize = 6;
/// Minimum share of non-background pixels a series color must cover.
pub const MIN_COLOR_SHARE: f64 = 0.01;
/// A pixel joins the mask of its nearest series color within this distance.
pub const MASK_TOLERANCE: f64 = 40.0;
/// Colors this close to a mixing segment between two stronger colors are treated as blends.
const BLEND_TOLERANCE: f64 = 12.0;
/// Blends this close to either end of a mixing line are still treated as blends.
const BLEND_T_MIN: f64 = 0.05;
/// Bins whose brightest channel is at or below this are axis or text ink.
const NEAR_BLACK_MAX_CHANNEL: u8 = 64;

const LINE_MAX_THICKNESS: f64 = 6.0;
const PIE_FILL: (f64, f64) = (0.7, 0.86);
const PIE_INSIDE_ELLIPSE: f64 = 0.95;
const BAR_FILL: f64 = 0.9;
const BAR_MIN_SIDE: f64 = 7.0;
const BAR_EDGE_SLACK: f64 = 3.0;

pub const CLASSIFICATION_PROMPT: &str = "Identify the chart type and the colors representing different data series in this chart image. \
Reply with JSON only, in the form {\"chart_type\": \"bar\" | \"line\" | \"pie\", \"colors\": [\"#RRGGBB\", ...]}, \
listing one hex color per data series.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Heuristic,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartProfile {
    pub chart_type: ChartType,
    pub series_colors: Vec<SeriesColor>,
    pub background: Rgb,
    pub confidence: f64,
    pub source: ProfileSource,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("no series colors survived filtering")]
    NoSeriesColors,
    #[error("no classification rule matched")]
    Unclassifiable,
    #[error("classification client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("malformed classification reply: {0}")]
    MalformedReply(String),
}

impl From<ClientError> for ClassifyError {
    fn from(e: ClientError) -> Self {
        ClassifyError::ClientUnavailable(e.to_string())
    }
}

/// Modal color of the 2 px frame around the image.
pub fn identify_background(image: &RasterImage) -> Rgb {
    let (w, h) = (image.width(), image.height());
    let mut counts: HashMap<Rgb, usize> = HashMap::new();
    for y in 0..h {
        for x in 0..w {
            if x < 2 || y < 2 || x + 2 >= w || y + 2 >= h {
                *counts.entry(image.get(x, y)).or_default() += 1;
            }
        }
    }
    modal(&counts).unwrap_or(Rgb::WHITE)
}

// Ties prefer the lexicographically smallest color so the result is deterministic.
fn modal(counts: &HashMap<Rgb, usize>) -> Option<Rgb> {
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then((b.0.r, b.0.g, b.0.b).cmp(&(a.0.r, a.0.g, a.0.b))))
        .map(|(c, _)| *c)
}

fn near_black(c: Rgb) -> bool {
    c.r.max(c.g).max(c.b) <= NEAR_BLACK_MAX_CHANNEL
}

/// Distance from `c` to the segment `a`-`b`, with the segment parameter of the foot point.
fn segment_distance(c: Rgb, a: Rgb, b: Rgb) -> (f64, f64) {
    let f = |p: Rgb| [p.r as f64, p.g as f64, p.b as f64];
    let (c, a, b) = (f(c), f(a), f(b));
    let d: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
    let len2: f64 = d.iter().map(|v| v * v).sum();
    if len2 == 0.0 {
        return (f64::INFINITY, 0.0);
    }
    let t = (0..3).map(|i| (c[i] - a[i]) * d[i]).sum::<f64>() / len2;
    let dist = (0..3).map(|i| (c[i] - a[i] - t * d[i]).powi(2)).sum::<f64>().sqrt();
    (dist, t)
}

struct ColorGroup {
    color: Rgb,
    count: usize,
    // Row-major index of the first pixel, for tie-breaking equal counts.
    first: usize,
}

/// Dominant non-background, non-ink colors ordered by pixel count, strongest first.
///
/// Colors are quantized to 32 levels per channel. Bins close to a stronger bin are
/// merged into it, and colors lying on the mixing line between two stronger colors
/// (edge blends left by resampling) are discarded.
pub fn identify_series_colors(image: &RasterImage, background: Rgb, k_max: usize) -> Result<Vec<SeriesColor>, ClassifyError> {
    let mut exact: HashMap<Rgb, usize> = HashMap::new();
    let mut first_seen: HashMap<Rgb, usize> = HashMap::new();
    for (i, &p) in image.pixels().iter().enumerate() {
        *exact.entry(p).or_default() += 1;
        first_seen.entry(p).or_insert(i);
    }
    let non_background: usize = exact
        .iter()
        .filter(|(c, _)| c.distance(background) > MIN_COLOR_SEPARATION)
        .map(|(_, n)| n)
        .sum();
    let mut bins: HashMap<(u8, u8, u8), HashMap<Rgb, usize>> = HashMap::new();
    for (&c, &n) in &exact {
        bins.entry((c.r >> 3, c.g >> 3, c.b >> 3)).or_default().insert(c, n);
    }
    let mut candidates: Vec<ColorGroup> = bins
        .values()
        .filter_map(|members| {
            let color = modal(members)?;
            let count = members.values().sum();
            let first = members.keys().map(|c| first_seen[c]).min()?;
            (color.distance(background) > MIN_COLOR_SEPARATION && !near_black(color)).then_some(ColorGroup { color, count, first })
        })
        .collect();
    candidates.sort_by(|a, b| b.count.cmp(&a.count).then(a.first.cmp(&b.first)));

    let mut groups: Vec<ColorGroup> = Vec::new();
    for c in candidates {
        match groups.iter_mut().find(|g| g.color.distance(c.color) <= MIN_COLOR_SEPARATION) {
            Some(g) => {
                g.count += c.count;
                g.first = g.first.min(c.first);
            }
            None => groups.push(c),
        }
    }
    groups.sort_by(|a, b| b.count.cmp(&a.count).then(a.first.cmp(&b.first)));
    let min_count = (MIN_COLOR_SHARE * non_background as f64).ceil() as usize;

    let is_blend = |c: Rgb, others: &mut dyn Iterator<Item = Rgb>| {
        let mut anchors = vec![background, Rgb::BLACK];
        anchors.extend(others);
        anchors.iter().enumerate().any(|(i, &a)| {
            anchors[i + 1..].iter().any(|&b| {
                let (d, t) = segment_distance(c, a, b);
                d <= BLEND_TOLERANCE && (BLEND_T_MIN..=1.0 - BLEND_T_MIN).contains(&t)
            })
        })
    };
    let mut kept: Vec<ColorGroup> = Vec::new();
    for g in groups.into_iter().filter(|g| g.count >= min_count.max(1)) {
        if !is_blend(g.color, &mut kept.iter().map(|k| k.color)) {
            kept.push(g);
        }
    }
    // A blend can outnumber its source color after resampling, so recheck
    // every survivor against all the others, weakest first.
    let mut i = kept.len();
    while i > 0 {
        i -= 1;
        let c = kept[i].color;
        if is_blend(c, &mut kept.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, k)| k.color)) {
            kept.remove(i);
        }
    }
    kept.truncate(k_max);
    if kept.is_empty() {
        return Err(ClassifyError::NoSeriesColors);
    }
    Ok(kept.into_iter().map(|g| g.color).collect())
}

/// One mask per color: pixels nearest to that color, within tolerance and closer to
/// it than to the background or to black.
pub fn series_masks(image: &RasterImage, colors: &[SeriesColor], background: Rgb) -> Vec<BinaryMask> {
    let (w, h) = (image.width(), image.height());
    let mut masks: Vec<BinaryMask> = colors.iter().map(|_| BinaryMask::new(w, h)).collect();
    for y in 0..h {
        for x in 0..w {
            let p = image.get(x, y);
            let Some((i, d)) = colors
                .iter()
                .enumerate()
                .map(|(i, c)| (i, p.distance(*c)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
            else {
                continue;
            };
            if d <= MASK_TOLERANCE && d < p.distance(background) && d < p.distance(Rgb::BLACK) {
                masks[i].set(x, y, true);
            }
        }
    }
    masks
}

fn pie_score(mask: &BinaryMask) -> Option<f64> {
    let (components, labels) = label_components(mask);
    let (idx, comp) = components.iter().enumerate().max_by_key(|(_, c)| c.area_px)?;
    let fill = comp.fill_ratio();
    if comp.bbox.w < 8.0 || comp.bbox.h < 8.0 || !(PIE_FILL.0..=PIE_FILL.1).contains(&fill) {
        return None;
    }
    let (cx, cy) = comp.bbox.center();
    let (rx, ry) = (comp.bbox.w / 2.0, comp.bbox.h / 2.0);
    let id = idx as u32 + 1;
    let w = mask.width() as usize;
    let mut inside = 0usize;
    let x0 = comp.bbox.x as usize;
    let y0 = comp.bbox.y as usize;
    for y in y0..y0 + comp.bbox.h as usize {
        for x in x0..x0 + comp.bbox.w as usize {
            if labels[y * w + x] != id {
                continue;
            }
            let nx = (x as f64 + 0.5 - cx) / (rx + 1.0);
            let ny = (y as f64 + 0.5 - cy) / (ry + 1.0);
            if nx * nx + ny * ny <= 1.0 {
                inside += 1;
            }
        }
    }
    let frac = inside as f64 / comp.area_px as f64;
    (frac >= PIE_INSIDE_ELLIPSE).then_some(frac)
}

fn bar_score(masks: &[BinaryMask]) -> Option<f64> {
    let rects: Vec<Component> = masks
        .iter()
        .flat_map(|m| label_components(m).0)
        .filter(|c| c.fill_ratio() >= BAR_FILL && c.bbox.w >= BAR_MIN_SIDE && c.bbox.h >= BAR_MIN_SIDE)
        .collect();
    // Bars share their baseline edge: the bottom for positive values, the top for negative ones.
    let mut best: Vec<&Component> = Vec::new();
    for anchor in &rects {
        for edge in [anchor.bbox.bottom(), anchor.bbox.y] {
            let aligned: Vec<&Component> = rects
                .iter()
                .filter(|c| (c.bbox.bottom() - edge).abs() <= BAR_EDGE_SLACK || (c.bbox.y - edge).abs() <= BAR_EDGE_SLACK)
                .collect();
            if aligned.len() > best.len() {
                best = aligned;
            }
        }
    }
    (best.len() >= 2).then(|| best.iter().map(|c| c.fill_ratio()).sum::<f64>() / best.len() as f64)
}

/// Stroke thickness as area over centerline length, the centerline running through
/// the mean row of each column.
fn stroke_thickness(mask: &BinaryMask) -> Option<f64> {
    let (components, labels) = label_components(mask);
    let (idx, comp) = components.iter().enumerate().max_by_key(|(_, c)| c.area_px)?;
    let id = idx as u32 + 1;
    let w = mask.width() as usize;
    let x0 = comp.bbox.x as usize;
    let y0 = comp.bbox.y as usize;
    let mut centers: Vec<Option<f64>> = Vec::new();
    for x in x0..x0 + comp.bbox.w as usize {
        let rows: Vec<usize> = (y0..y0 + comp.bbox.h as usize).filter(|&y| labels[y * w + x] == id).collect();
        centers.push((!rows.is_empty()).then(|| rows.iter().sum::<usize>() as f64 / rows.len() as f64));
    }
    let present: Vec<f64> = centers.into_iter().flatten().collect();
    let mut length = 1.0;
    for pair in present.windows(2) {
        length += (1.0 + (pair[1] - pair[0]).powi(2)).sqrt();
    }
    // Near-vertical strokes are measured along rows instead.
    let length = length.max(comp.bbox.h);
    Some(comp.area_px as f64 / length)
}

/// Decides the chart type from the identified colors: disk-like blob, then aligned
/// rectangles, then thin strokes.
pub fn classify_heuristic(image: &RasterImage, colors: &[SeriesColor], background: Rgb) -> Result<(ChartType, f64), ClassifyError> {
    if colors.is_empty() {
        return Err(ClassifyError::Unclassifiable);
    }
    let masks = series_masks(image, colors, background);
    let union = masks.iter().skip(1).fold(masks[0].clone(), |acc, m| acc.union(m));
    if let Some(score) = pie_score(&union) {
        return Ok((ChartType::Pie, score));
    }
    if let Some(score) = bar_score(&masks) {
        return Ok((ChartType::Bar, score));
    }
    let thickness: Vec<f64> = masks.iter().filter_map(stroke_thickness).collect();
    if !thickness.is_empty() {
        let mean = thickness.iter().sum::<f64>() / thickness.len() as f64;
        if mean <= LINE_MAX_THICKNESS {
            return Ok((ChartType::Line, (1.0 - mean / (2.0 * LINE_MAX_THICKNESS)).clamp(0.0, 1.0)));
        }
    }
    Err(ClassifyError::Unclassifiable)
}

/// Background, series colors and chart type from pixel statistics alone.
pub fn profile_heuristic(image: &RasterImage) -> Result<ChartProfile, ClassifyError> {
    let background = identify_background(image);
    let series_colors = identify_series_colors(image, background, DEFAULT_K_MAX)?;
    let (chart_type, confidence) = classify_heuristic(image, &series_colors, background)?;
    Ok(ChartProfile {
        chart_type,
        series_colors,
        background,
        confidence,
        source: ProfileSource::Heuristic,
    })
}

#[derive(Deserialize)]
struct Reply {
    chart_type: String,
    colors: Vec<String>,
    #[serde(default)]
    confidence: Option<f64>,
}

/// Parses `{chart_type, colors[]}`, tolerating prose around the JSON object.
pub fn parse_classification_reply(reply: &str, background: Rgb) -> Result<ChartProfile, ClassifyError> {
    let start = reply.find('{').ok_or_else(|| ClassifyError::MalformedReply("no JSON object".into()))?;
    let end = reply.rfind('}').ok_or_else(|| ClassifyError::MalformedReply("no JSON object".into()))?;
    if end < start {
        return Err(ClassifyError::MalformedReply("no JSON object".into()));
    }
    let r: Reply = serde_json::from_str(&reply[start..=end]).map_err(|e| ClassifyError::MalformedReply(e.to_string()))?;
    let chart_type = ChartType::parse(&r.chart_type)
        .ok_or_else(|| ClassifyError::MalformedReply(format!("unknown chart type {:?}", r.chart_type)))?;
    let series_colors = r
        .colors
        .iter()
        .map(|c| Rgb::from_hex(c).ok_or_else(|| ClassifyError::MalformedReply(format!("bad color {c:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if series_colors.is_empty() || series_colors.len() > DEFAULT_K_MAX {
        return Err(ClassifyError::MalformedReply(format!("{} colors, expected 1 to 6", series_colors.len())));
    }
    Ok(ChartProfile {
        chart_type,
        series_colors,
        background,
        confidence: r.confidence.unwrap_or(1.0).clamp(0.0, 1.0),
        source: ProfileSource::External,
    })
}

pub fn classify_external(image: &RasterImage, client: &dyn VlmClient) -> Result<ChartProfile, ClassifyError> {
    let png = image
        .to_png_bytes()
        .map_err(|e| ClassifyError::ClientUnavailable(format!("cannot encode image: {e}")))?;
    let reply = client.complete(&png, CLASSIFICATION_PROMPT)?;
    parse_classification_reply(&reply, identify_background(image))
}

/// Heuristic profile, optionally cross-checked by an external model. The heuristic
/// wins when both succeed and disagree on the chart type; the external profile is
/// used when the heuristic cannot decide.
pub fn classify(image: &RasterImage, client: Option<&dyn VlmClient>) -> Result<ChartProfile, ClassifyError> {
    let heuristic = profile_heuristic(image);
    let Some(client) = client else {
        return heuristic;
    };
    match (heuristic, classify_external(image, client)) {
        (Ok(h), Ok(e)) => {
            if h.chart_type != e.chart_type {
                log::warn!("external classifier says {}, heuristic says {}; keeping the heuristic", e.chart_type, h.chart_type);
                Ok(h)
            } else {
                Ok(e)
            }
        }
        (Ok(h), Err(e)) => {
            log::warn!("external classification failed ({e}); using the heuristic");
            Ok(h)
        }
        (Err(_), Ok(e)) => Ok(e),
        (Err(h), Err(_)) => Err(h),
    }
}
