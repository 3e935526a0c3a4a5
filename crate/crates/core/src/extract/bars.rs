use super::{coverage, plot_masks, require, CandidateExtraction, ExtractError, Mark};
use crate::classify::ChartProfile;
use crate::geom::BBox;
use crate::layout::LayoutMap;
use crate::model::ChartType;
use crate::raster::{connected_components, morph_open, BinaryMask, RasterImage};

const MIN_BAR_AREA: usize = 25;
const MIN_BAR_FILL: f64 = 0.85;
const BASELINE_SLACK: f64 = 5.0;
const MIN_COLUMN_COVERAGE: usize = 3;

fn baseline(layout: &LayoutMap) -> f64 {
    layout.x_axis_y.map(|y| y as f64).unwrap_or(layout.plot_area.bottom())
}

/// Moves the top edge up by the mean color coverage of the row above it, giving a
/// sub-pixel edge on resampled images. Untouched on clean renders.
fn refine_top(image: &RasterImage, profile: &ChartProfile, series: usize, bbox: BBox) -> BBox {
    let top = bbox.y as i64 - 1;
    if top < 0 {
        return bbox;
    }
    let color = profile.series_colors[series];
    let (x0, x1) = (bbox.x as u32, bbox.right() as u32);
    // Inner columns only, away from blended corners.
    let inset = (x1 - x0) / 4;
    let cols: Vec<u32> = (x0 + inset..x1 - inset).collect();
    if cols.is_empty() {
        return bbox;
    }
    let frac = cols
        .iter()
        .map(|&x| coverage(image.get(x, top as u32), color, profile.background))
        .sum::<f64>()
        / cols.len() as f64;
    BBox::new(bbox.x, bbox.y - frac, bbox.w, bbox.h + frac)
}

fn finish(variant_id: &str, mut marks: Vec<Mark>, confidence: f64, diagnostics: Vec<String>) -> Result<CandidateExtraction, ExtractError> {
    if marks.is_empty() {
        return Err(ExtractError::NoBarsFound);
    }
    marks.sort_by(|a, b| match (a, b) {
        (Mark::Bar { bbox: p, series_index: s, .. }, Mark::Bar { bbox: q, series_index: t, .. }) => p.x.total_cmp(&q.x).then(s.cmp(t)),
        _ => std::cmp::Ordering::Equal,
    });
    Ok(CandidateExtraction {
        variant_id: variant_id.to_string(),
        chart_type: ChartType::Bar,
        marks,
        confidence: confidence.clamp(0.0, 1.0),
        diagnostics,
        disk: None,
    })
}

/// Connected components of each opened series mask, kept when rectangular and
/// standing on the x-axis.
pub fn extract_bars_cc(image: &RasterImage, profile: &ChartProfile, layout: &LayoutMap) -> Result<CandidateExtraction, ExtractError> {
    require(profile, ChartType::Bar)?;
    let base = baseline(layout);
    let mut marks = Vec::new();
    for (si, mask) in plot_masks(image, profile, layout).iter().enumerate() {
        for c in connected_components(&morph_open(mask, 1)) {
            if c.area_px < MIN_BAR_AREA || c.fill_ratio() < MIN_BAR_FILL || (c.bbox.bottom() - base).abs() > BASELINE_SLACK {
                continue;
            }
            marks.push(Mark::Bar {
                series_index: si,
                bbox: refine_top(image, profile, si, c.bbox),
                fill_ratio: c.fill_ratio().min(1.0),
            });
        }
    }
    let confidence = mean_fill(&marks);
    finish("bar/cc", marks, confidence, Vec::new())
}

fn mean_fill(marks: &[Mark]) -> f64 {
    let fills: Vec<f64> = marks
        .iter()
        .filter_map(|m| match m {
            Mark::Bar { fill_ratio, .. } => Some(*fill_ratio),
            _ => None,
        })
        .collect();
    if fills.is_empty() {
        0.0
    } else {
        fills.iter().sum::<f64>() / fills.len() as f64
    }
}

struct Run {
    x0: u32,
    x1: u32,
}

fn column_runs(mask: &BinaryMask) -> (Vec<Run>, Vec<Vec<u32>>) {
    let (w, h) = (mask.width(), mask.height());
    let rows: Vec<Vec<u32>> = (0..w).map(|x| (0..h).filter(|&y| mask.get(x, y)).collect()).collect();
    let mut runs = Vec::new();
    let mut start = None;
    for x in 0..=w {
        let covered = x < w && rows[x as usize].len() >= MIN_COLUMN_COVERAGE;
        match (covered, start) {
            (true, None) => start = Some(x),
            (false, Some(s)) => {
                runs.push(Run { x0: s, x1: x });
                start = None;
            }
            _ => {}
        }
    }
    (runs, rows)
}

/// Column projection of each series mask: maximal runs of covered columns become
/// bars whose top is the highest set pixel in the run.
pub fn extract_bars_projection(image: &RasterImage, profile: &ChartProfile, layout: &LayoutMap) -> Result<CandidateExtraction, ExtractError> {
    require(profile, ChartType::Bar)?;
    let mut marks = Vec::new();
    let mut diagnostics = Vec::new();
    let (mut total, mut explained) = (0usize, 0usize);
    for (si, mask) in plot_masks(image, profile, layout).iter().enumerate() {
        total += mask.count();
        let (runs, rows) = column_runs(mask);
        for run in runs {
            let cols = &rows[run.x0 as usize..run.x1 as usize];
            let top = cols.iter().filter_map(|r| r.first()).min().copied().unwrap_or(0);
            let bottom = cols.iter().filter_map(|r| r.last()).max().copied().unwrap_or(0) + 1;
            let bbox = BBox::from_edges(run.x0 as f64, top as f64, run.x1 as f64, bottom as f64);
            let inside: usize = cols.iter().map(|r| r.len()).sum();
            if inside < MIN_BAR_AREA {
                continue;
            }
            explained += inside;
            // Column tops of a single bar agree; a step means neighbouring bars touched.
            let tops: Vec<u32> = cols.iter().filter_map(|r| r.first().copied()).collect();
            if tops.iter().max().unwrap_or(&0) - tops.iter().min().unwrap_or(&0) > 2 {
                diagnostics.push(format!("merged-run: series {si} columns {}..{} hold bars of different heights", run.x0, run.x1));
            }
            marks.push(Mark::Bar {
                series_index: si,
                bbox: refine_top(image, profile, si, bbox),
                fill_ratio: (inside as f64 / bbox.area()).min(1.0),
            });
        }
    }
    let confidence = if total == 0 { 0.0 } else { explained as f64 / total as f64 };
    finish("bar/proj", marks, confidence, diagnostics)
}

/// Row scan within each projected run: the top is the first row covering at least
/// half of the run's columns, which ignores isolated specks above a bar.
pub fn extract_bars_rows(image: &RasterImage, profile: &ChartProfile, layout: &LayoutMap) -> Result<CandidateExtraction, ExtractError> {
    require(profile, ChartType::Bar)?;
    let base = baseline(layout);
    let mut marks = Vec::new();
    for (si, mask) in plot_masks(image, profile, layout).iter().enumerate() {
        let (runs, _) = column_runs(mask);
        for run in runs {
            let width = run.x1 - run.x0;
            let row_cover = |y: u32| (run.x0..run.x1).filter(|&x| mask.get(x, y)).count();
            let Some(top) = (0..mask.height()).find(|&y| 2 * row_cover(y) >= width as usize) else {
                continue;
            };
            let bottom = (top..mask.height()).rev().find(|&y| 2 * row_cover(y) >= width as usize).unwrap_or(top) + 1;
            let bbox = BBox::from_edges(run.x0 as f64, top as f64, run.x1 as f64, bottom as f64);
            let filled: usize = (top..bottom).map(row_cover).sum();
            if filled < MIN_BAR_AREA || (bbox.bottom() - base).abs() > BASELINE_SLACK {
                continue;
            }
            marks.push(Mark::Bar {
                series_index: si,
                bbox: refine_top(image, profile, si, bbox),
                fill_ratio: (filled as f64 / bbox.area()).min(1.0),
            });
        }
    }
    let confidence = mean_fill(&marks);
    finish("bar/rows", marks, confidence, Vec::new())
}
