use serde::{Deserialize, Serialize};

use super::{plot_masks, require, CandidateExtraction, ExtractError, Mark, PieDisk};
use crate::classify::ChartProfile;
use crate::geom::BBox;
use crate::layout::LayoutMap;
use crate::model::ChartType;
use crate::raster::{label_components, BinaryMask, RasterImage};

pub const RAY_COUNT: usize = 720;
/// Radii, as fractions of the disk radius, sampled along each ray.
const RAY_SAMPLES: [f64; 4] = [0.35, 0.55, 0.75, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieVariant {
    AreaRatio,
    AngularSweep,
}

impl PieVariant {
    pub fn id(self) -> &'static str {
        match self {
            PieVariant::AreaRatio => "pie/area",
            PieVariant::AngularSweep => "pie/sweep",
        }
    }
}

/// The disk: the largest union-mask component, its centroid and half-extents.
struct Disk {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    labels: Vec<u32>,
    id: u32,
    bbox: BBox,
}

fn find_disk(masks: &[BinaryMask]) -> Option<Disk> {
    let union = masks.iter().skip(1).fold(masks.first()?.clone(), |acc, m| acc.union(m));
    let (components, labels) = label_components(&union);
    let (idx, comp) = components.iter().enumerate().max_by_key(|(_, c)| c.area_px)?;
    if comp.area_px < 20 {
        return None;
    }
    Some(Disk {
        cx: comp.centroid.0,
        cy: comp.centroid.1,
        rx: comp.bbox.w / 2.0,
        ry: comp.bbox.h / 2.0,
        labels,
        id: idx as u32 + 1,
        bbox: comp.bbox,
    })
}

/// Clockwise angle from 12 o'clock in degrees, measured in the frame where the
/// disk's ellipse is a circle.
fn clock_degrees(dx: f64, dy: f64) -> f64 {
    let a = dx.atan2(-dy).to_degrees();
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}

/// Segments are drawn clockwise from 12 o'clock, so a start just before 12 is read
/// as a slightly negative angle rather than as the last segment.
const WRAP_TOLERANCE: f64 = 2.0;

fn normalize_start(a: f64) -> f64 {
    let a = a.rem_euclid(360.0);
    if a > 360.0 - WRAP_TOLERANCE {
        a - 360.0
    } else {
        a
    }
}

fn segments(order: &[(usize, f64, f64)]) -> Vec<Mark> {
    let mut order: Vec<(usize, f64, f64)> = order.iter().map(|&(si, a, f)| (si, normalize_start(a), f)).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    order
        .iter()
        .map(|&(si, start, fraction)| Mark::PieSegment {
            series_index: si,
            start_angle: start,
            sweep_angle: 360.0 * fraction,
            fraction,
        })
        .collect()
}

fn area_ratio(masks: &[BinaryMask], disk: &Disk) -> (Vec<Mark>, f64) {
    let w = masks[0].width() as usize;
    let mut counts = vec![0usize; masks.len()];
    // Per-color sums of unit direction vectors give each sector's bisector.
    let mut dirs = vec![(0.0f64, 0.0f64); masks.len()];
    let (x0, y0) = (disk.bbox.x as u32, disk.bbox.y as u32);
    for y in y0..y0 + disk.bbox.h as u32 {
        for x in x0..x0 + disk.bbox.w as u32 {
            if disk.labels[y as usize * w + x as usize] != disk.id {
                continue;
            }
            let Some(si) = masks.iter().position(|m| m.get(x, y)) else {
                continue;
            };
            counts[si] += 1;
            let dx = (x as f64 + 0.5 - disk.cx) / disk.rx;
            let dy = (y as f64 + 0.5 - disk.cy) / disk.ry;
            let n = (dx * dx + dy * dy).sqrt();
            if n > 1e-9 {
                dirs[si].0 += dx / n;
                dirs[si].1 += dy / n;
            }
        }
    }
    let total: usize = counts.iter().sum();
    let mut present: Vec<(usize, f64, f64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, n)| **n > 0)
        .map(|(si, n)| (si, clock_degrees(dirs[si].0, dirs[si].1), *n as f64 / total as f64))
        .collect();
    if present.len() == 1 {
        return (segments(&[(present[0].0, 0.0, 1.0)]), 1.0);
    }
    present.sort_by(|a, b| a.1.total_cmp(&b.1));
    // The segment whose bisector is nearest 12 o'clock going clockwise starts at
    // its bisector minus half its sweep; the rest follow cumulatively.
    let (_, mid0, f0) = present[0];
    let mut start = (mid0 - 180.0 * f0).rem_euclid(360.0);
    let mut order = Vec::new();
    for &(si, _, f) in &present {
        order.push((si, start, f));
        start = (start + 360.0 * f).rem_euclid(360.0);
    }
    let inside = counts.iter().sum::<usize>() as f64 / (std::f64::consts::PI * disk.rx * disk.ry);
    (segments(&order), inside.min(1.0))
}

fn angular_sweep(masks: &[BinaryMask], disk: &Disk) -> (Vec<Mark>, f64) {
    let step = 360.0 / RAY_COUNT as f64;
    let hits: Vec<Option<usize>> = (0..RAY_COUNT)
        .map(|k| {
            let theta = ((k as f64 + 0.5) * step).to_radians();
            let mut votes = vec![0usize; masks.len()];
            for rho in RAY_SAMPLES {
                let x = disk.cx + disk.rx * rho * theta.sin();
                let y = disk.cy - disk.ry * rho * theta.cos();
                if x < 0.0 || y < 0.0 {
                    continue;
                }
                if let Some(si) = masks.iter().position(|m| m.get(x as u32, y as u32)) {
                    votes[si] += 1;
                }
            }
            let (si, n) = votes.iter().enumerate().max_by_key(|(i, n)| (**n, std::cmp::Reverse(*i)))?;
            (*n > 0).then_some(si)
        })
        .collect();
    let total = hits.iter().flatten().count();
    if total == 0 {
        return (Vec::new(), 0.0);
    }
    let mut out = Vec::new();
    for si in 0..masks.len() {
        let n = hits.iter().filter(|h| **h == Some(si)).count();
        if n == 0 {
            continue;
        }
        // The start of the longest run of rays hitting this color, wrapping at 12 o'clock.
        let (mut best_start, mut best_len) = (0usize, 0usize);
        for k in 0..RAY_COUNT {
            if hits[k] != Some(si) || hits[(k + RAY_COUNT - 1) % RAY_COUNT] == Some(si) {
                continue;
            }
            let len = (0..RAY_COUNT).take_while(|j| hits[(k + j) % RAY_COUNT] == Some(si)).count();
            if len > best_len {
                best_start = k;
                best_len = len;
            }
        }
        let start = if n == RAY_COUNT { 0.0 } else { best_start as f64 * step };
        out.push((si, start, n as f64 / total as f64));
    }
    (segments(&out), total as f64 / RAY_COUNT as f64)
}

/// Segment fractions of the disk formed by the series colors.
pub fn extract_pie(image: &RasterImage, profile: &ChartProfile, layout: &LayoutMap, variant: PieVariant) -> Result<CandidateExtraction, ExtractError> {
    require(profile, ChartType::Pie)?;
    let masks = plot_masks(image, profile, layout);
    let disk = find_disk(&masks).ok_or(ExtractError::NoPieFound)?;
    let (marks, confidence) = match variant {
        PieVariant::AreaRatio => area_ratio(&masks, &disk),
        PieVariant::AngularSweep => angular_sweep(&masks, &disk),
    };
    if marks.is_empty() {
        return Err(ExtractError::NoPieFound);
    }
    Ok(CandidateExtraction {
        variant_id: variant.id().to_string(),
        chart_type: ChartType::Pie,
        marks,
        confidence: confidence.clamp(0.0, 1.0),
        diagnostics: vec![format!("disk center ({:.1}, {:.1}), radii ({:.1}, {:.1})", disk.cx, disk.cy, disk.rx, disk.ry)],
        disk: Some(PieDisk {
            cx: disk.cx,
            cy: disk.cy,
            rx: disk.rx,
            ry: disk.ry,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::profile_heuristic;
    use crate::layout::detect_layout;
    use crate::model::{ChartSpec, Series};
    use crate::raster::resample;
    use crate::render::{pie_segment_colors, render, RenderTheme};
    use crate::synth::corpus;

    fn fractions(c: &CandidateExtraction, profile: &ChartProfile, truth_colors: &[crate::model::Rgb]) -> Vec<f64> {
        truth_colors
            .iter()
            .map(|tc| {
                c.marks
                    .iter()
                    .find_map(|m| match m {
                        Mark::PieSegment { series_index, fraction, .. } if profile.series_colors[*series_index].distance(*tc) <= 12.0 => Some(*fraction),
                        _ => None,
                    })
                    .unwrap_or(0.0)
            })
            .collect()
    }

    fn pie(values: Vec<f64>) -> ChartSpec {
        let mut s = corpus(ChartType::Pie, 1, 1, false).remove(0);
        s.category_labels = (0..values.len()).map(|i| format!("P{i}")).collect();
        s.series = vec![Series {
            name: "share".into(),
            color: s.series[0].color,
            values,
        }];
        s
    }

    fn run(spec: &ChartSpec, image: &RasterImage, variant: PieVariant) -> (Vec<f64>, CandidateExtraction) {
        let profile = profile_heuristic(image).unwrap();
        let layout = detect_layout(image, &profile.series_colors);
        let c = extract_pie(image, &profile, &layout, variant).unwrap();
        let colors = pie_segment_colors(spec, &RenderTheme::default());
        (fractions(&c, &profile, &colors), c)
    }

    #[test]
    fn quarters_and_half() {
        let s = pie(vec![25.0, 25.0, 50.0]);
        let img = render(&s, &RenderTheme::default()).unwrap().image;
        for v in [PieVariant::AreaRatio, PieVariant::AngularSweep] {
            let (f, c) = run(&s, &img, v);
            for (got, want) in f.iter().zip([0.25, 0.25, 0.5]) {
                assert!((got - want).abs() <= 0.02, "{}: {f:?}", c.variant_id);
            }
            // Clockwise from 12 o'clock in value order.
            let starts: Vec<f64> = c
                .marks
                .iter()
                .map(|m| match m {
                    Mark::PieSegment { start_angle, .. } => *start_angle,
                    _ => unreachable!(),
                })
                .collect();
            for (got, want) in starts.iter().zip([0.0, 90.0, 180.0]) {
                let d = (got - want).rem_euclid(360.0);
                assert!(d.min(360.0 - d) <= 3.0, "{}: starts {starts:?}", c.variant_id);
            }
        }
    }

    #[test]
    fn single_segment() {
        let s = pie(vec![7.0]);
        let img = render(&s, &RenderTheme::default()).unwrap().image;
        for v in [PieVariant::AreaRatio, PieVariant::AngularSweep] {
            let (f, c) = run(&s, &img, v);
            assert_eq!(f, vec![1.0]);
            assert!(matches!(c.marks[0], Mark::PieSegment { sweep_angle, .. } if sweep_angle == 360.0));
        }
    }

    #[test]
    fn fractions_sum_to_one_and_match_truth() {
        for (i, s) in corpus(ChartType::Pie, 50, 17, true).iter().enumerate() {
            let img = render(s, &RenderTheme::default()).unwrap().image;
            let total: f64 = s.series[0].values.iter().sum();
            for v in [PieVariant::AreaRatio, PieVariant::AngularSweep] {
                let (f, c) = run(s, &img, v);
                let sum: f64 = c
                    .marks
                    .iter()
                    .map(|m| match m {
                        Mark::PieSegment { fraction, .. } => *fraction,
                        _ => 0.0,
                    })
                    .sum();
                assert!((sum - 1.0).abs() <= 0.02, "#{i}");
                for (got, tv) in f.iter().zip(&s.series[0].values) {
                    assert!((got - tv / total).abs() <= 0.02, "#{i} {}: {f:?}", c.variant_id);
                }
            }
        }
    }

    #[test]
    fn scale_invariance() {
        for s in corpus(ChartType::Pie, 10, 23, false) {
            let img = render(&s, &RenderTheme::default()).unwrap().image;
            for v in [PieVariant::AreaRatio, PieVariant::AngularSweep] {
                let (base, _) = run(&s, &img, v);
                for k in [0.75, 1.5] {
                    let (scaled, _) = run(&s, &resample(&img, k, k), v);
                    for (a, b) in base.iter().zip(&scaled) {
                        assert!((a - b).abs() <= 0.01, "{v:?} at {k}: {base:?} vs {scaled:?}");
                    }
                }
            }
        }
    }
}
