//! Reconciles several candidate extractions of the same chart into one, with
//! a record of where the candidates disagreed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ClientError, VlmClient};
use crate::extract::{rdp, CandidateExtraction, Mark, PieDisk, RDP_EPSILON};
use crate::geom::{median, polyline_y_at, BBox};
use crate::model::ChartType;
use crate::raster::RasterImage;
use crate::svgdoc::{self, SvgDocument};

pub const CRITIC_PROMPT: &str = "You will be provided with a bar chart image and three generated SVG representations of the bounding boxes corresponding to bar elements in the chart. Your task is to: 1. Analyze the three provided SVG codes, focusing on the bounding box elements representing the bars. 2. Generate a final, comprehensive SVG code that consolidates information from all three SVG versions, ensuring it accurately captures all bar elements present in the original chart. 3. Ensure that the final SVG representation correctly preserves bar positioning and the total number of bars.";

pub const MERGED_VARIANT_ID: &str = "critic/merged";
/// Bars from different candidates are the same bar at this overlap or more.
pub const IOU_THRESHOLD: f64 = 0.5;
/// Cluster members further than this from the merged edge are reported.
pub const DIVERGENCE_PX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    RuleBased,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub description: String,
    pub variant_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticReport {
    /// `(series_index, mark count)` in series order.
    pub chosen_counts: Vec<(usize, usize)>,
    pub disagreements: Vec<Disagreement>,
    pub merged: CandidateExtraction,
    pub mode: CriticMode,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticError {
    #[error("no candidates to merge")]
    EmptyInput,
    #[error("candidate {variant_id} is a {actual} extraction, expected {expected}")]
    WrongChartType { variant_id: String, expected: ChartType, actual: ChartType },
    #[error("critic client unavailable: {0}")]
    ClientUnavailable(String),
    #[error("critic reply malformed: {0}")]
    MalformedReply(String),
}

impl From<ClientError> for CriticError {
    fn from(e: ClientError) -> Self {
        CriticError::ClientUnavailable(e.to_string())
    }
}

fn check(candidates: &[CandidateExtraction], expected: ChartType) -> Result<(), CriticError> {
    if candidates.is_empty() {
        return Err(CriticError::EmptyInput);
    }
    match candidates.iter().find(|c| c.chart_type != expected) {
        Some(c) => Err(CriticError::WrongChartType {
            variant_id: c.variant_id.clone(),
            expected,
            actual: c.chart_type,
        }),
        None => Ok(()),
    }
}

fn series_of(candidates: &[CandidateExtraction]) -> BTreeSet<usize> {
    candidates.iter().flat_map(|c| c.marks.iter().map(Mark::series_index)).collect()
}

fn mean_confidence(candidates: &[CandidateExtraction]) -> f64 {
    candidates.iter().map(|c| c.confidence).sum::<f64>() / candidates.len() as f64
}

fn merged_candidate(chart_type: ChartType, marks: Vec<Mark>, confidence: f64, diagnostics: Vec<String>, disk: Option<PieDisk>) -> CandidateExtraction {
    CandidateExtraction {
        variant_id: MERGED_VARIANT_ID.to_string(),
        chart_type,
        marks,
        confidence: confidence.clamp(0.0, 1.0),
        diagnostics,
        disk,
    }
}

/// Dispatches on the candidates' chart type.
pub fn merge(candidates: &[CandidateExtraction]) -> Result<CriticReport, CriticError> {
    match candidates.first().ok_or(CriticError::EmptyInput)?.chart_type {
        ChartType::Bar => merge_bars(candidates),
        ChartType::Line => merge_lines(candidates),
        ChartType::Pie => merge_pies(candidates),
    }
}

/// Count chosen by majority vote; ties go to the more confident candidate,
/// then to the smaller variant id.
fn majority_count(counts: &[usize], candidates: &[CandidateExtraction]) -> usize {
    let votes = |n: usize| counts.iter().filter(|&&c| c == n).count();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        votes(counts[b])
            .cmp(&votes(counts[a]))
            .then(candidates[b].confidence.total_cmp(&candidates[a].confidence))
            .then(candidates[a].variant_id.cmp(&candidates[b].variant_id))
    });
    counts[order[0]]
}

struct Cluster {
    /// `(candidate, bbox, fill_ratio)`, at most one member per candidate.
    members: Vec<(usize, BBox, f64)>,
}

impl Cluster {
    fn has_candidate(&self, c: usize) -> bool {
        self.members.iter().any(|m| m.0 == c)
    }

    fn merged_box(&self) -> BBox {
        let edge = |f: fn(&BBox) -> f64| median(&self.members.iter().map(|m| f(&m.1)).collect::<Vec<_>>());
        BBox::from_edges(edge(|b| b.x), edge(|b| b.y), edge(BBox::right), edge(BBox::bottom))
    }
}

/// Greedy agglomeration of one series' bars across candidates, strongest overlap first.
fn cluster_bars(per_candidate: &[Vec<(BBox, f64)>]) -> Vec<Cluster> {
    let mut ids = Vec::new();
    for (c, bars) in per_candidate.iter().enumerate() {
        for (k, _) in bars.iter().enumerate() {
            ids.push((c, k));
        }
    }
    let mut pairs = Vec::new();
    for (a, &(ca, ka)) in ids.iter().enumerate() {
        for (b, &(cb, kb)) in ids.iter().enumerate().skip(a + 1) {
            if ca == cb {
                continue;
            }
            let iou = per_candidate[ca][ka].0.iou(&per_candidate[cb][kb].0);
            if iou >= IOU_THRESHOLD {
                pairs.push((iou, a, b));
            }
        }
    }
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut owner: Vec<usize> = (0..ids.len()).collect();
    let mut clusters: Vec<Option<Cluster>> = ids
        .iter()
        .map(|&(c, k)| {
            Some(Cluster {
                members: vec![(c, per_candidate[c][k].0, per_candidate[c][k].1)],
            })
        })
        .collect();
    for (_, a, b) in pairs {
        let (ra, rb) = (owner[a], owner[b]);
        if ra == rb {
            continue;
        }
        let compatible = {
            let (x, y) = (clusters[ra].as_ref().unwrap(), clusters[rb].as_ref().unwrap());
            y.members.iter().all(|m| !x.has_candidate(m.0))
        };
        if !compatible {
            continue;
        }
        let moved = clusters[rb].take().unwrap();
        for o in owner.iter_mut().filter(|o| **o == rb) {
            *o = ra;
        }
        clusters[ra].as_mut().unwrap().members.extend(moved.members);
    }
    clusters.into_iter().flatten().collect()
}

pub fn merge_bars(candidates: &[CandidateExtraction]) -> Result<CriticReport, CriticError> {
    check(candidates, ChartType::Bar)?;
    let n = candidates.len();
    let mut marks = Vec::new();
    let mut chosen_counts = Vec::new();
    let mut disagreements = Vec::new();
    let mut diagnostics = Vec::new();
    for si in series_of(candidates) {
        let per_candidate: Vec<Vec<(BBox, f64)>> = candidates
            .iter()
            .map(|c| {
                c.marks
                    .iter()
                    .filter_map(|m| match *m {
                        Mark::Bar { series_index, bbox, fill_ratio } if series_index == si => Some((bbox, fill_ratio)),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        let counts: Vec<usize> = per_candidate.iter().map(Vec::len).collect();
        let count = majority_count(&counts, candidates);
        let dissent: Vec<String> = (0..n).filter(|&i| counts[i] != count).map(|i| candidates[i].variant_id.clone()).collect();
        if !dissent.is_empty() {
            disagreements.push(Disagreement {
                description: format!("series {si}: bar count {count} chosen over counts {counts:?}"),
                variant_ids: dissent,
            });
        }

        let mut clusters = cluster_bars(&per_candidate);
        // Most supported first; position breaks ties so the order is deterministic.
        clusters.sort_by(|a, b| b.members.len().cmp(&a.members.len()).then(a.merged_box().x.total_cmp(&b.merged_box().x)));
        let supported = clusters.iter().filter(|c| 2 * c.members.len() > n).count();
        if supported != count {
            diagnostics.push(format!("series {si}: {supported} supported clusters adjusted to count {count}"));
        }
        clusters.truncate(count);

        for cl in &clusters {
            let merged = cl.merged_box();
            let divergent: Vec<String> = cl
                .members
                .iter()
                .filter(|m| {
                    let b = m.1;
                    (b.x - merged.x).abs() > DIVERGENCE_PX
                        || (b.y - merged.y).abs() > DIVERGENCE_PX
                        || (b.right() - merged.right()).abs() > DIVERGENCE_PX
                        || (b.bottom() - merged.bottom()).abs() > DIVERGENCE_PX
                })
                .map(|m| candidates[m.0].variant_id.clone())
                .collect();
            if !divergent.is_empty() {
                disagreements.push(Disagreement {
                    description: format!("series {si}: divergent bbox near x={:.1}", merged.x),
                    variant_ids: divergent,
                });
            }
            let missing: Vec<String> = (0..n).filter(|&i| !cl.has_candidate(i)).map(|i| candidates[i].variant_id.clone()).collect();
            if !missing.is_empty() && 2 * cl.members.len() > n {
                disagreements.push(Disagreement {
                    description: format!("series {si}: bar near x={:.1} missing", merged.x),
                    variant_ids: missing,
                });
            }
            marks.push(Mark::Bar {
                series_index: si,
                bbox: merged,
                fill_ratio: median(&cl.members.iter().map(|m| m.2).collect::<Vec<_>>()),
            });
        }
        chosen_counts.push((si, clusters.len()));
    }
    marks.sort_by(|a, b| match (a, b) {
        (Mark::Bar { bbox: p, series_index: s, .. }, Mark::Bar { bbox: q, series_index: t, .. }) => p.x.total_cmp(&q.x).then(s.cmp(t)),
        _ => std::cmp::Ordering::Equal,
    });
    Ok(CriticReport {
        chosen_counts,
        disagreements,
        merged: merged_candidate(ChartType::Bar, marks, mean_confidence(candidates), diagnostics, None),
        mode: CriticMode::RuleBased,
    })
}

pub fn merge_lines(candidates: &[CandidateExtraction]) -> Result<CriticReport, CriticError> {
    check(candidates, ChartType::Line)?;
    let mut marks = Vec::new();
    let mut chosen_counts = Vec::new();
    let mut disagreements = Vec::new();
    let mut diagnostics = Vec::new();
    for si in series_of(candidates) {
        let lines: Vec<(usize, Vec<(f64, f64)>)> = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.line_points(si)))
            .filter(|(_, p)| !p.is_empty())
            .collect();
        let lo = lines.iter().map(|(_, p)| p[0].0).fold(f64::INFINITY, f64::min);
        let hi = lines.iter().map(|(_, p)| p[p.len() - 1].0).fold(f64::NEG_INFINITY, f64::max);
        // A 1 px grid plus every candidate vertex, so agreeing corners survive exactly.
        let mut grid: Vec<f64> = (0..).map(|k| lo + k as f64).take_while(|x| *x < hi).collect();
        grid.push(hi);
        grid.extend(lines.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

        let mut partial = false;
        // Gaps that no candidate covers are bridged by the straight segment across them.
        let dense: Vec<(f64, f64)> = grid
            .iter()
            .filter_map(|&x| {
                let ys: Vec<f64> = lines
                    .iter()
                    .filter(|(_, p)| x >= p[0].0 - 1e-9 && x <= p[p.len() - 1].0 + 1e-9)
                    .filter_map(|(_, p)| polyline_y_at(p, x))
                    .collect();
                partial |= ys.len() < lines.len();
                (!ys.is_empty()).then(|| (x, median(&ys)))
            })
            .collect();
        if partial {
            diagnostics.push(format!("series {si}: partial support, x range [{lo:.1}, {hi:.1}] not covered by every candidate"));
        }
        let simplified = rdp(&dense, RDP_EPSILON);

        // Candidates that stray from the consensus by more than a stroke width.
        let stray: Vec<String> = lines
            .iter()
            .filter(|(_, p)| {
                p.iter().any(|&(x, y)| polyline_y_at(&simplified, x).is_some_and(|m| (m - y).abs() > DIVERGENCE_PX))
            })
            .map(|(i, _)| candidates[*i].variant_id.clone())
            .collect();
        if !stray.is_empty() {
            disagreements.push(Disagreement {
                description: format!("series {si}: polyline deviates from the median"),
                variant_ids: stray,
            });
        }
        chosen_counts.push((si, simplified.len()));
        marks.extend(simplified.into_iter().map(|(x, y)| Mark::LinePoint { series_index: si, x, y }));
    }
    Ok(CriticReport {
        chosen_counts,
        disagreements,
        merged: merged_candidate(ChartType::Line, marks, mean_confidence(candidates), diagnostics, None),
        mode: CriticMode::RuleBased,
    })
}

/// Scales fractions to sum to one; the last absorbs rounding so the left-to-right
/// sum is exactly 1.
pub fn renormalize(fractions: &mut [f64]) {
    let total: f64 = fractions.iter().sum();
    if fractions.is_empty() || total <= 0.0 {
        return;
    }
    let n = fractions.len();
    for f in fractions.iter_mut() {
        *f /= total;
    }
    let head: f64 = fractions[..n - 1].iter().sum();
    fractions[n - 1] = (1.0 - head).max(0.0);
}

pub fn merge_pies(candidates: &[CandidateExtraction]) -> Result<CriticReport, CriticError> {
    check(candidates, ChartType::Pie)?;
    let segment = |c: &CandidateExtraction, si: usize| {
        c.marks.iter().find_map(|m| match *m {
            Mark::PieSegment { series_index, start_angle, fraction, .. } if series_index == si => Some((start_angle, fraction)),
            _ => None,
        })
    };
    let mut disagreements = Vec::new();
    // (median start, series, median fraction); absent segments vote zero.
    let mut segs: Vec<(f64, usize, f64)> = Vec::new();
    for si in series_of(candidates) {
        let found: Vec<Option<(f64, f64)>> = candidates.iter().map(|c| segment(c, si)).collect();
        let fraction = median(&found.iter().map(|f| f.map_or(0.0, |f| f.1)).collect::<Vec<_>>());
        let missing: Vec<String> = found
            .iter()
            .zip(candidates)
            .filter(|(f, _)| f.is_none())
            .map(|(_, c)| c.variant_id.clone())
            .collect();
        if !missing.is_empty() {
            disagreements.push(Disagreement {
                description: format!("segment {si} missing"),
                variant_ids: missing,
            });
        }
        if fraction > 0.0 {
            let start = median(&found.iter().flatten().map(|f| f.0).collect::<Vec<_>>());
            segs.push((start, si, fraction));
        }
    }
    segs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut fractions: Vec<f64> = segs.iter().map(|s| s.2).collect();
    renormalize(&mut fractions);
    let mut start = 0.0;
    let mut marks = Vec::new();
    for (seg, &fraction) in segs.iter().zip(&fractions) {
        if fraction <= 0.0 {
            continue;
        }
        marks.push(Mark::PieSegment {
            series_index: seg.1,
            start_angle: start,
            sweep_angle: 360.0 * fraction,
            fraction,
        });
        start += 360.0 * fraction;
    }
    let disks: Vec<PieDisk> = candidates.iter().filter_map(|c| c.disk).collect();
    let disk = (!disks.is_empty()).then(|| {
        let m = |f: fn(&PieDisk) -> f64| median(&disks.iter().map(f).collect::<Vec<_>>());
        PieDisk {
            cx: m(|d| d.cx),
            cy: m(|d| d.cy),
            rx: m(|d| d.rx),
            ry: m(|d| d.ry),
        }
    });
    Ok(CriticReport {
        chosen_counts: vec![(0, marks.len())],
        disagreements,
        merged: merged_candidate(ChartType::Pie, marks, mean_confidence(candidates), Vec::new(), disk),
        mode: CriticMode::RuleBased,
    })
}

/// The critic prompt followed by the serialized candidates.
pub fn critic_prompt(candidate_svgs: &[SvgDocument]) -> String {
    let mut prompt = CRITIC_PROMPT.to_string();
    for (i, doc) in candidate_svgs.iter().enumerate() {
        prompt.push_str(&format!("\n\nSVG {}:\n{}", i + 1, svgdoc::serialize(doc)));
    }
    prompt
}

/// Asks an external model to consolidate candidate documents. The reply must
/// be one parseable SVG with at most one bar more than the largest candidate.
pub fn critic_external(image: &RasterImage, candidate_svgs: &[SvgDocument], client: &dyn VlmClient) -> Result<SvgDocument, CriticError> {
    if candidate_svgs.is_empty() {
        return Err(CriticError::EmptyInput);
    }
    let png = image.to_png_bytes().map_err(|e| CriticError::ClientUnavailable(e.to_string()))?;
    let reply = client.complete(&png, &critic_prompt(candidate_svgs))?;
    let start = reply.find("<svg").ok_or_else(|| CriticError::MalformedReply("no <svg> element in reply".into()))?;
    let end = reply[start..]
        .find("</svg>")
        .map(|e| start + e + "</svg>".len())
        .ok_or_else(|| CriticError::MalformedReply("unterminated <svg> element".into()))?;
    let doc = svgdoc::parse(&reply[start..end]).map_err(|e| CriticError::MalformedReply(e.to_string()))?;
    let limit = candidate_svgs.iter().map(SvgDocument::rect_count).max().unwrap_or(0) + 1;
    if doc.rect_count() > limit {
        return Err(CriticError::MalformedReply(format!("{} bars exceeds the candidate maximum plus one ({limit})", doc.rect_count())));
    }
    Ok(doc)
}

/// The external critic's document, or `fallback` with the reason it was rejected.
pub fn critic_external_or(image: &RasterImage, candidate_svgs: &[SvgDocument], client: &dyn VlmClient, fallback: &SvgDocument) -> (SvgDocument, Option<CriticError>) {
    match critic_external(image, candidate_svgs, client) {
        Ok(doc) => (doc, None),
        Err(e) => {
            log::warn!("external critic rejected, using rule-based merge: {e}");
            (fallback.clone(), Some(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::FixtureVlmClient;
    use crate::model::Rgb;
    use crate::svgdoc::SvgElement;
    use proptest::prelude::*;

    fn bars(id: &str, boxes: &[(f64, f64, f64, f64)], confidence: f64) -> CandidateExtraction {
        CandidateExtraction {
            variant_id: id.into(),
            chart_type: ChartType::Bar,
            marks: boxes
                .iter()
                .map(|&(x, y, w, h)| Mark::Bar {
                    series_index: 0,
                    bbox: BBox::new(x, y, w, h),
                    fill_ratio: 1.0,
                })
                .collect(),
            confidence,
            diagnostics: vec![],
            disk: None,
        }
    }

    fn four() -> Vec<(f64, f64, f64, f64)> {
        vec![(10.0, 100.0, 30.0, 100.0), (60.0, 50.0, 30.0, 150.0), (110.0, 150.0, 30.0, 50.0), (160.0, 80.0, 30.0, 120.0)]
    }

    #[test]
    fn identical_bars_are_idempotent() {
        let c = bars("bar/cc", &four(), 0.9);
        let r = merge_bars(&[c.clone(), c.clone(), c.clone()]).unwrap();
        assert_eq!(r.merged.marks, c.marks);
        assert!(r.disagreements.is_empty());
        assert_eq!(r.merged.variant_id, MERGED_VARIANT_ID);
        assert_eq!(r.chosen_counts, vec![(0, 4)]);
    }

    #[test]
    fn median_left_edge() {
        let cs: Vec<_> = [10.0, 11.0, 12.0].iter().map(|&x| bars("v", &[(x, 100.0, 30.0, 100.0)], 1.0)).collect();
        let r = merge_bars(&cs).unwrap();
        assert_eq!(r.merged.bars().next().unwrap().1.x, 11.0);
    }

    #[test]
    fn majority_count_wins() {
        let mut five = four();
        five.push((210.0, 120.0, 30.0, 80.0));
        let r = merge_bars(&[bars("a", &four(), 0.5), bars("b", &four(), 0.5), bars("c", &five, 0.99)]).unwrap();
        assert_eq!(r.merged.bars().count(), 4);
        let counts: Vec<_> = r.disagreements.iter().filter(|d| d.description.contains("count")).collect();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts[0].variant_ids, vec!["c".to_string()]);
    }

    #[test]
    fn count_tie_goes_to_confidence_then_id() {
        let mut five = four();
        five.push((210.0, 120.0, 30.0, 80.0));
        let r = merge_bars(&[bars("a", &four(), 0.5), bars("b", &five, 0.9)]).unwrap();
        assert_eq!(r.merged.bars().count(), 5);
        let r = merge_bars(&[bars("b", &four(), 0.5), bars("a", &five, 0.5)]).unwrap();
        assert_eq!(r.merged.bars().count(), 5);
    }

    #[test]
    fn shifted_bar_is_rejected() {
        let mut bad = four();
        bad[1].0 += 15.0;
        let r = merge_bars(&[bars("a", &four(), 0.9), bars("b", &bad, 0.9), bars("c", &four(), 0.9)]).unwrap();
        assert_eq!(r.merged.marks, bars("x", &four(), 1.0).marks);
        assert!(r.disagreements.iter().any(|d| d.variant_ids == vec!["b".to_string()]));
    }

    #[test]
    fn empty_and_mixed_inputs() {
        assert_eq!(merge_bars(&[]), Err(CriticError::EmptyInput));
        let mut l = bars("l", &four(), 1.0);
        l.chart_type = ChartType::Line;
        assert!(matches!(merge_bars(&[bars("a", &four(), 1.0), l]), Err(CriticError::WrongChartType { .. })));
    }

    fn line(id: &str, pts: &[(f64, f64)]) -> CandidateExtraction {
        CandidateExtraction {
            variant_id: id.into(),
            chart_type: ChartType::Line,
            marks: pts.iter().map(|&(x, y)| Mark::LinePoint { series_index: 0, x, y }).collect(),
            confidence: 1.0,
            diagnostics: vec![],
            disk: None,
        }
    }

    const ZIGZAG: [(f64, f64); 4] = [(60.5, 200.0), (140.25, 80.0), (220.0, 150.5), (300.75, 60.0)];

    #[test]
    fn identical_lines_are_idempotent() {
        let c = line("a", &ZIGZAG);
        let r = merge_lines(&[c.clone(), c.clone(), c]).unwrap();
        assert_eq!(r.merged.line_points(0), ZIGZAG.to_vec());
        assert!(r.disagreements.is_empty());
    }

    #[test]
    fn offset_line_is_outvoted() {
        let raised: Vec<_> = ZIGZAG.iter().map(|&(x, y)| (x, y + 3.0)).collect();
        let r = merge_lines(&[line("a", &ZIGZAG), line("b", &raised), line("c", &ZIGZAG)]).unwrap();
        assert_eq!(r.merged.line_points(0), ZIGZAG.to_vec());
    }

    #[test]
    fn disjoint_supports_cover_union() {
        let left = line("a", &ZIGZAG[..2]);
        let right = line("b", &ZIGZAG[2..]);
        let r = merge_lines(&[left, right]).unwrap();
        let pts = r.merged.line_points(0);
        assert_eq!(pts.first(), ZIGZAG.first());
        assert_eq!(pts.last(), ZIGZAG.last());
        assert!(r.merged.diagnostics.iter().any(|d| d.contains("partial support")));
    }

    fn pie(id: &str, fractions: &[f64]) -> CandidateExtraction {
        let mut start = 0.0;
        let marks = fractions
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let m = Mark::PieSegment {
                    series_index: i,
                    start_angle: start,
                    sweep_angle: 360.0 * f,
                    fraction: f,
                };
                start += 360.0 * f;
                m
            })
            .collect();
        CandidateExtraction {
            variant_id: id.into(),
            chart_type: ChartType::Pie,
            marks,
            confidence: 1.0,
            diagnostics: vec![],
            disk: Some(PieDisk { cx: 100.0, cy: 100.0, rx: 80.0, ry: 80.0 }),
        }
    }

    fn fractions(c: &CandidateExtraction) -> Vec<f64> {
        c.marks
            .iter()
            .map(|m| match m {
                Mark::PieSegment { fraction, .. } => *fraction,
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn pie_medians() {
        let r = merge_pies(&[pie("a", &[0.25, 0.75]), pie("b", &[0.25, 0.75]), pie("c", &[0.25, 0.75])]).unwrap();
        assert_eq!(fractions(&r.merged), vec![0.25, 0.75]);
        let r = merge_pies(&[pie("a", &[0.50, 0.5]), pie("b", &[0.49, 0.5]), pie("c", &[0.51, 0.5])]).unwrap();
        assert_eq!(fractions(&r.merged), vec![0.5, 0.5]);
        assert_eq!(r.merged.disk, Some(PieDisk { cx: 100.0, cy: 100.0, rx: 80.0, ry: 80.0 }));
    }

    proptest! {
        #[test]
        fn pie_fractions_sum_to_one(raw in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 6), 1..4), n in 2usize..7) {
            let cs: Vec<_> = raw.iter().enumerate().map(|(i, r)| {
                let total: f64 = r[..n].iter().sum();
                pie(&format!("v{i}"), &r[..n].iter().map(|v| v / total).collect::<Vec<_>>())
            }).collect();
            let r = merge_pies(&cs).unwrap();
            prop_assert_eq!(fractions(&r.merged).iter().sum::<f64>(), 1.0);
            if let Some(Mark::PieSegment { start_angle, .. }) = r.merged.marks.first() {
                prop_assert_eq!(*start_angle, 0.0);
            }
        }

        #[test]
        fn majority_of_three(n in 1usize..6, m in 1usize..6) {
            prop_assume!(n != m);
            let boxes = |k: usize| (0..k).map(|i| (10.0 + 50.0 * i as f64, 100.0, 30.0, 100.0)).collect::<Vec<_>>();
            let r = merge_bars(&[bars("a", &boxes(n), 0.1), bars("b", &boxes(m), 1.0), bars("c", &boxes(n), 0.1)]).unwrap();
            prop_assert_eq!(r.merged.bars().count(), n);
        }
    }

    fn doc_with_bars(n: usize) -> SvgDocument {
        let mut d = SvgDocument::new(300, 200, ChartType::Bar);
        d.elements = (0..n)
            .map(|i| SvgElement::Rect {
                x: 10.0 + 40.0 * i as f64,
                y: 50.0,
                width: 30.0,
                height: 100.0,
                fill: Rgb::new(31, 119, 180),
                data_series: 0,
                data_value: None,
            })
            .collect();
        d
    }

    fn fixture_case(reply: &str) -> (RasterImage, Vec<SvgDocument>, FixtureVlmClient, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let client = FixtureVlmClient::new(dir.path());
        let image = RasterImage::new(30, 20, Rgb::WHITE);
        let svgs = vec![doc_with_bars(4), doc_with_bars(4), doc_with_bars(3)];
        client.record(&image.to_png_bytes().unwrap(), &critic_prompt(&svgs), reply).unwrap();
        (image, svgs, client, dir)
    }

    #[test]
    fn external_echo_is_accepted() {
        let echo = format!("Here is the merged SVG:\n```svg\n{}```", svgdoc::serialize(&doc_with_bars(4)));
        let (image, svgs, client, _dir) = fixture_case(&echo);
        assert_eq!(critic_external(&image, &svgs, &client).unwrap(), doc_with_bars(4));
    }

    #[test]
    fn external_garbage_falls_back() {
        let (image, svgs, client, _dir) = fixture_case("I cannot help with that.");
        let (doc, err) = critic_external_or(&image, &svgs, &client, &doc_with_bars(3));
        assert_eq!(doc, doc_with_bars(3));
        assert!(matches!(err, Some(CriticError::MalformedReply(_))));
    }

    #[test]
    fn external_overcount_is_rejected() {
        let (image, svgs, client, _dir) = fixture_case(&svgdoc::serialize(&doc_with_bars(100)));
        assert!(matches!(critic_external(&image, &svgs, &client), Err(CriticError::MalformedReply(m)) if m.contains("100")));
    }

    #[test]
    fn external_unrecorded_request_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let client = FixtureVlmClient::new(dir.path());
        let image = RasterImage::new(30, 20, Rgb::WHITE);
        assert!(matches!(critic_external(&image, &[doc_with_bars(2)], &client), Err(CriticError::ClientUnavailable(_))));
    }
}
