//! End-to-end conversion: classify, locate layout, run extractor variants,
//! reconcile them, read text, calibrate and assemble the SVG document.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{fit_axis, recover_relative, recover_values, y_tick_pairs, RecoveryContext};
use crate::classify::{classify, ChartProfile};
use crate::client::VlmClient;
use crate::critic::{self, CriticMode, Disagreement};
use crate::extract::{extract_bars_cc, extract_bars_projection, extract_bars_rows, extract_line, extract_pie, CandidateExtraction, ExtractError, LineVariant, Mark, PieVariant};
use crate::geom::BBox;
use crate::layout::{detect_layout, Axis, LayoutMap};
use crate::model::{ChartType, RecoveredChart};
use crate::ocr::{assign_roles, ocr_builtin, ocr_external, OcrClient, TextItem};
use crate::raster::RasterImage;
use crate::svgdoc::{self, SvgDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    /// One extractor variant per subtask, no critic.
    Single,
    /// Every variant, reconciled according to the critic setting.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticSetting {
    RuleBased,
    External,
    /// Keep the most confident candidate.
    Off,
}

/// Test hook applied to the full candidate set before reconciliation.
pub type CorruptionHook = Arc<dyn Fn(&mut Vec<CandidateExtraction>) + Send + Sync>;

#[derive(Clone)]
pub struct PipelineConfig {
    pub mode: AgentMode,
    pub critic: CriticSetting,
    /// Used for classification fallback and the external critic.
    pub vlm: Option<Arc<dyn VlmClient>>,
    /// External OCR instead of the builtin recognizer.
    pub ocr: Option<Arc<dyn OcrClient>>,
    pub corrupt: Option<CorruptionHook>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: AgentMode::Multi,
            critic: CriticSetting::RuleBased,
            vlm: None,
            ocr: None,
            corrupt: None,
        }
    }
}

impl PipelineConfig {
    pub fn new(mode: AgentMode, critic: CriticSetting) -> Self {
        PipelineConfig {
            mode,
            critic,
            ..Default::default()
        }
    }
}

impl fmt::Debug for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PipelineConfig")
            .field("mode", &self.mode)
            .field("critic", &self.critic)
            .field("vlm", &self.vlm.is_some())
            .field("ocr", &self.ocr.is_some())
            .field("corrupt", &self.corrupt.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Classify,
    Layout,
    Extract,
    Critic,
    Text,
    Calibrate,
    Assemble,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Classify => "classify",
            Stage::Layout => "layout",
            Stage::Extract => "extract",
            Stage::Critic => "critic",
            Stage::Text => "text",
            Stage::Calibrate => "calibrate",
            Stage::Assemble => "assemble",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("[{stage}] chart could not be classified: {reason}")]
    Unclassifiable { stage: Stage, reason: String },
    #[error("[{stage}] no marks found: {reason}")]
    NoMarksFound { stage: Stage, reason: String },
    #[error("[{stage}] {reason}")]
    StageFailed { stage: Stage, reason: String },
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Unclassifiable { stage, .. } | PipelineError::NoMarksFound { stage, .. } | PipelineError::StageFailed { stage, .. } => *stage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub chart_type: ChartType,
    pub timings: Vec<StageTiming>,
    pub wall_seconds: f64,
    /// Variant ids that produced a candidate.
    pub candidates: Vec<String>,
    pub candidate_failures: Vec<String>,
    pub disagreements: Vec<Disagreement>,
    pub critic_mode: Option<CriticMode>,
    pub chosen_variant: String,
    pub relative_only: bool,
    pub diagnostics: Vec<String>,
}

impl PipelineTrace {
    pub fn stage_total(&self) -> f64 {
        self.timings.iter().map(|t| t.seconds).sum()
    }
}

/// Everything one conversion produced, including intermediate state.
#[derive(Debug, Clone)]
pub struct Conversion {
    pub document: SvgDocument,
    pub recovered: RecoveredChart,
    pub trace: PipelineTrace,
    pub profile: ChartProfile,
    pub layout: LayoutMap,
    pub merged: CandidateExtraction,
    pub texts: Vec<TextItem>,
}

type Extractor = Box<dyn Fn(&RasterImage, &ChartProfile, &LayoutMap) -> Result<CandidateExtraction, ExtractError> + Send + Sync>;

/// Generator variants for a chart type, primary first.
pub fn variants(chart_type: ChartType) -> Vec<(&'static str, Extractor)> {
    match chart_type {
        ChartType::Bar => vec![
            ("bar/cc", Box::new(extract_bars_cc) as Extractor),
            ("bar/proj", Box::new(extract_bars_projection)),
            ("bar/rows", Box::new(extract_bars_rows)),
        ],
        ChartType::Line => [LineVariant::Centerline, LineVariant::Peak, LineVariant::Trough]
            .into_iter()
            .map(|v| (v.id(), Box::new(move |i: &RasterImage, p: &ChartProfile, l: &LayoutMap| extract_line(i, p, l, v)) as Extractor))
            .collect(),
        ChartType::Pie => [PieVariant::AreaRatio, PieVariant::AngularSweep]
            .into_iter()
            .map(|v| (v.id(), Box::new(move |i: &RasterImage, p: &ChartProfile, l: &LayoutMap| extract_pie(i, p, l, v)) as Extractor))
            .collect(),
    }
}

/// Boxes that value labels may annotate.
fn mark_boxes(merged: &CandidateExtraction) -> Vec<BBox> {
    merged
        .marks
        .iter()
        .filter_map(|m| match *m {
            Mark::Bar { bbox, .. } => Some(bbox),
            Mark::LinePoint { x, y, .. } => Some(BBox::new(x - 3.0, y - 3.0, 6.0, 6.0)),
            Mark::PieSegment { .. } => None,
        })
        .collect()
}

struct Clock {
    start: Instant,
    last: Instant,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn new() -> Self {
        let now = Instant::now();
        Clock {
            start: now,
            last: now,
            timings: Vec::new(),
        }
    }

    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage,
            seconds: now.duration_since(self.last).as_secs_f64(),
        });
        self.last = now;
    }

    fn wall(&self) -> Duration {
        self.last.duration_since(self.start)
    }
}

fn highest_confidence(candidates: &[CandidateExtraction]) -> CandidateExtraction {
    candidates
        .iter()
        .min_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.variant_id.cmp(&b.variant_id)))
        .cloned()
        .expect("at least one candidate")
}

pub fn convert(image: &RasterImage, config: &PipelineConfig) -> Result<Conversion, PipelineError> {
    let mut clock = Clock::new();
    let mut diagnostics = Vec::new();

    let profile = classify(image, config.vlm.as_deref()).map_err(|e| PipelineError::Unclassifiable {
        stage: Stage::Classify,
        reason: e.to_string(),
    })?;
    clock.lap(Stage::Classify);

    let layout = detect_layout(image, &profile.series_colors);
    clock.lap(Stage::Layout);

    let mut all = variants(profile.chart_type);
    if config.mode == AgentMode::Single {
        all.truncate(1);
    }
    let results: Vec<(&str, Result<CandidateExtraction, ExtractError>)> = all.par_iter().map(|(id, f)| (*id, f(image, &profile, &layout))).collect();
    let mut candidates = Vec::new();
    let mut candidate_failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(c) => candidates.push(c),
            Err(e) => candidate_failures.push(format!("{id}: {e}")),
        }
    }
    if let Some(hook) = &config.corrupt {
        hook(&mut candidates);
    }
    if candidates.is_empty() {
        return Err(PipelineError::NoMarksFound {
            stage: Stage::Extract,
            reason: candidate_failures.join("; "),
        });
    }
    clock.lap(Stage::Extract);

    let mut disagreements = Vec::new();
    let mut critic_mode = None;
    let critic_failed = |e: critic::CriticError| PipelineError::StageFailed {
        stage: Stage::Critic,
        reason: e.to_string(),
    };
    let merged = match (config.mode, config.critic) {
        (AgentMode::Single, _) => candidates[0].clone(),
        (AgentMode::Multi, CriticSetting::Off) => highest_confidence(&candidates),
        (AgentMode::Multi, setting) => {
            let report = critic::merge(&candidates).map_err(critic_failed)?;
            disagreements = report.disagreements.clone();
            critic_mode = Some(CriticMode::RuleBased);
            match (setting, &config.vlm) {
                (CriticSetting::External, Some(client)) if profile.chart_type == ChartType::Bar => {
                    let (w, h) = (image.width(), image.height());
                    let docs: Vec<SvgDocument> = candidates
                        .iter()
                        .filter_map(|c| svgdoc::candidate_document(c, &profile, &layout, w, h).ok())
                        .collect();
                    let fallback = svgdoc::candidate_document(&report.merged, &profile, &layout, w, h).map_err(|e| PipelineError::StageFailed {
                        stage: Stage::Critic,
                        reason: e.to_string(),
                    })?;
                    match critic::critic_external_or(image, &docs, client.as_ref(), &fallback) {
                        (doc, None) => {
                            critic_mode = Some(CriticMode::External);
                            let mut c = svgdoc::document_candidate(&doc, "critic/external");
                            c.confidence = report.merged.confidence;
                            c
                        }
                        (_, Some(e)) => {
                            diagnostics.push(format!("external critic fell back: {e}"));
                            report.merged
                        }
                    }
                }
                (CriticSetting::External, _) => {
                    diagnostics.push("external critic requested without a client; rule-based merge used".into());
                    report.merged
                }
                _ => report.merged,
            }
        }
    };
    if merged.marks.is_empty() {
        return Err(PipelineError::NoMarksFound {
            stage: Stage::Critic,
            reason: "reconciled extraction is empty".into(),
        });
    }
    clock.lap(Stage::Critic);

    let raw = match &config.ocr {
        Some(client) => {
            let (items, notes) = ocr_external(image, None, client.as_ref()).map_err(|e| PipelineError::StageFailed {
                stage: Stage::Text,
                reason: e.to_string(),
            })?;
            diagnostics.extend(notes);
            items
        }
        None => ocr_builtin(image, None),
    };
    let texts = assign_roles(&raw, &layout, image.width(), image.height(), &mark_boxes(&merged));
    clock.lap(Stage::Text);

    let ctx = RecoveryContext {
        image,
        profile: &profile,
        layout: &layout,
        texts: &texts,
    };
    let recovered = if profile.chart_type == ChartType::Pie {
        recover_values(&merged, None, &ctx).expect("pie recovery needs no calibration")
    } else {
        match fit_axis(Axis::Y, &y_tick_pairs(&layout, &texts)) {
            Ok(cal) => recover_values(&merged, Some(&cal), &ctx).expect("calibration present"),
            Err(e) => {
                diagnostics.push(format!("relative-only values: {e}"));
                recover_relative(&merged, &ctx)
            }
        }
    };
    clock.lap(Stage::Calibrate);

    let document = svgdoc::assemble(&merged, &recovered, &profile, &layout, &texts).map_err(|e| PipelineError::StageFailed {
        stage: Stage::Assemble,
        reason: e.to_string(),
    })?;
    clock.lap(Stage::Assemble);

    let trace = PipelineTrace {
        chart_type: profile.chart_type,
        wall_seconds: clock.wall().as_secs_f64(),
        timings: clock.timings,
        candidates: candidates.iter().map(|c| c.variant_id.clone()).collect(),
        candidate_failures,
        disagreements,
        critic_mode,
        chosen_variant: merged.variant_id.clone(),
        relative_only: recovered.relative_only,
        diagnostics,
    };
    Ok(Conversion {
        document,
        recovered,
        trace,
        profile,
        layout,
        merged,
        texts,
    })
}
