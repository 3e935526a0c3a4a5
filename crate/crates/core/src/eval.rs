//! Relaxed Accuracy scoring, the drop metric, QA manifests and a template
//! oracle that answers questions straight from recovered data.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChartType, RecoveredChart};
use crate::ocr::parse_tick_value;
use crate::render::ticks::format_number;

/// Numeric answers within this fraction of the gold value count as correct.
pub const RELAXED_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Human,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub imgname: String,
    pub query: String,
    pub label: String,
    pub split: Split,
}

impl QaRecord {
    pub fn key(&self) -> RecordKey {
        (self.imgname.clone(), self.query.clone())
    }
}

/// Records are identified by image and question.
pub type RecordKey = (String, String);
pub type Predictions = BTreeMap<RecordKey, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub imgname: String,
    pub query: String,
    pub prediction: String,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("baseline accuracy is zero; drop is undefined")]
    ZeroBaseline,
    #[error("{path}:{line}: {message}")]
    BadManifest { path: String, line: usize, message: String },
    #[error("io error on {path}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, EvalError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| EvalError::BadManifest {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    for item in items {
        let line = serde_json::to_string(item).expect("serializable");
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    file.flush().map_err(io_err(path))
}

/// JSON lines of `{imgname, query, label, split}`; empty labels are rejected.
pub fn read_manifest(path: &Path) -> Result<Vec<QaRecord>, EvalError> {
    let records: Vec<QaRecord> = read_jsonl(path)?;
    if let Some(i) = records.iter().position(|r| r.label.trim().is_empty()) {
        return Err(EvalError::BadManifest {
            path: path.display().to_string(),
            line: i + 1,
            message: "empty label".into(),
        });
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[QaRecord]) -> Result<(), EvalError> {
    write_jsonl(path, records)
}

pub fn read_predictions(path: &Path) -> Result<Predictions, EvalError> {
    let items: Vec<PredictionRecord> = read_jsonl(path)?;
    Ok(items.into_iter().map(|p| ((p.imgname, p.query), p.prediction)).collect())
}

pub fn write_predictions(path: &Path, predictions: &Predictions) -> Result<(), EvalError> {
    let items: Vec<PredictionRecord> = predictions
        .iter()
        .map(|((imgname, query), prediction)| PredictionRecord {
            imgname: imgname.clone(),
            query: query.clone(),
            prediction: prediction.clone(),
        })
        .collect();
    write_jsonl(path, &items)
}

fn numeric(text: &str) -> Option<f64> {
    parse_tick_value(&text.trim().replace('%', "")).ok()
}

/// Numeric answers match within 5% of gold (exactly, for gold 0); anything
/// else needs a case-insensitive match after trimming.
pub fn relaxed_match(prediction: &str, gold: &str) -> bool {
    match (numeric(prediction), numeric(gold)) {
        (Some(p), Some(g)) => {
            if g == 0.0 {
                p == 0.0
            } else {
                // The slack only absorbs binary rounding of decimal inputs.
                (p - g).abs() <= RELAXED_TOLERANCE * g.abs() * (1.0 + 1e-9)
            }
        }
        _ => prediction.trim().to_lowercase() == gold.trim().to_lowercase(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub imgname: String,
    pub query: String,
    pub label: String,
    pub prediction: Option<String>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ra_human: Option<f64>,
    pub ra_augmented: Option<f64>,
    pub ra_overall: Option<f64>,
    pub n_human: usize,
    pub n_augmented: usize,
    pub missing: usize,
    pub drop_vs_baseline: Option<f64>,
    pub verdicts: Vec<Verdict>,
}

fn percent(correct: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| correct as f64 / n as f64 * 100.0)
}

/// Per-split Relaxed Accuracy. A missing prediction is wrong and flagged.
pub fn score(records: &[QaRecord], predictions: &Predictions) -> EvalReport {
    let mut verdicts = Vec::with_capacity(records.len());
    let (mut n, mut ok) = ([0usize; 2], [0usize; 2]);
    let mut missing = 0;
    for r in records {
        let prediction = predictions.get(&r.key()).cloned();
        if prediction.is_none() {
            missing += 1;
            log::warn!("no prediction for {} / {:?}", r.imgname, r.query);
        }
        let correct = prediction.as_deref().is_some_and(|p| relaxed_match(p, &r.label));
        let k = (r.split == Split::Augmented) as usize;
        n[k] += 1;
        ok[k] += correct as usize;
        verdicts.push(Verdict {
            imgname: r.imgname.clone(),
            query: r.query.clone(),
            label: r.label.clone(),
            prediction,
            correct,
        });
    }
    EvalReport {
        ra_human: percent(ok[0], n[0]),
        ra_augmented: percent(ok[1], n[1]),
        ra_overall: percent(ok[0] + ok[1], n[0] + n[1]),
        n_human: n[0],
        n_augmented: n[1],
        missing,
        drop_vs_baseline: None,
        verdicts,
    }
}

/// Relative decrease from baseline, in percent. Negative means improvement.
pub fn drop(baseline_overall: f64, perturbed_overall: f64) -> Result<f64, EvalError> {
    if baseline_overall <= 0.0 {
        return Err(EvalError::ZeroBaseline);
    }
    Ok((baseline_overall - perturbed_overall) / baseline_overall * 100.0)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "—".to_string(), |v| format!("{v:.1}"))
}

/// Aligned text table with one row per named report.
pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let header = ["Models", "Human", "Aug", "Overall", "Drop"].map(String::from);
    let mut table: Vec<[String; 5]> = vec![header];
    for (name, r) in rows {
        table.push([name.to_string(), cell(r.ra_human), cell(r.ra_augmented), cell(r.ra_overall), cell(r.drop_vs_baseline)]);
    }
    let widths: Vec<usize> = (0..5).map(|c| table.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn answer_number(v: f64) -> String {
    format_number(v, 2)
}

fn find_category(chart: &RecoveredChart, name: &str) -> Option<usize> {
    let name = name.trim().to_lowercase();
    chart.category_labels.iter().position(|c| c.to_lowercase() == name)
}

fn find_series(chart: &RecoveredChart, name: &str) -> Option<usize> {
    let name = name.trim().to_lowercase();
    chart.series.iter().position(|s| s.name.to_lowercase() == name)
}

/// Splits a trailing " for <series>" qualifier off a query body.
fn series_qualifier<'a>(chart: &RecoveredChart, body: &'a str) -> Option<(&'a str, usize)> {
    match body.rfind(" for ") {
        Some(i) => find_series(chart, &body[i + 5..]).map(|s| (&body[..i], s)),
        None => (!chart.series.is_empty()).then_some((body, 0)),
    }
}

fn value(chart: &RecoveredChart, series: usize, category: usize) -> Option<f64> {
    if series >= chart.series.len() {
        return None;
    }
    chart.display_values(series).get(category).copied()
}

/// Answers templated questions from recovered data:
/// - `What is the value of <category>[ for <series>]?`
/// - `Which <word> has the highest|lowest value[ for <series>]?`
/// - `What is the sum|difference of <A> and <B>[ for <series>]?`
/// - `How many bars|categories|series|segments are there?`
///
/// Anything else yields `None`.
pub fn oracle_answer(chart: &RecoveredChart, query: &str) -> Option<String> {
    let q = query.trim().trim_end_matches('?').trim();
    let lower = q.to_lowercase();
    if let Some(rest) = lower.strip_prefix("what is the value of ") {
        let (cat, s) = series_qualifier(chart, &q[q.len() - rest.len()..])?;
        return value(chart, s, find_category(chart, cat)?).map(answer_number);
    }
    if let Some(rest) = lower.strip_prefix("which ") {
        let highest = rest.contains(" has the highest value");
        if !highest && !rest.contains(" has the lowest value") {
            return None;
        }
        let marker = if highest { " has the highest value" } else { " has the lowest value" };
        let tail = &q[q.len() - rest.len() + rest.find(marker)? + marker.len()..];
        let s = if tail.trim().is_empty() { 0 } else { find_series(chart, tail.trim().strip_prefix("for ")?)? };
        if s >= chart.series.len() {
            return None;
        }
        let vals = chart.display_values(s);
        let pick = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .reduce(|a, b| {
                let better = if highest { b.1 > a.1 } else { b.1 < a.1 };
                if better { b } else { a }
            })?
            .0;
        return chart.category_labels.get(pick).cloned();
    }
    for (op, prefix) in [("sum", "what is the sum of "), ("difference", "what is the difference of ")] {
        if let Some(rest) = lower.strip_prefix(prefix) {
            let (body, s) = series_qualifier(chart, &q[q.len() - rest.len()..])?;
            let (a, b) = body.split_once(" and ")?;
            let (va, vb) = (value(chart, s, find_category(chart, a)?)?, value(chart, s, find_category(chart, b)?)?);
            return Some(answer_number(if op == "sum" { va + vb } else { va - vb }));
        }
    }
    if let Some(rest) = lower.strip_prefix("how many ") {
        let what = rest.strip_suffix(" are there")?;
        let n = match what {
            "bars" if chart.chart_type == ChartType::Bar => chart.series.len() * chart.category_labels.len(),
            "categories" | "segments" => chart.category_labels.len(),
            "series" => chart.series.len(),
            _ => return None,
        };
        return Some(n.to_string());
    }
    None
}

/// Every templated question the oracle understands for a chart, in a fixed order.
pub fn template_queries(chart: &RecoveredChart) -> Vec<String> {
    let cats = &chart.category_labels;
    let multi = chart.series.len() > 1;
    let word = match chart.chart_type {
        ChartType::Pie => "segment",
        _ => "category",
    };
    let mut out = Vec::new();
    for (si, s) in chart.series.iter().enumerate() {
        let suffix = if multi { format!(" for {}", s.name) } else { String::new() };
        if si > 0 && !multi {
            break;
        }
        for c in cats {
            out.push(format!("What is the value of {c}{suffix}?"));
        }
        out.push(format!("Which {word} has the highest value{suffix}?"));
        out.push(format!("Which {word} has the lowest value{suffix}?"));
        for pair in cats.windows(2) {
            out.push(format!("What is the sum of {} and {}{suffix}?", pair[0], pair[1]));
            out.push(format!("What is the difference of {} and {}{suffix}?", pair[1], pair[0]));
        }
    }
    if chart.chart_type == ChartType::Bar {
        out.push("How many bars are there?".into());
    }
    out.push(format!("How many {} are there?", if chart.chart_type == ChartType::Pie { "segments" } else { "categories" }));
    out
}
