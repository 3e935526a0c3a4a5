//! Question answering through an external multimodal model: prompt assembly,
//! structured reply parsing and batched answering over a QA manifest.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::VlmClient;
use crate::eval::{Predictions, QaRecord, RecordKey};
use crate::model::ChartType;
use crate::svgdoc::{serialize, SvgDocument};

pub const DEFAULT_PARALLELISM: usize = 4;

const FIELD_INSTRUCTION: &str = "instruction explanation";
const FIELD_EXPLANATION: &str = "explanation";
const FIELD_ANSWER: &str = "answer";

/// Task wording with `{chart}` standing for the chart-type word.
pub const QA_PROMPT_TEMPLATE: &str = "You will be provided with a {chart} chart, its corresponding converted SVG representation, and a query. \
Your task is to answer the query while structuring your response into the following three fields:\n\
- instruction explanation: Explain the process of interpreting the chart based on its type and SVG structure.\n\
- explanation: Describe how you arrived at the answer using the provided SVG representation.\n\
- answer: Provide the final response based on the {chart} chart and the given query.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub image: Vec<u8>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MllmAnswer {
    pub instruction_explanation: String,
    pub explanation: String,
    pub answer: String,
    pub raw: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BridgeError {
    #[error("model reply is empty")]
    EmptyReply,
    #[error("model reply has labeled fields but no answer")]
    MissingAnswer,
}

fn chart_word(t: ChartType) -> &'static str {
    match t {
        ChartType::Bar => "bar",
        ChartType::Line => "line",
        ChartType::Pie => "pie",
    }
}

/// Task text, then the serialized document verbatim, then the query.
pub fn build_qa_prompt(image_png: &[u8], svg: &SvgDocument, query: &str) -> PromptBundle {
    let task = QA_PROMPT_TEMPLATE.replace("{chart}", chart_word(svg.chart_type));
    let text = format!("{task}\n\nSVG:\n{}\nQuery: {}\n", serialize(svg), query.trim());
    PromptBundle {
        image: image_png.to_vec(),
        text,
    }
}

/// Recognizes `[- ]<field>:` at the start of a line, returning the field and the rest.
fn field_line(line: &str) -> Option<(&'static str, &str)> {
    let mut t = line.trim_start();
    if !t.starts_with("**") {
        t = t.strip_prefix(['-', '*', '•']).unwrap_or(t).trim_start();
    }
    let t = t.trim_start_matches("**");
    // Longest name first so "instruction explanation" is not read as "explanation".
    for name in [FIELD_INSTRUCTION, FIELD_EXPLANATION, FIELD_ANSWER] {
        if t.len() >= name.len() && t[..name.len()].eq_ignore_ascii_case(name) {
            let rest = t[name.len()..].trim_start_matches("**").trim_start();
            if let Some(rest) = rest.strip_prefix(':') {
                return Some((name, rest.trim_start_matches("**")));
            }
        }
    }
    None
}

/// Splits a reply into the three labeled fields. Unlabeled text is taken as the answer.
pub fn parse_answer(raw: &str) -> Result<MllmAnswer, BridgeError> {
    if raw.trim().is_empty() {
        return Err(BridgeError::EmptyReply);
    }
    let mut fields: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for line in raw.lines() {
        match field_line(line) {
            Some((name, rest)) => {
                current = Some(name);
                fields.entry(name).or_default().push(rest);
            }
            None => {
                if let Some(name) = current {
                    fields.entry(name).or_default().push(line);
                }
            }
        }
    }
    let take = |name: &str| fields.get(name).map(|v| v.join("\n").trim().to_string()).unwrap_or_default();
    if fields.is_empty() {
        return Ok(MllmAnswer {
            instruction_explanation: String::new(),
            explanation: String::new(),
            answer: raw.trim().to_string(),
            raw: raw.to_string(),
        });
    }
    let answer = take(FIELD_ANSWER);
    if answer.is_empty() {
        return Err(BridgeError::MissingAnswer);
    }
    Ok(MllmAnswer {
        instruction_explanation: take(FIELD_INSTRUCTION),
        explanation: take(FIELD_EXPLANATION),
        answer,
        raw: raw.to_string(),
    })
}

/// The three-field text form a well-behaved model would return.
pub fn format_answer(a: &MllmAnswer) -> String {
    format!(
        "- {FIELD_INSTRUCTION}: {}\n- {FIELD_EXPLANATION}: {}\n- {FIELD_ANSWER}: {}\n",
        a.instruction_explanation, a.explanation, a.answer
    )
}

/// Image and converted document for one chart.
#[derive(Debug, Clone)]
pub struct ChartInput {
    pub image_png: Vec<u8>,
    pub document: SvgDocument,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MllmRun {
    pub predictions: Predictions,
    pub answers: BTreeMap<RecordKey, MllmAnswer>,
    /// Records without a prediction and why.
    pub failures: BTreeMap<RecordKey, String>,
}

/// Asks the model every record's question about its chart. `charts` is keyed by
/// image name. At most `parallelism` requests run at once, one if the client
/// is not safe to call concurrently.
pub fn answer_with_mllm(records: &[QaRecord], charts: &BTreeMap<String, ChartInput>, client: &dyn VlmClient, parallelism: usize) -> MllmRun {
    let bound = if client.concurrent() { parallelism.max(1) } else { 1 };
    let ask = |r: &QaRecord| -> (RecordKey, Result<MllmAnswer, String>) {
        let result = (|| {
            let chart = charts.get(&r.imgname).ok_or_else(|| format!("no converted chart for {}", r.imgname))?;
            let prompt = build_qa_prompt(&chart.image_png, &chart.document, &r.query);
            let reply = client.complete(&prompt.image, &prompt.text).map_err(|e| e.to_string())?;
            parse_answer(&reply).map_err(|e| e.to_string())
        })();
        (r.key(), result)
    };
    let results: Vec<_> = match rayon::ThreadPoolBuilder::new().num_threads(bound).build() {
        Ok(pool) => pool.install(|| records.par_iter().map(ask).collect()),
        Err(_) => records.iter().map(ask).collect(),
    };
    let mut run = MllmRun::default();
    for (key, result) in results {
        match result {
            Ok(a) => {
                run.predictions.insert(key.clone(), a.answer.clone());
                run.answers.insert(key, a);
            }
            Err(e) => {
                log::warn!("no model answer for {} / {:?}: {e}", key.0, key.1);
                run.failures.insert(key, e);
            }
        }
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::FixtureVlmClient;
    use crate::eval::{score, Split};
    use crate::model::Rgb;
    use crate::svgdoc::SvgElement;
    use proptest::prelude::*;

    fn doc() -> SvgDocument {
        let mut d = SvgDocument::new(100, 80, ChartType::Bar);
        d.elements.push(SvgElement::Rect {
            x: 10.0,
            y: 20.0,
            width: 15.0,
            height: 40.0,
            fill: Rgb::new(31, 119, 180),
            data_series: 0,
            data_value: Some(12.0),
        });
        d.canonicalize();
        d
    }

    #[test]
    fn prompt_contract() {
        let p = build_qa_prompt(b"img", &doc(), "What is A?");
        assert!(p.text.contains(&serialize(&doc())));
        assert!(p.text.contains("<svg"));
        for f in ["instruction explanation:", "explanation:", "answer:"] {
            assert!(p.text.contains(f));
        }
        assert!(p.text.starts_with("You will be provided with a bar chart, its corresponding converted SVG representation, and a query."));
        assert!(p.text.ends_with("Query: What is A?\n"));
        assert_eq!(p, build_qa_prompt(b"img", &doc(), "What is A?"));
        let empty = build_qa_prompt(b"img", &doc(), "");
        assert!(empty.text.ends_with("Query: \n"));
        let mut pie = doc();
        pie.chart_type = ChartType::Pie;
        assert!(build_qa_prompt(b"", &pie, "q").text.contains("a pie chart, its"));
    }

    #[test]
    fn parse_forms() {
        let a = parse_answer("- Instruction Explanation: read bars\n- explanation: bar A is tallest\n  by far\n- ANSWER: 42").unwrap();
        assert_eq!(a.instruction_explanation, "read bars");
        assert_eq!(a.explanation, "bar A is tallest\n  by far");
        assert_eq!(a.answer, "42");
        let a = parse_answer("**answer**: 7").unwrap();
        assert_eq!(a.answer, "7");
        let a = parse_answer("42").unwrap();
        assert_eq!((a.answer.as_str(), a.explanation.as_str()), ("42", ""));
        assert_eq!(parse_answer("  \n"), Err(BridgeError::EmptyReply));
        assert_eq!(parse_answer("explanation: none"), Err(BridgeError::MissingAnswer));
    }

    #[test]
    fn fixture_batch() {
        let dir = tempfile::tempdir().unwrap();
        let client = FixtureVlmClient::new(dir.path());
        let chart = ChartInput {
            image_png: b"png".to_vec(),
            document: doc(),
        };
        let charts = BTreeMap::from([("a.png".to_string(), chart.clone())]);
        let records: Vec<QaRecord> = ["q1", "q2", "q3"]
            .iter()
            .map(|q| QaRecord {
                imgname: "a.png".into(),
                query: q.to_string(),
                label: "12".into(),
                split: Split::Human,
            })
            .collect();
        for r in &records[..2] {
            let p = build_qa_prompt(&chart.image_png, &chart.document, &r.query);
            client.record(&p.image, &p.text, "- instruction explanation: x\n- explanation: y\n- answer: 12").unwrap();
        }
        let run = answer_with_mllm(&records, &charts, &client, 4);
        assert_eq!(run.predictions.len(), 2);
        assert_eq!(run.failures.len(), 1);
        assert!(run.failures.contains_key(&records[2].key()));
        let report = score(&records, &run.predictions);
        assert_eq!(report.missing, 1);
        assert!((report.ra_overall.unwrap() - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(run, answer_with_mllm(&records, &charts, &client, 1));
    }

    proptest! {
        #[test]
        fn round_trip(i in "[a-zA-Z0-9 ,.]{0,30}", e in "[a-zA-Z0-9 ,.]{0,30}", ans in "[a-zA-Z0-9,.][a-zA-Z0-9 ,.]{0,20}") {
            let a = MllmAnswer {
                instruction_explanation: i.trim().to_string(),
                explanation: e.trim().to_string(),
                answer: ans.trim().to_string(),
                raw: String::new(),
            };
            prop_assume!(!a.answer.is_empty());
            let text = format_answer(&a);
            let back = parse_answer(&text).unwrap();
            prop_assert_eq!(MllmAnswer { raw: String::new(), ..back }, a);
        }
    }
}
