use chart2svg::eval::{oracle_answer, score, template_queries, Predictions, QaRecord, Split};
use chart2svg::model::{ChartType, RecoveredChart};
use chart2svg::perturb::{expand, hv_factor, remove_value_labels, ExpandAxis};
use chart2svg::pipeline::{convert, PipelineConfig};
use chart2svg::raster::RasterImage;
use chart2svg::render::{render, RenderTheme};
use chart2svg::synth::corpus;

/// Oracle RA from recovered charts on the clean, label-removed and expanded versions of a corpus.
#[test]
fn oracle_accuracy_survives_perturbation() {
    let config = PipelineConfig::default();
    let mut records = Vec::new();
    let mut preds: [Predictions; 3] = Default::default();
    let specs = [corpus(ChartType::Bar, 12, 31, true), corpus(ChartType::Line, 6, 31, true), corpus(ChartType::Pie, 6, 31, true)].concat();
    for (i, spec) in specs.iter().enumerate() {
        let image = render(spec, &RenderTheme::default()).unwrap().image;
        let name = format!("c{i}.png");
        let clean = convert(&image, &config).unwrap();
        let rl = remove_value_labels(&image, &clean.texts, Some(&clean.profile.series_colors));
        let axis = if i % 2 == 0 { ExpandAxis::Horizontal } else { ExpandAxis::Vertical };
        let hv = expand(&image, axis, hv_factor(&name)).unwrap();
        let variants: [&RasterImage; 3] = [&image, &rl, &hv];
        let recovered: Vec<Option<RecoveredChart>> = variants.iter().map(|img| convert(img, &config).ok().map(|c| c.recovered)).collect();
        let truth = RecoveredChart::from_spec(spec);
        for q in template_queries(&truth) {
            let r = QaRecord {
                imgname: name.clone(),
                query: q.clone(),
                label: oracle_answer(&truth, &q).unwrap(),
                split: Split::Augmented,
            };
            for (k, rc) in recovered.iter().enumerate() {
                if let Some(a) = rc.as_ref().and_then(|c| oracle_answer(c, &q)) {
                    preds[k].insert(r.key(), a);
                }
            }
            records.push(r);
        }
    }
    let ra: Vec<f64> = preds.iter().map(|p| score(&records, p).ra_overall.unwrap()).collect();
    assert!(ra[0] >= 95.0, "clean RA {}", ra[0]);
    assert!(ra[0] - ra[1] < 5.0, "label removal RA {} vs {}", ra[1], ra[0]);
    assert!(ra[0] - ra[2] < 5.0, "expansion RA {} vs {}", ra[2], ra[0]);
}
