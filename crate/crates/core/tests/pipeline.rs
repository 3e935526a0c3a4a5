use std::sync::Arc;

use chart2svg::calibrate::recover_from_svg;
use chart2svg::extract::Mark;
use chart2svg::model::{spec_distance, ChartSpec, ChartType, Rgb, Series, YRange};
use chart2svg::pipeline::{convert, AgentMode, CorruptionHook, CriticSetting, PipelineConfig};
use chart2svg::render::{render, RenderTheme};
use chart2svg::svgdoc::{parse, serialize, strip_axis_elements, AxisSelector};

fn three_bars() -> ChartSpec {
    ChartSpec {
        chart_type: ChartType::Bar,
        title: Some("Sales".into()),
        category_labels: vec!["A".into(), "B".into(), "C".into()],
        series: vec![Series {
            name: "S".into(),
            color: Rgb::new(31, 119, 180),
            values: vec![10.0, 20.0, 15.0],
        }],
        y_range: Some(YRange { min: 0.0, max: 25.0 }),
        width_px: 400,
        height_px: 300,
        value_labels_drawn: false,
    }
}

#[test]
fn clean_bars_multi_agent() {
    let spec = three_bars();
    let image = render(&spec, &RenderTheme::default()).unwrap().image;
    let c = convert(&image, &PipelineConfig::default()).unwrap();
    assert_eq!(c.document.rect_count(), 3);
    let score = spec_distance(&spec, &c.recovered).unwrap();
    assert!(score.values.iter().all(|v| v.relative_error <= 0.03), "{:?}", score.values);
    assert_eq!(c.recovered.category_labels, spec.category_labels);
    assert_eq!(c.trace.candidates.len(), 3);
    let doc = parse(&serialize(&c.document)).unwrap();
    assert_eq!(doc, c.document);
}

#[test]
fn single_agent_agrees_on_clean_input() {
    let image = render(&three_bars(), &RenderTheme::default()).unwrap().image;
    let sa = convert(&image, &PipelineConfig::new(AgentMode::Single, CriticSetting::RuleBased)).unwrap();
    assert_eq!(sa.document.rect_count(), 3);
    assert_eq!(sa.trace.candidates.len(), 1);
}

#[test]
fn trace_timings_account_for_wall_time() {
    let image = render(&three_bars(), &RenderTheme::default()).unwrap().image;
    let c = convert(&image, &PipelineConfig::default()).unwrap();
    let (sum, wall) = (c.trace.stage_total(), c.trace.wall_seconds);
    assert!((sum - wall).abs() <= 0.05 * wall, "stages {sum} vs wall {wall}");
}

#[test]
fn conversion_is_deterministic() {
    let image = render(&three_bars(), &RenderTheme::default()).unwrap().image;
    let a = convert(&image, &PipelineConfig::default()).unwrap();
    let b = convert(&image, &PipelineConfig::default()).unwrap();
    assert_eq!(serialize(&a.document), serialize(&b.document));
    assert_eq!(a.recovered, b.recovered);
}

#[test]
fn critic_outvotes_a_shifted_variant() {
    let spec = three_bars();
    let image = render(&spec, &RenderTheme::default()).unwrap().image;
    let hook: CorruptionHook = Arc::new(|cands| {
        if let Some(Mark::Bar { bbox, .. }) = cands[0].marks.iter_mut().find(|m| matches!(m, Mark::Bar { .. })) {
            bbox.y -= 15.0;
        }
        for c in cands.iter_mut().skip(1) {
            c.confidence *= 0.5;
        }
    });
    let error = |critic| {
        let mut cfg = PipelineConfig::new(AgentMode::Multi, critic);
        cfg.corrupt = Some(hook.clone());
        spec_distance(&spec, &convert(&image, &cfg).unwrap().recovered).unwrap().mean_relative_error
    };
    let (ma, off) = (error(CriticSetting::RuleBased), error(CriticSetting::Off));
    assert!(ma < off, "critic {ma} vs off {off}");
}

#[test]
fn unclassifiable_image_reports_its_stage() {
    let blank = chart2svg::raster::RasterImage::new(200, 150, Rgb::WHITE);
    let err = convert(&blank, &PipelineConfig::default()).unwrap_err();
    assert_eq!(err.stage().to_string(), "classify");
}

#[test]
fn y_axis_carries_the_calibration() {
    let image = render(&three_bars(), &RenderTheme::default()).unwrap().image;
    let doc = convert(&image, &PipelineConfig::default()).unwrap().document;
    let no_y = recover_from_svg(&strip_axis_elements(&doc, AxisSelector::Y));
    assert!(no_y.relative_only);
    let no_x = recover_from_svg(&strip_axis_elements(&doc, AxisSelector::X));
    assert!(!no_x.relative_only);
    for (got, want) in no_x.series[0].values.iter().zip([10.0, 20.0, 15.0]) {
        assert!((got - want).abs() <= 0.03 * want, "{got} vs {want}");
    }
}
