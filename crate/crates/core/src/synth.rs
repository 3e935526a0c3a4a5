//! Seeded random chart specs for round-trip testing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ChartSpec, ChartType, Series, YRange};
use crate::render::DEFAULT_PALETTE;

const CATEGORIES: [&str; 8] = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug"];
const SERIES_NAMES: [&str; 3] = ["North", "South", "East"];
const PIE_LABELS: [&str; 6] = ["Rent", "Food", "Travel", "Books", "Music", "Games"];
const TITLES: [&str; 4] = ["Sales by month", "Revenue", "Visitors", "Budget share"];
const RANGE_MAX: [f64; 6] = [10.0, 20.0, 50.0, 100.0, 200.0, 500.0];

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn canvas(rng: &mut ChaCha8Rng) -> (u32, u32) {
    (rng.random_range(380..=520), rng.random_range(280..=360))
}

fn title(rng: &mut ChaCha8Rng) -> Option<String> {
    if rng.random_bool(0.5) {
        Some(TITLES[rng.random_range(0..TITLES.len())].to_string())
    } else {
        None
    }
}

fn axis_spec(rng: &mut ChaCha8Rng, chart_type: ChartType, value_labels: bool) -> ChartSpec {
    let n_series = rng.random_range(1..=3);
    let n_cat = rng.random_range(2..=8);
    let max = RANGE_MAX[rng.random_range(0..RANGE_MAX.len())];
    let mut colors = DEFAULT_PALETTE.to_vec();
    colors.shuffle(rng);
    // Whole numbers for wide ranges and halves for narrow ones keep labels short.
    let step = if max >= 50.0 { 1.0 } else { 0.5 };
    let series = (0..n_series)
        .map(|s| Series {
            name: SERIES_NAMES[s].to_string(),
            color: colors[s],
            values: (0..n_cat)
                .map(|_| round_to(rng.random_range(0.15 * max..0.95 * max), step))
                .collect(),
        })
        .collect();
    let (w, h) = canvas(rng);
    let w = w.max(label_ready_width(n_series, n_cat));
    ChartSpec {
        chart_type,
        title: title(rng),
        category_labels: CATEGORIES[..n_cat].iter().map(|s| s.to_string()).collect(),
        series,
        y_range: Some(YRange { min: 0.0, max }),
        width_px: w,
        height_px: h,
        value_labels_drawn: value_labels,
    }
}

/// Widest value label the generator can produce: four glyphs such as "12.5" or "475".
const MAX_LABEL_PX: u32 = 4 * crate::render::CELL_W;

/// Canvas width at which every bar is at least as wide as its value label, so
/// labels never cover neighbouring bars. Allows for margins, legend and bar gaps.
fn label_ready_width(n_series: usize, n_cat: usize) -> u32 {
    let bar = MAX_LABEL_PX + 2;
    let plot = (bar as f64 * n_series as f64 * n_cat as f64 / 0.7).ceil() as u32;
    plot + 56 + 16 + if n_series > 1 { 100 } else { 0 }
}

pub fn random_bar_spec(rng: &mut ChaCha8Rng, value_labels: bool) -> ChartSpec {
    axis_spec(rng, ChartType::Bar, value_labels)
}

pub fn random_line_spec(rng: &mut ChaCha8Rng, value_labels: bool) -> ChartSpec {
    axis_spec(rng, ChartType::Line, value_labels)
}

/// A single-series pie with 2 to 6 segments, each at least 5% of the total.
pub fn random_pie_spec(rng: &mut ChaCha8Rng, value_labels: bool) -> ChartSpec {
    let n = rng.random_range(2..=6);
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(10..=60) as f64).collect();
    let color = DEFAULT_PALETTE[rng.random_range(0..DEFAULT_PALETTE.len())];
    let (w, h) = canvas(rng);
    ChartSpec {
        chart_type: ChartType::Pie,
        title: title(rng),
        category_labels: PIE_LABELS[..n].iter().map(|s| s.to_string()).collect(),
        series: vec![Series {
            name: "Share".to_string(),
            color,
            values,
        }],
        y_range: None,
        width_px: w,
        height_px: h,
        value_labels_drawn: value_labels,
    }
}

pub fn random_spec(rng: &mut ChaCha8Rng, chart_type: ChartType, value_labels: bool) -> ChartSpec {
    match chart_type {
        ChartType::Bar => random_bar_spec(rng, value_labels),
        ChartType::Line => random_line_spec(rng, value_labels),
        ChartType::Pie => random_pie_spec(rng, value_labels),
    }
}

/// `n` specs of one type from a fixed seed.
pub fn corpus(chart_type: ChartType, n: usize, seed: u64, value_labels: bool) -> Vec<ChartSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_spec(&mut rng, chart_type, value_labels)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_spec;

    #[test]
    fn corpora_are_valid_and_reproducible() {
        for t in [ChartType::Bar, ChartType::Line, ChartType::Pie] {
            let a = corpus(t, 50, 7, true);
            assert_eq!(a, corpus(t, 50, 7, true));
            for s in &a {
                assert!(validate_spec(s).is_valid(), "{s:?}");
            }
        }
    }
}
