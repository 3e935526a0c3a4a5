use super::{parse_tick_value, TextItem, TextRole};
use crate::geom::BBox;
use crate::layout::LayoutMap;

/// How far above a mark a numeric string may sit and still annotate it.
pub const VALUE_LABEL_WINDOW_PX: f64 = 10.0;

pub fn is_numeric_text(text: &str) -> bool {
    parse_tick_value(text).is_ok()
}

fn near_mark(b: &BBox, marks: &[BBox]) -> bool {
    marks.iter().any(|m| {
        if b.intersects(m) {
            return true;
        }
        let overlaps_x = b.x < m.right() && m.x < b.right();
        let gap = m.y - b.bottom();
        overlaps_x && (0.0..=VALUE_LABEL_WINDOW_PX).contains(&gap)
    })
}

/// Assigns exactly one role to every item. Rules apply in order: y ticks, text
/// below the x-axis, legend entries, value labels, title, otherwise unknown.
pub fn assign_roles(items: &[TextItem], layout: &LayoutMap, image_w: u32, image_h: u32, mark_boxes: &[BBox]) -> Vec<TextItem> {
    let plot = layout.plot_area;
    items
        .iter()
        .map(|it| {
            let b = it.bbox;
            let (cx, cy) = b.center();
            let numeric = is_numeric_text(&it.text);
            let role = if numeric
                && layout.y_axis_x.is_some_and(|ax| b.right() <= ax as f64 + 1.0)
                && cy >= plot.y - b.h / 2.0
                && cy <= plot.bottom() + b.h / 2.0
            {
                TextRole::TickY
            } else if layout.x_axis_y.is_some_and(|ay| b.y >= ay as f64) {
                if numeric {
                    TextRole::TickX
                } else {
                    TextRole::CategoryLabel
                }
            } else if layout.legend_area.is_some_and(|l| l.contains_point(cx, cy, 0.0)) {
                TextRole::LegendEntry
            } else if numeric && near_mark(&b, mark_boxes) {
                TextRole::ValueLabel
            } else if cy <= 0.15 * image_h as f64 && (cx - image_w as f64 / 2.0).abs() <= 0.2 * image_w as f64 {
                TextRole::Title
            } else {
                TextRole::Unknown
            };
            TextItem { role, ..it.clone() }
        })
        .collect()
}
