//! Nice-number axis ticks and the number formats printed on charts.

/// Multiples of a step in `{1, 2, 5}·10^k` within `[min, max]`, using the smallest
/// step that yields between 4 and 7 ticks.
pub fn nice_ticks(min: f64, max: f64) -> Vec<f64> {
    assert!(min < max, "empty tick range");
    let span = max - min;
    let start_exp = span.log10().floor() as i32 - 2;
    let mut fallback: Option<(usize, f64)> = None;
    for exp in start_exp..start_exp + 6 {
        for m in [1.0, 2.0, 5.0] {
            let step = m * 10f64.powi(exp);
            let first = (min / step - 1e-9).ceil() as i64;
            let last = (max / step + 1e-9).floor() as i64;
            let count = (last - first + 1).max(0) as usize;
            if (4..=7).contains(&count) {
                return ticks_for(first, last, step, exp);
            }
            let miss = count.abs_diff(5);
            if fallback.is_none_or(|(best, _)| miss < best) {
                fallback = Some((miss, step));
            }
        }
    }
    let (_, step) = fallback.expect("at least one candidate step");
    let exp = step.log10().floor() as i32;
    ticks_for((min / step).ceil() as i64, (max / step).floor() as i64, step, exp)
}

fn ticks_for(first: i64, last: i64, step: f64, exp: i32) -> Vec<f64> {
    let decimals = (-exp).max(0);
    let q = 10f64.powi(decimals);
    (first..=last).map(|k| ((k as f64 * step) * q).round() / q).collect()
}

/// Shortest decimal rendering with at most `max_decimals` places, no exponent.
pub fn format_number(v: f64, max_decimals: usize) -> String {
    let mut s = format!("{:.*}", max_decimals, v);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Tick labels keep up to four decimals, which covers every nice step down to 1e-4.
pub fn format_tick(v: f64) -> String {
    format_number(v, 4)
}

/// Value labels printed beside marks.
pub fn format_value(v: f64) -> String {
    format_number(v, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_ranges() {
        assert_eq!(nice_ticks(0.0, 100.0), vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0]);
        assert_eq!(nice_ticks(0.0, 20.0), vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        assert_eq!(nice_ticks(0.0, 37.0), vec![0.0, 10.0, 20.0, 30.0]);
        assert_eq!(nice_ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn tick_counts_always_in_window() {
        for max in [3.0, 7.5, 12.0, 48.0, 99.0, 250.0, 1234.0, 0.07] {
            let t = nice_ticks(0.0, max);
            assert!((4..=7).contains(&t.len()), "max {max}: {t:?}");
        }
    }

    #[test]
    fn formatting() {
        assert_eq!(format_tick(20.0), "20");
        assert_eq!(format_tick(0.2), "0.2");
        assert_eq!(format_tick(-0.0), "0");
        assert_eq!(format_value(12.34), "12.3");
        assert_eq!(format_value(12.0), "12");
    }
}
