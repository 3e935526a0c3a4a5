use serde::{Deserialize, Serialize};

use super::{BinaryMask, RasterImage};
use crate::model::Rgb;

/// Hexcone HSV. Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn rgb_to_hsv(c: Rgb) -> Hsv {
    let (r, g, b) = (c.r as f64, c.g as f64, c.b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max / 255.0;
    let s = if max == 0.0 { 0.0 } else { delta / max };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let h = if h >= 360.0 { h - 360.0 } else { h };
    Hsv { h, s, v }
}

/// Box in HSV space. `h_min > h_max` denotes the wrapped interval `[h_min, 360) ∪ [0, h_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvRange {
    pub h_min: f64,
    pub h_max: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// Hue half-width used when a range is derived from a series color.
pub const HUE_TOLERANCE_DEG: f64 = 10.0;
/// Saturation and value half-width used when a range is derived from a series color.
pub const SV_TOLERANCE: f64 = 0.25;
/// Lower clamp for derived saturation and value bounds.
pub const SV_FLOOR: f64 = 0.15;

impl HsvRange {
    /// Range centered on `color`: hue ±10°, saturation and value ±0.25 clamped to `[0.15, 1]`.
    pub fn around(color: Rgb) -> HsvRange {
        let hsv = rgb_to_hsv(color);
        let clamp = |v: f64| v.clamp(SV_FLOOR, 1.0);
        HsvRange {
            h_min: (hsv.h - HUE_TOLERANCE_DEG).rem_euclid(360.0),
            h_max: (hsv.h + HUE_TOLERANCE_DEG).rem_euclid(360.0),
            s_min: clamp(hsv.s - SV_TOLERANCE),
            s_max: clamp(hsv.s + SV_TOLERANCE),
            v_min: clamp(hsv.v - SV_TOLERANCE),
            v_max: clamp(hsv.v + SV_TOLERANCE),
        }
    }

    pub fn wraps(&self) -> bool {
        self.h_min > self.h_max
    }

    pub fn contains(&self, p: Hsv) -> bool {
        let hue_ok = if self.wraps() {
            p.h >= self.h_min || p.h <= self.h_max
        } else {
            p.h >= self.h_min && p.h <= self.h_max
        };
        hue_ok && p.s >= self.s_min && p.s <= self.s_max && p.v >= self.v_min && p.v <= self.v_max
    }
}

/// Binary mask of pixels whose HSV lies inside `range`.
pub fn in_range(image: &RasterImage, range: &HsvRange) -> BinaryMask {
    // Charts have few distinct colors; memoize per color.
    let mut cache: std::collections::HashMap<Rgb, bool> = std::collections::HashMap::new();
    let mut mask = BinaryMask::new(image.width(), image.height());
    for y in 0..image.height() {
        for x in 0..image.width() {
            let c = image.get(x, y);
            let hit = *cache.entry(c).or_insert_with(|| range.contains(rgb_to_hsv(c)));
            if hit {
                mask.set(x, y, true);
            }
        }
    }
    mask
}
