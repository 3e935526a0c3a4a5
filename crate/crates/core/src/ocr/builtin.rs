//! Atlas template OCR for text produced by the bundled bitmap font.
//!
//! Dark, unsaturated pixels are grouped into 8-connected components; each
//! component is area-sampled onto every candidate glyph's ink grid and scored by
//! Hamming distance. Stretched images are shrunk back to the atlas scale before
//! matching, so expanded charts still read correctly.

use super::{TextItem, TextRole};
use crate::geom::{median, BBox};
use rayon::prelude::*;

use crate::raster::{label_components, resample_area, rgb_to_hsv, BinaryMask, RasterImage};
use crate::render::font::{atlas, Glyph, CELL_H, CELL_W};

const MAX_SATURATION: f64 = 0.35;
const MAX_VALUE: f64 = 0.5;
/// Components larger than this are strokes, not glyphs.
const MAX_GLYPH_EXTENT: f64 = 14.0;
const ACCEPT_SCORE: f64 = 0.25;
const DOT_GAP: f64 = 4.0;

struct Blob {
    bbox: BBox,
    labels: Vec<u32>,
}

struct Hit {
    ch: char,
    cell_x: f64,
    cell_y: f64,
    score: f64,
    blob: BBox,
    glyph: &'static Glyph,
}

fn text_mask(image: &RasterImage, region: Option<&BBox>) -> BinaryMask {
    let mask = BinaryMask::from_fn(image.width(), image.height(), |x, y| {
        let hsv = rgb_to_hsv(image.get(x, y));
        hsv.s <= MAX_SATURATION && hsv.v <= MAX_VALUE
    });
    match region {
        Some(r) => mask.restrict_to(r),
        None => mask,
    }
}

fn blobs(mask: &BinaryMask, max_w: f64, max_h: f64) -> (Vec<Blob>, Vec<u32>) {
    let (comps, labels) = label_components(mask);
    let mut out: Vec<Blob> = comps
        .iter()
        .enumerate()
        .filter(|(_, c)| c.bbox.w <= max_w && c.bbox.h <= max_h)
        .map(|(i, c)| Blob {
            bbox: c.bbox,
            labels: vec![i as u32 + 1],
        })
        .collect();
    // Attach the dots of `i` and `j` to the stem directly below them.
    let mut merged = vec![false; out.len()];
    for d in 0..out.len() {
        let dot = out[d].bbox;
        if dot.w > 3.0 || dot.h > 3.0 {
            continue;
        }
        let below = (0..out.len()).filter(|&k| k != d && !merged[k]).find(|&k| {
            let b = out[k].bbox;
            let gap = b.y - dot.bottom();
            (0.0..=DOT_GAP).contains(&gap) && dot.x < b.right() && b.x < dot.right() && b.h > dot.h
        });
        if let Some(k) = below {
            let ls = out[d].labels.clone();
            out[k].bbox = out[k].bbox.union(&dot);
            out[k].labels.extend(ls);
            merged[d] = true;
        }
    }
    let out = out.into_iter().zip(merged).filter(|(_, m)| !m).map(|(b, _)| b).collect();
    (out, labels)
}

/// Area-samples a blob onto a `tw × th` grid and returns the Hamming fraction
/// against the glyph's ink bits.
fn match_score(blob: &Blob, label_map: &[u32], width: u32, g: &Glyph) -> f64 {
    let (ix, iy, tw, th) = g.ink;
    let b = blob.bbox;
    let cw = b.w / tw as f64;
    let ch = b.h / th as f64;
    let member = |x: u32, y: u32| blob.labels.contains(&label_map[(y * width + x) as usize]);
    let mut mismatches = 0u32;
    for r in 0..th {
        for c in 0..tw {
            let (x0, x1) = (b.x + c as f64 * cw, b.x + (c + 1) as f64 * cw);
            let (y0, y1) = (b.y + r as f64 * ch, b.y + (r + 1) as f64 * ch);
            let mut inked = 0.0;
            let mut total = 0.0;
            for py in y0.floor() as u32..(y1.ceil() as u32) {
                let oy = (y1.min(py as f64 + 1.0) - y0.max(py as f64)).max(0.0);
                for px in x0.floor() as u32..(x1.ceil() as u32) {
                    let ox = (x1.min(px as f64 + 1.0) - x0.max(px as f64)).max(0.0);
                    let a = ox * oy;
                    total += a;
                    if member(px, py) {
                        inked += a;
                    }
                }
            }
            let on = total > 0.0 && inked / total >= 0.5;
            if on != g.ink_at(ix + c, iy + r) {
                mismatches += 1;
            }
        }
    }
    mismatches as f64 / (tw * th) as f64
}

fn glyphs() -> impl Iterator<Item = &'static Glyph> {
    atlas().iter().filter(|g| g.ch != ' ')
}

/// Ink centroid of a glyph in cell coordinates, pixel edges at integers.
fn ink_centroid(g: &Glyph) -> (f64, f64) {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for r in 0..CELL_H {
        for c in 0..CELL_W {
            if g.ink_at(c, r) {
                sx += c as f64 + 0.5;
                sy += r as f64 + 0.5;
                n += 1.0;
            }
        }
    }
    (sx / n, sy / n)
}

struct NativePass {
    hits: Vec<Hit>,
    candidates: usize,
    perfect: usize,
    /// Exact matches of glyphs at least 3×5 ink pixels; fragments of stretched
    /// strokes cannot fake these.
    perfect_large: usize,
}

impl NativePass {
    fn quality(&self) -> i64 {
        self.perfect_large as i64 - (self.candidates - self.perfect) as i64
    }
}

/// Recognition on text drawn at scale 1: blobs must match a template's ink size
/// exactly, up to one pixel.
fn recognize_native(image: &RasterImage, region: Option<&BBox>) -> NativePass {
    let mask = text_mask(image, region);
    let (blobs, labels) = blobs(&mask, MAX_GLYPH_EXTENT, MAX_GLYPH_EXTENT);
    let mut hits = Vec::new();
    let mut perfect = 0;
    let mut perfect_large = 0;
    for b in &blobs {
        let best = glyphs()
            .filter(|g| (b.bbox.w - g.ink.2 as f64).abs() <= 1.0 && (b.bbox.h - g.ink.3 as f64).abs() <= 1.0)
            .map(|g| (match_score(b, &labels, image.width(), g), g))
            .fold(None::<(f64, &Glyph)>, |acc, cur| match acc {
                Some(a) if a.0 <= cur.0 => Some(a),
                _ => Some(cur),
            });
        if let Some((score, g)) = best {
            if score <= ACCEPT_SCORE {
                if score == 0.0 {
                    perfect += 1;
                    if g.ink.2 >= 3 && g.ink.3 >= 5 {
                        perfect_large += 1;
                    }
                }
                hits.push(Hit {
                    ch: g.ch,
                    cell_x: b.bbox.x - g.ink.0 as f64,
                    cell_y: b.bbox.y - g.ink.1 as f64,
                    score,
                    blob: b.bbox,
                    glyph: g,
                });
            }
        }
    }
    NativePass {
        hits,
        candidates: blobs.len(),
        perfect,
        perfect_large,
    }
}

fn native_is_clean(p: &NativePass) -> bool {
    p.candidates == 0 || (p.perfect_large > 0 && p.perfect as f64 >= 0.9 * p.candidates as f64)
}

fn shrink(image: &RasterImage, sx: f64, sy: f64) -> RasterImage {
    let w = ((image.width() as f64 / sx).round() as u32).max(1);
    let h = ((image.height() as f64 / sy).round() as u32).max(1);
    resample_area(image, w, h)
}

const SCALE_CANDIDATES: [f64; 22] = [
    1.1, 1.15, 1.2, 1.25, 1.3, 1.35, 1.4, 1.45, 1.5, 1.6, 1.67, 1.75, 1.8, 1.9, 2.0, 2.1, 2.2, 2.25, 2.4, 2.5, 2.75, 3.0,
];

/// Estimates how far text is stretched along each axis. Scale 1 is kept when the
/// text reads cleanly as drawn; otherwise the image is shrunk by candidate factors
/// along one axis at a time and the factor with the best match quality wins.
pub fn estimate_text_scale(image: &RasterImage, region: Option<&BBox>) -> (f64, f64) {
    estimate_scales(image, region).1
}

/// Returns the candidate factor that reads best, and the refined glyph scale.
fn estimate_scales(image: &RasterImage, region: Option<&BBox>) -> ((f64, f64), (f64, f64)) {
    let native = recognize_native(image, region);
    if native_is_clean(&native) {
        return ((1.0, 1.0), (1.0, 1.0));
    }
    let score = |sx: f64, sy: f64| {
        let small = shrink(image, sx, sy);
        let r = region.map(|b| BBox::new(b.x / sx, b.y / sy, b.w / sx, b.h / sy));
        recognize_native(&small, r.as_ref()).quality()
    };
    let pick = |along_x: bool| {
        let results: Vec<(f64, i64)> = SCALE_CANDIDATES
            .par_iter()
            .map(|&s| (s, if along_x { score(s, 1.0) } else { score(1.0, s) }))
            .collect();
        // Factors near the true one all read perfectly; take the middle of the best
        // plateau.
        let best = results.iter().map(|r| r.1).max().expect("candidates");
        if best <= native.quality() {
            return (1.0, native.quality());
        }
        let top: Vec<f64> = results.iter().filter(|r| r.1 == best).map(|r| r.0).collect();
        (top[(top.len() - 1) / 2], best)
    };
    let (bx, nx) = pick(true);
    let (by, ny) = pick(false);
    let (sx, sy) = if nx >= ny { (bx, 1.0) } else { (1.0, by) };
    if sx == 1.0 && sy == 1.0 {
        return ((1.0, 1.0), (1.0, 1.0));
    }
    // Pin the factor down from ink mass, which bilinear stretching scales by the
    // stretch factor.
    let small = shrink(image, sx, sy);
    let (fx, fy) = (image.width() as f64 / small.width() as f64, image.height() as f64 / small.height() as f64);
    let r = region.map(|b| BBox::new(b.x / fx, b.y / fy, b.w / fx, b.h / fy));
    let hits = recognize_native(&small, r.as_ref()).hits;
    let (mut mass, mut count) = (0.0, 0.0);
    for h in hits.iter().filter(|h| h.score == 0.0) {
        let window = BBox::new((h.blob.x - 0.5) * fx, (h.blob.y - 0.5) * fy, (h.blob.w + 1.0) * fx, (h.blob.h + 1.0) * fy);
        mass += dark_stats(image, &window).2;
        count += ink_pixels(h.glyph);
    }
    let coarse = sx * sy;
    let refined = if count > 0.0 { mass / count } else { coarse };
    let s = if (refined - coarse).abs() <= 0.3 { refined } else { coarse };
    let refined = if sx != 1.0 { (s, 1.0) } else { (1.0, s) };
    ((sx, sy), refined)
}

fn ink_pixels(g: &Glyph) -> f64 {
    g.bits.iter().flatten().filter(|b| **b).count() as f64
}

/// Recognizes renderer text, compensating for a uniform stretch of the image.
pub fn ocr_builtin(image: &RasterImage, region: Option<&BBox>) -> Vec<TextItem> {
    let native = recognize_native(image, region);
    if native_is_clean(&native) {
        return group_lines(native.hits, 1.0, 1.0, image.bounds());
    }
    let (coarse, refined) = estimate_scales(image, region);
    read_stretched(image, region, coarse, refined)
}

/// Recognizes text assuming the image was stretched by `(sx, sy)`: the image is
/// shrunk back, read at scale 1, and glyph positions are re-anchored on their ink
/// centroids in the original pixels.
pub fn ocr_builtin_with_scale(image: &RasterImage, region: Option<&BBox>, sx: f64, sy: f64) -> Vec<TextItem> {
    read_stretched(image, region, (sx, sy), (sx, sy))
}

fn read_stretched(image: &RasterImage, region: Option<&BBox>, shrink_by: (f64, f64), glyph_scale: (f64, f64)) -> Vec<TextItem> {
    let (sx, sy) = glyph_scale;
    if shrink_by == (1.0, 1.0) {
        return group_lines(recognize_native(image, region).hits, 1.0, 1.0, image.bounds());
    }
    let small = shrink(image, shrink_by.0, shrink_by.1);
    let fx = image.width() as f64 / small.width() as f64;
    let fy = image.height() as f64 / small.height() as f64;
    let r = region.map(|b| BBox::new(b.x / fx, b.y / fy, b.w / fx, b.h / fy));
    let mut hits = recognize_native(&small, r.as_ref()).hits;
    for h in &mut hits {
        let window = BBox::new(
            (h.blob.x - 0.5) * fx,
            (h.blob.y - 0.5) * fy,
            (h.blob.w + 1.0) * fx,
            (h.blob.h + 1.0) * fy,
        );
        let (tx, ty) = ink_centroid(h.glyph);
        match dark_centroid(image, &window) {
            Some((cx, cy)) => {
                h.cell_x = cx - tx * sx;
                h.cell_y = cy - ty * sy;
            }
            None => {
                h.cell_x *= fx;
                h.cell_y *= fy;
            }
        }
    }
    group_lines(hits, sx, sy, image.bounds())
}

/// Darkness-weighted first moments and total darkness of unsaturated pixels in
/// `window`, in edge coordinates.
fn dark_stats(image: &RasterImage, window: &BBox) -> (f64, f64, f64) {
    let b = window.clamp_to(image.width() as f64, image.height() as f64);
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in b.y.floor() as u32..b.bottom().ceil() as u32 {
        for x in b.x.floor() as u32..b.right().ceil() as u32 {
            let hsv = rgb_to_hsv(image.get(x, y));
            if hsv.s > MAX_SATURATION {
                continue;
            }
            let d = 1.0 - hsv.v;
            sx += d * (x as f64 + 0.5);
            sy += d * (y as f64 + 0.5);
            sw += d;
        }
    }
    (sx, sy, sw)
}

fn dark_centroid(image: &RasterImage, window: &BBox) -> Option<(f64, f64)> {
    let (sx, sy, sw) = dark_stats(image, window);
    (sw > 0.0).then(|| (sx / sw, sy / sw))
}

fn group_lines(mut hits: Vec<Hit>, sx: f64, sy: f64, bounds: BBox) -> Vec<TextItem> {
    hits.sort_by(|a, b| a.cell_x.total_cmp(&b.cell_x).then(a.cell_y.total_cmp(&b.cell_y)));
    let cell_w = CELL_W as f64 * sx;
    let tol_x = 2.0 * sx.max(1.0);
    let tol_y = 2.0 * sy.max(1.0);
    struct Line {
        text: String,
        x: f64,
        ys: Vec<f64>,
        end: f64,
        cells: usize,
        scores: Vec<f64>,
    }
    let mut lines: Vec<Line> = Vec::new();
    for h in hits {
        let target = lines.iter_mut().find(|l| {
            let y = l.ys[0];
            (h.cell_y - y).abs() <= tol_y
                && ((h.cell_x - l.end).abs() <= tol_x || (h.cell_x - l.end - cell_w).abs() <= tol_x)
        });
        match target {
            Some(l) => {
                if (h.cell_x - l.end).abs() > tol_x {
                    l.text.push(' ');
                    l.cells += 1;
                }
                l.text.push(h.ch);
                l.cells += 1;
                l.end = h.cell_x + cell_w;
                l.ys.push(h.cell_y);
                l.scores.push(h.score);
            }
            None => lines.push(Line {
                text: h.ch.to_string(),
                x: h.cell_x,
                ys: vec![h.cell_y],
                end: h.cell_x + cell_w,
                cells: 1,
                scores: vec![h.score],
            }),
        }
    }
    let mut items: Vec<TextItem> = lines
        .into_iter()
        .map(|l| {
            let y = median(&l.ys);
            let raw = BBox::new(l.x, y, l.cells as f64 * cell_w, CELL_H as f64 * sy);
            let bbox = raw.clamp_to(bounds.w, bounds.h);
            let mean_score = l.scores.iter().sum::<f64>() / l.scores.len() as f64;
            TextItem {
                text: l.text,
                bbox,
                confidence: (1.0 - mean_score).clamp(0.0, 1.0),
                role: TextRole::Unknown,
            }
        })
        .collect();
    reading_order(&mut items, tol_y);
    items
}

/// Sorts top to bottom, treating items whose tops differ by at most `tol` as one
/// row ordered left to right.
fn reading_order(items: &mut Vec<TextItem>, tol: f64) {
    items.sort_by(|a, b| a.bbox.y.total_cmp(&b.bbox.y));
    let mut rows: Vec<Vec<TextItem>> = Vec::new();
    for it in items.drain(..) {
        match rows.last_mut() {
            Some(row) if it.bbox.y - row[0].bbox.y <= tol => row.push(it),
            _ => rows.push(vec![it]),
        }
    }
    for mut row in rows {
        row.sort_by(|a, b| a.bbox.x.total_cmp(&b.bbox.x));
        items.extend(row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rgb;
    use crate::raster::resample;
    use crate::render::draw_text;

    #[test]
    fn round_trip_42() {
        let mut img = RasterImage::new(60, 30, Rgb::WHITE);
        let b = draw_text(&mut img, "42", 7, 9, 1, Rgb::BLACK).unwrap();
        let items = ocr_builtin(&img, None);
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].text, "42");
        assert_eq!(items[0].bbox, b);
        assert_eq!(items[0].confidence, 1.0);
    }

    #[test]
    fn blank_image_has_no_text() {
        assert!(ocr_builtin(&RasterImage::new(50, 50, Rgb::WHITE), None).is_empty());
    }

    #[test]
    fn every_glyph_reads_back() {
        let all: String = atlas().iter().map(|g| g.ch).filter(|c| *c != ' ').collect();
        for chunk in all.as_bytes().chunks(12) {
            let s = std::str::from_utf8(chunk).unwrap();
            let mut img = RasterImage::new(100, 24, Rgb::WHITE);
            let b = draw_text(&mut img, s, 4, 6, 1, Rgb::BLACK).unwrap();
            let items = ocr_builtin(&img, None);
            assert_eq!(items.len(), 1, "{s}");
            assert_eq!(items[0].text, s);
            assert_eq!(items[0].bbox, b);
        }
    }

    #[test]
    fn spaces_and_separate_lines() {
        let mut img = RasterImage::new(120, 60, Rgb::WHITE);
        draw_text(&mut img, "Q1 sales", 5, 5, 1, Rgb::BLACK).unwrap();
        draw_text(&mut img, "12.5%", 5, 30, 1, Rgb::BLACK).unwrap();
        draw_text(&mut img, "-3", 80, 30, 1, Rgb::BLACK).unwrap();
        let texts: Vec<String> = ocr_builtin(&img, None).into_iter().map(|t| t.text).collect();
        assert_eq!(texts, vec!["Q1 sales", "12.5%", "-3"]);
    }

    #[test]
    fn stretched_text_reads_back() {
        let mut img = RasterImage::new(120, 40, Rgb::WHITE);
        draw_text(&mut img, "1250", 10, 10, 1, Rgb::BLACK).unwrap();
        draw_text(&mut img, "37.5", 60, 10, 1, Rgb::BLACK).unwrap();
        for (sx, sy) in [(1.25, 1.0), (1.5, 1.0), (2.0, 1.0), (1.0, 1.25), (1.0, 1.5), (1.0, 2.0)] {
            let s = resample(&img, sx, sy);
            let items = ocr_builtin(&s, None);
            let texts: Vec<&str> = items.iter().map(|t| t.text.as_str()).collect();
            assert_eq!(texts, vec!["1250", "37.5"], "scale {sx}x{sy}");
            let expected = BBox::new(10.0 * sx, 10.0 * sy, 24.0 * sx, 10.0 * sy);
            let got = items[0].bbox;
            assert!((got.x - expected.x).abs() <= 1.0 && (got.y - expected.y).abs() <= 1.0, "{got:?} vs {expected:?}");
            assert!((got.w - expected.w).abs() <= 1.5 && (got.h - expected.h).abs() <= 1.0, "{got:?} vs {expected:?}");
        }
    }

    #[test]
    fn region_limits_search() {
        let mut img = RasterImage::new(100, 30, Rgb::WHITE);
        draw_text(&mut img, "10", 5, 5, 1, Rgb::BLACK).unwrap();
        draw_text(&mut img, "20", 60, 5, 1, Rgb::BLACK).unwrap();
        let items = ocr_builtin(&img, Some(&BBox::new(50.0, 0.0, 50.0, 30.0)));
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].text, "20");
    }
}
