//! Fixed bitmap glyph atlas shared by the renderer and the builtin OCR.
//!
//! Each glyph cell is 6×10 px at scale 1. Ink lives in columns 0–4 and rows 1–9;
//! column 5 and row 0 are always blank.

use std::sync::LazyLock;

use thiserror::Error;

use crate::geom::BBox;
use crate::model::Rgb;
use crate::raster::RasterImage;

pub const CELL_W: u32 = 6;
pub const CELL_H: u32 = 10;
const INK_W: usize = 5;
const INK_ROWS: usize = 9;

// Rows listed top to bottom starting at cell row 1; missing trailing rows are blank.
const GLYPH_SOURCE: &[(char, &[&str])] = &[
    ('0', &[".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    ('1', &["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('2', &[".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    ('3', &["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."]),
    ('4', &["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    ('5', &["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    ('6', &["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."]),
    ('7', &["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    ('8', &[".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    ('9', &[".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."]),
    ('.', &[".....", ".....", ".....", ".....", ".....", ".##..", ".##.."]),
    ('-', &[".....", ".....", ".....", "#####"]),
    ('%', &[".....", "##..#", "##.#.", "..#..", ".#.##", "#..##"]),
    ('A', &[".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('B', &["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    ('C', &[".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    ('D', &["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."]),
    ('E', &["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    ('F', &["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    ('G', &[".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"]),
    ('H', &["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    ('I', &[".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('J', &["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('K', &["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    ('L', &["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    ('M', &["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"]),
    ('N', &["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"]),
    ('O', &[".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('P', &["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    ('Q', &[".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    ('R', &["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    ('S', &[".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    ('T', &["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    ('U', &["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    ('V', &["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('W', &["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."]),
    ('X', &["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    ('Y', &["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    ('Z', &["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
    ('a', &[".....", ".....", ".###.", "....#", ".####", "#...#", ".####"]),
    ('b', &["#....", "#....", "####.", "#...#", "#...#", "#...#", "####."]),
    ('c', &[".....", ".....", ".###.", "#....", "#....", "#...#", ".###."]),
    ('d', &["....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"]),
    ('e', &[".....", ".....", ".###.", "#...#", "#####", "#....", ".###."]),
    ('f', &["..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."]),
    ('g', &[".....", ".....", ".####", "#...#", "#...#", "#...#", ".####", "....#", ".###."]),
    ('h', &["#....", "#....", "#.##.", "##..#", "#...#", "#...#", "#...#"]),
    ('i', &["..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."]),
    ('j', &["...#.", ".....", "..##.", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."]),
    ('k', &["#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."]),
    ('l', &[".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."]),
    ('m', &[".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"]),
    ('n', &[".....", ".....", "#.##.", "##..#", "#...#", "#...#", "#...#"]),
    ('o', &[".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."]),
    ('p', &[".....", ".....", "####.", "#...#", "#...#", "#...#", "####.", "#....", "#...."]),
    ('q', &[".....", ".....", ".####", "#...#", "#...#", "#...#", ".####", "....#", "....#"]),
    ('r', &[".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."]),
    ('s', &[".....", ".....", ".####", "#....", ".###.", "....#", "####."]),
    ('t', &[".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."]),
    ('u', &[".....", ".....", "#...#", "#...#", "#...#", "#..##", ".##.#"]),
    ('v', &[".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."]),
    ('w', &[".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#."]),
    ('x', &[".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"]),
    ('y', &[".....", ".....", "#...#", "#...#", "#...#", "#...#", ".####", "....#", ".###."]),
    ('z', &[".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"]),
    (' ', &[]),
];

/// A glyph bitmap plus the tight box of its ink in cell coordinates.
#[derive(Debug, Clone)]
pub struct Glyph {
    pub ch: char,
    /// `bits[row][col]` over the full 6×10 cell.
    pub bits: [[bool; CELL_W as usize]; CELL_H as usize],
    /// Ink box `(x, y, w, h)` within the cell; zero-sized for the space glyph.
    pub ink: (u32, u32, u32, u32),
}

impl Glyph {
    pub fn ink_at(&self, col: u32, row: u32) -> bool {
        self.bits[row as usize][col as usize]
    }
}

static ATLAS: LazyLock<Vec<Glyph>> = LazyLock::new(|| {
    GLYPH_SOURCE
        .iter()
        .map(|&(ch, rows)| {
            assert!(rows.len() <= INK_ROWS, "glyph {ch:?} too tall");
            let mut bits = [[false; CELL_W as usize]; CELL_H as usize];
            for (r, row) in rows.iter().enumerate() {
                assert_eq!(row.len(), INK_W, "glyph {ch:?} row width");
                for (c, px) in row.chars().enumerate() {
                    bits[r + 1][c] = px == '#';
                }
            }
            let mut ink = (u32::MAX, u32::MAX, 0, 0);
            for (r, row) in bits.iter().enumerate() {
                for (c, &b) in row.iter().enumerate() {
                    if b {
                        ink.0 = ink.0.min(c as u32);
                        ink.1 = ink.1.min(r as u32);
                        ink.2 = ink.2.max(c as u32);
                        ink.3 = ink.3.max(r as u32);
                    }
                }
            }
            let ink = if ink.0 == u32::MAX {
                (0, 0, 0, 0)
            } else {
                (ink.0, ink.1, ink.2 - ink.0 + 1, ink.3 - ink.1 + 1)
            };
            Glyph { ch, bits, ink }
        })
        .collect()
});

pub fn atlas() -> &'static [Glyph] {
    &ATLAS
}

pub fn glyph(ch: char) -> Option<&'static Glyph> {
    ATLAS.iter().find(|g| g.ch == ch)
}

pub fn is_supported(text: &str) -> bool {
    text.chars().all(|c| glyph(c).is_some())
}

#[derive(Debug, Error, PartialEq)]
pub enum FontError {
    #[error("unsupported glyph {0:?}")]
    UnsupportedGlyph(char),
}

/// Width and height in pixels of `text` drawn at `scale`.
pub fn text_extent(text: &str, scale: u32) -> (u32, u32) {
    let n = text.chars().count() as u32;
    if n == 0 {
        (0, 0)
    } else {
        (n * CELL_W * scale, CELL_H * scale)
    }
}

/// Blits `text` with its first cell's top-left corner at `(x, y)`.
///
/// Returns the cell box of the drawn string (`6·n·scale × 10·scale`); an empty
/// string leaves the image untouched and yields a zero-area box at `(x, y)`.
pub fn draw_text(image: &mut RasterImage, text: &str, x: i64, y: i64, scale: u32, color: Rgb) -> Result<BBox, FontError> {
    let glyphs: Vec<&Glyph> = text
        .chars()
        .map(|c| glyph(c).ok_or(FontError::UnsupportedGlyph(c)))
        .collect::<Result<_, _>>()?;
    let scale = scale.max(1) as i64;
    for (i, g) in glyphs.iter().enumerate() {
        let ox = x + i as i64 * CELL_W as i64 * scale;
        for r in 0..CELL_H {
            for c in 0..CELL_W {
                if g.ink_at(c, r) {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            image.put(ox + c as i64 * scale + dx, y + r as i64 * scale + dy, color);
                        }
                    }
                }
            }
        }
    }
    let (w, h) = text_extent(text, scale as u32);
    Ok(BBox::new(x as f64, y as f64, w as f64, h as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{connected_components, BinaryMask};

    #[test]
    fn cell_metrics() {
        let mut img = RasterImage::new(40, 20, Rgb::WHITE);
        let b = draw_text(&mut img, "42", 3, 4, 1, Rgb::BLACK).unwrap();
        assert_eq!(b, BBox::new(3.0, 4.0, 12.0, 10.0));
    }

    #[test]
    fn empty_string_is_noop() {
        let mut img = RasterImage::new(10, 10, Rgb::WHITE);
        let before = img.clone();
        let b = draw_text(&mut img, "", 2, 2, 1, Rgb::BLACK).unwrap();
        assert_eq!(img, before);
        assert_eq!(b.area(), 0.0);
    }

    #[test]
    fn erase_restores_image() {
        let mut img = RasterImage::new(20, 20, Rgb::WHITE);
        let before = img.clone();
        let b = draw_text(&mut img, "A", 5, 5, 1, Rgb::BLACK).unwrap();
        assert_ne!(img, before);
        img.fill_rect(b.x as i64, b.y as i64, b.right() as i64, b.bottom() as i64, Rgb::WHITE);
        assert_eq!(img, before);
    }

    #[test]
    fn unsupported_glyph() {
        let mut img = RasterImage::new(20, 20, Rgb::WHITE);
        assert_eq!(draw_text(&mut img, "a#", 0, 0, 1, Rgb::BLACK), Err(FontError::UnsupportedGlyph('#')));
    }

    #[test]
    fn glyph_ink_is_single_component_except_dotted() {
        for g in atlas() {
            if g.ch == ' ' {
                continue;
            }
            let m = BinaryMask::from_fn(CELL_W, CELL_H, |x, y| g.ink_at(x, y));
            let n = connected_components(&m).len();
            let expected = if matches!(g.ch, 'i' | 'j') { 2 } else { 1 };
            assert_eq!(n, expected, "glyph {:?}", g.ch);
            assert!(!g.bits[0].iter().any(|b| *b), "row 0 must be blank for {:?}", g.ch);
            assert!(!g.bits.iter().any(|r| r[5]), "column 5 must be blank for {:?}", g.ch);
        }
    }

    #[test]
    fn ink_patterns_are_unique() {
        let key = |g: &Glyph| {
            let (x, y, w, h) = g.ink;
            let mut v = vec![w, h];
            for r in y..y + h {
                for c in x..x + w {
                    v.push(g.ink_at(c, r) as u32);
                }
            }
            v
        };
        let glyphs: Vec<_> = atlas().iter().filter(|g| g.ch != ' ').collect();
        for (i, a) in glyphs.iter().enumerate() {
            for b in &glyphs[i + 1..] {
                assert_ne!(key(a), key(b), "{:?} and {:?} share an ink pattern", a.ch, b.ch);
            }
        }
    }
}
