//! Pixel-level primitives: images, HSV masks, morphology, blur, components and resampling.

mod blur;
mod components;
mod hsv;
mod morph;
mod resample;

pub use blur::{gaussian_blur, gaussian_kernel};
pub use components::{connected_components, label_components, Component};
pub use hsv::{in_range, rgb_to_hsv, Hsv, HsvRange};
pub use morph::{dilate, erode, morph_close, morph_open};
pub use resample::{resample, resample_area};

use std::io::Cursor;
use std::path::Path;

use thiserror::Error;

use crate::geom::BBox;
use crate::model::Rgb;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1, got {0}x{1}")]
    EmptyImage(u32, u32),
    #[error("pixel buffer holds {got} pixels, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("png decode failed: {0}")]
    Decode(String),
    #[error("png encode failed: {0}")]
    Encode(String),
    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Owned RGB pixel grid, row-major, origin at the top-left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        assert!(width >= 1 && height >= 1, "image must be at least 1x1");
        RasterImage {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage(width, height));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(RasterError::BufferSize {
                expected,
                got: pixels.len(),
            });
        }
        Ok(RasterImage { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn bounds(&self) -> BBox {
        BBox::new(0.0, 0.0, self.width as f64, self.height as f64)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = c;
    }

    /// Sets a pixel given signed coordinates, ignoring anything off-canvas.
    #[inline]
    pub fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as u64) < self.width as u64 && (y as u64) < self.height as u64 {
            self.set(x as u32, y as u32, c);
        }
    }

    /// Fills the integer-pixel rectangle `[x0, x1) x [y0, y1)`, clipped to the canvas.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        let (w, h) = (self.width as i64, self.height as i64);
        for y in y0.max(0)..y1.min(h) {
            for x in x0.max(0)..x1.min(w) {
                self.set(x as u32, y as u32, c);
            }
        }
    }

    pub fn flip_horizontal(&self) -> RasterImage {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }

    /// Decodes a PNG, compositing any alpha channel over white.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, RasterError> {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| RasterError::Decode(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| RasterError::Decode("image too large".into()))?];
        let info = reader.next_frame(&mut buf).map_err(|e| RasterError::Decode(e.to_string()))?;
        let data = &buf[..info.buffer_size()];
        let over_white = |c: u8, a: u8| -> u8 {
            let c = c as u32 * a as u32 + 255 * (255 - a as u32);
            ((c + 127) / 255) as u8
        };
        let pixels: Vec<Rgb> = match info.color_type {
            png::ColorType::Rgb => data.chunks_exact(3).map(|p| Rgb::new(p[0], p[1], p[2])).collect(),
            png::ColorType::Rgba => data
                .chunks_exact(4)
                .map(|p| Rgb::new(over_white(p[0], p[3]), over_white(p[1], p[3]), over_white(p[2], p[3])))
                .collect(),
            png::ColorType::Grayscale => data.iter().map(|&g| Rgb::new(g, g, g)).collect(),
            png::ColorType::GrayscaleAlpha => data
                .chunks_exact(2)
                .map(|p| {
                    let g = over_white(p[0], p[1]);
                    Rgb::new(g, g, g)
                })
                .collect(),
            png::ColorType::Indexed => return Err(RasterError::Decode("unexpanded palette image".into())),
        };
        RasterImage::from_pixels(info.width, info.height, pixels)
    }

    /// Encodes as 8-bit RGB PNG with fixed settings, so output bytes are deterministic.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            encoder.set_compression(png::Compression::Balanced);
            encoder.set_filter(png::Filter::Sub);
            let mut writer = encoder.write_header().map_err(|e| RasterError::Encode(e.to_string()))?;
            let data: Vec<u8> = self.pixels.iter().flat_map(|p| [p.r, p.g, p.b]).collect();
            writer.write_image_data(&data).map_err(|e| RasterError::Encode(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| RasterError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_png_bytes(&bytes)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_png_bytes()?).map_err(|source| RasterError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// One boolean per pixel, same dimensions as the image it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Out-of-bounds coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u64) < self.width as u64 && (y as u64) < self.height as u64 && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn union(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }

    /// Clears every bit outside `region`.
    pub fn restrict_to(&self, region: &BBox) -> BinaryMask {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let inside = (x as f64) >= region.x
                    && (x as f64) < region.right()
                    && (y as f64) >= region.y
                    && (y as f64) < region.bottom();
                if !inside {
                    out.set(x, y, false);
                }
            }
        }
        out
    }
}
