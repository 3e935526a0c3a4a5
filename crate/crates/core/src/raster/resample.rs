use super::RasterImage;
use crate::model::Rgb;

/// Bilinear resampling to `round(w·sx) × round(h·sy)`.
///
/// Pixel centers are aligned, `src = (dst + 0.5) / scale - 0.5`, with the effective
/// scale taken from the rounded output size; coordinates clamp at the edges.
pub fn resample(image: &RasterImage, sx: f64, sy: f64) -> RasterImage {
    assert!(sx > 0.0 && sy > 0.0, "scale factors must be positive");
    let (w, h) = (image.width(), image.height());
    let out_w = ((w as f64 * sx).round() as u32).max(1);
    let out_h = ((h as f64 * sy).round() as u32).max(1);
    if out_w == w && out_h == h {
        return image.clone();
    }
    let (ex, ey) = (out_w as f64 / w as f64, out_h as f64 / h as f64);
    let taps = |dst: u32, scale: f64, len: u32| -> (u32, u32, f64) {
        let s = ((dst as f64 + 0.5) / scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = s.floor() as u32;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..out_w).map(|x| taps(x, ex, w)).collect();
    let mut pixels = Vec::with_capacity(out_w as usize * out_h as usize);
    for y in 0..out_h {
        let (y0, y1, fy) = taps(y, ey, h);
        for &(x0, x1, fx) in &xs {
            let p00 = image.get(x0, y0);
            let p10 = image.get(x1, y0);
            let p01 = image.get(x0, y1);
            let p11 = image.get(x1, y1);
            let ch = |f: fn(Rgb) -> u8| -> u8 {
                let top = f(p00) as f64 * (1.0 - fx) + f(p10) as f64 * fx;
                let bottom = f(p01) as f64 * (1.0 - fx) + f(p11) as f64 * fx;
                (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
            };
            pixels.push(Rgb::new(ch(|p| p.r), ch(|p| p.g), ch(|p| p.b)));
        }
    }
    RasterImage::from_pixels(out_w, out_h, pixels).expect("output dimensions are positive")
}

/// Box-filter resampling to `out_w × out_h`: every output pixel is the
/// area-weighted mean of the source pixels it covers. Intended for shrinking.
pub fn resample_area(image: &RasterImage, out_w: u32, out_h: u32) -> RasterImage {
    assert!(out_w > 0 && out_h > 0, "output dimensions must be positive");
    let (w, h) = (image.width(), image.height());
    if out_w == w && out_h == h {
        return image.clone();
    }
    // Per output index: list of (source index, weight).
    let spans = |out: u32, len: u32| -> Vec<Vec<(u32, f64)>> {
        let f = len as f64 / out as f64;
        (0..out)
            .map(|d| {
                let (a, b) = (d as f64 * f, (d + 1) as f64 * f);
                let mut v = Vec::new();
                let mut k = a.floor() as u32;
                while (k as f64) < b && k < len {
                    let wgt = (b.min(k as f64 + 1.0) - a.max(k as f64)).max(0.0);
                    if wgt > 0.0 {
                        v.push((k, wgt / f));
                    }
                    k += 1;
                }
                v
            })
            .collect()
    };
    let xs = spans(out_w, w);
    let ys = spans(out_h, h);
    let mut pixels = Vec::with_capacity(out_w as usize * out_h as usize);
    for ty in &ys {
        for tx in &xs {
            let mut acc = [0.0f64; 3];
            for &(sy, wy) in ty {
                for &(sx, wx) in tx {
                    let p = image.get(sx, sy);
                    let wgt = wx * wy;
                    acc[0] += p.r as f64 * wgt;
                    acc[1] += p.g as f64 * wgt;
                    acc[2] += p.b as f64 * wgt;
                }
            }
            let c = |v: f64| v.round().clamp(0.0, 255.0) as u8;
            pixels.push(Rgb::new(c(acc[0]), c(acc[1]), c(acc[2])));
        }
    }
    RasterImage::from_pixels(out_w, out_h, pixels).expect("output dimensions are positive")
}
