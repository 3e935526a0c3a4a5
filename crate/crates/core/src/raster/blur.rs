use super::RasterImage;
use crate::model::Rgb;

/// Normalized 1-D Gaussian truncated at `ceil(3σ)`; index 0 is the center tap.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (3.0 * sigma).ceil() as usize;
    let raw: Vec<f64> = (0..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable channel-wise Gaussian blur with clamped edges.
///
/// Taps are summed in mirrored pairs so the result is exactly symmetric under flips.
pub fn gaussian_blur(image: &RasterImage, sigma: f64) -> RasterImage {
    let kernel = gaussian_kernel(sigma);
    let (w, h) = (image.width() as usize, image.height() as usize);
    let src: Vec<[f64; 3]> = image
        .pixels()
        .iter()
        .map(|p| [p.r as f64, p.g as f64, p.b as f64])
        .collect();

    let convolve = |data: &[[f64; 3]], len: usize, stride: usize, count: usize, step: usize| -> Vec<[f64; 3]> {
        let mut out = vec![[0.0; 3]; data.len()];
        for line in 0..count {
            let base = line * step;
            let at = |i: isize| data[base + (i.clamp(0, len as isize - 1) as usize) * stride];
            for i in 0..len as isize {
                let mut acc = [0.0; 3];
                let c = at(i);
                for ch in 0..3 {
                    acc[ch] = kernel[0] * c[ch];
                }
                for (k, wk) in kernel.iter().enumerate().skip(1) {
                    let a = at(i - k as isize);
                    let b = at(i + k as isize);
                    for ch in 0..3 {
                        acc[ch] += wk * (a[ch] + b[ch]);
                    }
                }
                out[base + i as usize * stride] = acc;
            }
        }
        out
    };

    let horizontal = convolve(&src, w, 1, h, w);
    let both = convolve(&horizontal, h, w, w, 1);
    let q = |v: f64| v.round().clamp(0.0, 255.0) as u8;
    let pixels = both.into_iter().map(|p| Rgb::new(q(p[0]), q(p[1]), q(p[2]))).collect();
    RasterImage::from_pixels(image.width(), image.height(), pixels).expect("dimensions preserved")
}
