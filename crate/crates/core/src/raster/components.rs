use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::geom::BBox;

/// An 8-connected region of set mask pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Tight integer-valued box.
    pub bbox: BBox,
    pub area_px: usize,
    /// Mean of pixel centers.
    pub centroid: (f64, f64),
}

impl Component {
    pub fn fill_ratio(&self) -> f64 {
        self.area_px as f64 / self.bbox.area()
    }
}

/// Components plus a per-pixel label map (`0` = background, `k` = component index + 1).
pub fn label_components(mask: &BinaryMask) -> (Vec<Component>, Vec<u32>) {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut labels = vec![0u32; w * h];
    let mut raw: Vec<(usize, usize, usize, usize, usize, f64, f64)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let id = raw.len() as u32 + 1;
        labels[start] = id;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let (mut area, mut sx, mut sy) = (0usize, 0.0, 0.0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            area += 1;
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.bits()[j] && labels[j] == 0 {
                        labels[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        raw.push((x0, y0, x1, y1, area, sx, sy));
    }
    let mut comps: Vec<(u32, Component)> = raw
        .into_iter()
        .enumerate()
        .map(|(i, (x0, y0, x1, y1, area, sx, sy))| {
            (
                i as u32 + 1,
                Component {
                    bbox: BBox::new(x0 as f64, y0 as f64, (x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64),
                    area_px: area,
                    centroid: (sx / area as f64, sy / area as f64),
                },
            )
        })
        .collect();
    comps.sort_by(|a, b| {
        a.1.bbox
            .x
            .total_cmp(&b.1.bbox.x)
            .then(a.1.bbox.y.total_cmp(&b.1.bbox.y))
            .then(a.0.cmp(&b.0))
    });
    let mut remap = vec![0u32; comps.len() + 1];
    for (new, (old, _)) in comps.iter().enumerate() {
        remap[*old as usize] = new as u32 + 1;
    }
    for l in labels.iter_mut() {
        *l = remap[*l as usize];
    }
    (comps.into_iter().map(|(_, c)| c).collect(), labels)
}

/// 8-connected components sorted by bbox left edge, then top edge.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    label_components(mask).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_blocks() {
        let m = BinaryMask::from_fn(16, 16, |x, y| (x < 3 && y < 3) || ((10..13).contains(&x) && (10..13).contains(&y)));
        let c = connected_components(&m);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].area_px, 9);
        assert_eq!(c[1].area_px, 9);
        assert_eq!(c[0].bbox, BBox::new(0.0, 0.0, 3.0, 3.0));
        assert_eq!(c[1].bbox, BBox::new(10.0, 10.0, 3.0, 3.0));
    }

    #[test]
    fn empty_and_diagonal() {
        assert!(connected_components(&BinaryMask::new(5, 5)).is_empty());
        let diag = BinaryMask::from_fn(6, 6, |x, y| x == y);
        assert_eq!(connected_components(&diag).len(), 1);
    }

    proptest! {
        #[test]
        fn areas_sum_to_set_bits(bits in proptest::collection::vec(any::<bool>(), 100)) {
            let m = BinaryMask::from_fn(10, 10, |x, y| bits[(y * 10 + x) as usize]);
            let total: usize = connected_components(&m).iter().map(|c| c.area_px).sum();
            prop_assert_eq!(total, m.count());
        }
    }
}
