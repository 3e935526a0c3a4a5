use super::BinaryMask;

// Square structuring element of side 2r+1, applied as two 1-D passes.
// Pixels outside the mask count as background.
fn pass(mask: &BinaryMask, radius: u32, horizontal: bool, erode: bool) -> BinaryMask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let r = radius as i64;
    let mut out = BinaryMask::new(mask.width(), mask.height());
    let (outer, inner) = if horizontal { (h, w) } else { (w, h) };
    for o in 0..outer {
        let at = |i: i64| -> bool {
            if horizontal {
                mask.get_signed(i, o)
            } else {
                mask.get_signed(o, i)
            }
        };
        // Running count of set pixels in the window.
        let mut count: i64 = (-r..=r).filter(|&i| at(i)).count() as i64;
        for i in 0..inner {
            let v = if erode { count == 2 * r + 1 } else { count > 0 };
            if v {
                if horizontal {
                    out.set(i as u32, o as u32, true);
                } else {
                    out.set(o as u32, i as u32, true);
                }
            }
            if at(i - r) {
                count -= 1;
            }
            if at(i + r + 1) {
                count += 1;
            }
        }
    }
    out
}

pub fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    pass(&pass(mask, radius, true, true), radius, false, true)
}

pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    pass(&pass(mask, radius, true, false), radius, false, false)
}

/// Erosion followed by dilation.
pub fn morph_open(mask: &BinaryMask, kernel_radius: u32) -> BinaryMask {
    assert!(kernel_radius >= 1, "kernel radius must be at least 1");
    dilate(&erode(mask, kernel_radius), kernel_radius)
}

/// Dilation followed by erosion.
pub fn morph_close(mask: &BinaryMask, kernel_radius: u32) -> BinaryMask {
    assert!(kernel_radius >= 1, "kernel radius must be at least 1");
    erode(&dilate(mask, kernel_radius), kernel_radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::connected_components;
    use proptest::prelude::*;

    // Direct definition, no separability.
    fn naive(mask: &BinaryMask, r: i64, erode: bool) -> BinaryMask {
        BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
            let mut all = true;
            let mut any = false;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = mask.get_signed(x as i64 + dx, y as i64 + dy);
                    all &= v;
                    any |= v;
                }
            }
            if erode {
                all
            } else {
                any
            }
        })
    }

    fn block(w: u32, h: u32, x0: u32, y0: u32, bw: u32, bh: u32) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x0 + bw && y >= y0 && y < y0 + bh)
    }

    #[test]
    fn isolated_pixel_vanishes_on_open() {
        let mut m = BinaryMask::new(9, 9);
        m.set(4, 4, true);
        assert!(morph_open(&m, 1).is_empty());
    }

    #[test]
    fn solid_block_survives_open() {
        let m = block(20, 20, 5, 5, 10, 10);
        let opened = morph_open(&m, 1);
        assert_eq!(opened, naive(&naive(&m, 1, true), 1, false));
        assert_eq!(opened, m);
    }

    #[test]
    fn close_bridges_one_pixel_gap() {
        let a = block(30, 12, 2, 2, 6, 6);
        let b = block(30, 12, 9, 2, 6, 6);
        let m = a.union(&b);
        assert_eq!(connected_components(&m).len(), 2);
        let closed = morph_close(&m, 1);
        assert_eq!(closed, naive(&naive(&m, 1, false), 1, true));
        assert_eq!(connected_components(&closed).len(), 1);
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (2u32..14, 2u32..14).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), (w * h) as usize).prop_map(move |bits| {
                let mut m = BinaryMask::new(w, h);
                for (i, b) in bits.into_iter().enumerate() {
                    m.set(i as u32 % w, i as u32 / w, b);
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn separable_matches_naive(m in arb_mask(), r in 1u32..3) {
            prop_assert_eq!(erode(&m, r), naive(&m, r as i64, true));
            prop_assert_eq!(dilate(&m, r), naive(&m, r as i64, false));
        }

        #[test]
        fn opening_and_closing_idempotent(m in arb_mask(), r in 1u32..3) {
            let o = morph_open(&m, r);
            prop_assert_eq!(morph_open(&o, r), o);
            let c = morph_close(&m, r);
            prop_assert_eq!(morph_close(&c, r), c);
        }
    }
}
