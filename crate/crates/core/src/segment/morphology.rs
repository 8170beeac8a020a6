//! Binary morphology and connected components on row-major bit rasters.
//!
//! Structuring elements are `size x size` squares. Pixels outside the image
//! are ignored, so a region touching the border is not eroded from outside.

use std::collections::VecDeque;

use crate::image::BinaryMask;

fn morph(m: &BinaryMask, size: usize, dilate: bool) -> BinaryMask {
    let (w, h) = (m.width(), m.height());
    let r = (size / 2) as isize;
    let bits = m.bits();
    // Separable: rows then columns.
    let mut tmp = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut v = !dilate;
            for dx in -r..=r {
                let xx = x as isize + dx;
                if xx < 0 || xx >= w as isize {
                    continue;
                }
                let b = bits[y * w + xx as usize];
                if dilate {
                    v |= b;
                } else {
                    v &= b;
                }
            }
            tmp[y * w + x] = v;
        }
    }
    BinaryMask::from_fn(w, h, |x, y| {
        let mut v = !dilate;
        for dy in -r..=r {
            let yy = y as isize + dy;
            if yy < 0 || yy >= h as isize {
                continue;
            }
            let b = tmp[yy as usize * w + x];
            if dilate {
                v |= b;
            } else {
                v &= b;
            }
        }
        v
    })
}

pub fn dilate(m: &BinaryMask, size: usize) -> BinaryMask {
    morph(m, size, true)
}

pub fn erode(m: &BinaryMask, size: usize) -> BinaryMask {
    morph(m, size, false)
}

pub fn close(m: &BinaryMask, size: usize) -> BinaryMask {
    erode(&dilate(m, size), size)
}

pub fn open(m: &BinaryMask, size: usize) -> BinaryMask {
    dilate(&erode(m, size), size)
}

/// 4-connected component labels (0 = not set), in row-major discovery order.
pub fn label_components(m: &BinaryMask) -> (Vec<u32>, u32) {
    let (w, h) = (m.width(), m.height());
    let bits = m.bits();
    let mut labels = vec![0u32; w * h];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in neighbours4(i, w, h).into_iter().flatten() {
                if bits[j] && labels[j] == 0 {
                    labels[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    (labels, next)
}

/// Up, left, right, down neighbours of pixel `i`.
pub(crate) fn neighbours4(i: usize, w: usize, h: usize) -> [Option<usize>; 4] {
    let (x, y) = (i % w, i / w);
    [
        (y > 0).then(|| i - w),
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y + 1 < h).then(|| i + w),
    ]
}

/// Fills background components that do not touch the border and have
/// fewer than `max_area` pixels.
pub fn fill_holes(m: &BinaryMask, max_area: usize) -> BinaryMask {
    let (w, h) = (m.width(), m.height());
    let inverse = BinaryMask::from_fn(w, h, |x, y| !m.get(x, y));
    let (labels, n) = label_components(&inverse);
    let mut area = vec![0usize; n as usize + 1];
    let mut touches = vec![false; n as usize + 1];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x] as usize;
            area[l] += 1;
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                touches[l] = true;
            }
        }
    }
    BinaryMask::from_fn(w, h, |x, y| {
        let l = labels[y * w + x] as usize;
        l == 0 || (!touches[l] && area[l] < max_area)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: usize, x0: usize, x1: usize) -> BinaryMask {
        BinaryMask::from_fn(w, w, |x, y| (x0..x1).contains(&x) && (x0..x1).contains(&y))
    }

    #[test]
    fn open_removes_specks_close_fills_gaps() {
        let mut m = square(20, 5, 15);
        let mut bits = m.bits().to_vec();
        bits[2 * 20 + 2] = true; // isolated speck
        bits[10 * 20 + 10] = false; // pinhole
        m = BinaryMask::new(20, 20, bits).unwrap();
        assert_eq!(close(&open(&m, 3), 3), square(20, 5, 15));
        assert_eq!(open(&close(&m, 3), 3), square(20, 5, 15));
    }

    #[test]
    fn border_regions_survive() {
        let half = BinaryMask::from_fn(16, 16, |x, _| x < 8);
        assert_eq!(open(&half, 3), half);
        assert_eq!(close(&half, 3), half);
    }

    #[test]
    fn components_and_holes() {
        let ring = BinaryMask::from_fn(9, 9, |x, y| {
            (1..8).contains(&x) && (1..8).contains(&y) && !(x == 4 && y == 4)
        });
        let (_, n) = label_components(&ring);
        assert_eq!(n, 1);
        assert_eq!(fill_holes(&ring, 2).count(), 49);
        assert_eq!(fill_holes(&ring, 1).count(), 48);
    }
}
