//! Binary occupancy masks and the set operations the metrics are built on.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("mask dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("occupancy buffer holds {actual} entries, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
}

/// Axis-aligned pixel rectangle, `x0..x1` by `y0..y1` (exclusive upper bounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn intersects(&self, other: &PixelRect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

/// Exact set sizes of `a ∩ b` and `a ∪ b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Overlap {
    pub intersection: u64,
    pub union: u64,
}

/// Row-major `width × height` occupancy raster.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: FixedBitSet,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: FixedBitSet::with_capacity(width * height),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.bits.insert(y * width + x);
                }
            }
        }
        mask
    }

    pub fn from_bools(width: usize, height: usize, values: &[bool]) -> Result<Self, MaskError> {
        if values.len() != width * height {
            return Err(MaskError::BufferLength {
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(Self::from_fn(width, height, |x, y| values[y * width + x]))
    }

    /// Filled axis-aligned rectangle, clipped to the mask bounds.
    pub fn rectangle(width: usize, height: usize, rect: PixelRect) -> Self {
        let mut mask = Self::new(width, height);
        for y in rect.y0.min(height)..rect.y1.min(height) {
            let row = y * width;
            mask.bits
                .insert_range(row + rect.x0.min(width)..row + rect.x1.min(width));
        }
        mask
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits.contains(y * self.width + x)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits.set(y * self.width + x, value);
    }

    /// Bit at linear row-major index.
    #[inline]
    pub fn get_index(&self, index: usize) -> bool {
        self.bits.contains(index)
    }

    pub fn area(&self) -> u64 {
        self.bits.count_ones(..) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    /// Row-major linear indices of set pixels.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn check_same_size(&self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.size() != other.size() {
            return Err(MaskError::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            });
        }
        Ok(())
    }

    pub fn overlap(&self, other: &BinaryMask) -> Result<Overlap, MaskError> {
        self.check_same_size(other)?;
        Ok(Overlap {
            intersection: self.bits.intersection_count(&other.bits) as u64,
            union: self.bits.union_count(&other.bits) as u64,
        })
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64, MaskError> {
        self.check_same_size(other)?;
        Ok(self.bits.intersection_count(&other.bits) as u64)
    }

    /// True when the masks share at least one pixel.
    pub fn intersects(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        self.check_same_size(other)?;
        Ok(!self.bits.is_disjoint(&other.bits))
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), MaskError> {
        self.check_same_size(other)?;
        self.bits.union_with(&other.bits);
        Ok(())
    }

    pub fn intersect_with(&mut self, other: &BinaryMask) -> Result<(), MaskError> {
        self.check_same_size(other)?;
        self.bits.intersect_with(&other.bits);
        Ok(())
    }

    pub fn difference_with(&mut self, other: &BinaryMask) -> Result<(), MaskError> {
        self.check_same_size(other)?;
        self.bits.difference_with(&other.bits);
        Ok(())
    }

    /// Tight bounding rectangle of the set pixels, `None` for an empty mask.
    pub fn bounding_rect(&self) -> Option<PixelRect> {
        let mut ones = self.bits.ones();
        let first = ones.next()?;
        let (mut x0, mut x1) = (first % self.width, first % self.width + 1);
        let y0 = first / self.width;
        let mut y1 = y0 + 1;
        for index in ones {
            let (x, y) = (index % self.width, index / self.width);
            x0 = x0.min(x);
            x1 = x1.max(x + 1);
            y1 = y + 1;
        }
        Some(PixelRect { x0, y0, x1, y1 })
    }

    /// Copies this mask into a `width × height` frame with its origin at
    /// `(dx, dy)`; pixels landing outside the frame are dropped.
    pub fn placed(&self, width: usize, height: usize, dx: i64, dy: i64) -> BinaryMask {
        let mut out = BinaryMask::new(width, height);
        for index in self.bits.ones() {
            let x = (index % self.width) as i64 + dx;
            let y = (index / self.width) as i64 + dy;
            if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                out.bits.insert(y as usize * width + x as usize);
            }
        }
        out
    }

    /// The sub-mask under `rect`, which must lie inside the mask.
    pub fn crop(&self, rect: PixelRect) -> BinaryMask {
        assert!(rect.x1 <= self.width && rect.y1 <= self.height && rect.x0 <= rect.x1 && rect.y0 <= rect.y1);
        BinaryMask::from_fn(rect.width(), rect.height(), |x, y| {
            self.get(rect.x0 + x, rect.y0 + y)
        })
    }

    pub fn flip_horizontal(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    /// Morphological dilation by a `(2r+1)²` square, clipped to the mask bounds.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        if radius == 0 || self.is_empty() {
            return self.clone();
        }
        let Some(bounds) = self.bounding_rect() else {
            return self.clone();
        };
        let x0 = bounds.x0.saturating_sub(radius);
        let y0 = bounds.y0.saturating_sub(radius);
        let x1 = (bounds.x1 + radius).min(self.width);
        let y1 = (bounds.y1 + radius).min(self.height);
        let w = x1 - x0;
        let h = y1 - y0;

        // Separable max filter: rows, then columns, each through a running count.
        let mut horizontal = vec![false; w * h];
        for y in 0..h {
            let mut count = 0usize;
            let src = |x: usize| self.get(x0 + x, y0 + y) as usize;
            for x in 0..radius.min(w) {
                count += src(x);
            }
            for x in 0..w {
                if x + radius < w {
                    count += src(x + radius);
                }
                if x > radius {
                    count -= src(x - radius - 1);
                }
                horizontal[y * w + x] = count > 0;
            }
        }
        let mut out = BinaryMask::new(self.width, self.height);
        for x in 0..w {
            let mut count = 0usize;
            let src = |y: usize| horizontal[y * w + x] as usize;
            for y in 0..radius.min(h) {
                count += src(y);
            }
            for y in 0..h {
                if y + radius < h {
                    count += src(y + radius);
                }
                if y > radius {
                    count -= src(y - radius - 1);
                }
                if count > 0 {
                    out.set(x0 + x, y0 + y, true);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bar(width: usize, x0: usize, len: usize) -> BinaryMask {
        BinaryMask::from_fn(width, 1, |x, _| x >= x0 && x < x0 + len)
    }

    #[test]
    fn identical_masks_overlap_fully() {
        let a = BinaryMask::rectangle(8, 8, PixelRect { x0: 1, y0: 2, x1: 5, y1: 6 });
        let area = a.area();
        assert_eq!(area, 16);
        assert_eq!(
            a.overlap(&a).unwrap(),
            Overlap {
                intersection: area,
                union: area
            }
        );
    }

    #[test]
    fn disjoint_masks_add_up() {
        let a = BinaryMask::rectangle(10, 10, PixelRect { x0: 0, y0: 0, x1: 10, y1: 1 });
        let b = BinaryMask::rectangle(10, 10, PixelRect { x0: 0, y0: 5, x1: 10, y1: 7 });
        assert_eq!((a.area(), b.area()), (10, 20));
        assert_eq!(
            a.overlap(&b).unwrap(),
            Overlap {
                intersection: 0,
                union: 30
            }
        );
    }

    #[test]
    fn bars_sharing_two_pixels() {
        let a = bar(6, 0, 4);
        let b = bar(6, 2, 4);
        assert_eq!(
            a.overlap(&b).unwrap(),
            Overlap {
                intersection: 2,
                union: 6
            }
        );
    }

    #[test]
    fn overlap_rejects_mismatched_sizes() {
        let err = BinaryMask::new(3, 3).overlap(&BinaryMask::new(3, 4)).unwrap_err();
        assert!(matches!(err, MaskError::DimensionMismatch { .. }));
    }

    #[test]
    fn dilating_a_square_grows_it_by_the_radius() {
        let square = BinaryMask::rectangle(40, 40, PixelRect { x0: 15, y0: 15, x1: 25, y1: 25 });
        let grown = square.dilate(2);
        assert_eq!(grown.area(), 14 * 14);
        assert_eq!(
            grown.bounding_rect(),
            Some(PixelRect { x0: 13, y0: 13, x1: 27, y1: 27 })
        );
        // clipped at the border
        let corner = BinaryMask::rectangle(10, 10, PixelRect { x0: 0, y0: 0, x1: 2, y1: 2 });
        assert_eq!(corner.dilate(3).area(), 25);
    }

    #[test]
    fn placement_clips_to_the_frame() {
        let m = BinaryMask::rectangle(4, 4, PixelRect { x0: 0, y0: 0, x1: 4, y1: 4 });
        let placed = m.placed(6, 6, 4, -1);
        assert_eq!(placed.area(), 2 * 3);
        assert!(placed.get(5, 0) && placed.get(4, 2));
    }

    fn arb_mask() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
            (
                proptest::collection::vec(any::<bool>(), w * h),
                proptest::collection::vec(any::<bool>(), w * h),
            )
                .prop_map(move |(a, b)| {
                    (
                        BinaryMask::from_bools(w, h, &a).unwrap(),
                        BinaryMask::from_bools(w, h, &b).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn overlap_laws((a, b) in arb_mask()) {
            let ab = a.overlap(&b).unwrap();
            let ba = b.overlap(&a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab.intersection <= a.area().min(b.area()));
            prop_assert_eq!(ab.union, a.area() + b.area() - ab.intersection);
        }

        #[test]
        fn dilation_matches_brute_force((a, _) in arb_mask(), r in 0usize..4) {
            let fast = a.dilate(r);
            let (w, h) = a.size();
            let slow = BinaryMask::from_fn(w, h, |x, y| {
                let xs = x.saturating_sub(r)..=(x + r).min(w - 1);
                xs.clone().any(|sx| (y.saturating_sub(r)..=(y + r).min(h - 1)).any(|sy| a.get(sx, sy)))
            });
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn bounding_rect_is_tight((a, _) in arb_mask()) {
            match a.bounding_rect() {
                None => prop_assert!(a.is_empty()),
                Some(r) => {
                    let inside = a.crop(r).area();
                    prop_assert_eq!(inside, a.area());
                    prop_assert!((r.x0..r.x1).any(|x| a.get(x, r.y0)));
                    prop_assert!((r.x0..r.x1).any(|x| a.get(x, r.y1 - 1)));
                    prop_assert!((r.y0..r.y1).any(|y| a.get(r.x0, y)));
                    prop_assert!((r.y0..r.y1).any(|y| a.get(r.x1 - 1, y)));
                }
            }
        }
    }
}
