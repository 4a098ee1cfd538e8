//! Pixel-center aligned resampling: bilinear for color, nearest-neighbor for masks.

use crate::mask::BinaryMask;
use crate::raster::RasterImage;

/// Bilinear sample of channel `c` at continuous pixel coordinates, where
/// integer coordinates address pixel centers. Coordinates are clamped to the edge.
#[inline]
pub fn bilinear_sample(image: &RasterImage, sx: f64, sy: f64, c: usize) -> f64 {
    let max_x = (image.width() - 1) as f64;
    let max_y = (image.height() - 1) as f64;
    let sx = sx.clamp(0.0, max_x);
    let sy = sy.clamp(0.0, max_y);
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(image.width() - 1);
    let y1 = (y0 + 1).min(image.height() - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let top = image.sample(x0, y0, c) as f64 * (1.0 - fx) + image.sample(x1, y0, c) as f64 * fx;
    let bottom = image.sample(x0, y1, c) as f64 * (1.0 - fx) + image.sample(x1, y1, c) as f64 * fx;
    top * (1.0 - fy) + bottom * fy
}

#[inline]
pub fn quantize(value: f64) -> u8 {
    value.round().clamp(0.0, 255.0) as u8
}

pub fn resize_bilinear(image: &RasterImage, width: usize, height: usize) -> RasterImage {
    if image.size() == (width, height) {
        return image.clone();
    }
    let scale_x = image.width() as f64 / width as f64;
    let scale_y = image.height() as f64 / height as f64;
    RasterImage::from_fn(width, height, image.channels(), |x, y, c| {
        let sx = (x as f64 + 0.5) * scale_x - 0.5;
        let sy = (y as f64 + 0.5) * scale_y - 0.5;
        quantize(bilinear_sample(image, sx, sy, c))
    })
    .expect("target dimensions are non-zero")
}

/// Source index for target index `i` under nearest-neighbor, in exact integer arithmetic.
#[inline]
fn nearest_index(i: usize, from: usize, to: usize) -> usize {
    ((2 * i + 1) * from / (2 * to)).min(from - 1)
}

pub fn resize_nearest_mask(mask: &BinaryMask, width: usize, height: usize) -> BinaryMask {
    if mask.size() == (width, height) {
        return mask.clone();
    }
    let xs: Vec<usize> = (0..width)
        .map(|x| nearest_index(x, mask.width(), width))
        .collect();
    BinaryMask::from_fn(width, height, |x, y| {
        mask.get(xs[x], nearest_index(y, mask.height(), height))
    })
}

/// Scales `(width, height)` so the shorter edge becomes `short_edge`, rounding the other.
pub fn short_edge_size(width: usize, height: usize, short_edge: usize) -> (usize, usize) {
    let scaled = |long: usize, short: usize| {
        ((long as f64 * short_edge as f64 / short as f64).round() as usize).max(1)
    };
    if width >= height {
        (scaled(width, height), short_edge)
    } else {
        (short_edge, scaled(height, width))
    }
}
