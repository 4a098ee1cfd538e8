//! Per-exemplar geometric randomization: surround crop, rotation, scale, placement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ExemplarCrop, SynthSettings};
use crate::mask::{BinaryMask, PixelRect};
use crate::raster::RasterImage;
use crate::resample::{bilinear_sample, quantize, resize_bilinear, resize_nearest_mask};

/// Every drawn parameter of one exemplar transform; replaying them needs no RNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    /// Pixels removed from the left, top, right and bottom edges.
    pub crop_margins: [usize; 4],
    pub angle_degrees: f64,
    pub scale: f64,
    pub position: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedExemplar {
    /// RGBA, alpha 255 on structure and 0 elsewhere.
    pub patch: RasterImage,
    /// Damage/dirt pixels, a subset of the alpha region.
    pub target: BinaryMask,
    pub position: (usize, usize),
}

impl TransformedExemplar {
    pub fn alpha_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.patch.width(), self.patch.height(), |x, y| {
            self.patch.alpha(x, y) > 0
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransformOutcome {
    Placed {
        exemplar: TransformedExemplar,
        params: TransformParams,
        /// Scales drawn and rejected because the patch outgrew the canvas.
        rejected_scales: Vec<f64>,
    },
    /// No scale in the retry budget made the patch fit the canvas.
    Skipped {
        crop_margins: [usize; 4],
        angle_degrees: f64,
        rejected_scales: Vec<f64>,
    },
}

/// Color, alpha and target planes kept separate while resampling.
struct Planes {
    rgb: RasterImage,
    alpha: BinaryMask,
    target: BinaryMask,
}

impl Planes {
    fn from_crop(crop: &ExemplarCrop) -> Self {
        Self {
            rgb: crop.patch.to_rgb(),
            alpha: crop.alpha_mask(),
            target: crop.target_mask.clone(),
        }
    }

    fn cropped(self, margins: [usize; 4]) -> Self {
        let [l, t, r, b] = margins;
        let (w, h) = self.rgb.size();
        let rect = PixelRect {
            x0: l,
            y0: t,
            x1: w - r,
            y1: h - b,
        };
        Self {
            rgb: self
                .rgb
                .crop(rect.x0, rect.y0, rect.width(), rect.height())
                .expect("margins leave a non-empty patch"),
            alpha: self.alpha.crop(rect),
            target: self.target.crop(rect),
        }
    }

    fn rotated(self, angle_degrees: f64) -> Self {
        if angle_degrees == 0.0 {
            return self;
        }
        let (w, h) = self.rgb.size();
        let (ow, oh) = rotated_size((w, h), angle_degrees);
        let (sin, cos) = angle_degrees.to_radians().sin_cos();
        let (wf, hf) = (w as f64, h as f64);
        // inverse map from output pixel centers into source continuous coordinates
        let source_of = |x: usize, y: usize| {
            let dx = x as f64 + 0.5 - ow as f64 / 2.0;
            let dy = y as f64 + 0.5 - oh as f64 / 2.0;
            (cos * dx + sin * dy + wf / 2.0, -sin * dx + cos * dy + hf / 2.0)
        };
        let nearest = |sx: f64, sy: f64| {
            (sx >= 0.0 && sy >= 0.0 && sx < wf && sy < hf).then_some((sx as usize, sy as usize))
        };
        let alpha = BinaryMask::from_fn(ow, oh, |x, y| {
            let (sx, sy) = source_of(x, y);
            nearest(sx, sy).is_some_and(|(ix, iy)| self.alpha.get(ix, iy))
        });
        let target = BinaryMask::from_fn(ow, oh, |x, y| {
            let (sx, sy) = source_of(x, y);
            nearest(sx, sy).is_some_and(|(ix, iy)| self.target.get(ix, iy))
        });
        let rgb = RasterImage::from_fn(ow, oh, 3, |x, y, c| {
            let (sx, sy) = source_of(x, y);
            quantize(bilinear_sample(&self.rgb, sx - 0.5, sy - 0.5, c))
        })
        .expect("rotated size is non-zero");
        Self { rgb, alpha, target }
    }

    fn scaled(self, scale: f64) -> Self {
        let (w, h) = scaled_size(self.rgb.size(), scale);
        Self {
            rgb: resize_bilinear(&self.rgb, w, h),
            alpha: resize_nearest_mask(&self.alpha, w, h),
            target: resize_nearest_mask(&self.target, w, h),
        }
    }

    fn into_exemplar(mut self, position: (usize, usize)) -> TransformedExemplar {
        self.target
            .intersect_with(&self.alpha)
            .expect("planes share dimensions");
        let (w, h) = self.rgb.size();
        let patch = RasterImage::from_fn(w, h, 4, |x, y, c| {
            if !self.alpha.get(x, y) {
                0
            } else if c == 3 {
                255
            } else {
                self.rgb.sample(x, y, c)
            }
        })
        .expect("patch size is non-zero");
        TransformedExemplar {
            patch,
            target: self.target,
            position,
        }
    }
}

/// Bounding size of a `size` rectangle rotated by `angle_degrees`.
pub fn rotated_size(size: (usize, usize), angle_degrees: f64) -> (usize, usize) {
    if angle_degrees == 0.0 {
        return size;
    }
    let (sin, cos) = angle_degrees.to_radians().sin_cos();
    let (w, h) = (size.0 as f64, size.1 as f64);
    let side = |v: f64| ((v - 1e-9).ceil() as usize).max(1);
    (
        side(w * cos.abs() + h * sin.abs()),
        side(w * sin.abs() + h * cos.abs()),
    )
}

pub fn scaled_size(size: (usize, usize), scale: f64) -> (usize, usize) {
    let side = |v: usize| ((v as f64 * scale).round() as usize).max(1);
    (side(size.0), side(size.1))
}

/// Size after surround crop, rotation and scaling, before placement.
pub fn transformed_size(crop_size: (usize, usize), margins: [usize; 4], angle: f64, scale: f64) -> (usize, usize) {
    let [l, t, r, b] = margins;
    let cropped = (crop_size.0 - l - r, crop_size.1 - t - b);
    scaled_size(rotated_size(cropped, angle), scale)
}

/// Renders a transform from fixed parameters.
pub fn apply_transform(crop: &ExemplarCrop, params: &TransformParams) -> TransformedExemplar {
    Planes::from_crop(crop)
        .cropped(params.crop_margins)
        .rotated(params.angle_degrees)
        .scaled(params.scale)
        .into_exemplar(params.position)
}

/// Draws a surround crop, rotation, scale and placement for `crop` and renders it.
///
/// Surround crop removes a uniform fraction of each margin between the patch
/// edge and the target's bounding box (the structure's box for clean exemplars).
/// A scale that makes the patch larger than the canvas is redrawn up to
/// `settings.scale_retries` times before the exemplar is skipped.
pub fn transform_exemplar(
    crop: &ExemplarCrop,
    settings: &SynthSettings,
    rng: &mut impl Rng,
) -> TransformOutcome {
    let (w, h) = crop.patch.size();
    let keep = crop.keep_region();
    let available = [keep.x0, keep.y0, w - keep.x1, h - keep.y1];
    let (f_lo, f_hi) = settings.surround_crop_range;
    let mut crop_margins = [0usize; 4];
    for (m, avail) in crop_margins.iter_mut().zip(available) {
        let f: f64 = rng.random_range(f_lo..=f_hi);
        *m = ((f * avail as f64).floor() as usize).min(avail);
    }
    let (a_lo, a_hi) = settings.rotation_range;
    let angle_degrees: f64 = rng.random_range(a_lo..=a_hi);

    let (s_lo, s_hi) = settings.scale_range;
    let (cw, ch) = settings.canvas;
    let mut rejected_scales = Vec::new();
    for _ in 0..=settings.scale_retries {
        let scale: f64 = rng.random_range(s_lo..=s_hi);
        let (pw, ph) = transformed_size((w, h), crop_margins, angle_degrees, scale);
        if pw > cw || ph > ch {
            rejected_scales.push(scale);
            continue;
        }
        let position = (rng.random_range(0..=cw - pw), rng.random_range(0..=ch - ph));
        let params = TransformParams {
            crop_margins,
            angle_degrees,
            scale,
            position,
        };
        let exemplar = apply_transform(crop, &params);
        debug_assert_eq!(exemplar.patch.size(), (pw, ph));
        return TransformOutcome::Placed {
            exemplar,
            params,
            rejected_scales,
        };
    }
    TransformOutcome::Skipped {
        crop_margins,
        angle_degrees,
        rejected_scales,
    }
}
