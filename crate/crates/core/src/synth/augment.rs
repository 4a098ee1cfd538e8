//! Basic augmentation: short-edge rescale, horizontal flip, random crop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::label::Instance;
use crate::mask::PixelRect;
use crate::raster::RasterImage;
use crate::resample::{resize_bilinear, resize_nearest_mask, short_edge_size};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub short_edge_sizes: Vec<usize>,
    pub hflip_probability: f64,
    pub crop_size: (usize, usize),
}

/// The draws behind one augmented image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub short_edge: usize,
    pub scaled_size: (usize, usize),
    pub flipped: bool,
    pub crop_origin: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub image: RasterImage,
    pub instances: Vec<Instance>,
    pub record: AugmentRecord,
}

/// Applies the same rescale, flip and crop to the image and every mask;
/// instances left empty by the crop are dropped.
pub fn basic_augment(
    image: &RasterImage,
    instances: &[Instance],
    spec: &AugmentSpec,
    rng: &mut impl Rng,
) -> Result<AugmentedSample, SynthError> {
    if spec.short_edge_sizes.is_empty() {
        return Err(SynthError::EmptySizeList);
    }
    if !(0.0..=1.0).contains(&spec.hflip_probability) {
        return Err(SynthError::InvalidProbability(spec.hflip_probability));
    }
    let short_edge = spec.short_edge_sizes[rng.random_range(0..spec.short_edge_sizes.len())];
    let (w, h) = short_edge_size(image.width(), image.height(), short_edge);
    let (cw, ch) = spec.crop_size;
    if cw == 0 || ch == 0 || cw > w || ch > h {
        return Err(SynthError::CropTooLarge {
            crop_width: cw,
            crop_height: ch,
            width: w,
            height: h,
        });
    }
    let flipped = rng.random_bool(spec.hflip_probability);
    let crop_origin = (rng.random_range(0..=w - cw), rng.random_range(0..=h - ch));
    let rect = PixelRect {
        x0: crop_origin.0,
        y0: crop_origin.1,
        x1: crop_origin.0 + cw,
        y1: crop_origin.1 + ch,
    };

    let mut out = resize_bilinear(image, w, h);
    if flipped {
        out = out.flip_horizontal();
    }
    let out = out.crop(rect.x0, rect.y0, cw, ch).expect("crop checked against scaled size");
    let instances = instances
        .iter()
        .filter_map(|inst| {
            let mut mask = resize_nearest_mask(&inst.mask, w, h);
            if flipped {
                mask = mask.flip_horizontal();
            }
            let mask = mask.crop(rect);
            (!mask.is_empty()).then(|| Instance { mask, ..inst.clone() })
        })
        .collect();
    Ok(AugmentedSample {
        image: out,
        instances,
        record: AugmentRecord {
            short_edge,
            scaled_size: (w, h),
            flipped,
            crop_origin,
        },
    })
}
