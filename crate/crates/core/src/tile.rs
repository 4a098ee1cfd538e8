//! Sliding-window subdivision of large images, the downscaling alternative,
//! a seeded mock detector, and offset-and-merge aggregation of per-window
//! predictions back into the full-image frame.

use rand::Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::{Frame, PredictionSet};
use crate::label::{ClassLabel, Instance};
use crate::mask::{BinaryMask, PixelRect};
use crate::raster::RasterImage;
use crate::resample::{resize_bilinear, resize_nearest_mask};
use crate::seed::StreamRng;

pub const DEFAULT_WINDOW: usize = 1024;
pub const DEFAULT_OVERLAP: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum TileError {
    #[error("invalid tiling plan: {0}")]
    InvalidPlan(String),
    #[error("image is {actual_width}x{actual_height} but the plan expects {width}x{height}")]
    SizeMismatch {
        width: usize,
        height: usize,
        actual_width: usize,
        actual_height: usize,
    },
    #[error("scale factor must lie in (0, 1], got {0}")]
    InvalidFactor(f64),
    #[error("expected {expected} per-window prediction sets, got {actual}")]
    WindowCount { expected: usize, actual: usize },
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Window {
    pub fn rect(&self) -> PixelRect {
        PixelRect {
            x0: self.x,
            y0: self.y,
            x1: self.x + self.width,
            y1: self.y + self.height,
        }
    }
}

/// Row-major list of equal-size windows covering an image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilingPlan {
    pub image_size: (usize, usize),
    pub window_size: (usize, usize),
    pub overlap: usize,
    pub windows: Vec<Window>,
}

/// Origins at multiples of `window − overlap`, plus a final origin clamped to
/// `extent − window` when the last strided window stops short of the edge.
fn axis_origins(extent: usize, window: usize, overlap: usize) -> Vec<usize> {
    let stride = window - overlap;
    let mut origins: Vec<usize> = (0..)
        .map(|k| k * stride)
        .take_while(|&o| o + window <= extent)
        .collect();
    let last = *origins.last().expect("window fits in extent");
    if last + window < extent {
        origins.push(extent - window);
    }
    origins
}

pub fn plan_tiling(
    image_size: (usize, usize),
    window_size: (usize, usize),
    overlap: usize,
) -> Result<TilingPlan, TileError> {
    let (iw, ih) = image_size;
    let (ww, wh) = window_size;
    if ww == 0 || wh == 0 {
        return Err(TileError::InvalidPlan("window size must be non-zero".into()));
    }
    if ww > iw || wh > ih {
        return Err(TileError::InvalidPlan(format!(
            "window {ww}x{wh} is larger than image {iw}x{ih}"
        )));
    }
    if overlap >= ww.min(wh) {
        return Err(TileError::InvalidPlan(format!(
            "overlap {overlap} must be smaller than the window {ww}x{wh}"
        )));
    }
    let xs = axis_origins(iw, ww, overlap);
    let ys = axis_origins(ih, wh, overlap);
    let windows = ys
        .iter()
        .flat_map(|&y| {
            xs.iter().map(move |&x| Window {
                x,
                y,
                width: ww,
                height: wh,
            })
        })
        .collect();
    Ok(TilingPlan {
        image_size,
        window_size,
        overlap,
        windows,
    })
}

impl TilingPlan {
    fn check_image(&self, size: (usize, usize)) -> Result<(), TileError> {
        if size != self.image_size {
            return Err(TileError::SizeMismatch {
                width: self.image_size.0,
                height: self.image_size.1,
                actual_width: size.0,
                actual_height: size.1,
            });
        }
        Ok(())
    }
}

/// Pixel-exact crops in plan order.
pub fn extract_windows(image: &RasterImage, plan: &TilingPlan) -> Result<Vec<RasterImage>, TileError> {
    plan.check_image(image.size())?;
    Ok(plan
        .windows
        .par_iter()
        .map(|w| {
            image
                .crop(w.x, w.y, w.width, w.height)
                .expect("plan windows lie inside the image")
        })
        .collect())
}

/// Clips full-frame instances to each window, dropping empty fragments.
pub fn split_instances(instances: &[Instance], plan: &TilingPlan) -> Result<Vec<Vec<Instance>>, TileError> {
    for inst in instances {
        plan.check_image(inst.mask.size())?;
    }
    Ok(plan
        .windows
        .par_iter()
        .map(|w| {
            instances
                .iter()
                .filter(|inst| {
                    inst.mask
                        .bounding_rect()
                        .is_some_and(|r| r.intersects(&w.rect()))
                })
                .map(|inst| Instance {
                    class: inst.class,
                    mask: inst.mask.crop(w.rect()),
                    confidence: inst.confidence,
                })
                .filter(|inst| !inst.mask.is_empty())
                .collect()
        })
        .collect())
}

fn check_factor(factor: f64) -> Result<(), TileError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(TileError::InvalidFactor(factor));
    }
    Ok(())
}

/// Size of an image of `size` scaled by `factor`, each side rounded and at least 1.
pub fn scaled_size(size: (usize, usize), factor: f64) -> (usize, usize) {
    let side = |v: usize| ((v as f64 * factor).round() as usize).max(1);
    (side(size.0), side(size.1))
}

pub fn downscale_image(image: &RasterImage, factor: f64) -> Result<RasterImage, TileError> {
    check_factor(factor)?;
    let (w, h) = scaled_size(image.size(), factor);
    Ok(resize_bilinear(image, w, h))
}

/// Nearest-neighbor upscaling of full-frame predictions from a downscaled image
/// back to `full_size`; confidences are kept.
pub fn upscale_predictions(
    predictions: &PredictionSet,
    factor: f64,
    full_size: (usize, usize),
) -> Result<PredictionSet, TileError> {
    check_factor(factor)?;
    if predictions.frame != Frame::Full {
        return Err(TileError::FrameMismatch(
            "only full-frame predictions can be upscaled".into(),
        ));
    }
    let expected = scaled_size(full_size, factor);
    if (predictions.width, predictions.height) != expected {
        return Err(TileError::SizeMismatch {
            width: expected.0,
            height: expected.1,
            actual_width: predictions.width,
            actual_height: predictions.height,
        });
    }
    let instances = predictions
        .instances
        .par_iter()
        .map(|inst| Instance {
            class: inst.class,
            mask: resize_nearest_mask(&inst.mask, full_size.0, full_size.1),
            confidence: inst.confidence,
        })
        .collect();
    Ok(PredictionSet {
        image_id: predictions.image_id.clone(),
        width: full_size.0,
        height: full_size.1,
        frame: Frame::Full,
        instances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergeSettings {
    /// Same-class instances sharing at least this many pixels are grouped.
    pub min_overlap_pixels: u64,
}

impl Default for MergeSettings {
    fn default() -> Self {
        Self {
            min_overlap_pixels: 1,
        }
    }
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // smaller index wins so group order is input order
        if ra < rb {
            self.0[rb] = ra;
        } else if rb < ra {
            self.0[ra] = rb;
        }
    }
}

/// Groups same-class full-frame instances by transitive overlap and merges each
/// group into one instance: mask = union, confidence = max.
///
/// Output groups are ordered by their first member in `instances`.
pub fn merge_instances(instances: Vec<Instance>, settings: &MergeSettings) -> Vec<Instance> {
    let n = instances.len();
    let bounds: Vec<Option<PixelRect>> = instances.iter().map(|i| i.mask.bounding_rect()).collect();
    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let instances = &instances;
            let bounds = &bounds;
            (i + 1..n).filter_map(move |j| {
                let (a, b) = (&instances[i], &instances[j]);
                if a.class != b.class {
                    return None;
                }
                let (Some(ra), Some(rb)) = (bounds[i], bounds[j]) else {
                    return None;
                };
                if !ra.intersects(&rb) {
                    return None;
                }
                let shared = a.mask.intersection_area(&b.mask).expect("same frame");
                (shared >= settings.min_overlap_pixels.max(1)).then_some((i, j))
            })
        })
        .collect();
    let mut sets = DisjointSets::new(n);
    for (i, j) in edges {
        sets.union(i, j);
    }

    let mut slot_of_root = vec![usize::MAX; n];
    let mut merged: Vec<Instance> = Vec::new();
    for (i, inst) in instances.into_iter().enumerate() {
        let root = sets.find(i);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = merged.len();
            merged.push(inst);
        } else {
            let target = &mut merged[slot_of_root[root]];
            target.mask.union_with(&inst.mask).expect("same frame");
            target.confidence = match (target.confidence, inst.confidence) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
    }
    merged
}

/// Offsets per-window predictions into the full-image frame and merges
/// overlapping same-class instances. The result does not depend on the order
/// of `per_window`; window identity comes from each set's frame.
pub fn merge_predictions(
    per_window: &[PredictionSet],
    plan: &TilingPlan,
    settings: &MergeSettings,
) -> Result<PredictionSet, TileError> {
    if per_window.len() != plan.windows.len() {
        return Err(TileError::WindowCount {
            expected: plan.windows.len(),
            actual: per_window.len(),
        });
    }
    let mut by_window: Vec<Option<&PredictionSet>> = vec![None; plan.windows.len()];
    for set in per_window {
        let Frame::Window(k) = set.frame else {
            return Err(TileError::FrameMismatch(format!(
                "set for {:?} is in the full frame",
                set.image_id
            )));
        };
        let Some(window) = plan.windows.get(k) else {
            return Err(TileError::FrameMismatch(format!(
                "window index {k} outside plan of {} windows",
                plan.windows.len()
            )));
        };
        if (set.width, set.height) != (window.width, window.height) {
            return Err(TileError::FrameMismatch(format!(
                "window {k} set is {}x{}, window is {}x{}",
                set.width, set.height, window.width, window.height
            )));
        }
        if let Some(inst) = set.instances.iter().find(|i| i.mask.size() != (window.width, window.height)) {
            return Err(TileError::FrameMismatch(format!(
                "window {k} holds a {}x{} mask",
                inst.mask.width(),
                inst.mask.height()
            )));
        }
        if by_window[k].replace(set).is_some() {
            return Err(TileError::FrameMismatch(format!("window {k} appears twice")));
        }
    }
    let image_id = by_window[0].expect("every window present").image_id.clone();
    if let Some(other) = by_window.iter().flatten().find(|s| s.image_id != image_id) {
        return Err(TileError::FrameMismatch(format!(
            "sets belong to different images: {:?} and {:?}",
            image_id, other.image_id
        )));
    }

    let (iw, ih) = plan.image_size;
    let placed: Vec<Instance> = by_window
        .par_iter()
        .zip(plan.windows.par_iter())
        .flat_map_iter(|(set, w)| {
            set.expect("every window present")
                .instances
                .iter()
                .map(move |inst| Instance {
                    class: inst.class,
                    mask: inst.mask.placed(iw, ih, w.x as i64, w.y as i64),
                    confidence: inst.confidence,
                })
        })
        .collect();
    Ok(PredictionSet {
        image_id,
        width: iw,
        height: ih,
        frame: Frame::Full,
        instances: merge_instances(placed, settings),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockDetectorSettings {
    /// Chebyshev radius of the square structuring element applied to ground truth.
    pub dilation_radius: usize,
    pub seed: u64,
    /// Fraction of emitted predictions that are false positives, in `[0, 1)`.
    pub false_positive_rate: f64,
}

impl Default for MockDetectorSettings {
    fn default() -> Self {
        Self {
            dilation_radius: 2,
            seed: 0,
            false_positive_rate: 0.0,
        }
    }
}

const FALSE_POSITIVE_ATTEMPTS: usize = 64;

/// Stand-in for the neural detector: dilated ground truth with seeded
/// confidences in `[0.5, 1]`, plus `round(n·r/(1−r))` rectangular false
/// positives placed clear of every dilated ground-truth mask.
pub fn mock_detect(
    image_id: &str,
    size: (usize, usize),
    ground_truth: &[Instance],
    settings: &MockDetectorSettings,
) -> PredictionSet {
    let (w, h) = size;
    let mut rng = StreamRng::seed_from_u64(settings.seed);
    let mut set = PredictionSet::new(image_id, w, h, Frame::Full);
    let mut occupied = BinaryMask::new(w, h);
    for gt in ground_truth {
        let mask = gt.mask.dilate(settings.dilation_radius);
        occupied.union_with(&mask).expect("ground truth in frame");
        let confidence = rng.random_range(0.5..=1.0);
        set.instances.push(Instance::prediction(gt.class, mask, confidence));
    }

    let rate = settings.false_positive_rate.clamp(0.0, 0.99);
    let n_fp = if rate > 0.0 {
        (ground_truth.len() as f64 * rate / (1.0 - rate)).round() as usize
    } else {
        0
    };
    let min_side = 4.min(w).min(h);
    let max_side = (w.min(h) / 10).max(min_side);
    for _ in 0..n_fp {
        for _ in 0..FALSE_POSITIVE_ATTEMPTS {
            let bw = rng.random_range(min_side..=max_side);
            let bh = rng.random_range(min_side..=max_side);
            let x0 = rng.random_range(0..=w - bw);
            let y0 = rng.random_range(0..=h - bh);
            let rect = PixelRect {
                x0,
                y0,
                x1: x0 + bw,
                y1: y0 + bh,
            };
            let mask = BinaryMask::rectangle(w, h, rect);
            if occupied.intersects(&mask).expect("same frame") {
                continue;
            }
            let class = if ground_truth.is_empty() {
                ClassLabel::Damage
            } else {
                ground_truth[rng.random_range(0..ground_truth.len())].class
            };
            let confidence = rng.random_range(0.5..=1.0);
            occupied.union_with(&mask).expect("same frame");
            set.instances.push(Instance::prediction(class, mask, confidence));
            break;
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_mask(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMask {
        BinaryMask::rectangle(w, h, PixelRect { x0, y0, x1, y1 })
    }

    #[test]
    fn full_resolution_plan() {
        let plan = plan_tiling((4000, 2250), (1024, 1024), 256).unwrap();
        assert_eq!(plan.windows.len(), 15);
        let mut xs: Vec<usize> = plan.windows.iter().map(|w| w.x).collect();
        xs.sort();
        xs.dedup();
        let mut ys: Vec<usize> = plan.windows.iter().map(|w| w.y).collect();
        ys.dedup();
        assert_eq!(xs, vec![0, 768, 1536, 2304, 2976]);
        assert_eq!(ys, vec![0, 768, 1226]);
    }

    #[test]
    fn degenerate_plans() {
        let plan = plan_tiling((300, 200), (300, 200), 50).unwrap();
        assert_eq!(
            plan.windows,
            vec![Window {
                x: 0,
                y: 0,
                width: 300,
                height: 200
            }]
        );
        let exact = plan_tiling((10, 30), (10, 10), 0).unwrap();
        assert!(exact.windows.iter().all(|w| w.x == 0));
        assert_eq!(exact.windows.len(), 3);
        assert!(plan_tiling((10, 10), (11, 5), 0).is_err());
        assert!(plan_tiling((10, 10), (5, 5), 5).is_err());
    }

    #[test]
    fn single_window_extracts_the_image() {
        let img = RasterImage::from_fn(9, 7, 3, |x, y, c| (x + y * 9 + c) as u8).unwrap();
        let plan = plan_tiling((9, 7), (9, 7), 0).unwrap();
        assert_eq!(extract_windows(&img, &plan).unwrap(), vec![img.clone()]);
        let other = plan_tiling((9, 8), (9, 8), 0).unwrap();
        assert!(matches!(
            extract_windows(&img, &other),
            Err(TileError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn identical_detections_in_two_windows_collapse() {
        let plan = plan_tiling((30, 10), (20, 10), 5).unwrap();
        assert_eq!(plan.windows.len(), 2);
        // full-frame square 12..16 lies in both windows
        let mk = |k: usize, conf: f64| {
            let w = plan.windows[k];
            let mut set = PredictionSet::new("a", 20, 10, Frame::Window(k));
            set.instances.push(Instance::prediction(
                ClassLabel::Damage,
                rect_mask(20, 10, 12 - w.x, 2, 16 - w.x, 6),
                conf,
            ));
            set
        };
        let merged = merge_predictions(&[mk(0, 0.6), mk(1, 0.8)], &plan, &MergeSettings::default()).unwrap();
        assert_eq!(merged.instances.len(), 1);
        assert_eq!(merged.instances[0].mask, rect_mask(30, 10, 12, 2, 16, 6));
        assert_eq!(merged.instances[0].confidence, Some(0.8));
    }

    #[test]
    fn disjoint_and_cross_class_detections_stay_apart() {
        let a = Instance::prediction(ClassLabel::Damage, rect_mask(20, 20, 0, 0, 5, 5), 0.5);
        let b = Instance::prediction(ClassLabel::Damage, rect_mask(20, 20, 10, 10, 15, 15), 0.7);
        let c = Instance::prediction(ClassLabel::Dirt, rect_mask(20, 20, 2, 2, 12, 12), 0.9);
        let merged = merge_instances(vec![a.clone(), b.clone(), c.clone()], &MergeSettings::default());
        assert_eq!(merged, vec![a, b, c]);
    }

    #[test]
    fn overlap_chains_merge_transitively() {
        let a = Instance::prediction(ClassLabel::Damage, rect_mask(30, 5, 0, 0, 10, 5), 0.5);
        let b = Instance::prediction(ClassLabel::Damage, rect_mask(30, 5, 8, 0, 18, 5), 0.9);
        let c = Instance::prediction(ClassLabel::Damage, rect_mask(30, 5, 16, 0, 26, 5), 0.7);
        assert!(!a.mask.intersects(&c.mask).unwrap());
        let merged = merge_instances(vec![a, c, b], &MergeSettings::default());
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].mask, rect_mask(30, 5, 0, 0, 26, 5));
        assert_eq!(merged[0].confidence, Some(0.9));
    }

    #[test]
    fn min_overlap_setting_splits_thin_contacts() {
        let a = Instance::prediction(ClassLabel::Damage, rect_mask(10, 10, 0, 0, 5, 5), 0.5);
        let b = Instance::prediction(ClassLabel::Damage, rect_mask(10, 10, 4, 4, 9, 9), 0.5);
        let strict = MergeSettings {
            min_overlap_pixels: 2,
        };
        assert_eq!(merge_instances(vec![a.clone(), b.clone()], &strict).len(), 2);
        assert_eq!(merge_instances(vec![a, b], &MergeSettings::default()).len(), 1);
    }

    #[test]
    fn merge_rejects_inconsistent_frames() {
        let plan = plan_tiling((30, 10), (20, 10), 5).unwrap();
        let set = |k| PredictionSet::new("a", 20, 10, Frame::Window(k));
        let settings = MergeSettings::default();
        assert!(matches!(
            merge_predictions(&[set(0)], &plan, &settings),
            Err(TileError::WindowCount { expected: 2, actual: 1 })
        ));
        assert!(matches!(
            merge_predictions(&[set(0), set(0)], &plan, &settings),
            Err(TileError::FrameMismatch(_))
        ));
        assert!(matches!(
            merge_predictions(&[set(0), set(5)], &plan, &settings),
            Err(TileError::FrameMismatch(_))
        ));
        let wrong_size = PredictionSet::new("a", 10, 10, Frame::Window(1));
        assert!(matches!(
            merge_predictions(&[set(0), wrong_size], &plan, &settings),
            Err(TileError::FrameMismatch(_))
        ));
        let other_image = PredictionSet::new("b", 20, 10, Frame::Window(1));
        assert!(matches!(
            merge_predictions(&[set(0), other_image], &plan, &settings),
            Err(TileError::FrameMismatch(_))
        ));
    }

    #[test]
    fn mock_identity_perturbation() {
        let gt = vec![Instance::ground_truth(ClassLabel::Dirt, rect_mask(16, 16, 3, 3, 9, 7))];
        let settings = MockDetectorSettings {
            dilation_radius: 0,
            seed: 3,
            false_positive_rate: 0.0,
        };
        let preds = mock_detect("a", (16, 16), &gt, &settings);
        assert_eq!(preds.instances.len(), 1);
        assert_eq!(preds.instances[0].mask, gt[0].mask);
        assert_eq!(preds.instances[0].class, ClassLabel::Dirt);
        let conf = preds.instances[0].confidence.unwrap();
        assert!((0.5..=1.0).contains(&conf));
        assert_eq!(mock_detect("a", (16, 16), &gt, &settings), preds);
    }

    #[test]
    fn mock_dilation_area() {
        let gt = vec![Instance::ground_truth(ClassLabel::Damage, rect_mask(40, 40, 10, 10, 20, 20))];
        let preds = mock_detect("a", (40, 40), &gt, &MockDetectorSettings::default());
        assert_eq!(preds.instances[0].mask.area(), 196);
    }

    #[test]
    fn mock_false_positive_count() {
        let gt: Vec<Instance> = (0..5)
            .map(|i| Instance::ground_truth(ClassLabel::Damage, rect_mask(200, 200, 10 + 35 * i, 10, 20 + 35 * i, 20)))
            .collect();
        let settings = MockDetectorSettings {
            dilation_radius: 1,
            seed: 11,
            false_positive_rate: 0.5,
        };
        let preds = mock_detect("a", (200, 200), &gt, &settings);
        assert_eq!(preds.instances.len(), 10);
        preds.validate().unwrap();
    }

    #[test]
    fn factor_bounds() {
        let img = RasterImage::filled(10, 10, &[1, 2, 3]).unwrap();
        assert_eq!(downscale_image(&img, 1.0).unwrap(), img);
        assert_eq!(downscale_image(&img, 0.5).unwrap().size(), (5, 5));
        assert_eq!(downscale_image(&img, 0.0), Err(TileError::InvalidFactor(0.0)));
        assert_eq!(downscale_image(&img, 1.5), Err(TileError::InvalidFactor(1.5)));
        assert_eq!(scaled_size((4000, 2250), 0.5), (2000, 1125));
    }

    #[test]
    fn upscale_identity_at_unit_factor() {
        let mut set = PredictionSet::new("a", 12, 8, Frame::Full);
        set.instances
            .push(Instance::prediction(ClassLabel::Damage, rect_mask(12, 8, 1, 1, 5, 6), 0.7));
        assert_eq!(upscale_predictions(&set, 1.0, (12, 8)).unwrap(), set);
        let up = upscale_predictions(&set, 0.5, (24, 16)).unwrap();
        assert_eq!(up.instances[0].mask, rect_mask(24, 16, 2, 2, 10, 12));
        assert!(upscale_predictions(&set, 0.5, (30, 30)).is_err());
    }
}
