//! Any-overlap precision/recall, dataset-aggregate IoU, threshold sweeps, and
//! physical area measurement from a reference component.
//!
//! A prediction counts as correct when it shares at least one pixel with a
//! ground-truth instance of the same class; a ground-truth instance counts as
//! detected when at least one kept prediction of its class touches it. IoU
//! sums intersection and union areas over every image before dividing,
//! rather than averaging per-image ratios.
//!
//! Undefined values (no kept predictions, no ground truth, empty unions) are
//! `None` and never coerced to 0 or 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::{Frame, PredictionSet};
use crate::label::{ClassLabel, Instance};
use crate::mask::BinaryMask;
use crate::raster::RasterImage;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("image {image_id:?}: {reason}")]
    InconsistentPair { image_id: String, reason: String },
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("threshold list is empty")]
    EmptyThresholds,
    #[error("thresholds must be strictly increasing ({previous} then {next})")]
    UnsortedThresholds { previous: f64, next: f64 },
    #[error("reference scale needs positive length and extent, got {length} over {extent} px")]
    InvalidScale { length: f64, extent: f64 },
}

/// Ground truth and full-frame predictions for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub image_id: String,
    pub ground_truth: Vec<Instance>,
    pub predictions: PredictionSet,
}

impl EvalPair {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |reason: String| EvalError::InconsistentPair {
            image_id: self.image_id.clone(),
            reason,
        };
        if self.predictions.frame != Frame::Full {
            return Err(fail("predictions must be in the full-image frame".into()));
        }
        let size = (self.predictions.width, self.predictions.height);
        for (i, gt) in self.ground_truth.iter().enumerate() {
            if gt.confidence.is_some() {
                return Err(fail(format!("ground truth {i} carries a confidence")));
            }
            if gt.mask.size() != size {
                return Err(fail(format!(
                    "ground truth {i} is {}x{}, predictions are {}x{}",
                    gt.mask.width(),
                    gt.mask.height(),
                    size.0,
                    size.1
                )));
            }
        }
        for (i, p) in self.predictions.instances.iter().enumerate() {
            if p.mask.size() != size {
                return Err(fail(format!(
                    "prediction {i} is {}x{}, frame is {}x{}",
                    p.mask.width(),
                    p.mask.height(),
                    size.0,
                    size.1
                )));
            }
        }
        Ok(())
    }
}

fn check_threshold(t: f64) -> Result<(), EvalError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(EvalError::Threshold(t));
    }
    Ok(())
}

fn validate_all(pairs: &[EvalPair]) -> Result<(), EvalError> {
    pairs.iter().try_for_each(EvalPair::validate)
}

fn in_filter(class: ClassLabel, filter: Option<ClassLabel>) -> bool {
    filter.is_none_or(|f| f == class)
}

fn kept(
    pair: &EvalPair,
    threshold: f64,
    filter: Option<ClassLabel>,
) -> impl Iterator<Item = &Instance> {
    pair.predictions.instances.iter().filter(move |p| {
        in_filter(p.class, filter) && p.confidence.unwrap_or(0.0) >= threshold
    })
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Raw counts behind one precision/recall point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OverlapCounts {
    pub predictions: u64,
    pub matched_predictions: u64,
    pub ground_truth: u64,
    pub detected_ground_truth: u64,
}

impl OverlapCounts {
    fn add(self, o: OverlapCounts) -> OverlapCounts {
        OverlapCounts {
            predictions: self.predictions + o.predictions,
            matched_predictions: self.matched_predictions + o.matched_predictions,
            ground_truth: self.ground_truth + o.ground_truth,
            detected_ground_truth: self.detected_ground_truth + o.detected_ground_truth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub counts: OverlapCounts,
}

impl From<OverlapCounts> for PrecisionRecall {
    fn from(counts: OverlapCounts) -> Self {
        Self {
            precision: ratio(counts.matched_predictions, counts.predictions),
            recall: ratio(counts.detected_ground_truth, counts.ground_truth),
            counts,
        }
    }
}

fn touches(a: &Instance, b: &Instance) -> bool {
    a.class == b.class && a.mask.intersects(&b.mask).expect("pair validated")
}

pub fn precision_recall(
    pairs: &[EvalPair],
    threshold: f64,
    class_filter: Option<ClassLabel>,
) -> Result<PrecisionRecall, EvalError> {
    check_threshold(threshold)?;
    validate_all(pairs)?;
    let counts = pairs
        .par_iter()
        .map(|pair| {
            let preds: Vec<&Instance> = kept(pair, threshold, class_filter).collect();
            let gts: Vec<&Instance> = pair
                .ground_truth
                .iter()
                .filter(|g| in_filter(g.class, class_filter))
                .collect();
            OverlapCounts {
                predictions: preds.len() as u64,
                matched_predictions: preds
                    .iter()
                    .filter(|p| gts.iter().any(|g| touches(p, g)))
                    .count() as u64,
                ground_truth: gts.len() as u64,
                detected_ground_truth: gts
                    .iter()
                    .filter(|g| preds.iter().any(|p| touches(p, g)))
                    .count() as u64,
            }
        })
        .reduce(OverlapCounts::default, OverlapCounts::add);
    Ok(counts.into())
}

/// Summed intersection and union areas behind one IoU value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AreaTotals {
    pub intersection: u64,
    pub union: u64,
}

impl AreaTotals {
    fn add(self, o: AreaTotals) -> AreaTotals {
        AreaTotals {
            intersection: self.intersection + o.intersection,
            union: self.union + o.union,
        }
    }

    pub fn iou(&self) -> Option<f64> {
        ratio(self.intersection, self.union)
    }
}

fn union_of<'a>(width: usize, height: usize, masks: impl Iterator<Item = &'a BinaryMask>) -> BinaryMask {
    let mut acc = BinaryMask::new(width, height);
    for m in masks {
        acc.union_with(m).expect("pair validated");
    }
    acc
}

fn classes(filter: Option<ClassLabel>) -> Vec<ClassLabel> {
    match filter {
        Some(c) => vec![c],
        None => ClassLabel::ALL.to_vec(),
    }
}

pub fn aggregate_area(
    pairs: &[EvalPair],
    threshold: f64,
    class_filter: Option<ClassLabel>,
) -> Result<AreaTotals, EvalError> {
    check_threshold(threshold)?;
    validate_all(pairs)?;
    let classes = classes(class_filter);
    Ok(pairs
        .par_iter()
        .map(|pair| {
            let (w, h) = (pair.predictions.width, pair.predictions.height);
            classes
                .iter()
                .map(|&class| {
                    let pred = union_of(
                        w,
                        h,
                        kept(pair, threshold, Some(class)).map(|p| &p.mask),
                    );
                    let gt = union_of(
                        w,
                        h,
                        pair.ground_truth
                            .iter()
                            .filter(|g| g.class == class)
                            .map(|g| &g.mask),
                    );
                    let o = pred.overlap(&gt).expect("same frame");
                    AreaTotals {
                        intersection: o.intersection,
                        union: o.union,
                    }
                })
                .fold(AreaTotals::default(), AreaTotals::add)
        })
        .reduce(AreaTotals::default, AreaTotals::add))
}

/// Total intersection over total union across all pairs; per-class unions
/// are summed when `class_filter` is `None`.
pub fn aggregate_iou(
    pairs: &[EvalPair],
    threshold: f64,
    class_filter: Option<ClassLabel>,
) -> Result<Option<f64>, EvalError> {
    Ok(aggregate_area(pairs, threshold, class_filter)?.iou())
}

/// `0.00, 0.01, …, 1.00`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub aggregate_iou: Option<f64>,
    pub counts: OverlapCounts,
    pub areas: AreaTotals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub class_filter: Option<ClassLabel>,
    pub rows: Vec<SweepRow>,
}

impl ThresholdSweep {
    pub fn thresholds(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.threshold)
    }

    /// `threshold,precision,recall,aggregate_iou`; undefined cells are empty.
    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("threshold,precision,recall,aggregate_iou\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.threshold,
                cell(r.precision),
                cell(r.recall),
                cell(r.aggregate_iou)
            ));
        }
        out
    }

    /// Row with the highest defined aggregate IoU (earliest on ties).
    pub fn best_iou(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.aggregate_iou.is_some())
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if b.aggregate_iou >= r.aggregate_iou => Some(b),
                _ => Some(r),
            })
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<(), EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::EmptyThresholds);
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    for w in thresholds.windows(2) {
        if w[1] <= w[0] {
            return Err(EvalError::UnsortedThresholds {
                previous: w[0],
                next: w[1],
            });
        }
    }
    Ok(())
}

/// Per-image sweep state: overlap flags are threshold independent, so one
/// pass from the highest threshold down grows the kept set incrementally.
fn sweep_pair(pair: &EvalPair, thresholds: &[f64], filter: Option<ClassLabel>) -> Vec<(OverlapCounts, AreaTotals)> {
    let (w, h) = (pair.predictions.width, pair.predictions.height);
    let gts: Vec<&Instance> = pair
        .ground_truth
        .iter()
        .filter(|g| in_filter(g.class, filter))
        .collect();
    let mut preds: Vec<(&Instance, f64, bool)> = pair
        .predictions
        .instances
        .iter()
        .filter(|p| in_filter(p.class, filter))
        .map(|p| {
            let matched = gts.iter().any(|g| touches(p, g));
            (p, p.confidence.unwrap_or(0.0), matched)
        })
        .collect();
    // highest confidence among touching predictions decides when a gt is detected
    let gt_best: Vec<Option<f64>> = gts
        .iter()
        .map(|g| {
            preds
                .iter()
                .filter(|(p, _, _)| touches(p, g))
                .map(|&(_, c, _)| c)
                .reduce(f64::max)
        })
        .collect();
    preds.sort_by(|a, b| b.1.total_cmp(&a.1));

    let class_list = classes(filter);
    let gt_union: Vec<BinaryMask> = class_list
        .iter()
        .map(|&c| union_of(w, h, gts.iter().filter(|g| g.class == c).map(|g| &g.mask)))
        .collect();
    let mut pred_union: Vec<BinaryMask> = class_list.iter().map(|_| BinaryMask::new(w, h)).collect();

    let mut out = vec![(OverlapCounts::default(), AreaTotals::default()); thresholds.len()];
    let mut next = 0usize;
    let mut matched = 0u64;
    for (slot, &t) in thresholds.iter().enumerate().rev() {
        while next < preds.len() && preds[next].1 >= t {
            let (p, _, m) = preds[next];
            matched += m as u64;
            let k = class_list.iter().position(|&c| c == p.class).expect("filtered");
            pred_union[k].union_with(&p.mask).expect("same frame");
            next += 1;
        }
        let counts = OverlapCounts {
            predictions: next as u64,
            matched_predictions: matched,
            ground_truth: gts.len() as u64,
            detected_ground_truth: gt_best.iter().filter(|b| b.is_some_and(|c| c >= t)).count() as u64,
        };
        let areas = pred_union
            .iter()
            .zip(&gt_union)
            .map(|(p, g)| {
                let o = p.overlap(g).expect("same frame");
                AreaTotals {
                    intersection: o.intersection,
                    union: o.union,
                }
            })
            .fold(AreaTotals::default(), AreaTotals::add);
        out[slot] = (counts, areas);
    }
    out
}

/// Both metrics at every threshold of a strictly increasing grid.
pub fn sweep(
    pairs: &[EvalPair],
    thresholds: &[f64],
    class_filter: Option<ClassLabel>,
) -> Result<ThresholdSweep, EvalError> {
    check_thresholds(thresholds)?;
    validate_all(pairs)?;
    let zero = || vec![(OverlapCounts::default(), AreaTotals::default()); thresholds.len()];
    let totals = pairs
        .par_iter()
        .map(|pair| sweep_pair(pair, thresholds, class_filter))
        .reduce(zero, |a, b| {
            a.into_iter()
                .zip(b)
                .map(|((ca, aa), (cb, ab))| (ca.add(cb), aa.add(ab)))
                .collect()
        });
    let rows = thresholds
        .iter()
        .zip(totals)
        .map(|(&threshold, (counts, areas))| {
            let pr = PrecisionRecall::from(counts);
            SweepRow {
                threshold,
                precision: pr.precision,
                recall: pr.recall,
                aggregate_iou: areas.iou(),
                counts,
                areas,
            }
        })
        .collect();
    Ok(ThresholdSweep { class_filter, rows })
}

/// Physical length per pixel, from a reference component of known size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScale {
    /// Known length of the reference, in physical units.
    pub reference_length: f64,
    /// Pixels spanned by the reference along the same direction.
    pub reference_extent: f64,
}

impl ReferenceScale {
    pub fn new(reference_length: f64, reference_extent: f64) -> Result<Self, EvalError> {
        if !(reference_length > 0.0 && reference_extent > 0.0)
            || !reference_length.is_finite()
            || !reference_extent.is_finite()
        {
            return Err(EvalError::InvalidScale {
                length: reference_length,
                extent: reference_extent,
            });
        }
        Ok(Self {
            reference_length,
            reference_extent,
        })
    }

    pub fn units_per_pixel(&self) -> f64 {
        self.reference_length / self.reference_extent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaMeasurement {
    pub pixel_area: u64,
    /// Squared physical units.
    pub area: f64,
    /// The surface is treated as parallel to the image plane, so one scale applies everywhere.
    pub fronto_parallel_assumed: bool,
}

pub fn measure_area(instance: &Instance, scale: &ReferenceScale) -> AreaMeasurement {
    let pixel_area = instance.mask.area();
    let s = scale.units_per_pixel();
    AreaMeasurement {
        pixel_area,
        area: pixel_area as f64 * s * s,
        fronto_parallel_assumed: true,
    }
}

pub const OVERLAY_CORRECT: [u8; 3] = [0, 200, 0];
pub const OVERLAY_MISSED: [u8; 3] = [220, 0, 0];
pub const OVERLAY_FALSE_POSITIVE: [u8; 3] = [240, 220, 0];

/// Image with correctly predicted pixels tinted green, missed ground truth red,
/// and false-positive pixels yellow, for predictions kept at `threshold`.
pub fn render_overlay(
    image: &RasterImage,
    pair: &EvalPair,
    threshold: f64,
    class_filter: Option<ClassLabel>,
) -> Result<RasterImage, EvalError> {
    check_threshold(threshold)?;
    pair.validate()?;
    let (w, h) = (pair.predictions.width, pair.predictions.height);
    if image.size() != (w, h) {
        return Err(EvalError::InconsistentPair {
            image_id: pair.image_id.clone(),
            reason: format!("image is {}x{}, frame is {w}x{h}", image.width(), image.height()),
        });
    }
    let pred = union_of(w, h, kept(pair, threshold, class_filter).map(|p| &p.mask));
    let gt = union_of(
        w,
        h,
        pair.ground_truth
            .iter()
            .filter(|g| in_filter(g.class, class_filter))
            .map(|g| &g.mask),
    );
    let mut out = image.to_rgb();
    for y in 0..h {
        for x in 0..w {
            let tint = match (pred.get(x, y), gt.get(x, y)) {
                (true, true) => OVERLAY_CORRECT,
                (false, true) => OVERLAY_MISSED,
                (true, false) => OVERLAY_FALSE_POSITIVE,
                (false, false) => continue,
            };
            for (v, t) in out.pixel_mut(x, y).iter_mut().zip(tint) {
                *v = ((*v as u16 + t as u16) / 2) as u8;
            }
        }
    }
    Ok(out)
}
