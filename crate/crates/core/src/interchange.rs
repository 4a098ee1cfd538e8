//! Prediction interchange JSON, the boundary to any external detector.
//!
//! ```json
//! {
//!   "image_id": "span_03",
//!   "width": 1024,
//!   "height": 1024,
//!   "frame": {"window": 4},
//!   "instances": [
//!     {"class": "damage", "confidence": 0.91, "mask": {"rle": [5120, 33, 991], "width": 1024, "height": 1024}}
//!   ]
//! }
//! ```
//!
//! `frame` is `"full"` for full-image coordinates. `width`/`height` are the
//! frame dimensions and every mask must match them. The key `image-id` is
//! accepted as an alias of `image_id`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::{ClassLabel, Instance};
use crate::rle::RleMask;

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("malformed prediction JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("instance {index}: confidence {value} outside [0, 1]")]
    Confidence { index: usize, value: f64 },
    #[error("instance {index}: mask is {mask_width}x{mask_height} but the frame is {width}x{height}")]
    MaskSize {
        index: usize,
        mask_width: usize,
        mask_height: usize,
        width: usize,
        height: usize,
    },
    #[error("instance {index}: {source}")]
    Rle {
        index: usize,
        source: crate::rle::RleError,
    },
    #[error("instance {index}: mask is empty")]
    EmptyMask { index: usize },
    #[error("instance {index}: ground truth instances carry no confidence")]
    MissingConfidence { index: usize },
}

/// Coordinate frame of a prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Full,
    Window(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub frame: Frame,
    pub instances: Vec<Instance>,
}

#[derive(Serialize, Deserialize)]
struct WireSet {
    #[serde(alias = "image-id")]
    image_id: String,
    width: usize,
    height: usize,
    frame: Frame,
    instances: Vec<WireInstance>,
}

#[derive(Serialize, Deserialize)]
struct WireInstance {
    class: ClassLabel,
    confidence: f64,
    mask: RleMask,
}

impl PredictionSet {
    pub fn new(image_id: impl Into<String>, width: usize, height: usize, frame: Frame) -> Self {
        Self {
            image_id: image_id.into(),
            width,
            height,
            frame,
            instances: Vec::new(),
        }
    }

    /// Checks confidences and mask dimensions against the frame.
    pub fn validate(&self) -> Result<(), InterchangeError> {
        for (index, inst) in self.instances.iter().enumerate() {
            let value = inst
                .confidence
                .ok_or(InterchangeError::MissingConfidence { index })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(InterchangeError::Confidence { index, value });
            }
            if inst.mask.size() != (self.width, self.height) {
                return Err(InterchangeError::MaskSize {
                    index,
                    mask_width: inst.mask.width(),
                    mask_height: inst.mask.height(),
                    width: self.width,
                    height: self.height,
                });
            }
            if inst.mask.is_empty() {
                return Err(InterchangeError::EmptyMask { index });
            }
        }
        Ok(())
    }

    /// Parses and validates an interchange document.
    pub fn from_json(text: &str) -> Result<Self, InterchangeError> {
        let wire: WireSet = serde_json::from_str(text)?;
        let mut instances = Vec::with_capacity(wire.instances.len());
        for (index, w) in wire.instances.into_iter().enumerate() {
            if (w.mask.width, w.mask.height) != (wire.width, wire.height) {
                return Err(InterchangeError::MaskSize {
                    index,
                    mask_width: w.mask.width,
                    mask_height: w.mask.height,
                    width: wire.width,
                    height: wire.height,
                });
            }
            let mask = w
                .mask
                .decode()
                .map_err(|source| InterchangeError::Rle { index, source })?;
            instances.push(Instance::prediction(w.class, mask, w.confidence));
        }
        let set = PredictionSet {
            image_id: wire.image_id,
            width: wire.width,
            height: wire.height,
            frame: wire.frame,
            instances,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn to_json(&self) -> Result<String, InterchangeError> {
        self.validate()?;
        let wire = WireSet {
            image_id: self.image_id.clone(),
            width: self.width,
            height: self.height,
            frame: self.frame,
            instances: self
                .instances
                .iter()
                .map(|inst| WireInstance {
                    class: inst.class,
                    confidence: inst.confidence.expect("validated"),
                    mask: RleMask::encode(&inst.mask),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&wire)?)
    }
}
