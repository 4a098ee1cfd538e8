//! VGG Image Annotator (VIA 2) polygon ingestion, the canonical manifest
//! document, and train/validation split bookkeeping.
//!
//! The canonical manifest is the interchange format between every pipeline
//! stage that carries ground truth:
//!
//! ```json
//! {
//!   "version": 1,
//!   "images": [
//!     {
//!       "path": "img_0001.jpg",
//!       "size": { "width": 4000, "height": 2250 },
//!       "instances": [
//!         { "class": "damage", "polygon": [[10.0, 12.5], [40.0, 12.5], [25.0, 30.0]] },
//!         { "class": "dirt", "mask": { "rle": [5, 3, 92], "width": 10, "height": 10 } }
//!       ],
//!       "split": "validation"
//!     }
//!   ]
//! }
//! ```
//!
//! `size` is `null` until dimensions are read from the image file, and
//! `split` is omitted for unsplit sets.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::io::{image_dimensions, ImageIoError};
use crate::label::{ClassLabel, Instance};
use crate::polygon::{PolygonError, PolygonOutline};
use crate::rle::{RleError, RleMask};
use crate::seed;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AnnotError {
    #[error("malformed JSON at byte {offset} (line {line}, column {column}): {message}")]
    Json {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unexpected document structure: {0}")]
    Structure(String),
    #[error("file {file:?} region {region}: unsupported shape {shape:?}, only \"polygon\" is accepted")]
    UnsupportedShape {
        file: String,
        region: usize,
        shape: String,
    },
    #[error("file {file:?} region {region}: unknown class {value:?}, accepted values are \"damage\" and \"dirt\"")]
    UnknownClass {
        file: String,
        region: usize,
        value: String,
    },
    #[error("file {file:?} region {region}: {reason}")]
    InvalidRegion {
        file: String,
        region: usize,
        reason: String,
    },
    #[error("validation fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("cannot split an empty image list")]
    EmptyImageList,
    #[error("image path {0:?} appears more than once")]
    DuplicatePath(String),
    #[error("image {0:?} has no known size; resolve dimensions from the image file first")]
    UnknownSize(String),
    #[error("image {path:?} instance {instance}: {reason}")]
    InvalidInstance {
        path: String,
        instance: usize,
        reason: String,
    },
    #[error(transparent)]
    Image(#[from] ImageIoError),
}

impl AnnotError {
    fn from_json(err: serde_json::Error, text: &str) -> Self {
        let (line, column) = (err.line(), err.column());
        let offset = text
            .split_inclusive('\n')
            .take(line.saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + column.saturating_sub(1);
        AnnotError::Json {
            offset: offset.min(text.len()),
            line,
            column,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

/// Instance geometry: a labeled polygon, or a pixel mask for generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Polygon(PolygonOutline),
    Mask(RleMask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedInstance {
    pub class: ClassLabel,
    #[serde(flatten)]
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    pub path: String,
    pub size: Option<ImageSize>,
    pub instances: Vec<AnnotatedInstance>,
}

impl AnnotatedImage {
    /// Reads width and height from the image header under `root`.
    pub fn resolve_size(&mut self, root: &Path) -> Result<ImageSize, AnnotError> {
        let (width, height) = image_dimensions(&root.join(&self.path))?;
        let size = ImageSize { width, height };
        self.size = Some(size);
        Ok(size)
    }

    /// Rasterized ground truth instances, in annotation order.
    pub fn ground_truth(&self) -> Result<Vec<Instance>, AnnotError> {
        let size = self
            .size
            .ok_or_else(|| AnnotError::UnknownSize(self.path.clone()))?;
        self.instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                let invalid = |reason: String| AnnotError::InvalidInstance {
                    path: self.path.clone(),
                    instance: i,
                    reason,
                };
                let mask = match &inst.geometry {
                    Geometry::Polygon(p) => p
                        .rasterize(size.width, size.height)
                        .map_err(|e: PolygonError| invalid(e.to_string()))?,
                    Geometry::Mask(m) => {
                        if (m.width, m.height) != (size.width, size.height) {
                            return Err(invalid(format!(
                                "mask is {}x{} but the image is {}x{}",
                                m.width, m.height, size.width, size.height
                            )));
                        }
                        m.decode().map_err(|e: RleError| invalid(e.to_string()))?
                    }
                };
                Ok(Instance::ground_truth(inst.class, mask))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViaOptions {
    /// Region attribute holding the class value, matched exactly.
    pub class_key: String,
}

impl Default for ViaOptions {
    fn default() -> Self {
        Self {
            class_key: "class".to_string(),
        }
    }
}

/// Parses a VIA 2 project (or bare image-metadata export) into annotated images.
///
/// Image sizes are left unset; VIA records file sizes in bytes, not pixels.
pub fn parse_via(document: &str, options: &ViaOptions) -> Result<Vec<AnnotatedImage>, AnnotError> {
    let root: Value =
        serde_json::from_str(document).map_err(|e| AnnotError::from_json(e, document))?;
    let root = root
        .as_object()
        .ok_or_else(|| AnnotError::Structure("top level must be a JSON object".into()))?;
    let metadata = match root.get("_via_img_metadata") {
        Some(Value::Object(m)) => m,
        Some(_) => {
            return Err(AnnotError::Structure(
                "\"_via_img_metadata\" must be an object".into(),
            ))
        }
        None => root,
    };

    let mut images = Vec::with_capacity(metadata.len());
    for (key, entry) in metadata {
        let entry = entry.as_object().ok_or_else(|| {
            AnnotError::Structure(format!("file entry {key:?} must be an object"))
        })?;
        let file = entry
            .get("filename")
            .and_then(Value::as_str)
            .ok_or_else(|| AnnotError::Structure(format!("file entry {key:?} lacks \"filename\"")))?
            .to_string();
        let regions: Vec<&Value> = match entry.get("regions") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(r)) => r.iter().collect(),
            // VIA 1 keyed regions by index
            Some(Value::Object(r)) => r.values().collect(),
            Some(_) => {
                return Err(AnnotError::Structure(format!(
                    "\"regions\" of {file:?} must be an array"
                )))
            }
        };
        let instances = regions
            .iter()
            .enumerate()
            .map(|(i, region)| parse_region(&file, i, region, options))
            .collect::<Result<Vec<_>, _>>()?;
        images.push(AnnotatedImage {
            path: file,
            size: None,
            instances,
        });
    }
    Ok(images)
}

fn parse_region(
    file: &str,
    index: usize,
    region: &Value,
    options: &ViaOptions,
) -> Result<AnnotatedInstance, AnnotError> {
    let invalid = |reason: String| AnnotError::InvalidRegion {
        file: file.to_string(),
        region: index,
        reason,
    };
    let shape = region
        .get("shape_attributes")
        .and_then(Value::as_object)
        .ok_or_else(|| invalid("missing \"shape_attributes\"".into()))?;
    let name = shape.get("name").and_then(Value::as_str).unwrap_or("");
    if name != "polygon" {
        return Err(AnnotError::UnsupportedShape {
            file: file.to_string(),
            region: index,
            shape: name.to_string(),
        });
    }
    let coords = |key: &str| -> Result<Vec<f64>, AnnotError> {
        shape
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| invalid(format!("missing {key:?} array")))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| invalid(format!("non-numeric entry in {key:?}"))))
            .collect()
    };
    let xs = coords("all_points_x")?;
    let ys = coords("all_points_y")?;
    if xs.len() != ys.len() {
        return Err(invalid(format!(
            "all_points_x has {} entries but all_points_y has {}",
            xs.len(),
            ys.len()
        )));
    }
    let polygon = PolygonOutline::from_xy(&xs, &ys).map_err(|e| invalid(e.to_string()))?;

    let attr = region
        .get("region_attributes")
        .and_then(|a| a.get(&options.class_key))
        .ok_or_else(|| invalid(format!("missing class attribute {:?}", options.class_key)))?;
    let value = match attr {
        Value::String(s) => s.clone(),
        // checkbox attributes: {"damage": true}
        Value::Object(flags) => {
            let set: Vec<&String> = flags
                .iter()
                .filter(|(_, v)| v.as_bool() == Some(true))
                .map(|(k, _)| k)
                .collect();
            match set.as_slice() {
                [one] => (*one).clone(),
                _ => attr.to_string(),
            }
        }
        other => other.to_string(),
    };
    let class = value.parse::<ClassLabel>().map_err(|_| AnnotError::UnknownClass {
        file: file.to_string(),
        region: index,
        value: value.clone(),
    })?;
    Ok(AnnotatedInstance {
        class,
        geometry: Geometry::Polygon(polygon),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Training,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub image: AnnotatedImage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// The canonical on-disk manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub images: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn unsplit(images: Vec<AnnotatedImage>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            images: images
                .into_iter()
                .map(|image| ManifestEntry { image, split: None })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, AnnotError> {
        let manifest: Manifest =
            serde_json::from_str(text).map_err(|e| AnnotError::from_json(e, text))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(AnnotError::Structure(format!(
                "unsupported manifest version {}",
                manifest.version
            )));
        }
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization is infallible")
    }

    pub fn images(&self) -> impl Iterator<Item = &AnnotatedImage> {
        self.images.iter().map(|e| &e.image)
    }

    pub fn find(&self, path: &str) -> Option<&AnnotatedImage> {
        self.images().find(|img| img.path == path)
    }

    /// Images of one split; entries without a split tag count as training.
    pub fn split(&self, which: Split) -> impl Iterator<Item = &AnnotatedImage> {
        self.images
            .iter()
            .filter(move |e| e.split.unwrap_or(Split::Training) == which)
            .map(|e| &e.image)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub training: Vec<AnnotatedImage>,
    pub validation: Vec<AnnotatedImage>,
}

impl DatasetManifest {
    /// Input order is kept within each split.
    pub fn to_manifest(&self) -> Manifest {
        let tag = |split| move |image: &AnnotatedImage| ManifestEntry {
            image: image.clone(),
            split: Some(split),
        };
        Manifest {
            version: MANIFEST_VERSION,
            images: self
                .training
                .iter()
                .map(tag(Split::Training))
                .chain(self.validation.iter().map(tag(Split::Validation)))
                .collect(),
        }
    }
}

/// Random train/validation partition with `max(1, round(fraction·N))` validation images.
pub fn split_manifest(
    images: Vec<AnnotatedImage>,
    validation_fraction: f64,
    seed: u64,
) -> Result<DatasetManifest, AnnotError> {
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(AnnotError::InvalidFraction(validation_fraction));
    }
    if images.is_empty() {
        return Err(AnnotError::EmptyImageList);
    }
    let mut seen = HashSet::new();
    for img in &images {
        if !seen.insert(img.path.as_str()) {
            return Err(AnnotError::DuplicatePath(img.path.clone()));
        }
    }
    let n = images.len();
    let n_val = ((validation_fraction * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(seed, "split", 0));
    let mut is_val = vec![false; n];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (validation, training): (Vec<_>, Vec<_>) = images
        .into_iter()
        .zip(is_val)
        .partition(|(_, v)| *v);
    Ok(DatasetManifest {
        training: training.into_iter().map(|(img, _)| img).collect(),
        validation: validation.into_iter().map(|(img, _)| img).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_REGION: &str = r#"{
      "a.jpg12345": {
        "filename": "a.jpg", "size": 12345,
        "regions": [
          { "shape_attributes": { "name": "polygon", "all_points_x": [1, 9, 9, 1], "all_points_y": [1, 1, 7, 7] },
            "region_attributes": { "class": "damage" } }
        ],
        "file_attributes": {}
      }
    }"#;

    fn images(n: usize) -> Vec<AnnotatedImage> {
        (0..n)
            .map(|i| AnnotatedImage {
                path: format!("img_{i:03}.jpg"),
                size: None,
                instances: vec![],
            })
            .collect()
    }

    #[test]
    fn minimal_document() {
        let imgs = parse_via(ONE_REGION, &ViaOptions::default()).unwrap();
        assert_eq!(imgs.len(), 1);
        assert_eq!(imgs[0].path, "a.jpg");
        assert_eq!(imgs[0].instances.len(), 1);
        assert_eq!(imgs[0].instances[0].class, ClassLabel::Damage);
        let Geometry::Polygon(p) = &imgs[0].instances[0].geometry else {
            panic!("expected polygon")
        };
        assert_eq!(p.vertices().len(), 4);
    }

    #[test]
    fn project_wrapper_and_checkbox_classes() {
        let doc = r#"{"_via_settings": {}, "_via_img_metadata": {
            "b.png1": {"filename": "b.png", "size": 1, "regions": [
              {"shape_attributes": {"name": "polygon", "all_points_x": [0,4,0], "all_points_y": [0,0,4]},
               "region_attributes": {"type": {"Dirt": true, "damage": false}}}]}}}"#;
        let opts = ViaOptions {
            class_key: "type".into(),
        };
        let imgs = parse_via(doc, &opts).unwrap();
        assert_eq!(imgs[0].instances[0].class, ClassLabel::Dirt);
    }

    #[test]
    fn rect_regions_are_rejected() {
        let doc = ONE_REGION.replace(r#""name": "polygon""#, r#""name":"rect""#);
        match parse_via(&doc, &ViaOptions::default()) {
            Err(AnnotError::UnsupportedShape { file, region, shape }) => {
                assert_eq!((file.as_str(), region, shape.as_str()), ("a.jpg", 0, "rect"));
            }
            other => panic!("expected unsupported shape, got {other:?}"),
        }
    }

    #[test]
    fn unknown_class_lists_accepted_values() {
        let doc = ONE_REGION.replace("\"damage\"", "\"crack\"");
        let err = parse_via(&doc, &ViaOptions::default()).unwrap_err();
        assert!(matches!(err, AnnotError::UnknownClass { ref value, .. } if value == "crack"));
        assert!(err.to_string().contains("\"damage\" and \"dirt\""));
    }

    #[test]
    fn mismatched_point_arrays() {
        let doc = ONE_REGION.replace("[1, 1, 7, 7]", "[1, 1, 7]");
        assert!(matches!(
            parse_via(&doc, &ViaOptions::default()),
            Err(AnnotError::InvalidRegion { .. })
        ));
    }

    #[test]
    fn malformed_json_reports_byte_offset() {
        let doc = "{\n  \"a\": [1, 2,, 3]\n}";
        match parse_via(doc, &ViaOptions::default()) {
            Err(AnnotError::Json { offset, line, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(&doc[offset..offset + 1], ",");
            }
            other => panic!("expected json error, got {other:?}"),
        }
    }

    #[test]
    fn split_of_165_images() {
        let split = split_manifest(images(165), 0.14, 1).unwrap();
        assert_eq!(split.validation.len(), 23);
        assert_eq!(split.training.len(), 142);
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let a = split_manifest(images(10), 0.5, 99).unwrap();
        let b = split_manifest(images(10), 0.5, 99).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<_> = a
            .training
            .iter()
            .chain(&a.validation)
            .map(|i| i.path.clone())
            .collect();
        all.sort();
        assert_eq!(all, images(10).into_iter().map(|i| i.path).collect::<Vec<_>>());
    }

    #[test]
    fn split_keeps_at_least_one_validation_image() {
        let split = split_manifest(images(3), 0.01, 5).unwrap();
        assert_eq!(split.validation.len(), 1);
        assert_eq!(split.training.len(), 2);
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(
            split_manifest(images(3), 1.0, 0),
            Err(AnnotError::InvalidFraction(_))
        ));
        assert!(matches!(
            split_manifest(images(3), 0.0, 0),
            Err(AnnotError::InvalidFraction(_))
        ));
        assert!(matches!(
            split_manifest(vec![], 0.5, 0),
            Err(AnnotError::EmptyImageList)
        ));
        let mut dup = images(2);
        dup[1].path = dup[0].path.clone();
        assert!(matches!(
            split_manifest(dup, 0.5, 0),
            Err(AnnotError::DuplicatePath(_))
        ));
    }

    #[test]
    fn ground_truth_needs_size() {
        let mut imgs = parse_via(ONE_REGION, &ViaOptions::default()).unwrap();
        assert!(matches!(
            imgs[0].ground_truth(),
            Err(AnnotError::UnknownSize(_))
        ));
        imgs[0].size = Some(ImageSize {
            width: 12,
            height: 10,
        });
        let gt = imgs[0].ground_truth().unwrap();
        assert_eq!(gt[0].mask.area(), 8 * 6);
    }
}
