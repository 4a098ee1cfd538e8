//! Synthetic training images: exemplar crops pasted onto collage backgrounds.
//!
//! Every random draw of a sample is recorded in its [`GenerationLog`], and
//! the image is rendered from the log alone, so [`render_sample`] on a stored
//! log reproduces the sample bit for bit. Each sample draws from its own
//! stream derived from `(seed, sample index)`, which makes batch generation
//! independent of worker count and scheduling.

mod augment;
mod background;
mod library;
mod transform;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use augment::{basic_augment, AugmentRecord, AugmentSpec, AugmentedSample};
pub use background::{build_background, plan_background, render_background, BackgroundPool, BackgroundTile};
pub use library::{load_library, save_exemplar};
pub use transform::{
    apply_transform, rotated_size, transform_exemplar, transformed_size, TransformOutcome, TransformParams,
    TransformedExemplar,
};

use crate::annot::{AnnotatedImage, AnnotatedInstance, Geometry, ImageSize};
use crate::io::ImageIoError;
use crate::label::{ClassLabel, Instance};
use crate::mask::{BinaryMask, PixelRect};
use crate::raster::RasterImage;
use crate::rle::RleMask;
use crate::seed;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("background pool contains no readable images")]
    EmptyPool,
    #[error("exemplar library is empty")]
    EmptyLibrary,
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageIoError),
    #[error("exemplar sidecar {path}: {message}")]
    Sidecar {
        path: std::path::PathBuf,
        message: String,
    },
    #[error("invalid exemplar {source_id}: {reason}")]
    InvalidExemplar { source_id: String, reason: String },
    #[error("invalid synthesis settings: {0}")]
    InvalidSettings(String),
    #[error("generation log refers to {what} {index}, which does not exist")]
    InvalidLog { what: &'static str, index: usize },
    #[error("short-edge size list is empty")]
    EmptySizeList,
    #[error("flip probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("crop {crop_width}x{crop_height} exceeds the scaled image {width}x{height}")]
    CropTooLarge {
        crop_width: usize,
        crop_height: usize,
        width: usize,
        height: usize,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarClass {
    Damage,
    Dirt,
    #[serde(alias = "clean")]
    CleanStructure,
}

impl ExemplarClass {
    pub const ALL: [ExemplarClass; 3] = [Self::Damage, Self::Dirt, Self::CleanStructure];

    /// Instance label emitted for pastes of this class; clean structure is background.
    pub fn label(self) -> Option<ClassLabel> {
        match self {
            Self::Damage => Some(ClassLabel::Damage),
            Self::Dirt => Some(ClassLabel::Dirt),
            Self::CleanStructure => None,
        }
    }
}

/// A manually segmented example patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarCrop {
    /// RGBA; alpha is 255 on the structure and 0 elsewhere, color is 0 where alpha is 0.
    pub patch: RasterImage,
    pub class: ExemplarClass,
    pub target_mask: BinaryMask,
    pub source_id: String,
}

impl ExemplarCrop {
    /// Validates and normalizes a crop. Any non-zero alpha counts as structure.
    pub fn new(
        patch: RasterImage,
        class: ExemplarClass,
        target_mask: BinaryMask,
        source_id: impl Into<String>,
    ) -> Result<Self, SynthError> {
        let source_id = source_id.into();
        let invalid = |reason: &str| SynthError::InvalidExemplar {
            source_id: source_id.clone(),
            reason: reason.to_owned(),
        };
        if patch.channels() != 4 {
            return Err(invalid("patch has no alpha channel"));
        }
        if target_mask.size() != patch.size() {
            return Err(invalid("target mask and patch differ in size"));
        }
        let (w, h) = patch.size();
        let patch = RasterImage::from_fn(w, h, 4, |x, y, c| match (patch.alpha(x, y), c) {
            (0, _) => 0,
            (_, 3) => 255,
            _ => patch.sample(x, y, c),
        })
        .expect("same size as a valid patch");
        let crop = Self {
            patch,
            class,
            target_mask,
            source_id: source_id.clone(),
        };
        let alpha = crop.alpha_mask();
        if alpha.is_empty() {
            return Err(invalid("alpha is empty"));
        }
        let mut outside = crop.target_mask.clone();
        outside.difference_with(&alpha).expect("sizes checked");
        if !outside.is_empty() {
            return Err(invalid("target mask extends outside the alpha region"));
        }
        match (class, crop.target_mask.is_empty()) {
            (ExemplarClass::CleanStructure, false) => Err(invalid("clean structure with a non-empty target mask")),
            (ExemplarClass::Damage | ExemplarClass::Dirt, true) => Err(invalid("empty target mask")),
            _ => Ok(crop),
        }
    }

    pub fn alpha_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.patch.width(), self.patch.height(), |x, y| {
            self.patch.alpha(x, y) > 0
        })
    }

    /// Region surround cropping must keep: the target's box, or the structure's
    /// box for clean exemplars.
    pub fn keep_region(&self) -> PixelRect {
        self.target_mask
            .bounding_rect()
            .or_else(|| self.alpha_mask().bounding_rect())
            .expect("validated crops have non-empty alpha")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub canvas: (usize, usize),
    pub exemplar_count: (usize, usize),
    pub scale_range: (f64, f64),
    /// Degrees.
    pub rotation_range: (f64, f64),
    pub surround_crop_range: (f64, f64),
    pub seed: u64,
    /// Scale redraws before an oversized exemplar is skipped.
    pub scale_retries: usize,
    /// Position redraws to avoid overlapping earlier pastes; overlap is
    /// accepted once they run out.
    pub placement_retries: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            canvas: (1024, 1024),
            exemplar_count: (2, 8),
            scale_range: (0.3, 2.0),
            rotation_range: (-180.0, 180.0),
            surround_crop_range: (0.0, 0.5),
            seed: 0,
            scale_retries: 8,
            placement_retries: 20,
        }
    }
}

impl SynthSettings {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSettings(m));
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if self.canvas.0 == 0 || self.canvas.1 == 0 {
            return bad("canvas must be non-empty".into());
        }
        if self.exemplar_count.0 > self.exemplar_count.1 {
            return bad(format!("exemplar count range {:?} is reversed", self.exemplar_count));
        }
        if !ordered(self.scale_range) || self.scale_range.0 <= 0.0 {
            return bad(format!("scale range {:?} must be positive and ordered", self.scale_range));
        }
        if !ordered(self.rotation_range) {
            return bad(format!("rotation range {:?} must be finite and ordered", self.rotation_range));
        }
        let (c0, c1) = self.surround_crop_range;
        if !ordered(self.surround_crop_range) || c0 < 0.0 || c1 > 1.0 {
            return bad(format!(
                "surround crop range {:?} must lie within [0, 1]",
                self.surround_crop_range
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PastedDraw {
    pub library_index: usize,
    pub class: ExemplarClass,
    pub params: TransformParams,
    pub rejected_scales: Vec<f64>,
    /// Positions redrawn because they overlapped earlier pastes.
    pub rejected_positions: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarDraw {
    Pasted(PastedDraw),
    Skipped {
        library_index: usize,
        class: ExemplarClass,
        crop_margins: [usize; 4],
        angle_degrees: f64,
        rejected_scales: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub seed: u64,
    pub sample_index: u64,
    pub canvas: (usize, usize),
    pub background: Vec<BackgroundTile>,
    pub exemplar_count: usize,
    pub draws: Vec<ExemplarDraw>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub image: RasterImage,
    pub instances: Vec<Instance>,
    pub log: GenerationLog,
}

impl SyntheticSample {
    /// Manifest entry with RLE mask geometry.
    pub fn annotation(&self, path: impl Into<String>) -> AnnotatedImage {
        let (width, height) = self.image.size();
        AnnotatedImage {
            path: path.into(),
            size: Some(ImageSize { width, height }),
            instances: self
                .instances
                .iter()
                .map(|inst| AnnotatedInstance {
                    class: inst.class,
                    geometry: Geometry::Mask(RleMask::encode(&inst.mask)),
                })
                .collect(),
        }
    }
}

fn overlaps_at(occupied: &BinaryMask, alpha: &BinaryMask, (px, py): (usize, usize)) -> bool {
    let w = alpha.width();
    alpha
        .ones()
        .any(|i| occupied.get(px + i % w, py + i / w))
}

/// Draws the full parameter log for sample `index` without rendering pixels
/// other than the transformed exemplars needed for overlap tests.
pub fn plan_sample(
    library: &[ExemplarCrop],
    pool: &BackgroundPool,
    settings: &SynthSettings,
    index: u64,
) -> Result<GenerationLog, SynthError> {
    settings.validate()?;
    if library.is_empty() && settings.exemplar_count.1 > 0 {
        return Err(SynthError::EmptyLibrary);
    }
    let mut rng = seed::stream(settings.seed, "synth", index);
    let canvas = settings.canvas;
    let background = plan_background(pool, canvas, &mut rng);
    let (k_lo, k_hi) = settings.exemplar_count;
    let exemplar_count = rng.random_range(k_lo..=k_hi);

    let classes: Vec<ExemplarClass> = ExemplarClass::ALL
        .into_iter()
        .filter(|c| library.iter().any(|e| e.class == *c))
        .collect();
    let mut occupied = BinaryMask::new(canvas.0, canvas.1);
    let mut draws = Vec::with_capacity(exemplar_count);
    let mut warnings = Vec::new();
    for n in 0..exemplar_count {
        let class = classes[rng.random_range(0..classes.len())];
        let candidates: Vec<usize> = (0..library.len()).filter(|&i| library[i].class == class).collect();
        let library_index = candidates[rng.random_range(0..candidates.len())];
        match transform_exemplar(&library[library_index], settings, &mut rng) {
            TransformOutcome::Skipped {
                crop_margins,
                angle_degrees,
                rejected_scales,
            } => {
                warnings.push(format!(
                    "exemplar {n} ({}) skipped: no drawn scale fits the canvas",
                    library[library_index].source_id
                ));
                draws.push(ExemplarDraw::Skipped {
                    library_index,
                    class,
                    crop_margins,
                    angle_degrees,
                    rejected_scales,
                });
            }
            TransformOutcome::Placed {
                exemplar,
                mut params,
                rejected_scales,
            } => {
                let alpha = exemplar.alpha_mask();
                let (pw, ph) = alpha.size();
                let mut rejected_positions = Vec::new();
                while overlaps_at(&occupied, &alpha, params.position) {
                    if rejected_positions.len() == settings.placement_retries {
                        warnings.push(format!(
                            "exemplar {n} ({}) overlaps earlier pastes after {} retries",
                            library[library_index].source_id, settings.placement_retries
                        ));
                        break;
                    }
                    rejected_positions.push(params.position);
                    params.position = (
                        rng.random_range(0..=canvas.0 - pw),
                        rng.random_range(0..=canvas.1 - ph),
                    );
                }
                let (px, py) = params.position;
                occupied
                    .union_with(&alpha.placed(canvas.0, canvas.1, px as i64, py as i64))
                    .expect("canvas-sized masks");
                draws.push(ExemplarDraw::Pasted(PastedDraw {
                    library_index,
                    class,
                    params,
                    rejected_scales,
                    rejected_positions,
                }));
            }
        }
    }
    Ok(GenerationLog {
        seed: settings.seed,
        sample_index: index,
        canvas,
        background,
        exemplar_count,
        draws,
        warnings,
    })
}

/// Renders a sample from its log; no random draws happen here.
pub fn render_sample(
    library: &[ExemplarCrop],
    pool: &BackgroundPool,
    log: &GenerationLog,
) -> Result<SyntheticSample, SynthError> {
    let canvas = log.canvas;
    for t in &log.background {
        if t.image >= pool.len() {
            return Err(SynthError::InvalidLog {
                what: "background image",
                index: t.image,
            });
        }
        let src = pool.image(t.image);
        if t.cell.x1 > canvas.0
            || t.cell.y1 > canvas.1
            || t.crop_x + t.cell.width() > src.width()
            || t.crop_y + t.cell.height() > src.height()
        {
            return Err(SynthError::InvalidLog {
                what: "background tile",
                index: t.image,
            });
        }
    }
    let mut image = render_background(pool, canvas, &log.background);
    let mut labeled: Vec<(ClassLabel, BinaryMask)> = Vec::new();
    for draw in &log.draws {
        let ExemplarDraw::Pasted(d) = draw else { continue };
        let crop = library.get(d.library_index).ok_or(SynthError::InvalidLog {
            what: "exemplar",
            index: d.library_index,
        })?;
        let t = apply_transform(crop, &d.params);
        let (px, py) = t.position;
        let (pw, ph) = t.patch.size();
        if px + pw > canvas.0 || py + ph > canvas.1 {
            return Err(SynthError::InvalidLog {
                what: "exemplar placement",
                index: d.library_index,
            });
        }
        for y in 0..ph {
            for x in 0..pw {
                let a = u32::from(t.patch.alpha(x, y));
                if a == 0 {
                    continue;
                }
                let src = t.patch.pixel(x, y);
                let dst = image.pixel_mut(px + x, py + y);
                for c in 0..3 {
                    dst[c] = ((a * u32::from(src[c]) + (255 - a) * u32::from(dst[c]) + 127) / 255) as u8;
                }
            }
        }
        let alpha = t.alpha_mask().placed(canvas.0, canvas.1, px as i64, py as i64);
        for (_, mask) in &mut labeled {
            mask.difference_with(&alpha).expect("canvas-sized masks");
        }
        if let Some(label) = crop.class.label() {
            labeled.push((label, t.target.placed(canvas.0, canvas.1, px as i64, py as i64)));
        }
    }
    let instances = labeled
        .into_iter()
        .filter(|(_, m)| !m.is_empty())
        .map(|(class, mask)| Instance::ground_truth(class, mask))
        .collect();
    Ok(SyntheticSample {
        image,
        instances,
        log: log.clone(),
    })
}

/// Sample `index` of the stream seeded by `settings.seed`.
pub fn generate_sample(
    library: &[ExemplarCrop],
    pool: &BackgroundPool,
    settings: &SynthSettings,
    index: u64,
) -> Result<SyntheticSample, SynthError> {
    let log = plan_sample(library, pool, settings, index)?;
    render_sample(library, pool, &log)
}

/// Samples `0..count` on `workers` threads (all cores when `None`).
/// Output is identical for any worker count.
pub fn generate_batch(
    library: &[ExemplarCrop],
    pool: &BackgroundPool,
    settings: &SynthSettings,
    count: u64,
    workers: Option<usize>,
) -> Result<Vec<SyntheticSample>, SynthError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let threads = builder
        .build()
        .map_err(|e| SynthError::ThreadPool(e.to_string()))?;
    threads.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| generate_sample(library, pool, settings, i))
            .collect()
    })
}
