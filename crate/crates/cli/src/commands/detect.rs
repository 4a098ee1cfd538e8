//! `tile`, `mock-detect` and `merge`, plus the steps `pipeline` reuses.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use damagekit::annot::Manifest;
use damagekit::interchange::{Frame, PredictionSet};
use damagekit::io::load_image;
use damagekit::resample::resize_nearest_mask;
use damagekit::seed::derive_seed;
use damagekit::tile::{
    extract_windows, merge_predictions, mock_detect, plan_tiling, scaled_size, split_instances,
    upscale_predictions, MergeSettings, MockDetectorSettings, TilingPlan,
};
use damagekit::Instance;

use crate::config::{self, MockConfig, PipelineConfig};
use crate::errors::{data, usage};
use crate::files::{load_predictions, read_text, unique_stems, write_image, write_json, write_predictions};
use crate::{log, parse};

/// `plan.json`: the plan plus window image paths relative to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowIndex {
    pub image_id: String,
    pub plan: TilingPlan,
    pub files: Vec<String>,
}

impl WindowIndex {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).with_context(|| format!("reading window index {}", path.display()))
    }
}

pub fn window_file(k: usize) -> String {
    format!("window_{k:03}")
}

/// Cuts `image_path` into windows under `out` and writes `out/plan.json`.
/// Windows larger than the image shrink to it.
pub fn tile_image(
    image_path: &Path,
    image_id: &str,
    window: (usize, usize),
    overlap: usize,
    out: &Path,
) -> Result<WindowIndex> {
    let image = load_image(image_path)?;
    let (iw, ih) = image.size();
    let fitted = (window.0.min(iw), window.1.min(ih));
    if fitted != window {
        log::warn(
            "window_clamped",
            json!({ "image_id": image_id, "requested": window, "used": fitted }),
        );
    }
    let plan = plan_tiling((iw, ih), fitted, overlap)?;
    let crops = extract_windows(&image, &plan)?;
    let mut files = Vec::with_capacity(crops.len());
    for (k, crop) in crops.iter().enumerate() {
        let rel = format!("windows/{}.png", window_file(k));
        write_image(&out.join(&rel), crop)?;
        files.push(rel);
    }
    let index = WindowIndex {
        image_id: image_id.to_string(),
        plan,
        files,
    };
    write_json(&out.join("plan.json"), &index)?;
    log::event(
        "tiled",
        json!({ "image_id": image_id, "windows": index.plan.windows.len(), "window": fitted, "overlap": overlap }),
    );
    Ok(index)
}

fn mock_settings(master: u64, image_id: &str, index: u64, cfg: &MockConfig) -> MockDetectorSettings {
    MockDetectorSettings {
        dilation_radius: cfg.dilation_radius,
        seed: derive_seed(master, &format!("mock/{image_id}"), index),
        false_positive_rate: cfg.false_positive_rate,
    }
}

fn check_mock(cfg: &MockConfig) -> Result<()> {
    if !(0.0..1.0).contains(&cfg.false_positive_rate) {
        return Err(usage(format!(
            "false positive rate must lie in [0, 1), got {}",
            cfg.false_positive_rate
        )));
    }
    Ok(())
}

/// Ground truth clipped to each window, then mock-detected in window frames.
pub fn mock_windows(ground_truth: &[Instance], index: &WindowIndex, master: u64, cfg: &MockConfig) -> Result<Vec<PredictionSet>> {
    check_mock(cfg)?;
    let parts = split_instances(ground_truth, &index.plan)?;
    Ok(parts
        .iter()
        .zip(&index.plan.windows)
        .enumerate()
        .map(|(k, (part, w))| {
            let settings = mock_settings(master, &index.image_id, k as u64, cfg);
            let mut set = mock_detect(&index.image_id, (w.width, w.height), part, &settings);
            set.frame = Frame::Window(k);
            set
        })
        .collect())
}

/// Full-frame mock detection, optionally run at reduced resolution and
/// upscaled back.
pub fn mock_full(
    image_id: &str,
    size: (usize, usize),
    ground_truth: &[Instance],
    downscale: Option<f64>,
    master: u64,
    cfg: &MockConfig,
) -> Result<PredictionSet> {
    check_mock(cfg)?;
    let settings = mock_settings(master, image_id, 0, cfg);
    let visible: Vec<Instance> = ground_truth.iter().filter(|g| !g.mask.is_empty()).cloned().collect();
    let Some(factor) = downscale else {
        return Ok(mock_detect(image_id, size, &visible, &settings));
    };
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(usage(format!("downscale factor must lie in (0, 1], got {factor}")));
    }
    let small = scaled_size(size, factor);
    let reduced: Vec<Instance> = visible
        .iter()
        .map(|g| Instance::ground_truth(g.class, resize_nearest_mask(&g.mask, small.0, small.1)))
        .filter(|g| !g.mask.is_empty())
        .collect();
    let set = mock_detect(image_id, small, &reduced, &settings);
    Ok(upscale_predictions(&set, factor, size)?)
}

pub fn merge_windows(index: &WindowIndex, sets: &[PredictionSet], min_overlap_pixels: u64) -> Result<PredictionSet> {
    let merged = merge_predictions(sets, &index.plan, &MergeSettings { min_overlap_pixels })?;
    if merged.image_id != index.image_id {
        return Err(data(format!(
            "predictions are for {:?} but the plan is for {:?}",
            merged.image_id, index.image_id
        )));
    }
    Ok(merged)
}

fn ground_truth_of(manifest: &Manifest, image_id: &str) -> Result<(Vec<Instance>, (usize, usize))> {
    let image = manifest
        .find(image_id)
        .ok_or_else(|| data(format!("image {image_id:?} is not in the annotations")))?;
    let gt = image.ground_truth()?;
    let size = image.size.expect("ground truth implies a size");
    Ok((gt, (size.width, size.height)))
}

#[derive(Debug, Args)]
pub struct TileArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Defaults to the image file name.
    #[arg(long)]
    pub image_id: Option<String>,
    /// Output directory for `plan.json` and `windows/`.
    #[arg(long)]
    pub out: PathBuf,
    /// `N` or `WxH`.
    #[arg(long, value_parser = parse::size)]
    pub window: Option<(usize, usize)>,
    #[arg(long)]
    pub overlap: Option<usize>,
}

pub fn run_tile(args: TileArgs, config: &PipelineConfig) -> Result<()> {
    let image = crate::files::require_exists(args.image, "image")?;
    let id = match args.image_id {
        Some(id) => id,
        None => image
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| usage("cannot derive an image id; pass --image-id"))?,
    };
    let [ww, wh] = config.tiling.window;
    let window = args.window.unwrap_or((ww, wh));
    let overlap = args.overlap.unwrap_or(config.tiling.overlap);
    tile_image(&image, &id, window, overlap, &args.out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct MockArgs {
    /// VIA project or canonical manifest holding the ground truth.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Image root, needed when the annotations carry no sizes.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Restricts full-frame detection to one image.
    #[arg(long)]
    pub image_id: Option<String>,
    /// Window index from `tile`; emits one window-frame file per window.
    #[arg(long, conflicts_with = "downscale")]
    pub plan: Option<PathBuf>,
    /// Detects on ground truth reduced by this factor, then upscales.
    #[arg(long)]
    pub downscale: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dilation: Option<usize>,
    #[arg(long)]
    pub fp_rate: Option<f64>,
}

pub fn run_mock(args: MockArgs, config: &PipelineConfig) -> Result<()> {
    let ann = config::input_path(args.annotations, &config.paths.annotations, "annotations", "annotations")?;
    let root = config::optional_input(args.images, &config.paths.dataset_root, "images", "dataset_root")?;
    let manifest = crate::files::load_manifest(&ann, &config.annotations.class_key, root.as_deref())?;
    let master = args.seed.or(config.seed).unwrap_or(0);
    let cfg = MockConfig {
        dilation_radius: args.dilation.unwrap_or(config.mock.dilation_radius),
        false_positive_rate: args.fp_rate.unwrap_or(config.mock.false_positive_rate),
    };

    if let Some(plan_path) = args.plan {
        let index = WindowIndex::load(&crate::files::require_exists(plan_path, "plan")?)?;
        if let Some(id) = args.image_id.filter(|id| *id != index.image_id) {
            return Err(usage(format!("--image-id {id:?} differs from the plan's {:?}", index.image_id)));
        }
        let (gt, _) = ground_truth_of(&manifest, &index.image_id)?;
        let sets = mock_windows(&gt, &index, master, &cfg)?;
        for (k, set) in sets.iter().enumerate() {
            write_predictions(&args.out.join(format!("{}.json", window_file(k))), set)?;
        }
        log::event(
            "mock_detected",
            json!({ "image_id": index.image_id, "windows": sets.len(), "seed": master, "mock": cfg }),
        );
        return Ok(());
    }

    let ids: Vec<String> = match args.image_id {
        Some(id) => vec![id],
        None => manifest.images().map(|i| i.path.clone()).collect(),
    };
    let stems = unique_stems(ids.iter().map(String::as_str))?;
    for id in &ids {
        let (gt, size) = ground_truth_of(&manifest, id)?;
        let set = mock_full(id, size, &gt, args.downscale, master, &cfg)?;
        write_predictions(&args.out.join(format!("{}.json", stems[id])), &set)?;
        log::event(
            "mock_detected",
            json!({ "image_id": id, "instances": set.instances.len(), "seed": master, "downscale": args.downscale }),
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Window index from `tile`.
    #[arg(long)]
    pub plan: PathBuf,
    /// Window-frame prediction files, or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    pub predictions: Vec<PathBuf>,
    /// Full-frame prediction file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub min_overlap_pixels: Option<u64>,
}

pub fn run_merge(args: MergeArgs, config: &PipelineConfig) -> Result<()> {
    let index = WindowIndex::load(&crate::files::require_exists(args.plan, "plan")?)?;
    let sets = load_predictions(&args.predictions)?;
    let min = args.min_overlap_pixels.unwrap_or(config.merge.min_overlap_pixels);
    let merged = merge_windows(&index, &sets, min)?;
    write_predictions(&args.out, &merged)?;
    let fragments: usize = sets.iter().map(|s| s.instances.len()).sum();
    log::event(
        "merged",
        json!({ "image_id": merged.image_id, "fragments": fragments, "instances": merged.instances.len(), "out": args.out }),
    );
    Ok(())
}
