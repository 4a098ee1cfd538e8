use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use serde::Serialize;
use serde_json::json;

use damagekit::annot::{Manifest, Split};
use damagekit::eval::{default_thresholds, measure_area, render_overlay, sweep, EvalPair, ReferenceScale, SweepRow};
use damagekit::interchange::PredictionSet;
use damagekit::io::load_image;
use damagekit::{ClassLabel, Instance};

use crate::config::{self, ClassChoice, EvalConfig, PipelineConfig, SplitChoice};
use crate::errors::{data, usage};
use crate::files::{load_manifest, load_predictions, read_text, unique_stems, write_image, write_json, write_text};
use crate::{log, parse};

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub images: usize,
    pub class_filter: ClassChoice,
    pub split: SplitChoice,
    pub ground_truth_instances: usize,
    pub predicted_instances: usize,
    /// Row with the highest aggregate IoU; the earliest threshold wins ties.
    pub best: Option<SweepRow>,
    pub rows: Vec<SweepRow>,
}

fn selected(manifest: &Manifest, split: SplitChoice) -> Vec<&damagekit::annot::AnnotatedImage> {
    match split {
        SplitChoice::All => manifest.images().collect(),
        SplitChoice::Training => manifest.split(Split::Training).collect(),
        SplitChoice::Validation => manifest.split(Split::Validation).collect(),
    }
}

/// Pairs every selected image with exactly one full-frame prediction set and
/// writes `sweep.csv`, `report.json` and optional overlays under `out`.
pub fn evaluate(
    manifest: &Manifest,
    predictions: Vec<PredictionSet>,
    cfg: &EvalConfig,
    images_root: Option<&Path>,
    out: &Path,
) -> Result<EvalReport> {
    let images = selected(manifest, cfg.split);
    let mut by_id: BTreeMap<String, PredictionSet> = BTreeMap::new();
    for set in predictions {
        if let Some(dup) = by_id.insert(set.image_id.clone(), set) {
            return Err(data(format!("two prediction sets for image {:?}", dup.image_id)));
        }
    }
    let mut pairs = Vec::with_capacity(images.len());
    for img in &images {
        let predictions = by_id
            .remove(&img.path)
            .ok_or_else(|| data(format!("no predictions for image {:?}", img.path)))?;
        pairs.push(EvalPair {
            image_id: img.path.clone(),
            ground_truth: img.ground_truth()?,
            predictions,
        });
    }
    if let Some(extra) = by_id.keys().next() {
        return Err(data(format!(
            "predictions for {extra:?}, which is not among the evaluated images"
        )));
    }

    let thresholds = cfg.thresholds.clone().unwrap_or_else(default_thresholds);
    let table = sweep(&pairs, &thresholds, cfg.class.filter())?;
    write_text(&out.join("sweep.csv"), &table.to_csv())?;
    let in_class = |i: &&Instance| cfg.class.filter().is_none_or(|c| c == i.class);
    let report = EvalReport {
        images: pairs.len(),
        class_filter: cfg.class,
        split: cfg.split,
        ground_truth_instances: pairs.iter().map(|p| p.ground_truth.iter().filter(in_class).count()).sum(),
        predicted_instances: pairs.iter().map(|p| p.predictions.instances.iter().filter(in_class).count()).sum(),
        best: table.best_iou().cloned(),
        rows: table.rows.clone(),
    };
    write_json(&out.join("report.json"), &report)?;

    if let Some(t) = cfg.overlay_threshold {
        let root = images_root.ok_or_else(|| usage("overlays need the image root (--images or paths.dataset_root)"))?;
        let stems = unique_stems(pairs.iter().map(|p| p.image_id.as_str()))?;
        for pair in &pairs {
            let image = load_image(&root.join(&pair.image_id))?;
            let overlay = render_overlay(&image, pair, t, cfg.class.filter())?;
            write_image(&out.join(format!("overlays/{}.png", stems[&pair.image_id])), &overlay)?;
        }
    }
    log::event(
        "evaluated",
        json!({
            "images": report.images,
            "class_filter": report.class_filter,
            "thresholds": thresholds.len(),
            "best_threshold": report.best.as_ref().map(|r| r.threshold),
            "best_aggregate_iou": report.best.as_ref().and_then(|r| r.aggregate_iou),
            "out": out,
        }),
    );
    Ok(report)
}

/// Config eval section with flag overrides applied.
pub fn eval_config(
    config: &PipelineConfig,
    class: Option<ClassChoice>,
    thresholds: Option<Vec<f64>>,
    overlay_threshold: Option<f64>,
    split: Option<SplitChoice>,
) -> EvalConfig {
    EvalConfig {
        class: class.unwrap_or(config.eval.class),
        thresholds: thresholds.or_else(|| config.eval.thresholds.clone()),
        overlay_threshold: overlay_threshold.or(config.eval.overlay_threshold),
        split: split.unwrap_or(config.eval.split),
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// VIA project or canonical manifest holding the ground truth.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Image root, for sizes and overlays.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Full-frame prediction files, or directories of them.
    #[arg(long, num_args = 1.., required = true)]
    pub predictions: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub class: Option<ClassChoice>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',', value_parser = parse::unit)]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, value_parser = parse::unit)]
    pub overlay_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub split: Option<SplitChoice>,
}

pub fn run_eval(args: EvalArgs, config: &PipelineConfig) -> Result<()> {
    let ann = config::input_path(args.annotations, &config.paths.annotations, "annotations", "annotations")?;
    let root = config::optional_input(args.images, &config.paths.dataset_root, "images", "dataset_root")?;
    let out = config::output_path(args.out, &config.paths.output_dir)?;
    let manifest = load_manifest(&ann, &config.annotations.class_key, root.as_deref())?;
    let predictions = load_predictions(&args.predictions)?;
    let cfg = eval_config(config, args.class, args.thresholds, args.overlay_threshold, args.split);
    evaluate(&manifest, predictions, &cfg, root.as_deref(), &out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// A prediction file to measure.
    #[arg(long, conflicts_with = "annotations")]
    pub predictions: Option<PathBuf>,
    /// Measures ground truth of `--image-id` instead.
    #[arg(long, requires = "image_id")]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub image_id: Option<String>,
    /// Known length of the reference component, in physical units.
    #[arg(long)]
    pub reference_length: f64,
    /// Pixels the reference spans along the same direction.
    #[arg(long)]
    pub reference_pixels: f64,
    /// Predictions below this confidence are skipped.
    #[arg(long, default_value_t = 0.0, value_parser = parse::unit)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "all")]
    pub class: ClassChoice,
    /// Writes the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct MeasuredInstance {
    index: usize,
    class: ClassLabel,
    confidence: Option<f64>,
    pixel_area: u64,
    area: f64,
}

pub fn run_measure(args: MeasureArgs, config: &PipelineConfig) -> Result<()> {
    if !(args.reference_length > 0.0 && args.reference_pixels > 0.0) {
        return Err(usage("reference length and pixel extent must both be positive"));
    }
    let scale = ReferenceScale::new(args.reference_length, args.reference_pixels)?;
    let (image_id, source, instances) = if let Some(path) = args.predictions {
        let path = crate::files::require_exists(path, "prediction file")?;
        let set = PredictionSet::from_json(&read_text(&path)?)?;
        let kept: Vec<Instance> = set
            .instances
            .into_iter()
            .filter(|i| i.confidence.unwrap_or(1.0) >= args.threshold)
            .collect();
        (set.image_id, "predictions", kept)
    } else {
        let ann = config::input_path(args.annotations, &config.paths.annotations, "annotations", "annotations")?;
        let root = config::optional_input(args.images, &config.paths.dataset_root, "images", "dataset_root")?;
        let id = args
            .image_id
            .ok_or_else(|| usage("measuring ground truth needs --image-id"))?;
        let manifest = load_manifest(&ann, &config.annotations.class_key, root.as_deref())?;
        let image = manifest
            .find(&id)
            .ok_or_else(|| data(format!("image {id:?} is not in the annotations")))?;
        (id, "ground_truth", image.ground_truth()?)
    };

    let measured: Vec<MeasuredInstance> = instances
        .iter()
        .enumerate()
        .filter(|(_, i)| args.class.filter().is_none_or(|c| c == i.class))
        .map(|(index, inst)| {
            let m = measure_area(inst, &scale);
            MeasuredInstance {
                index,
                class: inst.class,
                confidence: inst.confidence,
                pixel_area: m.pixel_area,
                area: m.area,
            }
        })
        .collect();
    let report = json!({
        "image_id": image_id,
        "source": source,
        "units_per_pixel": scale.units_per_pixel(),
        "fronto_parallel_assumed": true,
        "total_area": measured.iter().map(|m| m.area).sum::<f64>(),
        "instances": measured,
    });
    match args.out {
        Some(out) => write_json(&out, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    log::event("measured", json!({ "image_id": report["image_id"], "instances": report["instances"].as_array().map(Vec::len) }));
    Ok(())
}
