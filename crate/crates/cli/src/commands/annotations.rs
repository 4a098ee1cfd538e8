use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use serde_json::json;

use damagekit::annot::{split_manifest, Manifest, Split};
use damagekit::ClassLabel;

use crate::config::{self, PipelineConfig};
use crate::errors::usage;
use crate::files::{load_manifest, write_text};
use crate::log;

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// VIA project JSON or canonical manifest.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Directory the annotated image paths are relative to. Enables size
    /// lookup and rasterization of every polygon.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// VIA region attribute holding the class.
    #[arg(long)]
    pub class_key: Option<String>,
    /// Writes the canonical manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tags a seeded random fraction of images as validation.
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Loads annotations and applies the configured split. Shared with `pipeline`.
pub fn prepare_manifest(
    annotations: &Path,
    images: Option<&Path>,
    class_key: &str,
    validation_fraction: Option<f64>,
    seed: u64,
) -> Result<Manifest> {
    let manifest = load_manifest(annotations, class_key, images)?;
    let Some(fraction) = validation_fraction else {
        return Ok(manifest);
    };
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(usage(format!("validation fraction must lie in (0, 1), got {fraction}")));
    }
    let images = manifest.images.into_iter().map(|e| e.image).collect();
    Ok(split_manifest(images, fraction, seed)?.to_manifest())
}

pub fn run(args: ValidateArgs, config: &PipelineConfig) -> Result<()> {
    let path = config::input_path(args.annotations, &config.paths.annotations, "annotations", "annotations")?;
    let images = config::optional_input(args.images, &config.paths.dataset_root, "images", "dataset_root")?;
    let class_key = args.class_key.unwrap_or_else(|| config.annotations.class_key.clone());
    let fraction = args.validation_fraction.or(config.annotations.validation_fraction);
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let manifest = prepare_manifest(&path, images.as_deref(), &class_key, fraction, seed)?;

    let mut per_class = [0usize; 2];
    let mut rasterized = 0usize;
    for img in manifest.images() {
        for inst in &img.instances {
            per_class[(inst.class == ClassLabel::Dirt) as usize] += 1;
        }
        if img.size.is_some() {
            // surfaces out-of-frame or degenerate geometry
            rasterized += img.ground_truth()?.len();
        }
    }
    let summary = json!({
        "images": manifest.images.len(),
        "instances": per_class[0] + per_class[1],
        "damage": per_class[0],
        "dirt": per_class[1],
        "images_without_instances": manifest.images().filter(|i| i.instances.is_empty()).count(),
        "rasterized_instances": rasterized,
        "training": manifest.split(Split::Training).count(),
        "validation": manifest.split(Split::Validation).count(),
    });
    println!("{summary}");
    log::event("annotations_validated", json!({ "path": path, "summary": summary }));
    if let Some(out) = args.out {
        write_text(&out, &(manifest.to_json() + "\n"))?;
        log::event("manifest_written", json!({ "path": out }));
    }
    Ok(())
}
