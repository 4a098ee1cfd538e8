//! annotations → tile → mock-detect → merge → eval, through the same steps
//! the individual subcommands run, so each intermediate file matches what
//! running them by hand produces.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.json
//! tiles/<stem>/plan.json, tiles/<stem>/windows/window_NNN.png   (split mode)
//! detections/<stem>/window_NNN.json                              (split mode)
//! predictions/<stem>.json
//! eval/sweep.csv, eval/report.json, eval/overlays/<stem>.png
//! ```

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde_json::json;

use damagekit::interchange::PredictionSet;

use super::annotations::prepare_manifest;
use super::detect::{merge_windows, mock_full, mock_windows, tile_image, window_file};
use super::evaluate::{eval_config, evaluate};
use crate::config::{self, ClassChoice, PipelineConfig, TilingMode};
use crate::files::{unique_stems, write_predictions, write_text};
use crate::{log, parse};

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse::size)]
    pub window: Option<(usize, usize)>,
    #[arg(long)]
    pub overlap: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<TilingMode>,
    #[arg(long)]
    pub downscale_factor: Option<f64>,
    #[arg(long, value_enum)]
    pub class: Option<ClassChoice>,
}

pub fn run(args: PipelineArgs, config: &PipelineConfig) -> Result<()> {
    let ann = config::input_path(args.annotations, &config.paths.annotations, "annotations", "annotations")?;
    let root = config::input_path(args.images, &config.paths.dataset_root, "images", "dataset_root")?;
    let out = config::output_path(args.out, &config.paths.output_dir)?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let [ww, wh] = config.tiling.window;
    let window = args.window.unwrap_or((ww, wh));
    let overlap = args.overlap.unwrap_or(config.tiling.overlap);
    let mode = args.mode.unwrap_or(config.tiling.mode);
    let factor = args.downscale_factor.unwrap_or(config.tiling.downscale_factor);
    let eval_cfg = eval_config(config, args.class, None, None, None);
    log::event(
        "pipeline_started",
        json!({ "seed": seed, "mode": mode, "window": window, "overlap": overlap, "downscale_factor": factor, "config": config }),
    );

    let manifest = prepare_manifest(
        &ann,
        Some(&root),
        &config.annotations.class_key,
        config.annotations.validation_fraction,
        seed,
    )?;
    write_text(&out.join("manifest.json"), &(manifest.to_json() + "\n"))?;

    let ids: Vec<String> = match eval_cfg.split {
        config::SplitChoice::All => manifest.images().map(|i| i.path.clone()).collect(),
        config::SplitChoice::Training => manifest
            .split(damagekit::annot::Split::Training)
            .map(|i| i.path.clone())
            .collect(),
        config::SplitChoice::Validation => manifest
            .split(damagekit::annot::Split::Validation)
            .map(|i| i.path.clone())
            .collect(),
    };
    let stems = unique_stems(ids.iter().map(String::as_str))?;
    let mut merged: Vec<PredictionSet> = Vec::with_capacity(ids.len());
    for id in &ids {
        let image = manifest.find(id).expect("id taken from the manifest");
        let gt = image.ground_truth()?;
        let stem = &stems[id];
        let set = match mode {
            TilingMode::Split => {
                let index = tile_image(&root.join(id), id, window, overlap, &out.join("tiles").join(stem))?;
                let sets = mock_windows(&gt, &index, seed, &config.mock)?;
                for (k, s) in sets.iter().enumerate() {
                    write_predictions(&out.join("detections").join(stem).join(format!("{}.json", window_file(k))), s)?;
                }
                merge_windows(&index, &sets, config.merge.min_overlap_pixels)?
            }
            TilingMode::Downscale => {
                let size = image.size.expect("ground truth implies a size");
                mock_full(id, (size.width, size.height), &gt, Some(factor), seed, &config.mock)?
            }
        };
        write_predictions(&out.join("predictions").join(format!("{stem}.json")), &set)?;
        merged.push(set);
    }

    let report = evaluate(&manifest, merged, &eval_cfg, Some(&root), &out.join("eval"))?;
    let first = report.rows.first();
    log::event(
        "pipeline_finished",
        json!({
            "images": report.images,
            "recall_at_lowest_threshold": first.and_then(|r| r.recall),
            "precision_at_lowest_threshold": first.and_then(|r| r.precision),
            "best_aggregate_iou": report.best.as_ref().and_then(|r| r.aggregate_iou),
            "out": out,
        }),
    );
    Ok(())
}
