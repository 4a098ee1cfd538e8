use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde_json::json;

use damagekit::annot::{AnnotatedImage, AnnotatedInstance, Geometry, ImageSize, Manifest};
use damagekit::blend::{compose, solve, CloneTask, SolverSettings};
use damagekit::io::{load_mask, load_rgb};
use damagekit::{ClassLabel, RleMask};

use crate::config::PipelineConfig;
use crate::files::{write_image, write_text};
use crate::{log, parse};

#[derive(Debug, Args)]
pub struct BlendArgs {
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub dst: PathBuf,
    /// Paste region in destination coordinates; non-zero pixels are inside.
    #[arg(long)]
    pub mask: PathBuf,
    /// Destination pixel (x, y) is guided by source pixel (x+dx, y+dy).
    #[arg(long, value_parser = parse::offset, allow_hyphen_values = true)]
    pub offset: (i64, i64),
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub relaxation: Option<f64>,
    /// Also writes a one-image manifest labeling the paste region with `--class`.
    #[arg(long)]
    pub annotation_out: Option<PathBuf>,
    #[arg(long, default_value = "damage")]
    pub class: ClassLabel,
}

pub fn run(args: BlendArgs, config: &PipelineConfig) -> Result<()> {
    let settings = SolverSettings {
        tolerance: args.tolerance.unwrap_or(config.blend.tolerance),
        max_iterations: args.max_iterations.unwrap_or(config.blend.max_iterations),
        relaxation: args.relaxation.or(config.blend.relaxation),
    };
    let task = CloneTask {
        source: load_rgb(&args.src)?,
        destination: load_rgb(&args.dst)?,
        region: load_mask(&args.mask)?,
        offset: args.offset,
    };
    let solution = solve(&task, &settings)?;
    write_image(&args.out, &compose(&task, &solution))?;
    log::event(
        "blended",
        json!({
            "out": args.out,
            "pixels": solution.system.len(),
            "iterations": solution.iterations,
            "residual": solution.residual,
            "tolerance": settings.tolerance,
        }),
    );

    if let Some(path) = args.annotation_out {
        let (width, height) = task.destination.size();
        let name = args
            .out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let image = AnnotatedImage {
            path: name,
            size: Some(ImageSize { width, height }),
            instances: vec![AnnotatedInstance {
                class: args.class,
                geometry: Geometry::Mask(RleMask::encode(&task.region)),
            }],
        };
        write_text(&path, &(Manifest::unsplit(vec![image]).to_json() + "\n"))?;
        log::event(
            "paste_annotation_written",
            json!({ "path": path, "class": args.class, "note": "the whole paste region is labeled with the pasted class" }),
        );
    }
    Ok(())
}
