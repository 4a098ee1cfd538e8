use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde_json::json;

use damagekit::annot::Manifest;
use damagekit::synth::{generate_batch, load_library, BackgroundPool};

use crate::config::{self, PipelineConfig};
use crate::errors::usage;
use crate::files::{write_image, write_json, write_text};
use crate::{log, parse};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Exemplar crops: `<name>.png` with a `<name>.json` sidecar each.
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Directory of background photographs.
    #[arg(long)]
    pub backgrounds: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub count: u64,
    /// Required here or as `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse::size)]
    pub canvas: Option<(usize, usize)>,
}

pub fn run(args: SynthArgs, config: &PipelineConfig, workers: Option<usize>) -> Result<()> {
    let library_dir = config::input_path(args.library, &config.paths.exemplar_library, "library", "exemplar_library")?;
    let pool_dir = config::input_path(args.backgrounds, &config.paths.background_pool, "backgrounds", "background_pool")?;
    let out = config::output_path(args.out, &config.paths.output_dir)?;
    let seed = args
        .seed
        .or(config.seed)
        .ok_or_else(|| usage("synth needs a seed: pass --seed or set `seed` in the config"))?;
    let mut settings = config.synth.clone();
    settings.seed = seed;
    if let Some(canvas) = args.canvas {
        settings.canvas = canvas;
    }
    settings.validate()?;

    let library = load_library(&library_dir)?;
    let pool = BackgroundPool::load_dir(&pool_dir)?;
    log::event(
        "synth_started",
        json!({ "seed": seed, "count": args.count, "exemplars": library.len(), "backgrounds": pool.len(), "settings": settings }),
    );
    let samples = generate_batch(&library, &pool, &settings, args.count, workers)?;

    let mut annotations = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let name = format!("synth_{i:05}");
        let image_path = format!("images/{name}.png");
        write_image(&out.join(&image_path), &sample.image)?;
        write_json(&out.join(format!("logs/{name}.json")), &sample.log)?;
        for w in &sample.log.warnings {
            log::warn("synth_warning", json!({ "sample": i, "message": w }));
        }
        annotations.push(sample.annotation(image_path));
    }
    write_text(&out.join("manifest.json"), &(Manifest::unsplit(annotations).to_json() + "\n"))?;
    write_json(
        &out.join("settings.json"),
        &json!({ "seed": seed, "count": args.count, "settings": settings }),
    )?;
    let instances: usize = samples.iter().map(|s| s.instances.len()).sum();
    log::event("synth_finished", json!({ "out": out, "samples": samples.len(), "instances": instances }));
    Ok(())
}
