use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use damagekit::annot::{parse_via, Manifest};
use damagekit::interchange::PredictionSet;
use damagekit::io::save_image;
use damagekit::RasterImage;

use crate::errors::{data, usage};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_image(path: &Path, image: &RasterImage) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(save_image(image, path)?)
}

pub fn require_exists(path: PathBuf, what: &str) -> Result<PathBuf> {
    if !path.exists() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(path)
}

/// A canonical manifest, or a VIA project converted to one. Sizes are read
/// from image headers under `images_root` where the document has none.
pub fn load_manifest(path: &Path, class_key: &str, images_root: Option<&Path>) -> Result<Manifest> {
    let text = read_text(path)?;
    let canonical = serde_json::from_str::<serde_json::Value>(&text)
        .map(|v| v.get("version").is_some() && v.get("images").is_some_and(|i| i.is_array()))
        .unwrap_or(false);
    let mut manifest = if canonical {
        Manifest::parse(&text)
    } else {
        let options = damagekit::annot::ViaOptions {
            class_key: class_key.to_string(),
        };
        parse_via(&text, &options).map(Manifest::unsplit)
    }
    .with_context(|| format!("loading annotations {}", path.display()))?;
    if let Some(root) = images_root {
        for entry in &mut manifest.images {
            if entry.image.size.is_none() {
                entry.image.resolve_size(root)?;
            }
        }
    }
    Ok(manifest)
}

/// File-system safe name for an image id: extension dropped, separators replaced.
pub fn stem_of(image_id: &str) -> String {
    let p = Path::new(image_id);
    let base = match (p.parent(), p.file_stem()) {
        (Some(parent), Some(stem)) => parent.join(stem).to_string_lossy().into_owned(),
        _ => image_id.to_string(),
    };
    base.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Stems for many ids, refusing ids that would write to the same file.
pub fn unique_stems<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<BTreeMap<String, String>> {
    let mut by_stem: BTreeMap<String, String> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for id in ids {
        let stem = stem_of(id);
        if let Some(other) = by_stem.insert(stem.clone(), id.to_string()) {
            return Err(data(format!(
                "image ids {other:?} and {id:?} map to the same output name {stem:?}"
            )));
        }
        out.insert(id.to_string(), stem);
    }
    Ok(out)
}

/// Every `.json` file named directly, or inside a named directory, in sorted order.
pub fn collect_json(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            out.extend(found);
        } else if path.exists() {
            out.push(path.clone());
        } else {
            return Err(usage(format!("prediction path {} does not exist", path.display())));
        }
    }
    Ok(out)
}

pub fn load_predictions(paths: &[PathBuf]) -> Result<Vec<PredictionSet>> {
    collect_json(paths)?
        .iter()
        .map(|p| {
            PredictionSet::from_json(&read_text(p)?).with_context(|| format!("reading predictions {}", p.display()))
        })
        .collect()
}

pub fn write_predictions(path: &Path, set: &PredictionSet) -> Result<()> {
    let mut text = set.to_json()?;
    text.push('\n');
    write_text(path, &text)
}
