//! Exemplar library on disk: `<name>.png` (RGBA) beside `<name>.json`.
//!
//! ```json
//! {"class": "damage", "target_mask": {"rle": [3, 4, 9], "width": 4, "height": 4}, "source_id": "span_03/crack_1"}
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExemplarClass, ExemplarCrop, SynthError};
use crate::io::{load_image, save_image};
use crate::rle::RleMask;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    class: ExemplarClass,
    target_mask: RleMask,
    source_id: String,
}

fn sidecar_error(path: &Path, message: impl ToString) -> SynthError {
    SynthError::Sidecar {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads every sidecar in `dir` with its image, sorted by file name.
pub fn load_library(dir: &Path) -> Result<Vec<ExemplarCrop>, SynthError> {
    let mut sidecars: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_error(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_error(dir))?;
    sidecars.retain(|p| p.extension().is_some_and(|e| e == "json"));
    sidecars.sort();
    if sidecars.is_empty() {
        return Err(SynthError::EmptyLibrary);
    }
    sidecars.iter().map(|p| load_exemplar(p)).collect()
}

fn load_exemplar(sidecar_path: &Path) -> Result<ExemplarCrop, SynthError> {
    let text = std::fs::read_to_string(sidecar_path).map_err(io_error(sidecar_path))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| sidecar_error(sidecar_path, e))?;
    let patch = load_image(&sidecar_path.with_extension("png"))?.to_rgba();
    let target = sidecar
        .target_mask
        .decode()
        .map_err(|e| sidecar_error(sidecar_path, e))?;
    ExemplarCrop::new(patch, sidecar.class, target, sidecar.source_id)
}

/// Writes `<name>.png` and `<name>.json` into `dir`.
pub fn save_exemplar(dir: &Path, name: &str, crop: &ExemplarCrop) -> Result<(), SynthError> {
    save_image(&crop.patch, &dir.join(format!("{name}.png")))?;
    let sidecar = Sidecar {
        class: crop.class,
        target_mask: RleMask::encode(&crop.target_mask),
        source_id: crop.source_id.clone(),
    };
    let path = dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| sidecar_error(&path, e))?;
    std::fs::write(&path, text).map_err(io_error(&path))
}
