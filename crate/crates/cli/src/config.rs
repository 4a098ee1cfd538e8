//! The declarative TOML config. Every key is optional; flags override keys,
//! keys override built-in defaults. Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};

use damagekit::blend::SolverSettings;
use damagekit::synth::SynthSettings;
use damagekit::ClassLabel;

use crate::errors::usage;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every random stream is derived from it by name.
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    pub annotations: AnnotationConfig,
    pub tiling: TilingConfig,
    pub mock: MockConfig,
    pub merge: MergeConfig,
    /// `synth.seed` is ignored; the master seed is used instead.
    pub synth: SynthSettings,
    pub blend: BlendConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Root that annotation image paths are relative to.
    pub dataset_root: Option<PathBuf>,
    /// VIA project or canonical manifest.
    pub annotations: Option<PathBuf>,
    pub exemplar_library: Option<PathBuf>,
    pub background_pool: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl PathsConfig {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.dataset_root,
            &mut self.annotations,
            &mut self.exemplar_library,
            &mut self.background_pool,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationConfig {
    /// VIA region attribute holding the class.
    pub class_key: String,
    pub validation_fraction: Option<f64>,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            class_key: "class".into(),
            validation_fraction: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TilingMode {
    /// Overlapping full-resolution windows.
    Split,
    /// The whole image at reduced resolution.
    Downscale,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingConfig {
    pub window: [usize; 2],
    pub overlap: usize,
    pub mode: TilingMode,
    pub downscale_factor: f64,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self {
            window: [1024, 1024],
            overlap: 256,
            mode: TilingMode::Split,
            downscale_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockConfig {
    pub dilation_radius: usize,
    pub false_positive_rate: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            dilation_radius: 2,
            false_positive_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    pub min_overlap_pixels: u64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self { min_overlap_pixels: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Over-relaxation factor; chosen from the region size when absent.
    pub relaxation: Option<f64>,
}

impl Default for BlendConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            relaxation: s.relaxation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassChoice {
    Damage,
    Dirt,
    All,
}

impl ClassChoice {
    pub fn filter(self) -> Option<ClassLabel> {
        match self {
            ClassChoice::Damage => Some(ClassLabel::Damage),
            ClassChoice::Dirt => Some(ClassLabel::Dirt),
            ClassChoice::All => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    All,
    Training,
    Validation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub class: ClassChoice,
    /// Strictly increasing, within [0, 1]. Defaults to 0.00, 0.01, …, 1.00.
    pub thresholds: Option<Vec<f64>>,
    /// Writes overlay PNGs at this threshold when set.
    pub overlay_threshold: Option<f64>,
    pub split: SplitChoice,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            class: ClassChoice::Damage,
            thresholds: None,
            overlay_threshold: None,
            split: SplitChoice::All,
        }
    }
}

pub fn load(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = parse(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    config.paths.resolve(path.parent().unwrap_or(Path::new(".")));
    Ok(config)
}

/// Errors name the offending key, e.g. `tiling.overlap: invalid type`.
pub fn parse(text: &str) -> Result<PipelineConfig, String> {
    let de = toml::Deserializer::parse(text).map_err(|e| e.to_string().trim_end().to_string())?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let inner = inner.trim_end();
        if path == "." {
            inner.to_string()
        } else {
            format!("{path}: {inner}")
        }
    })
}

/// A path from its flag, else from the config key, checked for existence.
pub fn input_path(flag: Option<PathBuf>, configured: &Option<PathBuf>, flag_name: &str, key: &str) -> Result<PathBuf> {
    match (flag, configured) {
        (Some(p), _) => {
            if p.exists() {
                Ok(p)
            } else {
                Err(usage(format!("--{flag_name} {} does not exist", p.display())))
            }
        }
        (None, Some(p)) => {
            if p.exists() {
                Ok(p.clone())
            } else {
                Err(usage(format!("paths.{key}: {} does not exist", p.display())))
            }
        }
        (None, None) => Err(usage(format!("missing --{flag_name} (or paths.{key} in the config)"))),
    }
}

pub fn optional_input(flag: Option<PathBuf>, configured: &Option<PathBuf>, flag_name: &str, key: &str) -> Result<Option<PathBuf>> {
    if flag.is_none() && configured.is_none() {
        return Ok(None);
    }
    input_path(flag, configured, flag_name, key).map(Some)
}

pub fn output_path(flag: Option<PathBuf>, configured: &Option<PathBuf>) -> Result<PathBuf> {
    flag.or_else(|| configured.clone())
        .ok_or_else(|| usage("missing --out (or paths.output_dir in the config)"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c.tiling.window, [1024, 1024]);
        assert_eq!(c.tiling.overlap, 256);
        assert_eq!(c.synth, SynthSettings::default());
        assert_eq!(c.eval.class, ClassChoice::Damage);
        assert!(c.seed.is_none());
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse("[tiling]\noverlap = \"wide\"\n").unwrap_err();
        assert!(e.starts_with("tiling.overlap"), "{e}");
        let e = parse("[synth]\ncanvass = [1, 2]\n").unwrap_err();
        assert!(e.contains("canvass"), "{e}");
        let e = parse("[eval]\nclass = \"rust\"\n").unwrap_err();
        assert!(e.starts_with("eval.class"), "{e}");
    }

    #[test]
    fn nested_sections_parse() {
        let c = parse(
            "seed = 7\n[paths]\noutput_dir = \"out\"\n[synth]\ncanvas = [64, 48]\n[mock]\nfalse_positive_rate = 0.2\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.synth.canvas, (64, 48));
        assert_eq!(c.mock.false_positive_rate, 0.2);
        assert_eq!(c.paths.output_dir, Some(PathBuf::from("out")));
    }
}
