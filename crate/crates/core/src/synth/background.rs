//! Collage backgrounds tiled from random crops of unrelated images.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::io::load_rgb;
use crate::mask::PixelRect;
use crate::raster::RasterImage;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Background source images, RGB, in a fixed order.
#[derive(Debug, Clone)]
pub struct BackgroundPool {
    names: Vec<String>,
    images: Vec<RasterImage>,
}

impl BackgroundPool {
    pub fn new(images: Vec<(String, RasterImage)>) -> Result<Self, SynthError> {
        if images.is_empty() {
            return Err(SynthError::EmptyPool);
        }
        let (names, images) = images
            .into_iter()
            .map(|(n, img)| (n, img.to_rgb()))
            .unzip();
        Ok(Self { names, images })
    }

    /// Every PNG/JPEG file in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Self, SynthError> {
        let read_err = |e: std::io::Error| SynthError::Io {
            path: dir.to_path_buf(),
            source: e,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(read_err)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(read_err)?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            })
            .collect();
        paths.sort();
        let images = paths
            .iter()
            .map(|p| {
                let name = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
                Ok((name, load_rgb(p)?))
            })
            .collect::<Result<Vec<_>, SynthError>>()?;
        Self::new(images)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn image(&self, index: usize) -> &RasterImage {
        &self.images[index]
    }

    /// Grid cell size: no larger than the canvas or the smallest pool image,
    /// so every cell can be filled by a crop of any pool image.
    pub fn cell_size(&self, canvas: (usize, usize)) -> (usize, usize) {
        let min_w = self.images.iter().map(RasterImage::width).min().unwrap_or(1);
        let min_h = self.images.iter().map(RasterImage::height).min().unwrap_or(1);
        (canvas.0.min(min_w), canvas.1.min(min_h))
    }
}

/// One collage cell: canvas rectangle, chosen pool image, and crop origin in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundTile {
    pub cell: PixelRect,
    pub image: usize,
    pub crop_x: usize,
    pub crop_y: usize,
}

/// Draws one random pool image and crop origin per grid cell, row-major.
pub fn plan_background(
    pool: &BackgroundPool,
    canvas: (usize, usize),
    rng: &mut impl Rng,
) -> Vec<BackgroundTile> {
    let (cw, ch) = pool.cell_size(canvas);
    let mut tiles = Vec::new();
    for y0 in (0..canvas.1).step_by(ch) {
        for x0 in (0..canvas.0).step_by(cw) {
            let cell = PixelRect {
                x0,
                y0,
                x1: (x0 + cw).min(canvas.0),
                y1: (y0 + ch).min(canvas.1),
            };
            let image = rng.random_range(0..pool.len());
            let src = pool.image(image);
            let crop_x = rng.random_range(0..=src.width() - cell.width());
            let crop_y = rng.random_range(0..=src.height() - cell.height());
            tiles.push(BackgroundTile {
                cell,
                image,
                crop_x,
                crop_y,
            });
        }
    }
    tiles
}

pub fn render_background(
    pool: &BackgroundPool,
    canvas: (usize, usize),
    tiles: &[BackgroundTile],
) -> RasterImage {
    let mut out = RasterImage::filled(canvas.0, canvas.1, &[0, 0, 0]).expect("canvas is non-empty");
    for t in tiles {
        let patch = pool
            .image(t.image)
            .crop(t.crop_x, t.crop_y, t.cell.width(), t.cell.height())
            .expect("tile crop lies inside its pool image");
        out.paste(&patch, t.cell.x0, t.cell.y0);
    }
    out
}

/// Canvas fully covered by a grid collage of random crops of pool images.
pub fn build_background(
    pool: &BackgroundPool,
    canvas: (usize, usize),
    rng: &mut impl Rng,
) -> (RasterImage, Vec<BackgroundTile>) {
    let tiles = plan_background(pool, canvas, rng);
    (render_background(pool, canvas, &tiles), tiles)
}
