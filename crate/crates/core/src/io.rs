//! PNG/JPEG load and store, delegated to the `image` crate.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Rgb, Rgba};
use thiserror::Error;

use crate::mask::BinaryMask;
use crate::raster::RasterImage;

#[derive(Debug, Error)]
pub enum ImageIoError {
    #[error("failed to read image {path}: {source}")]
    Read {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("failed to write image {path}: {source}")]
    Write {
        path: PathBuf,
        source: image::ImageError,
    },
}

fn from_dynamic(img: DynamicImage) -> RasterImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_alpha() {
        RasterImage::new(w, h, 4, img.into_rgba8().into_raw())
    } else {
        RasterImage::new(w, h, 3, img.into_rgb8().into_raw())
    }
    .expect("decoder produced a consistent buffer")
}

/// Loads an image as RGB, or RGBA when the file carries alpha.
pub fn load_image(path: &Path) -> Result<RasterImage, ImageIoError> {
    let img = image::open(path).map_err(|source| ImageIoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(from_dynamic(img))
}

pub fn load_rgb(path: &Path) -> Result<RasterImage, ImageIoError> {
    load_image(path).map(|img| img.to_rgb())
}

/// Reads only the header to get `(width, height)`.
pub fn image_dimensions(path: &Path) -> Result<(usize, usize), ImageIoError> {
    image::image_dimensions(path)
        .map(|(w, h)| (w as usize, h as usize))
        .map_err(|source| ImageIoError::Read {
            path: path.to_path_buf(),
            source,
        })
}

/// Any non-zero luma is set.
pub fn load_mask(path: &Path) -> Result<BinaryMask, ImageIoError> {
    let img = image::open(path)
        .map_err(|source| ImageIoError::Read {
            path: path.to_path_buf(),
            source,
        })?
        .into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(BinaryMask::from_fn(w, h, |x, y| img.get_pixel(x as u32, y as u32)[0] != 0))
}

pub fn save_image(image: &RasterImage, path: &Path) -> Result<(), ImageIoError> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let result = if image.channels() == 4 {
        ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, image.data().to_vec())
            .expect("buffer length checked by RasterImage")
            .save(path)
    } else {
        ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, image.data().to_vec())
            .expect("buffer length checked by RasterImage")
            .save(path)
    };
    result.map_err(|source| ImageIoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a mask as an 8-bit grayscale PNG (255 = set).
pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<(), ImageIoError> {
    let buf = image::GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        image::Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    buf.save(path).map_err(|source| ImageIoError::Write {
        path: path.to_path_buf(),
        source,
    })
}
