//! Row-major 8-bit raster images.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("unsupported channel count {0}, expected 3 (RGB) or 4 (RGBA)")]
    UnsupportedChannels(usize),
    #[error("sample buffer holds {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
    #[error("crop {x},{y} {width}x{height} exceeds image bounds {image_width}x{image_height}")]
    CropOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        image_width: usize,
        image_height: usize,
    },
}

/// An 8-bit RGB or RGBA image stored row-major, channels interleaved.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        if channels != 3 && channels != 4 {
            return Err(RasterError::UnsupportedChannels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(RasterError::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image with every pixel set to `value` (its length picks the channel count).
    pub fn filled(width: usize, height: usize, value: &[u8]) -> Result<Self, RasterError> {
        let data = value
            .iter()
            .copied()
            .cycle()
            .take(width * height * value.len())
            .collect();
        Self::new(width, height, value.len(), data)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self, RasterError> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.data[self.offset(x, y) + channel]
    }

    #[inline]
    pub fn set_sample(&mut self, x: usize, y: usize, channel: usize, value: u8) {
        let i = self.offset(x, y) + channel;
        self.data[i] = value;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = self.offset(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = self.offset(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    /// Alpha of pixel `(x, y)`; RGB images are fully opaque.
    #[inline]
    pub fn alpha(&self, x: usize, y: usize) -> u8 {
        if self.channels == 4 {
            self.sample(x, y, 3)
        } else {
            255
        }
    }

    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || x + width > self.width || y + height > self.height {
            return Err(RasterError::CropOutOfBounds {
                x,
                y,
                width,
                height,
                image_width: self.width,
                image_height: self.height,
            });
        }
        let row = width * self.channels;
        let mut data = Vec::with_capacity(row * height);
        for yy in y..y + height {
            let start = self.offset(x, yy);
            data.extend_from_slice(&self.data[start..start + row]);
        }
        Self::new(width, height, self.channels, data)
    }

    /// Writes `patch` with its top-left corner at `(x, y)`, ignoring alpha.
    /// Both images must have the same channel count and the patch must fit.
    pub fn paste(&mut self, patch: &RasterImage, x: usize, y: usize) {
        assert_eq!(self.channels, patch.channels, "channel mismatch in paste");
        assert!(x + patch.width <= self.width && y + patch.height <= self.height);
        let row = patch.width * self.channels;
        for py in 0..patch.height {
            let dst = self.offset(x, y + py);
            let src = patch.offset(0, py);
            self.data[dst..dst + row].copy_from_slice(&patch.data[src..src + row]);
        }
    }

    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .flat_map(|p| [p[0], p[1], p[2]])
            .collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    pub fn to_rgba(&self) -> RasterImage {
        if self.channels == 4 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect();
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 4,
            data,
        }
    }

    /// Mirrors the image left to right.
    pub fn flip_horizontal(&self) -> RasterImage {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let src = self.offset(self.width - 1 - x, y);
                let dst = out.offset(x, y);
                out.data[dst..dst + self.channels]
                    .copy_from_slice(&self.data[src..src + self.channels]);
            }
        }
        out
    }
}
