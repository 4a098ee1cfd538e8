#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

//! Non-neural machinery for drone-based structural damage inspection:
//! polygon annotation ingestion, Poisson seamless cloning, synthetic collage
//! augmentation, sliding-window tiling with prediction merging, and the
//! any-overlap / aggregate-IoU evaluation metrics.

pub mod annot;
pub mod blend;
pub mod eval;
pub mod interchange;
pub mod io;
pub mod label;
pub mod mask;
pub mod polygon;
pub mod raster;
pub mod resample;
pub mod rle;
pub mod seed;
pub mod synth;
pub mod tile;

pub use label::{ClassLabel, Instance, UnknownClass};
pub use mask::{BinaryMask, MaskError, Overlap, PixelRect};
pub use polygon::{rasterize, PolygonError, PolygonOutline};
pub use raster::{RasterError, RasterImage};
pub use interchange::{Frame, InterchangeError, PredictionSet};
pub use rle::{RleError, RleMask};
