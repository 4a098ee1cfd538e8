//! Polygon outlines and their conversion to pixel masks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::BinaryMask;

#[derive(Debug, Error, PartialEq)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {index} has a non-finite coordinate ({x}, {y})")]
    NonFinite { index: usize, x: f64, y: f64 },
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    EmptyRaster { width: usize, height: usize },
}

/// Closed polygon in pixel coordinates; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PolygonOutline {
    vertices: Vec<[f64; 2]>,
}

impl PolygonOutline {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self, PolygonError> {
        if vertices.len() < 3 {
            return Err(PolygonError::TooFewVertices(vertices.len()));
        }
        if let Some((index, v)) = vertices
            .iter()
            .enumerate()
            .find(|(_, v)| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(PolygonError::NonFinite {
                index,
                x: v[0],
                y: v[1],
            });
        }
        Ok(Self { vertices })
    }

    pub fn from_xy(xs: &[f64], ys: &[f64]) -> Result<Self, PolygonError> {
        Self::new(xs.iter().zip(ys).map(|(&x, &y)| [x, y]).collect())
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Scanline fill: pixel `(x, y)` is set iff its center `(x+0.5, y+0.5)`
    /// lies inside under the even-odd rule. Pixels outside the raster are dropped.
    pub fn rasterize(&self, width: usize, height: usize) -> Result<BinaryMask, PolygonError> {
        if width == 0 || height == 0 {
            return Err(PolygonError::EmptyRaster { width, height });
        }
        let mut mask = BinaryMask::new(width, height);
        let (min_y, max_y) = self
            .vertices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v[1]), hi.max(v[1]))
            });
        let row_start = (min_y - 0.5).floor().max(0.0) as usize;
        let row_end = ((max_y - 0.5).ceil().max(-1.0) + 1.0).min(height as f64) as usize;
        let mut crossings = Vec::with_capacity(self.vertices.len());
        for y in row_start..row_end {
            let cy = y as f64 + 0.5;
            crossings.clear();
            for ([xa, ya], [xb, yb]) in self.edges() {
                // half-open in y so shared vertices count once
                if (ya > cy) != (yb > cy) {
                    crossings.push((xb - xa) * (cy - ya) / (yb - ya) + xa);
                }
            }
            crossings.sort_by(|a, b| a.total_cmp(b));
            // center cx is inside iff an odd number of crossings lie strictly right of it
            for pair in crossings.chunks_exact(2) {
                let (left, right) = (pair[0], pair[1]);
                // first center with cx >= left, last center with cx < right
                let x_from = (left - 0.5).ceil().max(0.0);
                let x_to = (right - 0.5).ceil().min(width as f64);
                if x_to <= x_from {
                    continue;
                }
                for x in x_from as usize..x_to as usize {
                    mask.set(x, y, true);
                }
            }
        }
        Ok(mask)
    }
}

impl TryFrom<Vec<[f64; 2]>> for PolygonOutline {
    type Error = PolygonError;

    fn try_from(vertices: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Self::new(vertices)
    }
}

impl From<PolygonOutline> for Vec<[f64; 2]> {
    fn from(p: PolygonOutline) -> Self {
        p.vertices
    }
}

/// Convenience wrapper over [`PolygonOutline::rasterize`].
pub fn rasterize(
    polygon: &PolygonOutline,
    width: usize,
    height: usize,
) -> Result<BinaryMask, PolygonError> {
    polygon.rasterize(width, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(points: &[(f64, f64)]) -> PolygonOutline {
        PolygonOutline::new(points.iter().map(|&(x, y)| [x, y]).collect()).unwrap()
    }

    #[test]
    fn integer_square_covers_its_pixels() {
        let mask = poly(&[(0., 0.), (4., 0.), (4., 4.), (0., 4.)])
            .rasterize(8, 8)
            .unwrap();
        assert_eq!(mask.area(), 16);
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(mask.get(x, y), x < 4 && y < 4, "pixel {x},{y}");
            }
        }
    }

    #[test]
    fn two_vertices_are_rejected() {
        assert_eq!(
            PolygonOutline::new(vec![[0., 0.], [1., 1.]]),
            Err(PolygonError::TooFewVertices(2))
        );
        assert!(PolygonOutline::new(vec![[0., 0.], [1., f64::NAN], [2., 0.]]).is_err());
    }

    #[test]
    fn concave_l_shape() {
        let l = poly(&[(0., 0.), (6., 0.), (6., 2.), (2., 2.), (2., 6.), (0., 6.)]);
        assert_eq!(l.rasterize(8, 8).unwrap().area(), 20);
    }

    #[test]
    fn vertices_outside_the_raster_are_clipped() {
        let big = poly(&[(-5., -5.), (20., -5.), (20., 3.), (-5., 3.)]);
        let mask = big.rasterize(6, 6).unwrap();
        assert_eq!(mask.area(), 18);
        let beyond = poly(&[(10., 10.), (12., 10.), (12., 12.)]);
        assert!(beyond.rasterize(6, 6).unwrap().is_empty());
    }

    #[test]
    fn serializes_as_point_list() {
        let p = poly(&[(0., 0.), (1., 0.), (0., 1.)]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, "[[0.0,0.0],[1.0,0.0],[0.0,1.0]]");
        assert!(serde_json::from_str::<PolygonOutline>("[[0,0],[1,1]]").is_err());
    }
}
