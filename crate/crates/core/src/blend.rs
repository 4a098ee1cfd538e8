//! Seamless cloning by solving the discrete Poisson equation with Dirichlet
//! boundary values taken from the destination.
//!
//! For every pixel `p` of the paste region Ω and every color channel:
//!
//! ```text
//! |N_p|·f_p − Σ_{q ∈ N_p ∩ Ω} f_q = Σ_{q ∈ N_p ∩ ∂Ω} f*_q + Σ_{q ∈ N_p} (g_p − g_q)
//! ```
//!
//! with `N_p` the 4-neighborhood, `f*` the destination and `g` the source
//! sampled at `p + offset`. Ω must not touch the destination border, so
//! `|N_p| = 4` everywhere. Guidance terms whose source neighbor falls
//! outside the source image are dropped.
//!
//! The system is relaxed with successive over-relaxation (plain Gauss–Seidel
//! at `ω = 1`) until the relative residual `‖b − Af‖₂ / ‖b‖₂` of every
//! channel drops below the tolerance. Values are rounded and clamped only
//! after convergence.

use thiserror::Error;

use crate::mask::BinaryMask;
use crate::raster::RasterImage;
use crate::resample::quantize;

/// Color channels solved; a destination alpha channel passes through untouched.
pub const COLOR_CHANNELS: usize = 3;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum BlendError {
    #[error("solver settings invalid: {0}")]
    InvalidSettings(String),
    #[error("paste region is empty")]
    EmptyRegion,
    #[error("region is {region_width}x{region_height} but the destination is {width}x{height}")]
    RegionSize {
        region_width: usize,
        region_height: usize,
        width: usize,
        height: usize,
    },
    #[error("paste region touches the destination border at ({x}, {y}); erode it first")]
    TouchesBorder { x: usize, y: usize },
    #[error("region pixel ({x}, {y}) maps outside the source image under the offset")]
    SourceOutOfBounds { x: usize, y: usize },
    #[error("candidate is {actual_width}x{actual_height}, expected {width}x{height}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        actual_width: usize,
        actual_height: usize,
    },
    #[error("solver did not converge within {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative L2 residual at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Over-relaxation factor in `(0, 2)`. `None` picks the optimal factor of a
    /// square grid the size of Ω's bounding box; `Some(1.0)` is Gauss–Seidel.
    pub relaxation: Option<f64>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 10_000,
            relaxation: None,
        }
    }
}

impl SolverSettings {
    pub fn gauss_seidel() -> Self {
        Self {
            relaxation: Some(1.0),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), BlendError> {
        if !(self.tolerance > 0.0) {
            return Err(BlendError::InvalidSettings(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(BlendError::InvalidSettings(
                "max_iterations must be at least 1".into(),
            ));
        }
        if let Some(w) = self.relaxation {
            if !(w > 0.0 && w < 2.0) {
                return Err(BlendError::InvalidSettings(format!(
                    "relaxation must lie in (0, 2), got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Source, destination, paste region Ω in destination coordinates, and the
/// offset mapping destination pixel `(x, y)` to source pixel `(x+dx, y+dy)`.
#[derive(Debug, Clone)]
pub struct CloneTask {
    pub source: RasterImage,
    pub destination: RasterImage,
    pub region: BinaryMask,
    pub offset: (i64, i64),
}

impl CloneTask {
    pub fn validate(&self) -> Result<(), BlendError> {
        let (w, h) = self.destination.size();
        if self.region.size() != (w, h) {
            return Err(BlendError::RegionSize {
                region_width: self.region.width(),
                region_height: self.region.height(),
                width: w,
                height: h,
            });
        }
        if self.region.is_empty() {
            return Err(BlendError::EmptyRegion);
        }
        for index in self.region.ones() {
            let (x, y) = (index % w, index / w);
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                return Err(BlendError::TouchesBorder { x, y });
            }
            if self.source_coords(x, y).is_none() {
                return Err(BlendError::SourceOutOfBounds { x, y });
            }
        }
        Ok(())
    }

    fn source_coords(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        let sx = x as i64 + self.offset.0;
        let sy = y as i64 + self.offset.1;
        let (sw, sh) = self.source.size();
        (sx >= 0 && sy >= 0 && (sx as usize) < sw && (sy as usize) < sh)
            .then_some((sx as usize, sy as usize))
    }
}

/// The assembled sparse system, one right-hand side per color channel.
#[derive(Debug, Clone)]
pub struct PoissonSystem {
    /// Destination coordinates of each unknown, row-major order.
    pixels: Vec<(usize, usize)>,
    /// Up to four in-Ω neighbors per unknown, `NONE` padded.
    neighbors: Vec<[u32; 4]>,
    rhs: [Vec<f64>; COLOR_CHANNELS],
}

impl PoissonSystem {
    pub fn assemble(task: &CloneTask) -> Result<Self, BlendError> {
        task.validate()?;
        let (w, _) = task.destination.size();
        let pixels: Vec<(usize, usize)> = task.region.ones().map(|i| (i % w, i / w)).collect();
        let mut index = std::collections::HashMap::with_capacity(pixels.len());
        for (i, &p) in pixels.iter().enumerate() {
            index.insert(p, i as u32);
        }

        let mut neighbors = Vec::with_capacity(pixels.len());
        let mut rhs: [Vec<f64>; COLOR_CHANNELS] =
            std::array::from_fn(|_| Vec::with_capacity(pixels.len()));
        for &(x, y) in &pixels {
            let (sx, sy) = task.source_coords(x, y).expect("validated");
            let mut adj = [NONE; 4];
            let mut b = [0.0f64; COLOR_CHANNELS];
            let around = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)];
            for (k, &(qx, qy)) in around.iter().enumerate() {
                match index.get(&(qx, qy)) {
                    Some(&j) => adj[k] = j,
                    None => {
                        for (c, bc) in b.iter_mut().enumerate() {
                            *bc += task.destination.sample(qx, qy, c) as f64;
                        }
                    }
                }
                if let Some((qsx, qsy)) = task.source_coords(qx, qy) {
                    for (c, bc) in b.iter_mut().enumerate() {
                        *bc += task.source.sample(sx, sy, c) as f64
                            - task.source.sample(qsx, qsy, c) as f64;
                    }
                }
            }
            neighbors.push(adj);
            for c in 0..COLOR_CHANNELS {
                rhs[c].push(b[c]);
            }
        }
        Ok(Self {
            pixels,
            neighbors,
            rhs,
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }

    pub fn rhs(&self, channel: usize) -> &[f64] {
        &self.rhs[channel]
    }

    /// `‖b − Af‖₂ / ‖b‖₂` for one channel; the absolute norm when `b = 0`.
    pub fn channel_residual(&self, channel: usize, values: &[f64]) -> f64 {
        let b = &self.rhs[channel];
        let mut r2 = 0.0;
        let mut b2 = 0.0;
        for (i, adj) in self.neighbors.iter().enumerate() {
            let mut af = 4.0 * values[i];
            for &j in adj.iter().filter(|&&j| j != NONE) {
                af -= values[j as usize];
            }
            r2 += (b[i] - af).powi(2);
            b2 += b[i] * b[i];
        }
        if b2 > 0.0 {
            (r2 / b2).sqrt()
        } else {
            r2.sqrt()
        }
    }

    /// Maximum channel residual of a full per-channel solution.
    pub fn residual(&self, values: &[Vec<f64>; COLOR_CHANNELS]) -> f64 {
        (0..COLOR_CHANNELS)
            .map(|c| self.channel_residual(c, &values[c]))
            .fold(0.0, f64::max)
    }

    fn sweep(&self, channel: usize, values: &mut [f64], omega: f64) {
        let b = &self.rhs[channel];
        for (i, adj) in self.neighbors.iter().enumerate() {
            let mut sum = b[i];
            for &j in adj.iter().filter(|&&j| j != NONE) {
                sum += values[j as usize];
            }
            values[i] += omega * (sum / 4.0 - values[i]);
        }
    }

    fn auto_relaxation(&self) -> f64 {
        let (mut x0, mut x1, mut y0, mut y1) = (usize::MAX, 0, usize::MAX, 0);
        for &(x, y) in &self.pixels {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let n = (x1 - x0).max(y1 - y0) + 1;
        2.0 / (1.0 + (std::f64::consts::PI / (n as f64 + 1.0)).sin())
    }
}

#[derive(Debug, Clone)]
pub struct CloneSolution {
    pub system: PoissonSystem,
    /// Unquantized solution per channel, indexed like `system.pixels()`.
    pub values: [Vec<f64>; COLOR_CHANNELS],
    pub iterations: usize,
    pub residual: f64,
    /// Maximum channel residual after each sweep.
    pub trace: Vec<f64>,
}

/// Relaxes the system from the destination values until every channel meets the tolerance.
pub fn solve(task: &CloneTask, settings: &SolverSettings) -> Result<CloneSolution, BlendError> {
    settings.validate()?;
    let system = PoissonSystem::assemble(task)?;
    let omega = settings
        .relaxation
        .unwrap_or_else(|| system.auto_relaxation());
    let mut values: [Vec<f64>; COLOR_CHANNELS] = std::array::from_fn(|c| {
        system
            .pixels
            .iter()
            .map(|&(x, y)| task.destination.sample(x, y, c) as f64)
            .collect()
    });

    let mut residual = system.residual(&values);
    let mut trace = Vec::new();
    let mut iterations = 0;
    while residual > settings.tolerance {
        if iterations == settings.max_iterations {
            return Err(BlendError::NotConverged {
                iterations,
                residual,
            });
        }
        for (c, v) in values.iter_mut().enumerate() {
            system.sweep(c, v, omega);
        }
        iterations += 1;
        residual = system.residual(&values);
        trace.push(residual);
    }
    Ok(CloneSolution {
        system,
        values,
        iterations,
        residual,
        trace,
    })
}

/// Writes a rounded, clamped solution into a copy of the destination.
pub fn compose(task: &CloneTask, solution: &CloneSolution) -> RasterImage {
    let mut out = task.destination.clone();
    for (i, &(x, y)) in solution.system.pixels.iter().enumerate() {
        for c in 0..COLOR_CHANNELS {
            out.set_sample(x, y, c, quantize(solution.values[c][i]));
        }
    }
    out
}

pub fn seamless_clone(task: &CloneTask, settings: &SolverSettings) -> Result<RasterImage, BlendError> {
    let solution = solve(task, settings)?;
    Ok(compose(task, &solution))
}

/// Maximum over channels of the relative residual at `candidate`'s Ω values.
pub fn residual(task: &CloneTask, candidate: &RasterImage) -> Result<f64, BlendError> {
    let (w, h) = task.destination.size();
    if candidate.size() != (w, h) {
        return Err(BlendError::DimensionMismatch {
            width: w,
            height: h,
            actual_width: candidate.width(),
            actual_height: candidate.height(),
        });
    }
    let system = PoissonSystem::assemble(task)?;
    let values = std::array::from_fn(|c| {
        system
            .pixels
            .iter()
            .map(|&(x, y)| candidate.sample(x, y, c) as f64)
            .collect()
    });
    Ok(system.residual(&values))
}
