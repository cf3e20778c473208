//! Uniform characteristic grids in the fast coordinate `theta` and the slow
//! null coordinate `v`.
//!
//! The transverse variables `(y, z)` only enter as parameters, so a grid
//! carries a finite list of independent transverse slices instead of a
//! discretized transverse field.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum distance (radians) between an angular slice and a pole.
pub const POLE_GUARD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("degenerate {axis} range [{min}, {max}]")]
    DegenerateRange { axis: &'static str, min: f64, max: f64 },
    #[error("{axis} needs at least 2 nodes, got {count}")]
    TooFewNodes { axis: &'static str, count: usize },
    #[error("slice {index} has y = {y}, inside the pole guard")]
    PoleViolation { index: usize, y: f64 },
    #[error("non-finite transverse parameter in slice {index}")]
    NonFiniteSlice { index: usize },
    #[error("refinement factor must be at least 1")]
    ZeroFactor,
    #[error("grid has no transverse slices")]
    NoSlices,
}

/// Transverse parameter pair `(y, z)` labelling one independent slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub y: f64,
    pub z: f64,
}

impl Slice {
    pub const fn new(y: f64, z: f64) -> Self {
        Self { y, z }
    }

    /// The equatorial slice `y = pi/2`, the natural default for planar runs.
    pub fn equator() -> Self {
        Self::new(std::f64::consts::FRAC_PI_2, 0.0)
    }
}

/// One uniformly spaced axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    min: f64,
    max: f64,
    count: usize,
    spacing: f64,
}

impl Axis {
    fn new(axis: &'static str, (min, max): (f64, f64), count: usize) -> Result<Self, GridError> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(GridError::DegenerateRange { axis, min, max });
        }
        if count < 2 {
            return Err(GridError::TooFewNodes { axis, count });
        }
        Ok(Self { min, max, count, spacing: (max - min) / (count - 1) as f64 })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Coordinate of node `i`.
    ///
    /// Computed from the node fraction `i / (n - 1)` so that nested grids
    /// produced by [`refine_grid`] share bit-identical coordinates.
    pub fn node(&self, i: usize) -> f64 {
        let t = i as f64 / (self.count - 1) as f64;
        self.min * (1.0 - t) + self.max * t
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    fn refined(&self, factor: usize) -> Self {
        let count = (self.count - 1) * factor + 1;
        Self { min: self.min, max: self.max, count, spacing: (self.max - self.min) / (count - 1) as f64 }
    }
}

/// Uniform `(theta, v)` grid plus the transverse slices it is evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicGrid {
    theta: Axis,
    v: Axis,
    slices: Vec<Slice>,
}

impl CharacteristicGrid {
    pub fn theta(&self) -> &Axis {
        &self.theta
    }

    pub fn v(&self) -> &Axis {
        &self.v
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn n_theta(&self) -> usize {
        self.theta.count
    }

    pub fn n_v(&self) -> usize {
        self.v.count
    }

    pub fn d_theta(&self) -> f64 {
        self.theta.spacing
    }

    pub fn d_v(&self) -> f64 {
        self.v.spacing
    }

    /// Same grid with `theta` and `v` exchanged.
    pub fn transposed(&self) -> Self {
        Self { theta: self.v.clone(), v: self.theta.clone(), slices: self.slices.clone() }
    }

    /// Same `(theta, v)` lattice restricted to a single slice.
    pub fn with_slices(&self, slices: Vec<Slice>) -> Result<Self, GridError> {
        check_slices(&slices)?;
        Ok(Self { theta: self.theta.clone(), v: self.v.clone(), slices })
    }
}

fn check_slices(slices: &[Slice]) -> Result<(), GridError> {
    if slices.is_empty() {
        return Err(GridError::NoSlices);
    }
    for (index, s) in slices.iter().enumerate() {
        if !(s.y.is_finite() && s.z.is_finite()) {
            return Err(GridError::NonFiniteSlice { index });
        }
        if s.y < POLE_GUARD || s.y > std::f64::consts::PI - POLE_GUARD {
            return Err(GridError::PoleViolation { index, y: s.y });
        }
    }
    Ok(())
}

/// Build a uniform characteristic grid.
pub fn build_grid(
    theta_range: (f64, f64),
    v_range: (f64, f64),
    n_theta: usize,
    n_v: usize,
    slices: Vec<Slice>,
) -> Result<CharacteristicGrid, GridError> {
    let theta = Axis::new("theta", theta_range, n_theta)?;
    let v = Axis::new("v", v_range, n_v)?;
    check_slices(&slices)?;
    Ok(CharacteristicGrid { theta, v, slices })
}

/// Subdivide every cell of `grid` into `factor x factor` cells.
pub fn refine_grid(grid: &CharacteristicGrid, factor: usize) -> Result<CharacteristicGrid, GridError> {
    if factor == 0 {
        return Err(GridError::ZeroFactor);
    }
    Ok(CharacteristicGrid { theta: grid.theta.refined(factor), v: grid.v.refined(factor), slices: grid.slices.clone() })
}
