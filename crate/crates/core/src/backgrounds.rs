//! Minus-side boundary data `(M, U, V, W)(v; y)` for spherical waves
//! propagating into Minkowski, exterior Schwarzschild and Robertson-Walker
//! space-times.
//!
//! Every background here has `W = 0` and `exp(-V) = sin y`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::LineSamples;
use crate::grid::{Slice, POLE_GUARD};

/// Scale-factor exponent of a radiation-dominated universe, `R = t^(1/2)`.
pub const RADIATION_P: f64 = 0.5;
/// Scale-factor exponent of a matter-dominated universe, `R = t^(2/3)`.
pub const MATTER_P: f64 = 2.0 / 3.0;

/// Residual tolerance of the tortoise inversion (relative to `max(1, |A|)`).
pub const TORTOISE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackgroundError {
    #[error("{direction:?} Minkowski data needs v of the matching sign, got v = {v}")]
    WrongSign { v: f64, direction: Direction },
    #[error("y = {y} is inside the pole guard")]
    Pole { y: f64 },
    #[error("r = {r} is not outside the horizon 2m = {}", 2.0 * m)]
    InsideHorizon { r: f64, m: f64 },
    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),
    #[error("could not bracket the tortoise inversion for v = {v}")]
    NotBracketable { v: f64 },
    #[error("v = {v} maps closer to the horizon than double precision resolves")]
    HorizonUnresolved { v: f64 },
    #[error("Robertson-Walker data needs v > 0, got v = {0}")]
    NonPositiveV(f64),
    #[error("curvature index must be -1, 0 or 1, got {0}")]
    InvalidCurvature(i32),
    #[error("closed universe: v / sqrt(2) = {0} must stay below pi")]
    ArcBound(f64),
    #[error("scale-factor exponent must be finite and >= 0, got {0}")]
    InvalidExponent(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Outgoing,
    Incoming,
}

/// Space-time ahead of the wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackgroundSpec {
    /// Flat space-time with a planar phase: all potentials vanish.
    Planar,
    Minkowski {
        direction: Direction,
    },
    Schwarzschild {
        mass: f64,
    },
    /// `R(t) = t^p` with spatial curvature `k`.
    RobertsonWalker {
        k: i32,
        p: f64,
    },
}

/// Boundary values at one point of the line `theta = theta_-`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub m: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    /// Areal (or comoving) radius, where meaningful.
    pub r: Option<f64>,
    /// Cosmic time, where meaningful.
    pub t: Option<f64>,
}

impl BoundaryPoint {
    pub fn fields(&self) -> [f64; 4] {
        [self.m, self.u, self.v, self.w]
    }
}

fn check_pole(y: f64) -> Result<(), BackgroundError> {
    if !(POLE_GUARD..=PI - POLE_GUARD).contains(&y) {
        return Err(BackgroundError::Pole { y });
    }
    Ok(())
}

/// Planar phase in flat space-time.
pub fn planar_data() -> BoundaryPoint {
    BoundaryPoint { m: 0.0, u: 0.0, v: 0.0, w: 0.0, r: None, t: None }
}

/// Spherical wave in Minkowski space-time: `M = 0`, `exp(-U) = v^2 sin y / 2`,
/// `exp(-V) = sin y`.
pub fn minkowski_spherical_data(v: f64, y: f64, direction: Direction) -> Result<BoundaryPoint, BackgroundError> {
    let ok = match direction {
        Direction::Outgoing => v > 0.0,
        Direction::Incoming => v < 0.0,
    };
    if !ok {
        return Err(BackgroundError::WrongSign { v, direction });
    }
    check_pole(y)?;
    let s = y.sin();
    Ok(BoundaryPoint { m: 0.0, u: -(0.5 * v * v * s).ln(), v: -s.ln(), w: 0.0, r: Some(v.abs() / SQRT_2), t: None })
}

fn check_mass(m: f64) -> Result<(), BackgroundError> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(BackgroundError::InvalidMass(m));
    }
    Ok(())
}

/// Tortoise coordinate `A(r) = r + 2m log(r - 2m)`, with `dA/dr = 1/(1 - 2m/r)`.
pub fn schwarzschild_tortoise(r: f64, m: f64) -> Result<f64, BackgroundError> {
    check_mass(m)?;
    if !(r > 2.0 * m) {
        return Err(BackgroundError::InsideHorizon { r, m });
    }
    Ok(r + 2.0 * m * (r - 2.0 * m).ln())
}

/// Solve `A(r) = -v / sqrt(2)` for `r > 2m`.
///
/// The unknown is the log-distance `s = log(r - 2m)` to the horizon, on which
/// `A = 2m + exp(s) + 2m s` is smooth and increasing; the root is found by
/// Newton iteration safeguarded by bisection on a geometrically grown bracket.
/// Near the horizon the residual is limited by the rounding of `r` itself,
/// `|A'(r)| ulp(r)`, which can exceed [`TORTOISE_TOL`].
pub fn invert_tortoise(v: f64, m: f64) -> Result<f64, BackgroundError> {
    check_mass(m)?;
    if !v.is_finite() {
        return Err(BackgroundError::NotBracketable { v });
    }
    let target = -v / SQRT_2;
    let horizon = 2.0 * m;
    let f = |s: f64| horizon + s.exp() + horizon * s - target;
    let df = |s: f64| s.exp() + horizon;

    // bracket grown geometrically from r = 2m (1 + 1e-6)
    let start = (horizon * 1e-6).ln();
    let (mut lo, mut hi) = (start, start);
    let mut step = 1.0;
    while f(lo) > 0.0 {
        lo -= step;
        step *= 2.0;
        if lo.exp() == 0.0 {
            return Err(BackgroundError::NotBracketable { v });
        }
    }
    step = 1.0;
    while f(hi) < 0.0 {
        hi += step;
        step *= 2.0;
        if !hi.exp().is_finite() {
            return Err(BackgroundError::NotBracketable { v });
        }
    }

    let tol = TORTOISE_TOL * target.abs().max(1.0);
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fs = f(s);
        if fs.abs() <= tol * 0.5 || hi - lo <= 4.0 * f64::EPSILON * s.abs().max(1.0) {
            break;
        }
        if fs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let newton = s - fs / df(s);
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    let r = horizon + s.exp();
    if !(r > horizon) {
        return Err(BackgroundError::HorizonUnresolved { v });
    }
    let a = r + horizon * (r - horizon).ln();
    let conditioning = r / (r - horizon) * r * f64::EPSILON;
    if (a - target).abs() <= tol + 2.0 * conditioning {
        Ok(r)
    } else {
        Err(BackgroundError::NotBracketable { v })
    }
}

/// Schwarzschild data at a given radius: `exp(-M) = 1 - 2m/r`,
/// `exp(-U) = r^2 sin y`, `exp(-V) = sin y`.
pub fn schwarzschild_data_at_radius(r: f64, y: f64, m: f64) -> Result<BoundaryPoint, BackgroundError> {
    if !(r > 2.0 * m) {
        return Err(BackgroundError::InsideHorizon { r, m });
    }
    check_pole(y)?;
    let s = y.sin();
    Ok(BoundaryPoint { m: -(1.0 - 2.0 * m / r).ln(), u: -(r * r * s).ln(), v: -s.ln(), w: 0.0, r: Some(r), t: None })
}

/// Incoming spherical wave onto a Schwarzschild black hole.
pub fn schwarzschild_spherical_data(v: f64, y: f64, m: f64) -> Result<BoundaryPoint, BackgroundError> {
    check_pole(y)?;
    let r = invert_tortoise(v, m)?;
    schwarzschild_data_at_radius(r, y, m)
}

/// `dr/dv = -a/sqrt(2)` along the boundary line, with `a = 1 - 2m/r`.
pub fn schwarzschild_r_v(r: f64, m: f64) -> f64 {
    -(1.0 - 2.0 * m / r) / SQRT_2
}

/// `d^2 r/dv^2 = -a_v/sqrt(2)` along the boundary line.
pub fn schwarzschild_r_vv(r: f64, m: f64) -> f64 {
    let a_v = 2.0 * m / (r * r) * schwarzschild_r_v(r, m);
    -a_v / SQRT_2
}

fn check_rw(v: f64, k: i32, p: f64) -> Result<(), BackgroundError> {
    if !(v > 0.0) {
        return Err(BackgroundError::NonPositiveV(v));
    }
    if !(-1..=1).contains(&k) {
        return Err(BackgroundError::InvalidCurvature(k));
    }
    if !(p >= 0.0 && p.is_finite()) {
        return Err(BackgroundError::InvalidExponent(p));
    }
    if k == 1 && !(v / SQRT_2 < PI) {
        return Err(BackgroundError::ArcBound(v / SQRT_2));
    }
    Ok(())
}

/// Cosmic time on the boundary line: `I(t) = t^(p+1)/(p+1) = v/sqrt(2)`.
pub fn rw_time(v: f64, p: f64) -> f64 {
    ((p + 1.0) * v / SQRT_2).powf(1.0 / (p + 1.0))
}

/// Comoving radius on the boundary line for curvature `k`.
pub fn rw_radius(v: f64, k: i32) -> f64 {
    let s = v / SQRT_2;
    match k {
        1 => s.sin(),
        -1 => s.sinh(),
        _ => s,
    }
}

/// Outgoing spherical wave in a Robertson-Walker universe with `R = t^p`:
/// `exp(-M) = 1/R^2`, `exp(-U) = r^2 sin y / R^2`, `exp(-V) = sin y`.
///
/// The spatial metric carries the factor `1/R^2`; this is the form the data
/// are derived from and differs from the more common `R^2` convention.
pub fn rw_spherical_data(v: f64, y: f64, k: i32, p: f64) -> Result<BoundaryPoint, BackgroundError> {
    check_rw(v, k, p)?;
    check_pole(y)?;
    let t = rw_time(v, p);
    let big_r = t.powf(p);
    let r = rw_radius(v, k);
    let s = y.sin();
    Ok(BoundaryPoint {
        m: 2.0 * big_r.ln(),
        u: -(r * r * s).ln() + 2.0 * big_r.ln(),
        v: -s.ln(),
        w: 0.0,
        r: Some(r),
        t: Some(t),
    })
}

/// Closed-form v-constraint function of the Robertson-Walker data,
/// `(R R_tt - R_t^2)/R^4 + k = -p t^(-2p-2) + k`.
pub fn rw_constraint_g(v: f64, k: i32, p: f64) -> Result<f64, BackgroundError> {
    check_rw(v, k, p)?;
    let t = rw_time(v, p);
    Ok(-p * t.powf(-2.0 * p - 2.0) + k as f64)
}

impl BackgroundSpec {
    pub fn validate(&self) -> Result<(), BackgroundError> {
        match *self {
            BackgroundSpec::Planar | BackgroundSpec::Minkowski { .. } => Ok(()),
            BackgroundSpec::Schwarzschild { mass } => check_mass(mass),
            BackgroundSpec::RobertsonWalker { k, p } => {
                if !(-1..=1).contains(&k) {
                    return Err(BackgroundError::InvalidCurvature(k));
                }
                if !(p >= 0.0 && p.is_finite()) {
                    return Err(BackgroundError::InvalidExponent(p));
                }
                Ok(())
            }
        }
    }

    pub fn point(&self, v: f64, slice: Slice) -> Result<BoundaryPoint, BackgroundError> {
        match *self {
            BackgroundSpec::Planar => Ok(planar_data()),
            BackgroundSpec::Minkowski { direction } => minkowski_spherical_data(v, slice.y, direction),
            BackgroundSpec::Schwarzschild { mass } => schwarzschild_spherical_data(v, slice.y, mass),
            BackgroundSpec::RobertsonWalker { k, p } => rw_spherical_data(v, slice.y, k, p),
        }
    }

    /// Boundary points at every node of `v_nodes`.
    pub fn sample(&self, v_nodes: &[f64], slice: Slice) -> Result<Vec<BoundaryPoint>, BackgroundError> {
        v_nodes.iter().map(|&v| self.point(v, slice)).collect()
    }

    pub fn boundary_line(&self, v_nodes: &[f64], slice: Slice) -> Result<LineSamples, BackgroundError> {
        let pts = self.sample(v_nodes, slice)?;
        let mut line = LineSamples::with_len(pts.len());
        for (j, p) in pts.iter().enumerate() {
            line.set(j, p.fields());
        }
        Ok(line)
    }
}
