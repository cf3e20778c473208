//! Characteristic (Goursat) integration of the colliding-plane-wave
//! evolution system.
//!
//! Data are given on `v = v_min` and `theta = theta_min`; the solution is
//! marched cell by cell with the classical second-order corner update
//!
//! ```text
//! P(i+1,j+1) = P(i+1,j) + P(i,j+1) - P(i,j) + dtheta * dv * F(cell centre)
//! ```
//!
//! where centre values are 4-point averages and centre derivatives are edge
//! differences. The `U` equation decouples from the others and its corner
//! update is a quadratic, solved in closed form; the coupled `(V, W, M)`
//! corner values are resolved by fixed-point iteration.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{BoundaryData, FieldState, Fields, LineSamples, Polarization};
use crate::grid::CharacteristicGrid;

/// `|W|` beyond which `cosh W` / `sinh W` products risk overflow.
pub const W_CAP: f64 = 300.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("|W| = {w} exceeds the overflow cap {cap}")]
    WOverflow { w: f64, cap: f64 },
    #[error("data has {got} slices but the grid has {expected}")]
    SliceMismatch { expected: usize, got: usize },
    #[error("slice {slice}: data line lengths ({initial}, {boundary}) do not match grid ({n_theta}, {n_v})")]
    SizeMismatch { slice: usize, initial: usize, boundary: usize, n_theta: usize, n_v: usize },
    #[error("plane-polarized solve given W != 0 data on slice {slice}")]
    NonzeroW { slice: usize },
}

/// Right-hand sides of the four evolution equations at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MixedDerivatives {
    pub m_tv: f64,
    pub u_tv: f64,
    pub v_tv: f64,
    pub w_tv: f64,
}

/// Plane-polarized evolution right-hand sides (`W = 0`).
pub fn mixed_derivatives_polarized(u_t: f64, u_v: f64, v_t: f64, v_v: f64) -> MixedDerivatives {
    MixedDerivatives {
        u_tv: u_t * u_v,
        v_tv: 0.5 * (u_t * v_v + u_v * v_t),
        m_tv: 0.5 * (-(u_t * u_v) + v_t * v_v),
        w_tv: 0.0,
    }
}

/// General (non-polarized) evolution right-hand sides.
#[allow(clippy::too_many_arguments)]
pub fn mixed_derivatives_general(
    u_t: f64,
    u_v: f64,
    v_t: f64,
    v_v: f64,
    w_t: f64,
    w_v: f64,
    w: f64,
) -> Result<MixedDerivatives, SolverError> {
    if !(w.abs() <= W_CAP) {
        return Err(SolverError::WOverflow { w, cap: W_CAP });
    }
    let (sh, ch) = (w.sinh(), w.cosh());
    Ok(MixedDerivatives {
        u_tv: u_t * u_v,
        v_tv: 0.5 * (u_t * v_v + u_v * v_t) - (v_t * w_v + v_v * w_t) * w.tanh(),
        w_tv: 0.5 * (u_t * w_v + u_v * w_t) + v_t * v_v * sh * ch,
        m_tv: 0.5 * (-(u_t * u_v) + v_t * v_v * ch * ch + w_t * w_v),
    })
}

/// Tunables of the corner update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Absolute per-field change at which the fixed-point iteration stops.
    pub fixed_point_tol: f64,
    pub max_iterations: usize,
    /// `exp(-U)` below this marks a focusing singularity.
    pub singular_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { fixed_point_tol: 1e-12, max_iterations: 50, singular_threshold: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Completed,
    Singular,
    Diverged,
}

impl SolveStatus {
    fn severity(self) -> u8 {
        match self {
            SolveStatus::Completed => 0,
            SolveStatus::Singular => 1,
            SolveStatus::Diverged => 2,
        }
    }
}

/// Why a slice stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    /// `exp(-U)` fell below the threshold at the corner.
    Focusing {
        exp_neg_u: f64,
    },
    /// The `U` corner update has no real root (the discrete image of `f + g <= 0`).
    NoRealRoot,
    /// Fixed-point iteration did not settle within the iteration budget.
    NoConvergence {
        residual: f64,
    },
    NonFinite,
    WOverflow {
        w: f64,
    },
}

/// Grid cell at which a slice stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopLocation {
    pub slice: usize,
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    pub v: f64,
    pub reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationStats {
    pub max_iterations: usize,
    pub max_residual: f64,
}

impl IterationStats {
    fn merge(self, o: IterationStats) -> Self {
        Self {
            max_iterations: self.max_iterations.max(o.max_iterations),
            max_residual: self.max_residual.max(o.max_residual),
        }
    }
}

/// Per-slice outcome of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceOutcome {
    pub status: SolveStatus,
    pub stop: Option<StopLocation>,
    pub stats: IterationStats,
    pub min_exp_neg_u: f64,
}

impl SliceOutcome {
    /// Whether node `(i, j)` holds a computed (or data) value.
    ///
    /// The sweep runs over `v`-rows with `theta` innermost, so a stop at
    /// `(i, j)` leaves exactly the nodes preceding it in that order filled.
    pub fn is_filled(&self, i: usize, j: usize) -> bool {
        match self.stop {
            None => true,
            Some(s) => i == 0 || j == 0 || j < s.j || (j == s.j && i < s.i),
        }
    }
}

/// Result of [`solve_goursat`]. Unfilled nodes of a halted slice hold `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub state: FieldState,
    pub status: SolveStatus,
    /// First stopped slice, if any.
    pub singular_location: Option<StopLocation>,
    pub min_exp_neg_u: f64,
    pub stats: IterationStats,
    pub slices: Vec<SliceOutcome>,
}

impl SolveResult {
    pub fn is_filled(&self, slice: usize, i: usize, j: usize) -> bool {
        self.slices[slice].is_filled(i, j)
    }
}

/// Integrate the characteristic initial-boundary problem on every slice.
pub fn solve_goursat(
    system: Polarization,
    data: &BoundaryData,
    grid: &CharacteristicGrid,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let ns = grid.slices().len();
    if data.slice_count() != ns {
        return Err(SolverError::SliceMismatch { expected: ns, got: data.slice_count() });
    }
    for k in 0..ns {
        let (ini, bnd) = (data.initial(k), data.boundary(k));
        if ini.len() != grid.n_theta() || bnd.len() != grid.n_v() {
            return Err(SolverError::SizeMismatch {
                slice: k,
                initial: ini.len(),
                boundary: bnd.len(),
                n_theta: grid.n_theta(),
                n_v: grid.n_v(),
            });
        }
        if system == Polarization::Plane && (ini.w.iter().chain(&bnd.w)).any(|&w| w != 0.0) {
            return Err(SolverError::NonzeroW { slice: k });
        }
    }

    let results: Vec<(Fields, SliceOutcome)> = (0..ns)
        .into_par_iter()
        .map(|k| solve_slice(system, data.initial(k), data.boundary(k), grid, config, k))
        .collect();

    let mut status = SolveStatus::Completed;
    let mut location = None;
    let mut stats = IterationStats::default();
    let mut min_e = f64::INFINITY;
    let mut fields = Vec::with_capacity(ns);
    let mut outcomes = Vec::with_capacity(ns);
    for (f, o) in results {
        if o.status.severity() > status.severity() {
            status = o.status;
        }
        if location.is_none() {
            location = o.stop;
        }
        stats = stats.merge(o.stats);
        min_e = min_e.min(o.min_exp_neg_u);
        fields.push(f);
        outcomes.push(o);
    }
    Ok(SolveResult {
        state: FieldState::from_parts_unchecked(grid.clone(), system, fields),
        status,
        singular_location: location,
        min_exp_neg_u: min_e,
        stats,
        slices: outcomes,
    })
}

/// Values and derivatives at the centre of cell `(i, j)` given its four corners.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellCentre {
    pub val: [f64; 4],
    pub d_t: [f64; 4],
    pub d_v: [f64; 4],
}

/// Corner layout: `c00 = (i, j)`, `c10 = (i+1, j)`, `c01 = (i, j+1)`, `c11 = (i+1, j+1)`.
#[inline]
pub(crate) fn cell_centre(c00: [f64; 4], c10: [f64; 4], c01: [f64; 4], c11: [f64; 4], dt: f64, dv: f64) -> CellCentre {
    let mut val = [0.0; 4];
    let mut d_t = [0.0; 4];
    let mut d_v = [0.0; 4];
    for k in 0..4 {
        val[k] = 0.25 * (c00[k] + c10[k] + c01[k] + c11[k]);
        d_t[k] = (c11[k] + c10[k] - c01[k] - c00[k]) / (2.0 * dt);
        d_v[k] = (c11[k] + c01[k] - c10[k] - c00[k]) / (2.0 * dv);
    }
    CellCentre { val, d_t, d_v }
}

// Field slots in the `[M, U, V, W]` arrays.
const M: usize = 0;
const U: usize = 1;
const V: usize = 2;
const W: usize = 3;

pub(crate) fn rhs_at(system: Polarization, c: &CellCentre) -> Result<MixedDerivatives, SolverError> {
    match system {
        Polarization::Plane => Ok(mixed_derivatives_polarized(c.d_t[U], c.d_v[U], c.d_t[V], c.d_v[V])),
        Polarization::General => {
            mixed_derivatives_general(c.d_t[U], c.d_v[U], c.d_t[V], c.d_v[V], c.d_t[W], c.d_v[W], c.val[W])
        }
    }
}

/// Closed-form `U` corner increment `x = U11 - U00` from the quadratic
/// `x = a + b + (x^2 - (a - b)^2) / 4`, taking the root continuous with
/// `x = a + b`. `None` when the discriminant is negative.
#[inline]
fn u_corner_increment(a: f64, b: f64) -> Option<f64> {
    let d = a - b;
    let disc = 4.0 - 4.0 * (a + b) + d * d;
    if !(disc >= 0.0) {
        return None;
    }
    // product of the roots is 4(a+b) - (a-b)^2; dividing avoids cancellation
    Some((4.0 * (a + b) - d * d) / (2.0 + disc.sqrt()))
}

enum CellError {
    Stop(StopReason),
}

struct CellOk {
    value: [f64; 4],
    iterations: usize,
    residual: f64,
}

fn update_cell(
    system: Polarization,
    c00: [f64; 4],
    c10: [f64; 4],
    c01: [f64; 4],
    dt: f64,
    dv: f64,
    cfg: &SolverConfig,
) -> Result<CellOk, CellError> {
    let x = u_corner_increment(c10[U] - c00[U], c01[U] - c00[U]).ok_or(CellError::Stop(StopReason::NoRealRoot))?;
    let u11 = c00[U] + x;
    let exp_neg_u = (-u11).exp();
    if !u11.is_finite() {
        return Err(CellError::Stop(StopReason::NonFinite));
    }
    if exp_neg_u < cfg.singular_threshold {
        return Err(CellError::Stop(StopReason::Focusing { exp_neg_u }));
    }

    let area = dt * dv;
    let mut cur = [0.0; 4];
    for k in 0..4 {
        cur[k] = c10[k] + c01[k] - c00[k];
    }
    cur[U] = u11;
    if system == Polarization::Plane {
        cur[W] = 0.0;
    }

    let mut residual = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        let c = cell_centre(c00, c10, c01, cur, dt, dv);
        let rhs = rhs_at(system, &c).map_err(|e| match e {
            SolverError::WOverflow { w, .. } => CellError::Stop(StopReason::WOverflow { w }),
            _ => CellError::Stop(StopReason::NonFinite),
        })?;
        let mut next = cur;
        next[V] = c10[V] + c01[V] - c00[V] + area * rhs.v_tv;
        next[M] = c10[M] + c01[M] - c00[M] + area * rhs.m_tv;
        if system == Polarization::General {
            next[W] = c10[W] + c01[W] - c00[W] + area * rhs.w_tv;
        }
        if next.iter().any(|x| !x.is_finite()) {
            return Err(CellError::Stop(StopReason::NonFinite));
        }
        residual = (next[V] - cur[V]).abs().max((next[M] - cur[M]).abs()).max((next[W] - cur[W]).abs());
        cur = next;
        if residual <= cfg.fixed_point_tol {
            return Ok(CellOk { value: cur, iterations: it, residual });
        }
    }
    Err(CellError::Stop(StopReason::NoConvergence { residual }))
}

fn solve_slice(
    system: Polarization,
    initial: &LineSamples,
    boundary: &LineSamples,
    grid: &CharacteristicGrid,
    cfg: &SolverConfig,
    slice: usize,
) -> (Fields, SliceOutcome) {
    let (nt, nv) = (grid.n_theta(), grid.n_v());
    let (dt, dv) = (grid.d_theta(), grid.d_v());
    let mut f = Fields::zeros(nt, nv);
    for i in 0..nt {
        f.set(i, 0, initial.at(i));
    }
    for j in 0..nv {
        f.set(0, j, boundary.at(j));
    }
    let mut min_e = f64::INFINITY;
    for i in 0..nt {
        min_e = min_e.min((-f.u[[i, 0]]).exp());
    }
    for j in 0..nv {
        min_e = min_e.min((-f.u[[0, j]]).exp());
    }

    let mut stats = IterationStats::default();
    let mut stop = None;
    'sweep: for j in 0..nv - 1 {
        for i in 0..nt - 1 {
            match update_cell(system, f.at(i, j), f.at(i + 1, j), f.at(i, j + 1), dt, dv, cfg) {
                Ok(cell) => {
                    f.set(i + 1, j + 1, cell.value);
                    min_e = min_e.min((-cell.value[U]).exp());
                    stats.max_iterations = stats.max_iterations.max(cell.iterations);
                    stats.max_residual = stats.max_residual.max(cell.residual);
                }
                Err(CellError::Stop(reason)) => {
                    stop = Some(StopLocation {
                        slice,
                        i: i + 1,
                        j: j + 1,
                        theta: grid.theta().node(i + 1),
                        v: grid.v().node(j + 1),
                        reason,
                    });
                    break 'sweep;
                }
            }
        }
    }
    let status = match stop.map(|s| s.reason) {
        None => SolveStatus::Completed,
        Some(StopReason::Focusing { .. } | StopReason::NoRealRoot) => SolveStatus::Singular,
        Some(_) => SolveStatus::Diverged,
    };
    (f, SliceOutcome { status, stop, stats, min_exp_neg_u: min_e })
}

/// Largest defect of the discrete corner update over all interior cells and
/// fields: `P11 - P10 - P01 + P00 - dtheta dv F(centre)`, divided by the cell
/// area so that it is a mixed-derivative residual.
pub fn scheme_residual(state: &FieldState) -> Result<f64, SolverError> {
    let g = state.grid();
    let (dt, dv) = (g.d_theta(), g.d_v());
    let mut worst: f64 = 0.0;
    for f in state.slices() {
        let (nt, nv) = f.dim();
        for j in 0..nv - 1 {
            for i in 0..nt - 1 {
                let (c00, c10, c01, c11) = (f.at(i, j), f.at(i + 1, j), f.at(i, j + 1), f.at(i + 1, j + 1));
                let c = cell_centre(c00, c10, c01, c11, dt, dv);
                let rhs = rhs_at(state.polarization(), &c)?;
                let rhs = [rhs.m_tv, rhs.u_tv, rhs.v_tv, rhs.w_tv];
                for k in 0..4 {
                    let mixed = ((c11[k] - c10[k]) - (c01[k] - c00[k])) / (dt * dv);
                    worst = worst.max((mixed - rhs[k]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Mask of filled nodes for slice `k` of a result (`true` = populated).
pub fn filled_mask(result: &SolveResult, k: usize) -> Array2<bool> {
    let g = result.state.grid();
    Array2::from_shape_fn((g.n_theta(), g.n_v()), |(i, j)| result.is_filled(k, i, j))
}
