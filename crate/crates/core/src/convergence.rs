//! Grid-refinement studies: errors against an exact solution, or differences
//! between successive levels, and the observed orders `log2(e_h / e_{h/2})`.

use serde::Serialize;
use thiserror::Error;

use crate::field::{BoundaryData, Field, FieldState, Fields, Polarization};
use crate::grid::{refine_grid, CharacteristicGrid, GridError};
use crate::solver::{solve_goursat, SolveResult, SolveStatus, SolverConfig, SolverError};

/// Errors below this are treated as exact and get no order.
pub const ERROR_FLOOR: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum ConvergenceError {
    #[error("need at least {need} refinement levels, got {got}")]
    TooFewLevels { need: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("level {level} stopped with status {status:?}")]
    NotCompleted { level: usize, status: SolveStatus },
    #[error("building data for level {level}: {message}")]
    Data { level: usize, message: String },
}

/// Errors of one level, per field `[M, U, V, W]` (maximum over slices).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelErrors {
    pub n_theta: usize,
    pub n_v: usize,
    pub linf: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    /// `"exact"` or `"self"`.
    pub kind: &'static str,
    pub levels: Vec<LevelErrors>,
    /// `orders[k][f]` compares `levels[k]` with `levels[k + 1]`; `None` when
    /// either error is below [`ERROR_FLOOR`].
    pub orders: Vec<[Option<f64>; 4]>,
}

impl ConvergenceStudy {
    fn new(kind: &'static str, levels: Vec<LevelErrors>) -> Self {
        let orders = levels
            .windows(2)
            .map(|w| {
                let mut o = [None; 4];
                for (k, slot) in o.iter_mut().enumerate() {
                    *slot = observed_order(w[0].linf[k], w[1].linf[k]);
                }
                o
            })
            .collect();
        ConvergenceStudy { kind, levels, orders }
    }

    /// Orders of one field across all level pairs.
    pub fn field_orders(&self, field: Field) -> Vec<Option<f64>> {
        let k = Field::ALL.iter().position(|f| *f == field).unwrap_or(0);
        self.orders.iter().map(|o| o[k]).collect()
    }
}

/// `log2(coarse / fine)`, or `None` if either error is negligible.
pub fn observed_order(coarse: f64, fine: f64) -> Option<f64> {
    if coarse > ERROR_FLOOR && fine > ERROR_FLOOR {
        Some((coarse / fine).log2())
    } else {
        None
    }
}

/// `grid` refined by `2^k` for `k = 0..levels`.
pub fn refinement_levels(grid: &CharacteristicGrid, levels: usize) -> Result<Vec<CharacteristicGrid>, GridError> {
    (0..levels).map(|k| refine_grid(grid, 1 << k)).collect()
}

fn linf_on_coarse(fine: &Fields, coarse: &Fields, stride: usize, field: Field) -> f64 {
    let (a, b) = (fine.get(field), coarse.get(field));
    let mut e: f64 = 0.0;
    for ((i, j), &c) in b.indexed_iter() {
        e = e.max((a[[i * stride, j * stride]] - c).abs());
    }
    e
}

fn solve_level(
    system: Polarization,
    data: &BoundaryData,
    grid: &CharacteristicGrid,
    config: &SolverConfig,
    level: usize,
) -> Result<SolveResult, ConvergenceError> {
    let r = solve_goursat(system, data, grid, config)?;
    if r.status != SolveStatus::Completed {
        return Err(ConvergenceError::NotCompleted { level, status: r.status });
    }
    Ok(r)
}

/// Errors against `exact` at each level.
pub fn exact_error_study<E: std::fmt::Display>(
    system: Polarization,
    base: &CharacteristicGrid,
    levels: usize,
    config: &SolverConfig,
    data: impl Fn(&CharacteristicGrid) -> Result<BoundaryData, E>,
    exact: impl Fn(&CharacteristicGrid) -> Result<FieldState, E>,
) -> Result<ConvergenceStudy, ConvergenceError> {
    if levels < 2 {
        return Err(ConvergenceError::TooFewLevels { need: 2, got: levels });
    }
    let mut out = Vec::with_capacity(levels);
    for (level, grid) in refinement_levels(base, levels)?.iter().enumerate() {
        let wrap = |e: E| ConvergenceError::Data { level, message: e.to_string() };
        let d = data(grid).map_err(wrap)?;
        let r = solve_level(system, &d, grid, config, level)?;
        let ex = exact(grid).map_err(|e| ConvergenceError::Data { level, message: e.to_string() })?;
        let mut linf = [0.0; 4];
        for (k, f) in Field::ALL.iter().enumerate() {
            for (s, e) in r.state.slices().iter().zip(ex.slices()) {
                linf[k] = f64::max(linf[k], linf_on_coarse(s, e, 1, *f));
            }
        }
        out.push(LevelErrors { n_theta: grid.n_theta(), n_v: grid.n_v(), linf });
    }
    Ok(ConvergenceStudy::new("exact", out))
}

/// Self-convergence: `levels` solves give `levels - 1` differences
/// `|u_h - u_{h/2}|` on the coarse nodes, and `levels - 2` orders.
pub fn self_convergence_study<E: std::fmt::Display>(
    system: Polarization,
    base: &CharacteristicGrid,
    levels: usize,
    config: &SolverConfig,
    data: impl Fn(&CharacteristicGrid) -> Result<BoundaryData, E>,
) -> Result<ConvergenceStudy, ConvergenceError> {
    if levels < 3 {
        return Err(ConvergenceError::TooFewLevels { need: 3, got: levels });
    }
    let grids = refinement_levels(base, levels)?;
    let mut states = Vec::with_capacity(levels);
    for (level, grid) in grids.iter().enumerate() {
        let d = data(grid).map_err(|e| ConvergenceError::Data { level, message: e.to_string() })?;
        states.push(solve_level(system, &d, grid, config, level)?.state);
    }
    let out = states
        .windows(2)
        .zip(&grids)
        .map(|(w, g)| {
            let mut linf = [0.0; 4];
            for (k, f) in Field::ALL.iter().enumerate() {
                for (c, fi) in w[0].slices().iter().zip(w[1].slices()) {
                    linf[k] = f64::max(linf[k], linf_on_coarse(fi, c, 2, *f));
                }
            }
            LevelErrors { n_theta: g.n_theta(), n_v: g.n_v(), linf }
        })
        .collect();
    Ok(ConvergenceStudy::new("self", out))
}
