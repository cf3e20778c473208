//! Discrete leading-order action and its stationarity under compactly
//! supported perturbations.
//!
//! The density
//!
//! ```text
//! L = {-2 M_tv - 4 U_tv + 3 U_t U_v + V_t V_v cosh^2 W + W_t W_v} exp(-U)
//!     + lambda {U_tt - (U_t^2 + V_t^2 cosh^2 W + W_t^2)/2 + U_t M_t} exp(-M-U)
//! ```
//!
//! is evaluated at cell centres for the first brace (the same averages and
//! edge differences the solver uses) and at interior nodes for the
//! multiplier brace (the same centered stencils as the theta-constraint
//! residual).

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{Field, FieldState, Fields};
use crate::grid::CharacteristicGrid;
use crate::solver::{cell_centre, W_CAP};
use crate::stencil::{centered_d1, centered_d2};

/// Step of the central-difference directional derivatives.
pub const VARIATION_STEP: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationalError {
    #[error("|W| = {w} exceeds the cap {W_CAP}")]
    WOverflow { w: f64 },
    #[error("perturbation {index} does not vanish on the grid edges")]
    EdgeTouching { index: usize },
    #[error("perturbation {index} has shape {got:?}, grid is {want:?}")]
    Shape { index: usize, got: (usize, usize), want: (usize, usize) },
    #[error("perturbation bank needs at least one member per field, got {0} members")]
    BankTooSmall(usize),
    #[error("grid must have at least 3x3 nodes")]
    GridTooSmall,
    #[error("non-finite action")]
    NonFinite,
}

/// Point values and derivatives entering the density.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensityInput {
    /// `[M, U, V, W]`.
    pub values: [f64; 4],
    /// theta-derivatives of `[M, U, V, W]`.
    pub d_theta: [f64; 4],
    /// v-derivatives of `[M, U, V, W]`.
    pub d_v: [f64; 4],
    pub m_tv: f64,
    pub u_tv: f64,
    pub u_tt: f64,
    pub lambda: f64,
}

fn evolution_brace(p: &DensityInput) -> f64 {
    let [_, u_t, v_t, w_t] = p.d_theta;
    let [_, u_v, v_v, w_v] = p.d_v;
    let c = p.values[3].cosh();
    (-2.0 * p.m_tv - 4.0 * p.u_tv + 3.0 * u_t * u_v + v_t * v_v * c * c + w_t * w_v) * (-p.values[1]).exp()
}

fn constraint_brace(values: [f64; 4], d_theta: [f64; 4], u_tt: f64) -> f64 {
    let [m_t, u_t, v_t, w_t] = d_theta;
    let c = values[3].cosh();
    (u_tt - 0.5 * (u_t * u_t + v_t * v_t * c * c + w_t * w_t) + u_t * m_t) * (-values[0] - values[1]).exp()
}

/// Value of the density at one point.
pub fn lagrangian_density(p: &DensityInput) -> Result<f64, VariationalError> {
    let w = p.values[3];
    if !(w.abs() <= W_CAP) {
        return Err(VariationalError::WOverflow { w });
    }
    let mut l = evolution_brace(p);
    if p.lambda != 0.0 {
        l += p.lambda * constraint_brace(p.values, p.d_theta, p.u_tt);
    }
    Ok(l)
}

fn cell_density(f: &Fields, i: usize, j: usize, dt: f64, dv: f64) -> Result<f64, VariationalError> {
    let c = cell_centre(f.at(i, j), f.at(i + 1, j), f.at(i, j + 1), f.at(i + 1, j + 1), dt, dv);
    let mixed = |a: &Array2<f64>| ((a[[i + 1, j + 1]] - a[[i + 1, j]]) - (a[[i, j + 1]] - a[[i, j]])) / (dt * dv);
    lagrangian_density(&DensityInput {
        values: c.val,
        d_theta: c.d_t,
        d_v: c.d_v,
        m_tv: mixed(&f.m),
        u_tv: mixed(&f.u),
        ..Default::default()
    })
}

fn node_constraint(f: &Fields, i: usize, j: usize, dt: f64) -> f64 {
    let col = |a: &Array2<f64>| [a[[i - 1, j]], a[[i, j]], a[[i + 1, j]]];
    let (m, u, v, w) = (col(&f.m), col(&f.u), col(&f.v), col(&f.w));
    let d = [centered_d1(&m, 1, dt), centered_d1(&u, 1, dt), centered_d1(&v, 1, dt), centered_d1(&w, 1, dt)];
    constraint_brace(f.at(i, j), d, centered_d2(&u, 1, dt))
}

/// Sum of the first brace over cells `[i0, i1) x [j0, j1)`.
fn cell_sum(
    f: &Fields,
    (i0, i1): (usize, usize),
    (j0, j1): (usize, usize),
    dt: f64,
    dv: f64,
) -> Result<f64, VariationalError> {
    let mut s = 0.0;
    for j in j0..j1 {
        for i in i0..i1 {
            s += cell_density(f, i, j, dt, dv)?;
        }
    }
    Ok(s * dt * dv)
}

/// Multiplier part of the action, summed over interior theta-nodes.
fn multiplier_term(f: &Fields, grid: &CharacteristicGrid, lam: &Array2<f64>) -> f64 {
    let (nt, nv) = f.dim();
    let dt = grid.d_theta();
    let mut t = 0.0;
    for j in 0..nv {
        for i in 1..nt - 1 {
            if lam[[i, j]] != 0.0 {
                t += lam[[i, j]] * node_constraint(f, i, j, dt);
            }
        }
    }
    t * dt * grid.d_v()
}

/// Discrete action of one slice with multiplier field `lambda` (zero if
/// `None`), summed over all cells and interior nodes.
pub fn discrete_action(
    f: &Fields,
    grid: &CharacteristicGrid,
    lambda: Option<&Array2<f64>>,
) -> Result<f64, VariationalError> {
    let (nt, nv) = f.dim();
    if nt < 3 || nv < 3 {
        return Err(VariationalError::GridTooSmall);
    }
    let (dt, dv) = (grid.d_theta(), grid.d_v());
    let mut s = cell_sum(f, (0, nt - 1), (0, nv - 1), dt, dv)?;
    if let Some(lam) = lambda {
        s += multiplier_term(f, grid, lam);
    }
    if !s.is_finite() {
        return Err(VariationalError::NonFinite);
    }
    Ok(s)
}

/// Which function a perturbation varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Field(Field),
    Multiplier,
}

/// Node values of one test perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub target: Target,
    pub values: Array2<f64>,
}

fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

impl Perturbation {
    /// Tensor-product compact bump centred at `(theta, v)` with half-widths
    /// `(r_theta, r_v)`.
    pub fn bump(
        target: Target,
        grid: &CharacteristicGrid,
        centre: (f64, f64),
        radius: (f64, f64),
        amplitude: f64,
    ) -> Self {
        let (th, vs) = (grid.theta().nodes(), grid.v().nodes());
        let values = Array2::from_shape_fn((th.len(), vs.len()), |(i, j)| {
            amplitude * bump((th[i] - centre.0) / radius.0) * bump((vs[j] - centre.1) / radius.1)
        });
        Perturbation { target, values }
    }

    pub fn l1_norm(&self, grid: &CharacteristicGrid) -> f64 {
        self.values.iter().map(|x| x.abs()).sum::<f64>() * grid.d_theta() * grid.d_v()
    }

    /// Index box `[i0, i1] x [j0, j1]` of nonzero nodes.
    fn support(&self) -> Option<((usize, usize), (usize, usize))> {
        let mut b: Option<((usize, usize), (usize, usize))> = None;
        for ((i, j), &x) in self.values.indexed_iter() {
            if x != 0.0 {
                b = Some(match b {
                    None => ((i, i), (j, j)),
                    Some(((a0, a1), (b0, b1))) => ((a0.min(i), a1.max(i)), (b0.min(j), b1.max(j))),
                });
            }
        }
        b
    }

    fn touches_edge(&self) -> bool {
        let (nt, nv) = self.values.dim();
        match self.support() {
            None => false,
            Some(((i0, i1), (j0, j1))) => i0 == 0 || j0 == 0 || i1 == nt - 1 || j1 == nv - 1,
        }
    }
}

/// Test perturbations used by [`action_stationarity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBank {
    pub members: Vec<Perturbation>,
}

impl PerturbationBank {
    /// Two bumps per field (centred and off-centre) plus one multiplier bump,
    /// all supported well inside the grid.
    pub fn standard(grid: &CharacteristicGrid) -> Self {
        let (t0, t1) = (grid.theta().min(), grid.theta().max());
        let (v0, v1) = (grid.v().min(), grid.v().max());
        let at = |a: f64, b: f64| (t0 + a * (t1 - t0), v0 + b * (v1 - v0));
        let r = (0.25 * (t1 - t0), 0.25 * (v1 - v0));
        let r_small = (0.18 * (t1 - t0), 0.2 * (v1 - v0));
        let mut members = Vec::new();
        for f in Field::ALL {
            members.push(Perturbation::bump(Target::Field(f), grid, at(0.5, 0.5), r, 0.1));
            members.push(Perturbation::bump(Target::Field(f), grid, at(0.35, 0.6), r_small, 0.1));
        }
        members.push(Perturbation::bump(Target::Multiplier, grid, at(0.5, 0.5), r, 0.1));
        PerturbationBank { members }
    }

    fn validate(&self, dim: (usize, usize)) -> Result<(), VariationalError> {
        let covered = Field::ALL.iter().all(|f| self.members.iter().any(|p| p.target == Target::Field(*f)));
        if !covered {
            return Err(VariationalError::BankTooSmall(self.members.len()));
        }
        for (index, p) in self.members.iter().enumerate() {
            if p.values.dim() != dim {
                return Err(VariationalError::Shape { index, got: p.values.dim(), want: dim });
            }
            if p.touches_edge() {
                return Err(VariationalError::EdgeTouching { index });
            }
        }
        Ok(())
    }
}

/// Directional derivative of the action along one bank member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberDefect {
    pub slice: usize,
    pub member: usize,
    pub target: Target,
    /// `(S(+eps) - S(-eps)) / (2 eps)`.
    pub derivative: f64,
    /// `|derivative| / ||delta||_1`.
    pub normalized: f64,
}

/// Multiplier-direction derivative against the weighted constraint sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierCheck {
    pub slice: usize,
    pub member: usize,
    pub derivative: f64,
    pub expected: f64,
}

impl MultiplierCheck {
    pub fn relative_error(&self) -> f64 {
        (self.derivative - self.expected).abs() / self.expected.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionReport {
    /// Action per slice at `lambda = 0`.
    pub action_value: Vec<f64>,
    /// Field-direction derivatives, one per (slice, field member).
    pub stationarity_defects: Vec<MemberDefect>,
    /// Multiplier-direction derivatives, one per (slice, multiplier member).
    pub multiplier: Vec<MultiplierCheck>,
    /// Euclidean norm of the multiplier-direction derivatives.
    pub lambda_derivative_norm: f64,
}

impl ActionReport {
    pub fn max_defect(&self) -> f64 {
        self.stationarity_defects.iter().map(|d| d.normalized).fold(0.0, f64::max)
    }

    pub fn max_multiplier_error(&self) -> f64 {
        self.multiplier.iter().map(MultiplierCheck::relative_error).fold(0.0, f64::max)
    }
}

fn field_derivative(
    f: &Fields,
    p: &Perturbation,
    field: Field,
    grid: &CharacteristicGrid,
) -> Result<f64, VariationalError> {
    let Some(((i0, i1), (j0, j1))) = p.support() else {
        return Ok(0.0);
    };
    // cells touching the support
    let (ci, cj) = ((i0 - 1, i1 + 1), (j0 - 1, j1 + 1));
    let (dt, dv) = (grid.d_theta(), grid.d_v());
    let shifted = |sign: f64| {
        let mut g = f.clone();
        g.get_mut(field).zip_mut_with(&p.values, |x, d| *x += sign * VARIATION_STEP * d);
        g
    };
    let (plus, minus) = (shifted(1.0), shifted(-1.0));
    let mut diff = 0.0;
    for j in cj.0..cj.1 {
        for i in ci.0..ci.1 {
            diff += cell_density(&plus, i, j, dt, dv)? - cell_density(&minus, i, j, dt, dv)?;
        }
    }
    Ok(diff * dt * dv / (2.0 * VARIATION_STEP))
}

fn multiplier_derivative(
    f: &Fields,
    p: &Perturbation,
    grid: &CharacteristicGrid,
) -> Result<(f64, f64), VariationalError> {
    let plus = p.values.mapv(|d| VARIATION_STEP * d);
    let minus = p.values.mapv(|d| -VARIATION_STEP * d);
    // the first brace does not depend on the multiplier and cancels exactly
    let derivative = (multiplier_term(f, grid, &plus) - multiplier_term(f, grid, &minus)) / (2.0 * VARIATION_STEP);
    let (nt, nv) = f.dim();
    let dt = grid.d_theta();
    let mut expected = 0.0;
    for j in 0..nv {
        for i in 1..nt - 1 {
            let d = p.values[[i, j]];
            if d != 0.0 {
                expected += node_constraint(f, i, j, dt) * d;
            }
        }
    }
    Ok((derivative, expected * dt * grid.d_v()))
}

/// Directional derivatives of the discrete action along every bank member,
/// at `lambda = 0`.
pub fn action_stationarity_check(
    state: &FieldState,
    bank: &PerturbationBank,
) -> Result<ActionReport, VariationalError> {
    let grid = state.grid();
    let dim = (grid.n_theta(), grid.n_v());
    if dim.0 < 3 || dim.1 < 3 {
        return Err(VariationalError::GridTooSmall);
    }
    bank.validate(dim)?;
    let action_value =
        state.slices().par_iter().map(|f| discrete_action(f, grid, None)).collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, usize)> =
        (0..state.slices().len()).flat_map(|k| (0..bank.members.len()).map(move |m| (k, m))).collect();
    let results = jobs
        .par_iter()
        .map(|&(k, m)| {
            let p = &bank.members[m];
            let f = state.slice(k);
            match p.target {
                Target::Field(field) => field_derivative(f, p, field, grid).map(|d| (k, m, d, None)),
                Target::Multiplier => multiplier_derivative(f, p, grid).map(|(d, e)| (k, m, d, Some(e))),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut stationarity_defects = Vec::new();
    let mut multiplier = Vec::new();
    for (slice, member, derivative, expected) in results {
        let p = &bank.members[member];
        match expected {
            None => stationarity_defects.push(MemberDefect {
                slice,
                member,
                target: p.target,
                derivative,
                normalized: derivative.abs() / p.l1_norm(grid).max(f64::MIN_POSITIVE),
            }),
            Some(expected) => multiplier.push(MultiplierCheck { slice, member, derivative, expected }),
        }
    }
    let lambda_derivative_norm = multiplier.iter().map(|m| m.derivative * m.derivative).sum::<f64>().sqrt();
    Ok(ActionReport { action_value, stationarity_defects, multiplier, lambda_derivative_norm })
}
