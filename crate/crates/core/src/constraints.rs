//! Constraint monitoring: the theta-constraint defect, the v-constraint
//! function `G`, its transport law `G_theta = U_theta G` (plane-polarized
//! case), and the jump relations between the two sides of the wave.
//!
//! Nothing here feeds back into the evolution; the v-constraint is
//! monitored, never imposed.

use ndarray::Array2;
use thiserror::Error;

use crate::field::{BoundaryData, FieldState, Fields, LineSamples, Polarization};
use crate::solver::{SolveResult, SolveStatus};
use crate::stencil;

/// Absolute floor below which `G` is treated as zero.
pub const G_ABS_FLOOR: f64 = 1e-10;

/// Multiple of the estimated discretization error of `G` that still counts
/// as zero (see [`g_noise_floor`]).
pub const G_NOISE_FACTOR: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("grid too small: need at least {need} nodes along {axis}, have {have}")]
    GridTooSmall { axis: &'static str, need: usize, have: usize },
    #[error("theta index {index} out of range (n_theta = {n_theta})")]
    ThetaIndex { index: usize, n_theta: usize },
    #[error("the transport law is only available for plane-polarized states")]
    NotPolarized,
    #[error("jump relations need a completed solve, status was {0:?}")]
    NotCompleted(SolveStatus),
    #[error("boundary data does not match the state grid")]
    DataMismatch,
}

fn need(axis: &'static str, have: usize, need: usize) -> Result<(), ConstraintError> {
    if have < need {
        Err(ConstraintError::GridTooSmall { axis, need, have })
    } else {
        Ok(())
    }
}

fn theta_residual_slice(f: &Fields, dt: f64) -> Array2<f64> {
    let (nt, nv) = f.dim();
    let mut out = Array2::zeros((nt - 2, nv));
    for j in 0..nv {
        let line = f.v_row(j);
        for (k, r) in crate::field::line_theta_residual(&line, dt).into_iter().enumerate() {
            out[[k, j]] = r;
        }
    }
    out
}

/// `U_tt - (U_t^2 + V_t^2 cosh^2 W + W_t^2)/2 + U_t M_t` at interior
/// theta-nodes. Row `k` of each slice's array is theta-node `k + 1`.
pub fn theta_constraint_residual(state: &FieldState) -> Result<Vec<Array2<f64>>, ConstraintError> {
    need("theta", state.grid().n_theta(), 3)?;
    let dt = state.grid().d_theta();
    Ok(state.slices().iter().map(|f| theta_residual_slice(f, dt)).collect())
}

/// `G = U_vv - (U_v^2 + V_v^2 cosh^2 W + W_v^2)/2 + U_v M_v` along one line,
/// centered inside and one-sided at the ends.
pub fn g_of_line(line: &LineSamples, dv: f64) -> Vec<f64> {
    let uv = stencil::d1_full(&line.u, dv);
    let uvv = stencil::d2_full(&line.u, dv);
    let vv = stencil::d1_full(&line.v, dv);
    let wv = stencil::d1_full(&line.w, dv);
    let mv = stencil::d1_full(&line.m, dv);
    (0..line.len())
        .map(|j| {
            let c = line.w[j].cosh();
            uvv[j] - 0.5 * (uv[j] * uv[j] + vv[j] * vv[j] * c * c + wv[j] * wv[j]) + uv[j] * mv[j]
        })
        .collect()
}

fn g_of_line4(line: &LineSamples, dv: f64) -> Vec<f64> {
    let uv = stencil::d1_full4(&line.u, dv);
    let uvv = stencil::d2_full4(&line.u, dv);
    let vv = stencil::d1_full4(&line.v, dv);
    let wv = stencil::d1_full4(&line.w, dv);
    let mv = stencil::d1_full4(&line.m, dv);
    (0..line.len())
        .map(|j| {
            let c = line.w[j].cosh();
            uvv[j] - 0.5 * (uv[j] * uv[j] + vv[j] * vv[j] * c * c + wv[j] * wv[j]) + uv[j] * mv[j]
        })
        .collect()
}

/// Pointwise magnitude below which a computed `G` is indistinguishable from
/// zero: the larger of [`G_ABS_FLOOR`] and [`G_NOISE_FACTOR`] times the
/// difference between the second- and fourth-order evaluations.
pub fn g_noise_floor(line: &LineSamples, dv: f64) -> Vec<f64> {
    if line.len() < 6 {
        return vec![G_ABS_FLOOR; line.len()];
    }
    let g2 = g_of_line(line, dv);
    let g4 = g_of_line4(line, dv);
    g2.iter().zip(&g4).map(|(a, b)| G_ABS_FLOOR.max(G_NOISE_FACTOR * (a - b).abs())).collect()
}

/// The v-constraint function along the theta-line `theta_index`, per slice.
pub fn v_constraint_g(state: &FieldState, theta_index: usize) -> Result<Vec<Vec<f64>>, ConstraintError> {
    let g = state.grid();
    need("v", g.n_v(), 3)?;
    if theta_index >= g.n_theta() {
        return Err(ConstraintError::ThetaIndex { index: theta_index, n_theta: g.n_theta() });
    }
    Ok(state.slices().iter().map(|f| g_of_line(&f.theta_line(theta_index), g.d_v())).collect())
}

/// `G` on every theta-line of one slice, shape `n_theta x n_v`.
pub fn g_field(f: &Fields, dv: f64) -> Array2<f64> {
    let (nt, nv) = f.dim();
    let mut out = Array2::zeros((nt, nv));
    for i in 0..nt {
        for (j, g) in g_of_line(&f.theta_line(i), dv).into_iter().enumerate() {
            out[[i, j]] = g;
        }
    }
    out
}

/// L-infinity and L2 (weighted by the theta spacing) norms of one v-row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RowNorms {
    pub linf: f64,
    pub l2: f64,
}

impl RowNorms {
    fn of(values: impl Iterator<Item = f64>, h: f64) -> Self {
        let (mut linf, mut sq) = (0.0f64, 0.0);
        for x in values {
            linf = linf.max(x.abs());
            sq += x * x;
        }
        Self { linf, l2: (sq * h).sqrt() }
    }
}

/// Transport check output for one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportCheck {
    /// `G` on every theta-line.
    pub g: Array2<f64>,
    /// `G_t - U_t G` at interior nodes; entry `[k, l]` is node `(k + 1, l + 1)`.
    pub defect: Array2<f64>,
    pub linf: f64,
}

/// Evaluate `G` everywhere and the defect of `G_theta = U_theta G`.
pub fn g_transport_check(state: &FieldState) -> Result<Vec<TransportCheck>, ConstraintError> {
    if state.polarization() != Polarization::Plane {
        return Err(ConstraintError::NotPolarized);
    }
    let g = state.grid();
    need("theta", g.n_theta(), 3)?;
    need("v", g.n_v(), 3)?;
    let (dt, dv) = (g.d_theta(), g.d_v());
    Ok(state
        .slices()
        .iter()
        .map(|f| {
            let gf = g_field(f, dv);
            let (nt, nv) = f.dim();
            let mut defect = Array2::zeros((nt - 2, nv - 2));
            for i in 1..nt - 1 {
                for j in 1..nv - 1 {
                    let g_t = (gf[[i + 1, j]] - gf[[i - 1, j]]) / (2.0 * dt);
                    let u_t = (f.u[[i + 1, j]] - f.u[[i - 1, j]]) / (2.0 * dt);
                    defect[[i - 1, j - 1]] = g_t - u_t * gf[[i, j]];
                }
            }
            let linf = defect.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            TransportCheck { g: gf, defect, linf }
        })
        .collect())
}

/// Full constraint report for one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// Theta-constraint defect; row `k` is theta-node `k + 1`.
    pub theta_residual: Array2<f64>,
    /// `G` on every theta-line (`n_theta x n_v`).
    pub g: Array2<f64>,
    /// `G_t - U_t G` (plane-polarized states only).
    pub transport_defect: Option<Array2<f64>>,
    /// Theta-residual norms per v-row.
    pub residual_norms: Vec<RowNorms>,
    /// Transport-defect norms per interior v-row.
    pub transport_norms: Vec<RowNorms>,
}

impl ConstraintReport {
    pub fn max_theta_residual(&self) -> f64 {
        self.residual_norms.iter().map(|n| n.linf).fold(0.0, f64::max)
    }

    pub fn max_transport_defect(&self) -> Option<f64> {
        self.transport_defect.as_ref().map(|d| d.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    }
}

pub fn constraint_report(state: &FieldState) -> Result<Vec<ConstraintReport>, ConstraintError> {
    let g = state.grid();
    need("theta", g.n_theta(), 3)?;
    need("v", g.n_v(), 3)?;
    let residuals = theta_constraint_residual(state)?;
    let transport = match state.polarization() {
        Polarization::Plane => Some(g_transport_check(state)?),
        Polarization::General => None,
    };
    let dt = g.d_theta();
    Ok(residuals
        .into_iter()
        .enumerate()
        .map(|(k, res)| {
            let residual_norms = res.columns().into_iter().map(|c| RowNorms::of(c.iter().copied(), dt)).collect();
            let (gfield, defect) = match &transport {
                Some(t) => (t[k].g.clone(), Some(t[k].defect.clone())),
                None => (g_field(state.slice(k), g.d_v()), None),
            };
            let transport_norms = defect
                .as_ref()
                .map(|d| d.columns().into_iter().map(|c| RowNorms::of(c.iter().copied(), dt)).collect())
                .unwrap_or_default();
            ConstraintReport {
                theta_residual: res,
                g: gfield,
                transport_defect: defect,
                residual_norms,
                transport_norms,
            }
        })
        .collect())
}

/// Outcome of the log-G jump relation at one `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogGJump {
    /// `log|G_+| - log|G_-| - (U_+ - U_-)`.
    Defect(f64),
    /// `G_-` is zero to within its noise floor: the data satisfy the
    /// v-constraint, and transport keeps `G_+` at zero. `g_plus` is the
    /// computed value behind the wave.
    ConstraintPreserving { g_plus: f64 },
    /// `G_+` vanishes or has the opposite sign while `G_-` does not.
    SignChange { g_minus: f64, g_plus: f64 },
}

/// Jump relations across the strip for one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpReport {
    pub v: Vec<f64>,
    /// Traces at `theta = theta_+`.
    pub plus_line: LineSamples,
    pub g_minus: Vec<f64>,
    pub g_plus: Vec<f64>,
    /// `exp(-U_+) - exp(-U_-) - [exp(-U_0(theta_+)) - exp(-U_0(theta_-))]`.
    pub u_jump_defect: Vec<f64>,
    pub log_g: Vec<LogGJump>,
}

impl JumpReport {
    /// Populated log-G defects (where both `G` values are nonzero with the
    /// same sign).
    pub fn log_g_defects(&self) -> Vec<f64> {
        self.log_g
            .iter()
            .filter_map(|x| match x {
                LogGJump::Defect(d) => Some(*d),
                _ => None,
            })
            .collect()
    }

    /// `exp(-U_+) - exp(-U_-)` at every `v`.
    pub fn u_jump(&self, minus_u: &[f64]) -> Vec<f64> {
        self.plus_line.u.iter().zip(minus_u).map(|(p, m)| (-p).exp() - (-m).exp()).collect()
    }

    pub fn constraint_preserving(&self) -> bool {
        self.log_g.iter().all(|x| matches!(x, LogGJump::ConstraintPreserving { .. }))
    }
}

/// Jump relations of a completed solve.
pub fn jump_report(result: &SolveResult, data: &BoundaryData) -> Result<Vec<JumpReport>, ConstraintError> {
    if result.status != SolveStatus::Completed {
        return Err(ConstraintError::NotCompleted(result.status));
    }
    jump_report_for_state(&result.state, data)
}

/// Jump relations of a fully populated state.
pub fn jump_report_for_state(state: &FieldState, data: &BoundaryData) -> Result<Vec<JumpReport>, ConstraintError> {
    let g = state.grid();
    need("v", g.n_v(), 3)?;
    if data.slice_count() != g.slices().len() {
        return Err(ConstraintError::DataMismatch);
    }
    let dv = g.d_v();
    let nt = g.n_theta();
    let vs = g.v().nodes();
    let mut out = Vec::with_capacity(g.slices().len());
    for (k, f) in state.slices().iter().enumerate() {
        let (ini, bnd) = (data.initial(k), data.boundary(k));
        if ini.len() != nt || bnd.len() != g.n_v() {
            return Err(ConstraintError::DataMismatch);
        }
        let minus = f.theta_line(0);
        let plus = f.theta_line(nt - 1);
        let pulse = (-ini.u[nt - 1]).exp() - (-ini.u[0]).exp();
        let u_jump_defect = plus.u.iter().zip(&bnd.u).map(|(p, m)| (-p).exp() - (-m).exp() - pulse).collect();

        let g_minus = g_of_line(&minus, dv);
        let g_plus = g_of_line(&plus, dv);
        let floor_minus = g_noise_floor(&minus, dv);
        let floor_plus = g_noise_floor(&plus, dv);
        let log_g = (0..vs.len())
            .map(|j| {
                let (gm, gp) = (g_minus[j], g_plus[j]);
                if gm.abs() <= floor_minus[j] {
                    LogGJump::ConstraintPreserving { g_plus: gp }
                } else if gp.abs() <= floor_plus[j] || gm.signum() != gp.signum() {
                    LogGJump::SignChange { g_minus: gm, g_plus: gp }
                } else {
                    LogGJump::Defect(gp.abs().ln() - gm.abs().ln() - (plus.u[j] - minus.u[j]))
                }
            })
            .collect();
        out.push(JumpReport { v: vs.clone(), plus_line: plus, g_minus, g_plus, u_jump_defect, log_g });
    }
    Ok(out)
}
