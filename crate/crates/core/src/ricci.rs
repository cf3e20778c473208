//! Leading-order Ricci components evaluated straight from the metric
//! matrices, bypassing the reduced evolution equations.
//!
//! In `(u, v, y, z)` coordinates the leading metric has `g_01 = -exp(-M)` and
//! the 2x2 transverse block
//!
//! ```text
//! h = [[exp(-U+V) cosh W, -exp(-U) sinh W],
//!      [-exp(-U) sinh W,  exp(-U-V) cosh W]]
//! ```
//!
//! Derivatives use fourth-order centered stencils; a ring of two nodes at
//! every edge is excluded, so output arrays have shape
//! `(n_theta - 4, n_v - 4)` and entry `[i, j]` belongs to node `(i + 2, j + 2)`.

use nalgebra::Matrix2;
use ndarray::{Array2, Zip};
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{FieldState, Fields};
use crate::solver::{mixed_derivatives_general, W_CAP};
use crate::stencil::{centered4_d1, centered4_d2};

/// Width of the excluded boundary ring.
pub const RING: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RicciError {
    #[error("grid {n_theta}x{n_v} is too small, need at least 5x5")]
    GridTooSmall { n_theta: usize, n_v: usize },
    #[error("|W| = {w} exceeds the cap {W_CAP}")]
    WOverflow { w: f64 },
}

/// Leading metric at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricComponents {
    pub g01: f64,
    pub h: Matrix2<f64>,
    pub h_inv: Matrix2<f64>,
}

/// Metric components from point values `[M, U, V, W]`.
pub fn metric_components(p: [f64; 4]) -> Result<MetricComponents, RicciError> {
    let [m, u, v, w] = p;
    if !(w.abs() <= W_CAP) {
        return Err(RicciError::WOverflow { w });
    }
    let (ch, sh) = (w.cosh(), w.sinh());
    let e = (-u).exp();
    let h = Matrix2::new((v - u).exp() * ch, -e * sh, -e * sh, (-u - v).exp() * ch);
    // det h = exp(-2U), so the inverse needs no division by a computed det
    let ei = u.exp();
    let h_inv = Matrix2::new((u - v).exp() * ch, ei * sh, ei * sh, (u + v).exp() * ch);
    Ok(MetricComponents { g01: -(-m).exp(), h, h_inv })
}

/// Order `1/eps^2` and `1/eps` components on one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRicci {
    pub r00: Array2<f64>,
    pub r01: Array2<f64>,
    /// Transverse block, indexed `[a][b]`; symmetric by construction.
    pub r_ab: [[Array2<f64>; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RicciNorms {
    pub r00: f64,
    pub r01: f64,
    pub r_ab: f64,
}

impl RicciNorms {
    pub fn max(&self) -> f64 {
        self.r00.max(self.r01).max(self.r_ab)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicciResiduals {
    pub slices: Vec<SliceRicci>,
    pub norms: Vec<RicciNorms>,
}

impl RicciResiduals {
    /// Largest norm over all slices and components.
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().map(RicciNorms::max).fold(0.0, f64::max)
    }
}

fn linf(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

fn check_size(state: &FieldState) -> Result<(usize, usize), RicciError> {
    let g = state.grid();
    let (nt, nv) = (g.n_theta(), g.n_v());
    if nt < 5 || nv < 5 {
        return Err(RicciError::GridTooSmall { n_theta: nt, n_v: nv });
    }
    Ok((nt, nv))
}

/// Derivative operators on interior nodes of one slice.
struct Diff {
    nt: usize,
    nv: usize,
    dt: f64,
    dv: f64,
}

impl Diff {
    fn theta(&self, a: &Array2<f64>, second: bool) -> Array2<f64> {
        let mut out = Array2::zeros((self.nt, self.nv));
        for j in 0..self.nv {
            let col: Vec<f64> = a.column(j).to_vec();
            for i in RING..self.nt - RING {
                out[[i, j]] = if second { centered4_d2(&col, i, self.dt) } else { centered4_d1(&col, i, self.dt) };
            }
        }
        out
    }

    fn v(&self, a: &Array2<f64>, second: bool) -> Array2<f64> {
        let mut out = Array2::zeros((self.nt, self.nv));
        for i in 0..self.nt {
            let row: Vec<f64> = a.row(i).to_vec();
            for j in RING..self.nv - RING {
                out[[i, j]] = if second { centered4_d2(&row, j, self.dv) } else { centered4_d1(&row, j, self.dv) };
            }
        }
        out
    }

    fn mixed(&self, a: &Array2<f64>) -> Array2<f64> {
        self.theta(&self.v(a, false), false)
    }

    fn interior(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (RING..self.nt - RING).flat_map(move |i| (RING..self.nv - RING).map(move |j| (i, j)))
    }

    fn out(&self) -> Array2<f64> {
        Array2::zeros((self.nt - 2 * RING, self.nv - 2 * RING))
    }
}

/// Matrix-valued grid function, stored per entry.
struct MatField([[Array2<f64>; 2]; 2]);

impl MatField {
    fn map(&self, f: impl Fn(&Array2<f64>) -> Array2<f64>) -> Self {
        let e = &self.0;
        MatField([[f(&e[0][0]), f(&e[0][1])], [f(&e[1][0]), f(&e[1][1])]])
    }

    fn at(&self, i: usize, j: usize) -> Matrix2<f64> {
        let e = &self.0;
        Matrix2::new(e[0][0][[i, j]], e[0][1][[i, j]], e[1][0][[i, j]], e[1][1][[i, j]])
    }
}

fn slice_ricci(f: &Fields, d: &Diff) -> Result<SliceRicci, RicciError> {
    let (nt, nv) = (d.nt, d.nv);
    let mut g01 = Array2::zeros((nt, nv));
    let mut h =
        [[Array2::zeros((nt, nv)), Array2::zeros((nt, nv))], [Array2::zeros((nt, nv)), Array2::zeros((nt, nv))]];
    for i in 0..nt {
        for j in 0..nv {
            let mc = metric_components(f.at(i, j))?;
            g01[[i, j]] = mc.g01;
            for (a, row) in h.iter_mut().enumerate() {
                for (b, comp) in row.iter_mut().enumerate() {
                    comp[[i, j]] = mc.h[(a, b)];
                }
            }
        }
    }
    let h = MatField(h);
    let h_t = h.map(|x| d.theta(x, false));
    let h_v = h.map(|x| d.v(x, false));
    let h_tt = h.map(|x| d.theta(x, true));
    let h_tv = h.map(|x| d.mixed(x));
    let g01_t = d.theta(&g01, false);
    let g01_v = d.v(&g01, false);
    let g01_tv = d.mixed(&g01);

    let mut r00 = d.out();
    let mut r01 = d.out();
    let mut r_ab = [[d.out(), d.out()], [d.out(), d.out()]];
    for (i, j) in d.interior() {
        // exact inverse from the point values, as the metric is known in closed form
        let hi = metric_components(f.at(i, j))?.h_inv;
        let (ht, hv, htt, htv) = (h_t.at(i, j), h_v.at(i, j), h_tt.at(i, j), h_tv.at(i, j));
        let g = g01[[i, j]];
        let gi = 1.0 / g;

        // (g^ab g_ab,t),t = tr(h^-1 h_tt) - tr(h^-1 h_t h^-1 h_t)
        let a_t = hi * ht;
        let a_v = hi * hv;
        let tr_t = a_t.trace();
        let tr_v = a_v.trace();
        let tr_t_t = (hi * htt).trace() - (a_t * a_t).trace();
        let tr_v_t = (hi * htv).trace() - (a_t * a_v).trace();
        r00[[i - RING, j - RING]] = -0.5 * tr_t_t - 0.25 * (a_t * a_t).trace() + 0.5 * gi * g01_t[[i, j]] * tr_t;

        // (g^01 g_01,1),t = g_01,1t / g_01 - g_01,t g_01,1 / g_01^2
        let log_g_vt = gi * g01_tv[[i, j]] - gi * gi * g01_t[[i, j]] * g01_v[[i, j]];
        r01[[i - RING, j - RING]] = -log_g_vt - 0.5 * tr_v_t - 0.25 * (a_t * a_v).trace();

        let cross = ht * hi * hv + hv * hi * ht;
        let bracket = htv - 0.5 * cross + 0.25 * (tr_v * ht + tr_t * hv);
        let block = -gi * bracket;
        r_ab[0][0][[i - RING, j - RING]] = block[(0, 0)];
        r_ab[1][1][[i - RING, j - RING]] = block[(1, 1)];
        r_ab[0][1][[i - RING, j - RING]] = block[(0, 1)];
    }
    let upper = r_ab[0][1].clone();
    r_ab[1][0] = upper;
    Ok(SliceRicci { r00, r01, r_ab })
}

fn diff_for(state: &FieldState) -> Result<Diff, RicciError> {
    let (nt, nv) = check_size(state)?;
    let g = state.grid();
    Ok(Diff { nt, nv, dt: g.d_theta(), dv: g.d_v() })
}

/// Evaluate the order `1/eps^2` 00-component and the order `1/eps` 01- and
/// transverse components on every slice.
pub fn ricci_residuals(state: &FieldState) -> Result<RicciResiduals, RicciError> {
    let d = diff_for(state)?;
    let slices = state.slices().par_iter().map(|f| slice_ricci(f, &d)).collect::<Result<Vec<_>, _>>()?;
    let norms = slices
        .iter()
        .map(|s| RicciNorms {
            r00: linf(&s.r00),
            r01: linf(&s.r01),
            r_ab: linf(&s.r_ab[0][0]).max(linf(&s.r_ab[0][1])).max(linf(&s.r_ab[1][1])),
        })
        .collect();
    Ok(RicciResiduals { slices, norms })
}

/// Residuals of the reduced equations on interior nodes, evaluated with the
/// same fourth-order stencils as [`ricci_residuals`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedResiduals {
    pub theta: Array2<f64>,
    pub e_m: Array2<f64>,
    pub e_u: Array2<f64>,
    pub e_v: Array2<f64>,
    pub e_w: Array2<f64>,
}

fn slice_reduced(f: &Fields, d: &Diff) -> Result<ReducedResiduals, RicciError> {
    let dt: Vec<Array2<f64>> = [&f.m, &f.u, &f.v, &f.w].iter().map(|a| d.theta(a, false)).collect();
    let dv: Vec<Array2<f64>> = [&f.m, &f.u, &f.v, &f.w].iter().map(|a| d.v(a, false)).collect();
    let dtv: Vec<Array2<f64>> = [&f.m, &f.u, &f.v, &f.w].iter().map(|a| d.mixed(a)).collect();
    let u_tt = d.theta(&f.u, true);
    let mut out = ReducedResiduals { theta: d.out(), e_m: d.out(), e_u: d.out(), e_v: d.out(), e_w: d.out() };
    for (i, j) in d.interior() {
        let w = f.w[[i, j]];
        let rhs = mixed_derivatives_general(
            dt[1][[i, j]],
            dv[1][[i, j]],
            dt[2][[i, j]],
            dv[2][[i, j]],
            dt[3][[i, j]],
            dv[3][[i, j]],
            w,
        )
        .map_err(|_| RicciError::WOverflow { w })?;
        let k = [i - RING, j - RING];
        out.e_m[k] = dtv[0][[i, j]] - rhs.m_tv;
        out.e_u[k] = dtv[1][[i, j]] - rhs.u_tv;
        out.e_v[k] = dtv[2][[i, j]] - rhs.v_tv;
        out.e_w[k] = dtv[3][[i, j]] - rhs.w_tv;
        let (ut, vt, wt, mt) = (dt[1][[i, j]], dt[2][[i, j]], dt[3][[i, j]], dt[0][[i, j]]);
        let c = w.cosh();
        out.theta[k] = u_tt[[i, j]] - 0.5 * (ut * ut + vt * vt * c * c + wt * wt) + ut * mt;
    }
    Ok(out)
}

pub fn reduced_residuals(state: &FieldState) -> Result<Vec<ReducedResiduals>, RicciError> {
    let d = diff_for(state)?;
    state.slices().par_iter().map(|f| slice_reduced(f, &d)).collect()
}

/// Largest mismatch between the Ricci components and their expressions in
/// terms of the reduced residuals:
///
/// * `R00 = theta-constraint residual`
/// * `R01 = E_M + E_U`
/// * `R_ab = exp(M) (dh/dU E_U + dh/dV E_V + dh/dW E_W)_ab`
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityDefects {
    pub r00: f64,
    pub r01: f64,
    pub r_ab: f64,
}

pub fn identity_defects(state: &FieldState) -> Result<IdentityDefects, RicciError> {
    let ricci = ricci_residuals(state)?;
    let reduced = reduced_residuals(state)?;
    let mut out = IdentityDefects::default();
    for ((s, r), f) in ricci.slices.iter().zip(&reduced).zip(state.slices()) {
        Zip::from(&s.r00).and(&r.theta).for_each(|a, b| out.r00 = out.r00.max((a - b).abs()));
        Zip::from(&s.r01).and(&r.e_m).and(&r.e_u).for_each(|a, m, u| out.r01 = out.r01.max((a - m - u).abs()));
        let (nt, nv) = s.r00.dim();
        for i in 0..nt {
            for j in 0..nv {
                let [m, u, v, w] = f.at(i + RING, j + RING);
                let (ch, sh) = (w.cosh(), w.sinh());
                let e = (-u).exp();
                let h = Matrix2::new((v - u).exp() * ch, -e * sh, -e * sh, (-u - v).exp() * ch);
                let dh_v = Matrix2::new(h[(0, 0)], 0.0, 0.0, -h[(1, 1)]);
                let dh_w = Matrix2::new((v - u).exp() * sh, -e * ch, -e * ch, (-u - v).exp() * sh);
                let k = [i, j];
                let predicted = m.exp() * (-h * r.e_u[k] + dh_v * r.e_v[k] + dh_w * r.e_w[k]);
                for a in 0..2 {
                    for b in 0..2 {
                        out.r_ab = out.r_ab.max((s.r_ab[a][b][k] - predicted[(a, b)]).abs());
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Polarization;
    use crate::grid::{build_grid, Slice};

    fn state(n: usize, pol: Polarization, f: impl Fn(f64, f64) -> [f64; 4]) -> FieldState {
        let g = build_grid((0.0, 1.0), (0.0, 1.0), n, n, vec![Slice::equator()]).unwrap();
        FieldState::from_fn(g, pol, f).unwrap()
    }

    #[test]
    fn flat_metric() {
        let mc = metric_components([0.0; 4]).unwrap();
        assert_eq!(mc.g01, -1.0);
        assert_eq!(mc.h, Matrix2::identity());
        assert_eq!(mc.h_inv, Matrix2::identity());
    }

    #[test]
    fn determinant_and_inverse() {
        for &(u, v, w) in &[(0.3, -1.2, 0.7), (-2.0, 0.5, -3.0), (1.0, 2.0, 0.0)] {
            let mc = metric_components([0.1, u, v, w]).unwrap();
            let det = mc.h.determinant();
            assert!((det / (-2.0 * u).exp() - 1.0).abs() < 1e-12);
            let id = mc.h * mc.h_inv;
            assert!((id - Matrix2::identity()).abs().max() < 1e-10);
        }
        let mc = metric_components([0.0, 0.2, 0.4, 0.0]).unwrap();
        assert_eq!(mc.h[(0, 1)], 0.0);
        assert!((mc.h[(0, 0)] - (0.2_f64).exp()).abs() < 1e-15);
        assert!(matches!(metric_components([0.0, 0.0, 0.0, 400.0]), Err(RicciError::WOverflow { .. })));
    }

    #[test]
    fn flat_state_has_zero_residuals() {
        let s = state(9, Polarization::General, |_, _| [0.0; 4]);
        let r = ricci_residuals(&s).unwrap();
        assert_eq!(r.max_norm(), 0.0);
        assert_eq!(r.slices[0].r00.dim(), (5, 5));
    }

    #[test]
    fn linear_u_gives_minus_half() {
        // U = theta: R00 = -(-2 U_t)_t/2 - tr(h^-1 h_t)^2/4 ... reduces to -U_t^2/2
        let s = state(41, Polarization::Plane, |t, _| [0.0, t, 0.0, 0.0]);
        let r = ricci_residuals(&s).unwrap();
        for x in r.slices[0].r00.iter() {
            assert!((x + 0.5).abs() < 1e-7, "{x}");
        }
    }

    #[test]
    fn identities_hold_on_generic_state() {
        let generic = |t: f64, v: f64| {
            [0.3 * (t * v).sin(), 0.2 * t * t - 0.1 * v, 0.4 * (t + 2.0 * v).cos(), 0.25 * (t - v).sin()]
        };
        // the identities are algebraic, so only stencil truncation remains and
        // it must fall at fourth order
        let coarse = identity_defects(&state(41, Polarization::General, generic)).unwrap();
        let fine = identity_defects(&state(81, Polarization::General, generic)).unwrap();
        for (c, f) in [(coarse.r00, fine.r00), (coarse.r01, fine.r01), (coarse.r_ab, fine.r_ab)] {
            assert!(c < 1e-5, "{coarse:?}");
            assert!(c / f > 12.0, "{coarse:?} {fine:?}");
        }
        let r = ricci_residuals(&state(41, Polarization::General, generic)).unwrap();
        assert!(r.max_norm() > 1e-2);
    }

    #[test]
    fn transverse_block_is_symmetric() {
        let s = state(12, Polarization::General, |t, v| [0.0, 0.1 * t * v, 0.2 * t, 0.3 * v * t]);
        let r = ricci_residuals(&s).unwrap();
        assert_eq!(r.slices[0].r_ab[0][1], r.slices[0].r_ab[1][0]);
    }

    #[test]
    fn too_small_grid() {
        let s = state(4, Polarization::Plane, |_, _| [0.0; 4]);
        assert!(matches!(ricci_residuals(&s), Err(RicciError::GridTooSmall { .. })));
    }
}
