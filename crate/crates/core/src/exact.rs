//! Closed-form structure of the plane-polarized system.
//!
//! The `U` equation `U_tv = U_t U_v` is solved by `U = -log(f(theta) + g(v))`;
//! once `f` and `g` are known the `V` equation becomes the linear problem
//! `(f + g) V_tv = -(g_v V_t + f_t V_v) / 2`.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use thiserror::Error;

use crate::field::{BoundaryData, FieldError, FieldState, LineSamples, Polarization};
use crate::grid::CharacteristicGrid;

/// Corner compatibility tolerance for decomposition inputs.
pub const CORNER_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("corner mismatch: exp(-U0(theta_min)) = {initial}, exp(-U_minus(v_min)) = {boundary}")]
    Corner { initial: f64, boundary: f64 },
    #[error("f + g = {value:e} <= 0 at theta = {theta}, v = {v}")]
    SingularDomain { theta: f64, v: f64, value: f64 },
    #[error("sampled profile needs at least 4 samples, got {0}")]
    TooFewSamples(usize),
    #[error("exact family needs f' > 0 and g' > 0 on the domain for the theta-constrained gauge")]
    NonMonotone,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A scalar function of one variable, either closed-form or tabulated.
#[derive(Clone)]
pub enum Profile {
    Closed(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Uniform samples starting at `x0` with spacing `dx`, evaluated by local
    /// cubic (4-point Lagrange) interpolation.
    Sampled {
        x0: f64,
        dx: f64,
        values: Arc<[f64]>,
    },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Closed(_) => f.write_str("Profile::Closed(..)"),
            Profile::Sampled { x0, dx, values } => {
                write!(f, "Profile::Sampled {{ x0: {x0}, dx: {dx}, n: {} }}", values.len())
            }
        }
    }
}

impl Profile {
    pub fn closed(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Closed(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::closed(move |_| c)
    }

    pub fn sampled(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self, ExactError> {
        if values.len() < 4 {
            return Err(ExactError::TooFewSamples(values.len()));
        }
        Ok(Profile::Sampled { x0, dx, values: values.into() })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Closed(f) => f(x),
            Profile::Sampled { x0, dx, values } => cubic_interp(*x0, *dx, values, x),
        }
    }
}

/// Local cubic Lagrange interpolation on uniform samples. Exact at nodes.
pub fn cubic_interp(x0: f64, dx: f64, values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let s = (x - x0) / dx;
    let k = s.floor();
    if (s - s.round()).abs() < 1e-12 {
        let idx = s.round();
        if idx >= 0.0 && (idx as usize) < n {
            return values[idx as usize];
        }
    }
    let start = (k as isize - 1).clamp(0, n as isize - 4) as usize;
    let t = s - start as f64;
    let p = [values[start], values[start + 1], values[start + 2], values[start + 3]];
    // Lagrange basis on nodes 0, 1, 2, 3
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    l0 * p[0] + l1 * p[1] + l2 * p[2] + l3 * p[3]
}

/// `U(theta, v) = -log(f(theta) + g(v))` split under the gauge `g(v_min) = -shift`
/// (`shift = 0` unless [`UDecomposition::with_gauge_shift`] was used).
#[derive(Debug, Clone)]
pub struct UDecomposition {
    f: Profile,
    g: Profile,
    shift: f64,
    theta_min: f64,
    v_min: f64,
    min_g: f64,
}

impl UDecomposition {
    pub fn f(&self, theta: f64) -> f64 {
        self.f.eval(theta) + self.shift
    }

    pub fn g(&self, v: f64) -> f64 {
        self.g.eval(v) - self.shift
    }

    pub fn u(&self, theta: f64, v: f64) -> f64 {
        -(self.f(theta) + self.g(v)).ln()
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    /// Value of `g` at `v_min`; zero in the default gauge.
    pub fn gauge_value(&self) -> f64 {
        self.g(self.v_min)
    }

    /// Equivalent decomposition `(f + c, g - c)`.
    pub fn with_gauge_shift(&self, c: f64) -> Self {
        Self { shift: self.shift + c, ..self.clone() }
    }
}

/// Split characteristic `U` data into `f` and `g` with `g(v_min) = 0`.
pub fn decompose_u(u0: &Profile, u_minus: &Profile, grid: &CharacteristicGrid) -> Result<UDecomposition, ExactError> {
    let (tmin, vmin) = (grid.theta().min(), grid.v().min());
    let e0 = (-u0.eval(tmin)).exp();
    let em = (-u_minus.eval(vmin)).exp();
    if (e0 - em).abs() > CORNER_TOLERANCE {
        return Err(ExactError::Corner { initial: e0, boundary: em });
    }
    let u0c = u0.clone();
    let f = Profile::closed(move |t| (-u0c.eval(t)).exp());
    let umc = u_minus.clone();
    let g = Profile::closed(move |v| (-umc.eval(v)).exp() - e0);

    let (mut fmin, mut tat) = (f64::INFINITY, tmin);
    for t in grid.theta().nodes() {
        let fv = f.eval(t);
        if !(fv >= fmin) {
            fmin = fv;
            tat = t;
        }
    }
    let (mut gmin, mut vat) = (f64::INFINITY, vmin);
    for v in grid.v().nodes() {
        let gv = g.eval(v);
        if !(gv >= gmin) {
            gmin = gv;
            vat = v;
        }
    }
    let value = fmin + gmin;
    if !(value > 0.0) {
        return Err(ExactError::SingularDomain { theta: tat, v: vat, value });
    }
    Ok(UDecomposition { f, g, shift: 0.0, theta_min: tmin, v_min: vmin, min_g: gmin })
}

/// Plus-side trace `U_+(v) = -log(f(theta_+) + g(v))`.
#[derive(Debug, Clone)]
pub struct PlusTrace {
    dec: UDecomposition,
    theta_plus: f64,
}

impl PlusTrace {
    pub fn u_plus(&self, v: f64) -> f64 {
        self.dec.u(self.theta_plus, v)
    }

    pub fn u_minus(&self, v: f64) -> f64 {
        self.dec.u(self.dec.theta_min, v)
    }

    /// `exp(-U_+) - exp(-U_-)`, independent of `v`.
    pub fn jump(&self) -> f64 {
        self.dec.f(self.theta_plus) - self.dec.f(self.dec.theta_min)
    }

    pub fn theta_plus(&self) -> f64 {
        self.theta_plus
    }
}

pub fn u_jump_relation(dec: &UDecomposition, theta_plus: f64) -> Result<PlusTrace, ExactError> {
    let value = dec.f.eval(theta_plus) + dec.min_g;
    if !(value > 0.0) {
        return Err(ExactError::SingularDomain { theta: theta_plus, v: f64::NAN, value });
    }
    Ok(PlusTrace { dec: dec.clone(), theta_plus })
}

/// Integrate `(f + g) V_tv = -(g_v V_t + f_t V_v) / 2` with the corner scheme
/// used by the nonlinear solver. Coefficients are frozen from `dec`; the
/// corner update is linear and solved directly.
pub fn solve_v_linear(
    dec: &UDecomposition,
    v0: &Profile,
    v_minus: &Profile,
    grid: &CharacteristicGrid,
) -> Result<Array2<f64>, ExactError> {
    let (nt, nv) = (grid.n_theta(), grid.n_v());
    let (dt, dv) = (grid.d_theta(), grid.d_v());
    let th = grid.theta().nodes();
    let vs = grid.v().nodes();
    let (a, b) = (v0.eval(th[0]), v_minus.eval(vs[0]));
    if (a - b).abs() > CORNER_TOLERANCE {
        return Err(ExactError::Corner { initial: a, boundary: b });
    }
    let fs: Vec<f64> = th.iter().map(|&t| dec.f(t)).collect();
    let gs: Vec<f64> = vs.iter().map(|&v| dec.g(v)).collect();

    let mut out = Array2::zeros((nt, nv));
    for (i, &t) in th.iter().enumerate() {
        out[[i, 0]] = v0.eval(t);
    }
    for (j, &v) in vs.iter().enumerate() {
        out[[0, j]] = v_minus.eval(v);
    }
    for j in 0..nv - 1 {
        let g_c = 0.5 * (gs[j] + gs[j + 1]);
        let g_v = (gs[j + 1] - gs[j]) / dv;
        for i in 0..nt - 1 {
            let f_c = 0.5 * (fs[i] + fs[i + 1]);
            let f_t = (fs[i + 1] - fs[i]) / dt;
            let big_f = f_c + g_c;
            if !(big_f > 0.0) {
                return Err(ExactError::SingularDomain { theta: th[i], v: vs[j], value: big_f });
            }
            let (p00, p10, p01) = (out[[i, j]], out[[i + 1, j]], out[[i, j + 1]]);
            let ct = -dv * g_v / (4.0 * big_f);
            let cv = -dt * f_t / (4.0 * big_f);
            let (da, db) = (p10 - p00, p01 - p00);
            out[[i + 1, j + 1]] = p00 + (da + db + (ct - cv) * (da - db)) / (1.0 - ct - cv);
        }
    }
    Ok(out)
}

/// Largest defect of the discrete linear `V` equation on a grid solution.
pub fn v_linear_residual(dec: &UDecomposition, vfield: &Array2<f64>, grid: &CharacteristicGrid) -> f64 {
    let (dt, dv) = (grid.d_theta(), grid.d_v());
    let th = grid.theta().nodes();
    let vs = grid.v().nodes();
    let mut worst: f64 = 0.0;
    for j in 0..grid.n_v() - 1 {
        for i in 0..grid.n_theta() - 1 {
            let (f0, f1) = (dec.f(th[i]), dec.f(th[i + 1]));
            let (g0, g1) = (dec.g(vs[j]), dec.g(vs[j + 1]));
            let big_f = 0.5 * (f0 + f1) + 0.5 * (g0 + g1);
            let (p00, p10, p01, p11) = (vfield[[i, j]], vfield[[i + 1, j]], vfield[[i, j + 1]], vfield[[i + 1, j + 1]]);
            let vt = (p11 + p10 - p01 - p00) / (2.0 * dt);
            let vv = (p11 + p01 - p10 - p00) / (2.0 * dv);
            let vtv = ((p11 - p10) - (p01 - p00)) / (dt * dv);
            let res = big_f * vtv + 0.5 * ((g1 - g0) / dv * vt + (f1 - f0) / dt * vv);
            worst = worst.max(res.abs());
        }
    }
    worst
}

/// `c0 + c1 x + c2 x^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Quadratic {
    pub const fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Self { c0, c1, c2 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + x * (self.c1 + x * self.c2)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * x
    }

    pub fn second(&self) -> f64 {
        2.0 * self.c2
    }
}

/// How `M` is completed for a [`PolarizedFamily`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MGauge {
    /// `M = log(f + g) / 2`: the mixed-derivative quadrature of
    /// `M_tv = -U_t U_v / 2` with zero integration functions. The
    /// theta-constraint then has defect `-f''/(f + g)`.
    Quadrature,
    /// `M = log(f + g) / 2 - log f' - log g'`, which also satisfies the
    /// theta-constraint and makes the v-constraint function vanish.
    Constrained,
}

/// Exact plane-polarized family with `U = -log(f + g)`, `V = W = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizedFamily {
    pub f: Quadratic,
    pub g: Quadratic,
    pub gauge: MGauge,
}

impl PolarizedFamily {
    /// `f = 1 + theta^2`, `g = v`, quadrature gauge.
    pub const fn standard() -> Self {
        Self { f: Quadratic::new(1.0, 0.0, 1.0), g: Quadratic::new(0.0, 1.0, 0.0), gauge: MGauge::Quadrature }
    }

    pub fn sum(&self, theta: f64, v: f64) -> f64 {
        self.f.eval(theta) + self.g.eval(v)
    }

    pub fn u(&self, theta: f64, v: f64) -> f64 {
        -self.sum(theta, v).ln()
    }

    pub fn m(&self, theta: f64, v: f64) -> f64 {
        let base = 0.5 * self.sum(theta, v).ln();
        match self.gauge {
            MGauge::Quadrature => base,
            MGauge::Constrained => base - self.f.deriv(theta).ln() - self.g.deriv(v).ln(),
        }
    }

    pub fn point(&self, theta: f64, v: f64) -> [f64; 4] {
        [self.m(theta, v), self.u(theta, v), 0.0, 0.0]
    }

    /// Exact value of the v-constraint function `G`.
    pub fn g_constraint(&self, theta: f64, v: f64) -> f64 {
        match self.gauge {
            MGauge::Quadrature => -self.g.second() / self.sum(theta, v),
            MGauge::Constrained => 0.0,
        }
    }

    /// Exact theta-constraint defect.
    pub fn theta_residual(&self, theta: f64, v: f64) -> f64 {
        match self.gauge {
            MGauge::Quadrature => -self.f.second() / self.sum(theta, v),
            MGauge::Constrained => 0.0,
        }
    }

    fn check(&self, grid: &CharacteristicGrid) -> Result<(), ExactError> {
        // interior focusing is allowed; only the data lines must be regular
        let lines_ok = grid.theta().nodes().iter().all(|&t| self.sum(t, grid.v().min()) > 0.0)
            && grid.v().nodes().iter().all(|&v| self.sum(grid.theta().min(), v) > 0.0);
        if !lines_ok {
            return Err(ExactError::SingularDomain { theta: grid.theta().min(), v: grid.v().min(), value: 0.0 });
        }
        if self.gauge == MGauge::Constrained {
            let ok = [grid.theta().min(), grid.theta().max()].iter().all(|&t| self.f.deriv(t) > 0.0)
                && [grid.v().min(), grid.v().max()].iter().all(|&v| self.g.deriv(v) > 0.0);
            if !ok {
                return Err(ExactError::NonMonotone);
            }
        }
        Ok(())
    }

    /// Characteristic traces of the family on both data lines, every slice.
    pub fn boundary_data(&self, grid: &CharacteristicGrid) -> Result<BoundaryData, ExactError> {
        self.check(grid)?;
        let (t0, v0) = (grid.theta().min(), grid.v().min());
        let ini = LineSamples::from_fn(&grid.theta().nodes(), |t| self.point(t, v0));
        let bnd = LineSamples::from_fn(&grid.v().nodes(), |v| self.point(t0, v));
        let ns = grid.slices().len();
        Ok(BoundaryData::new(grid, vec![ini; ns], vec![bnd; ns], None)?)
    }

    /// The family sampled at every node (requires `f + g > 0` everywhere).
    pub fn exact_state(&self, grid: &CharacteristicGrid) -> Result<FieldState, ExactError> {
        self.check(grid)?;
        Ok(FieldState::from_fn(grid.clone(), Polarization::Plane, |t, v| self.point(t, v))?)
    }

    pub fn decomposition(&self, grid: &CharacteristicGrid) -> Result<UDecomposition, ExactError> {
        let fam = *self;
        let v0 = grid.v().min();
        let t0 = grid.theta().min();
        decompose_u(&Profile::closed(move |t| fam.u(t, v0)), &Profile::closed(move |v| fam.u(t0, v)), grid)
    }
}
