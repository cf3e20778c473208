//! Field samples on a characteristic grid and the characteristic data that
//! seeds a solve.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::CharacteristicGrid;
use crate::stencil;

/// Corner values of the boundary and initial lines must agree to this.
pub const CORNER_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// `W` is identically zero.
    Plane,
    General,
}

/// Index of one of the four metric potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    M,
    U,
    V,
    W,
}

impl Field {
    pub const ALL: [Field; 4] = [Field::M, Field::U, Field::V, Field::W];

    pub fn name(self) -> &'static str {
        match self {
            Field::M => "M",
            Field::U => "U",
            Field::V => "V",
            Field::W => "W",
        }
    }
}

/// The potentials `M, U, V, W` on one transverse slice, indexed `[i_theta, j_v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    pub m: Array2<f64>,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub w: Array2<f64>,
}

impl Fields {
    pub fn zeros(n_theta: usize, n_v: usize) -> Self {
        let z = Array2::zeros((n_theta, n_v));
        Self { m: z.clone(), u: z.clone(), v: z.clone(), w: z }
    }

    /// Sample closed-form potentials at every node of `grid`.
    pub fn from_fn(grid: &CharacteristicGrid, mut f: impl FnMut(f64, f64) -> [f64; 4]) -> Self {
        let mut out = Self::zeros(grid.n_theta(), grid.n_v());
        for i in 0..grid.n_theta() {
            let th = grid.theta().node(i);
            for j in 0..grid.n_v() {
                let [m, u, v, w] = f(th, grid.v().node(j));
                out.m[[i, j]] = m;
                out.u[[i, j]] = u;
                out.v[[i, j]] = v;
                out.w[[i, j]] = w;
            }
        }
        out
    }

    pub fn get(&self, field: Field) -> &Array2<f64> {
        match field {
            Field::M => &self.m,
            Field::U => &self.u,
            Field::V => &self.v,
            Field::W => &self.w,
        }
    }

    pub fn get_mut(&mut self, field: Field) -> &mut Array2<f64> {
        match field {
            Field::M => &mut self.m,
            Field::U => &mut self.u,
            Field::V => &mut self.v,
            Field::W => &mut self.w,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.u.dim()
    }

    pub fn at(&self, i: usize, j: usize) -> [f64; 4] {
        [self.m[[i, j]], self.u[[i, j]], self.v[[i, j]], self.w[[i, j]]]
    }

    pub fn set(&mut self, i: usize, j: usize, p: [f64; 4]) {
        self.m[[i, j]] = p[0];
        self.u[[i, j]] = p[1];
        self.v[[i, j]] = p[2];
        self.w[[i, j]] = p[3];
    }

    pub fn is_finite(&self) -> bool {
        Field::ALL.iter().all(|&f| self.get(f).iter().all(|x| x.is_finite()))
    }

    /// Exchange the roles of `theta` and `v`.
    pub fn transposed(&self) -> Self {
        Self { m: self.m.t().to_owned(), u: self.u.t().to_owned(), v: self.v.t().to_owned(), w: self.w.t().to_owned() }
    }

    /// Samples along the `theta` line with index `i`.
    pub fn theta_line(&self, i: usize) -> LineSamples {
        LineSamples {
            m: self.m.row(i).to_vec(),
            u: self.u.row(i).to_vec(),
            v: self.v.row(i).to_vec(),
            w: self.w.row(i).to_vec(),
        }
    }

    /// Samples along the `v` row with index `j`.
    pub fn v_row(&self, j: usize) -> LineSamples {
        LineSamples {
            m: self.m.column(j).to_vec(),
            u: self.u.column(j).to_vec(),
            v: self.v.column(j).to_vec(),
            w: self.w.column(j).to_vec(),
        }
    }

    /// Largest componentwise difference to `other`.
    pub fn max_abs_diff(&self, other: &Fields) -> f64 {
        Field::ALL
            .iter()
            .flat_map(|&f| self.get(f).iter().zip(other.get(f).iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("expected {expected} slices, got {got}")]
    SliceCount { expected: usize, got: usize },
    #[error("slice {slice}: array shape {got:?} does not match grid {expected:?}")]
    Shape { slice: usize, expected: (usize, usize), got: (usize, usize) },
    #[error("slice {slice}: non-finite entry")]
    NonFinite { slice: usize },
    #[error("slice {slice}: plane-polarized state has W != 0")]
    NonzeroW { slice: usize },
    #[error("slice {slice}: {line} line has {got} samples, expected {expected}")]
    LineLength { slice: usize, line: &'static str, expected: usize, got: usize },
    #[error("slice {slice}: corner mismatch in {field} ({initial} vs {boundary})")]
    Corner { slice: usize, field: &'static str, initial: f64, boundary: f64 },
    #[error("slice {slice}: initial line violates the theta-constraint by {residual:e} (tolerance {tolerance:e})")]
    InitialConstraint { slice: usize, residual: f64, tolerance: f64 },
}

/// Full solution state: grid, polarization flag and one [`Fields`] per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    grid: CharacteristicGrid,
    polarization: Polarization,
    slices: Vec<Fields>,
}

impl FieldState {
    pub fn new(grid: CharacteristicGrid, polarization: Polarization, slices: Vec<Fields>) -> Result<Self, FieldError> {
        let expected = (grid.n_theta(), grid.n_v());
        if slices.len() != grid.slices().len() {
            return Err(FieldError::SliceCount { expected: grid.slices().len(), got: slices.len() });
        }
        for (slice, f) in slices.iter().enumerate() {
            for field in Field::ALL {
                if f.get(field).dim() != expected {
                    return Err(FieldError::Shape { slice, expected, got: f.get(field).dim() });
                }
            }
            if !f.is_finite() {
                return Err(FieldError::NonFinite { slice });
            }
            if polarization == Polarization::Plane && f.w.iter().any(|&w| w != 0.0) {
                return Err(FieldError::NonzeroW { slice });
            }
        }
        Ok(Self { grid, polarization, slices })
    }

    /// Sample a closed-form solution `(theta, v) -> [M, U, V, W]` on every slice.
    pub fn from_fn(
        grid: CharacteristicGrid,
        polarization: Polarization,
        f: impl Fn(f64, f64) -> [f64; 4],
    ) -> Result<Self, FieldError> {
        let slices = grid.slices().iter().map(|_| Fields::from_fn(&grid, &f)).collect();
        Self::new(grid, polarization, slices)
    }

    pub(crate) fn from_parts_unchecked(
        grid: CharacteristicGrid,
        polarization: Polarization,
        slices: Vec<Fields>,
    ) -> Self {
        Self { grid, polarization, slices }
    }

    pub fn grid(&self) -> &CharacteristicGrid {
        &self.grid
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    pub fn slices(&self) -> &[Fields] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &Fields {
        &self.slices[k]
    }

    pub fn into_slices(self) -> Vec<Fields> {
        self.slices
    }

    /// Minimum of `exp(-U)` over all nodes and slices.
    pub fn min_exp_neg_u(&self) -> f64 {
        self.slices.iter().flat_map(|f| f.u.iter()).map(|u| (-u).exp()).fold(f64::INFINITY, f64::min)
    }
}

/// `M, U, V, W` sampled along one characteristic line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineSamples {
    pub m: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl LineSamples {
    pub fn from_fn(nodes: &[f64], mut f: impl FnMut(f64) -> [f64; 4]) -> Self {
        let mut out = Self::with_len(nodes.len());
        for (k, &x) in nodes.iter().enumerate() {
            out.set(k, f(x));
        }
        out
    }

    pub fn with_len(n: usize) -> Self {
        Self { m: vec![0.0; n], u: vec![0.0; n], v: vec![0.0; n], w: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn at(&self, k: usize) -> [f64; 4] {
        [self.m[k], self.u[k], self.v[k], self.w[k]]
    }

    pub fn set(&mut self, k: usize, p: [f64; 4]) {
        self.m[k] = p[0];
        self.u[k] = p[1];
        self.v[k] = p[2];
        self.w[k] = p[3];
    }

    pub fn get(&self, field: Field) -> &[f64] {
        match field {
            Field::M => &self.m,
            Field::U => &self.u,
            Field::V => &self.v,
            Field::W => &self.w,
        }
    }

    fn consistent_len(&self) -> bool {
        let n = self.u.len();
        self.m.len() == n && self.v.len() == n && self.w.len() == n
    }
}

/// Characteristic data for one solve: the initial line `v = v_min` (indexed by
/// `theta`) and the boundary line `theta = theta_min` (indexed by `v`), per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    initial: Vec<LineSamples>,
    boundary: Vec<LineSamples>,
}

impl BoundaryData {
    /// Validate characteristic data against `grid`.
    ///
    /// With `theta_constraint_tol = Some(tol)` the initial line must satisfy
    /// the theta-constraint at interior nodes (centered second-order
    /// differences) to `tol`.
    pub fn new(
        grid: &CharacteristicGrid,
        initial: Vec<LineSamples>,
        boundary: Vec<LineSamples>,
        theta_constraint_tol: Option<f64>,
    ) -> Result<Self, FieldError> {
        let ns = grid.slices().len();
        for lines in [&initial, &boundary] {
            if lines.len() != ns {
                return Err(FieldError::SliceCount { expected: ns, got: lines.len() });
            }
        }
        for slice in 0..ns {
            let (ini, bnd) = (&initial[slice], &boundary[slice]);
            if !ini.consistent_len() || ini.len() != grid.n_theta() {
                return Err(FieldError::LineLength {
                    slice,
                    line: "initial",
                    expected: grid.n_theta(),
                    got: ini.len(),
                });
            }
            if !bnd.consistent_len() || bnd.len() != grid.n_v() {
                return Err(FieldError::LineLength { slice, line: "boundary", expected: grid.n_v(), got: bnd.len() });
            }
            let finite = |l: &LineSamples| Field::ALL.iter().all(|&f| l.get(f).iter().all(|x| x.is_finite()));
            if !finite(ini) || !finite(bnd) {
                return Err(FieldError::NonFinite { slice });
            }
            for field in Field::ALL {
                let (a, b) = (ini.get(field)[0], bnd.get(field)[0]);
                if (a - b).abs() > CORNER_TOLERANCE {
                    return Err(FieldError::Corner { slice, field: field.name(), initial: a, boundary: b });
                }
            }
            if let Some(tolerance) = theta_constraint_tol {
                let residual = line_theta_residual(ini, grid.d_theta()).into_iter().map(f64::abs).fold(0.0, f64::max);
                if residual > tolerance {
                    return Err(FieldError::InitialConstraint { slice, residual, tolerance });
                }
            }
        }
        Ok(Self { initial, boundary })
    }

    pub fn initial(&self, slice: usize) -> &LineSamples {
        &self.initial[slice]
    }

    pub fn boundary(&self, slice: usize) -> &LineSamples {
        &self.boundary[slice]
    }

    pub fn slice_count(&self) -> usize {
        self.initial.len()
    }

    /// Swap the roles of the two characteristic lines (for the `theta <-> v`
    /// relabelling of the grid).
    pub fn transposed(&self) -> Self {
        Self { initial: self.boundary.clone(), boundary: self.initial.clone() }
    }
}

/// Theta-constraint defect along a single `v = const` line, at interior nodes.
pub(crate) fn line_theta_residual(line: &LineSamples, h: f64) -> Vec<f64> {
    let n = line.len();
    (1..n.saturating_sub(1))
        .map(|i| {
            let ut = stencil::centered_d1(&line.u, i, h);
            let utt = stencil::centered_d2(&line.u, i, h);
            let vt = stencil::centered_d1(&line.v, i, h);
            let wt = stencil::centered_d1(&line.w, i, h);
            let mt = stencil::centered_d1(&line.m, i, h);
            let c = line.w[i].cosh();
            utt - 0.5 * (ut * ut + vt * vt * c * c + wt * wt) + ut * mt
        })
        .collect()
}
