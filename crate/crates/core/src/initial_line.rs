//! Initial data on the line `v = v_min`: pulse profiles for `V`, `W`, `M`
//! and a `U` profile obtained by integrating the theta-constraint
//!
//! ```text
//! U'' = (U'^2 + V'^2 cosh^2 W + W'^2) / 2 - U' M'
//! ```
//!
//! from the corner with the classical Runge-Kutta method.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{BoundaryData, FieldError, LineSamples};
use crate::grid::CharacteristicGrid;

/// Runge-Kutta steps per grid interval before refinement.
pub const DEFAULT_SUBSTEPS: usize = 2;
/// Agreement required between successive substep doublings.
pub const ODE_TOL: f64 = 1e-10;
const MAX_SUBSTEPS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitialLineError {
    #[error("pulse parameters must be finite")]
    NonFinite,
    #[error("pulse width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("compact bump support [{lo}, {hi}] leaves the strip [{theta_min}, {theta_max}]")]
    SupportOutside { lo: f64, hi: f64, theta_min: f64, theta_max: f64 },
    #[error("need at least two theta nodes")]
    TooFewNodes,
    #[error("focusing singularity on the initial line near theta = {theta}")]
    Focusing { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PulseShape {
    #[default]
    Gaussian,
    /// `exp(1 - 1/(1 - s^2))` for `|s| < 1`, zero outside.
    CompactBump,
}

/// One bump `amplitude * shape((theta - center) / width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseProfile {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub shape: PulseShape,
}

impl PulseProfile {
    pub fn new(amplitude: f64, center: f64, width: f64, shape: PulseShape) -> Self {
        PulseProfile { amplitude, center, width, shape }
    }

    pub fn value(&self, theta: f64) -> f64 {
        let s = (theta - self.center) / self.width;
        self.amplitude * shape_value(self.shape, s)
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        let s = (theta - self.center) / self.width;
        self.amplitude * shape_slope(self.shape, s) / self.width
    }

    pub fn validate(&self, theta_min: f64, theta_max: f64) -> Result<(), InitialLineError> {
        if !(self.amplitude.is_finite() && self.center.is_finite() && self.width.is_finite()) {
            return Err(InitialLineError::NonFinite);
        }
        if self.width <= 0.0 {
            return Err(InitialLineError::NonPositiveWidth(self.width));
        }
        if self.shape == PulseShape::CompactBump {
            let (lo, hi) = (self.center - self.width, self.center + self.width);
            if lo < theta_min || hi > theta_max {
                return Err(InitialLineError::SupportOutside { lo, hi, theta_min, theta_max });
            }
        }
        Ok(())
    }
}

fn shape_value(shape: PulseShape, s: f64) -> f64 {
    match shape {
        PulseShape::Gaussian => (-s * s).exp(),
        PulseShape::CompactBump => {
            if s.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        }
    }
}

fn shape_slope(shape: PulseShape, s: f64) -> f64 {
    match shape {
        PulseShape::Gaussian => -2.0 * s * (-s * s).exp(),
        PulseShape::CompactBump => {
            if s.abs() < 1.0 {
                let q = 1.0 - s * s;
                -2.0 * s / (q * q) * (1.0 - 1.0 / q).exp()
            } else {
                0.0
            }
        }
    }
}

/// Pulse profiles for the non-`U` fields plus the free `U` slope.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSet {
    #[serde(default, rename = "M")]
    pub m: Vec<PulseProfile>,
    #[serde(default, rename = "V")]
    pub v: Vec<PulseProfile>,
    #[serde(default, rename = "W")]
    pub w: Vec<PulseProfile>,
    /// `U'` at the corner; zero for a sandwich wave.
    #[serde(default)]
    pub u_slope: f64,
}

fn sum_value(ps: &[PulseProfile], theta: f64) -> f64 {
    ps.iter().map(|p| p.value(theta)).sum()
}

fn sum_slope(ps: &[PulseProfile], theta: f64) -> f64 {
    ps.iter().map(|p| p.derivative(theta)).sum()
}

impl PulseSet {
    pub fn is_polarized(&self) -> bool {
        self.w.is_empty() || self.w.iter().all(|p| p.amplitude == 0.0)
    }

    pub fn validate(&self, theta_min: f64, theta_max: f64) -> Result<(), InitialLineError> {
        if !self.u_slope.is_finite() {
            return Err(InitialLineError::NonFinite);
        }
        for p in self.m.iter().chain(&self.v).chain(&self.w) {
            p.validate(theta_min, theta_max)?;
        }
        Ok(())
    }

    /// `(M, V, W)` and their slopes at `theta`, anchored so that the corner
    /// values are reproduced at `theta_min`.
    fn profiles(&self, corner: [f64; 4], theta_min: f64, theta: f64) -> ([f64; 3], [f64; 3]) {
        let val = |ps: &[PulseProfile], c: f64| c + sum_value(ps, theta) - sum_value(ps, theta_min);
        (
            [val(&self.m, corner[0]), val(&self.v, corner[2]), val(&self.w, corner[3])],
            [sum_slope(&self.m, theta), sum_slope(&self.v, theta), sum_slope(&self.w, theta)],
        )
    }
}

/// Right-hand side of the first-order system `(U, U')`.
fn ode_rhs(pulses: &PulseSet, corner: [f64; 4], theta_min: f64, theta: f64, up: f64) -> f64 {
    let ([_, _, w], [mp, vp, wp]) = pulses.profiles(corner, theta_min, theta);
    let c = w.cosh();
    0.5 * (up * up + vp * vp * c * c + wp * wp) - up * mp
}

/// Build the initial line on `theta_nodes` from `corner = [M, U, V, W]` at
/// `(theta_min, v_min)`, with `substeps` Runge-Kutta steps per interval.
///
/// Fails with [`InitialLineError::Focusing`] when `exp(-U)` drops below
/// `threshold` or the integration stops being finite.
pub fn build_initial_line_with(
    pulses: &PulseSet,
    corner: [f64; 4],
    theta_nodes: &[f64],
    threshold: f64,
    substeps: usize,
) -> Result<LineSamples, InitialLineError> {
    let n = theta_nodes.len();
    if n < 2 {
        return Err(InitialLineError::TooFewNodes);
    }
    if !corner.iter().all(|c| c.is_finite()) {
        return Err(InitialLineError::NonFinite);
    }
    let (t0, t1) = (theta_nodes[0], theta_nodes[n - 1]);
    pulses.validate(t0, t1)?;
    let substeps = substeps.max(1);
    let f = |t: f64, up: f64| ode_rhs(pulses, corner, t0, t, up);

    let mut line = LineSamples::with_len(n);
    let (mut u, mut up) = (corner[1], pulses.u_slope);
    for k in 0..n {
        let t = theta_nodes[k];
        if k > 0 {
            let t_prev = theta_nodes[k - 1];
            let h = (t - t_prev) / substeps as f64;
            for s in 0..substeps {
                let ts = t_prev + s as f64 * h;
                let (k1u, k1p) = (up, f(ts, up));
                let (k2u, k2p) = (up + 0.5 * h * k1p, f(ts + 0.5 * h, up + 0.5 * h * k1p));
                let (k3u, k3p) = (up + 0.5 * h * k2p, f(ts + 0.5 * h, up + 0.5 * h * k2p));
                let (k4u, k4p) = (up + h * k3p, f(ts + h, up + h * k3p));
                u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                up += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
                if !(u.is_finite() && up.is_finite()) || (-u).exp() < threshold {
                    return Err(InitialLineError::Focusing { theta: ts + h });
                }
            }
        }
        let ([m, v, w], _) = pulses.profiles(corner, t0, t);
        let u_here = if k == 0 { corner[1] } else { u };
        line.set(k, [m, u_here, v, w]);
    }
    Ok(line)
}

/// [`build_initial_line_with`] with the substep count doubled from
/// [`DEFAULT_SUBSTEPS`] until two successive lines agree to [`ODE_TOL`].
pub fn build_initial_line(
    pulses: &PulseSet,
    corner: [f64; 4],
    theta_nodes: &[f64],
    threshold: f64,
) -> Result<LineSamples, InitialLineError> {
    let mut substeps = DEFAULT_SUBSTEPS;
    let mut coarse = build_initial_line_with(pulses, corner, theta_nodes, threshold, substeps);
    loop {
        substeps *= 2;
        let fine = build_initial_line_with(pulses, corner, theta_nodes, threshold, substeps)?;
        if let Ok(c) = &coarse {
            let diff = c.u.iter().zip(&fine.u).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if diff <= ODE_TOL || substeps >= MAX_SUBSTEPS {
                return Ok(fine);
            }
        }
        if substeps >= MAX_SUBSTEPS {
            return Ok(fine);
        }
        coarse = Ok(fine);
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("slice {slice}: {source}")]
    InitialLine { slice: usize, source: InitialLineError },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("expected {expected} boundary lines, got {got}")]
    SliceCount { expected: usize, got: usize },
}

/// Characteristic data from per-slice boundary lines (`theta = theta_min`)
/// and a pulse set; each initial line starts from its boundary corner.
pub fn pulse_boundary_data(
    grid: &CharacteristicGrid,
    boundary: Vec<LineSamples>,
    pulses: &PulseSet,
    threshold: f64,
) -> Result<BoundaryData, DataError> {
    let ns = grid.slices().len();
    if boundary.len() != ns {
        return Err(DataError::SliceCount { expected: ns, got: boundary.len() });
    }
    let nodes = grid.theta().nodes();
    let initial = boundary
        .iter()
        .enumerate()
        .map(|(slice, b)| {
            if b.is_empty() {
                return Err(DataError::Field(FieldError::LineLength {
                    slice,
                    line: "boundary",
                    expected: grid.n_v(),
                    got: 0,
                }));
            }
            build_initial_line(pulses, b.at(0), &nodes, threshold)
                .map_err(|source| DataError::InitialLine { slice, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BoundaryData::new(grid, initial, boundary, None)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nodes(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    fn v_pulse(a: f64) -> PulseSet {
        PulseSet { v: vec![PulseProfile::new(a, 0.5, 0.15, PulseShape::CompactBump)], ..Default::default() }
    }

    /// Independent integration of `phi = exp(-U/2)`, `phi'' = -V'^2 phi / 4`,
    /// with many fine explicit midpoint steps.
    fn phi_oracle(p: &PulseSet, t_end: f64, steps: usize) -> f64 {
        let h = t_end / steps as f64;
        let (mut phi, mut dphi) = (1.0_f64, 0.0_f64);
        let vp = |t: f64| sum_slope(&p.v, t);
        for s in 0..steps {
            let t = s as f64 * h;
            let a = |t: f64, phi: f64| -0.25 * vp(t).powi(2) * phi;
            let pm = phi + 0.5 * h * dphi;
            let dm = dphi + 0.5 * h * a(t, phi);
            phi += h * dm;
            dphi += h * a(t + 0.5 * h, pm);
        }
        phi
    }

    #[test]
    fn zero_pulse_is_constant() {
        let corner = [0.2, -0.3, 0.1, 0.0];
        let line = build_initial_line(&PulseSet::default(), corner, &nodes(11), 1e-8).unwrap();
        for k in 0..11 {
            assert_eq!(line.at(k), corner);
        }
    }

    #[test]
    fn u_is_nondecreasing_and_matches_phi_oracle() {
        let p = v_pulse(0.1);
        let line = build_initial_line(&p, [0.0; 4], &nodes(101), 1e-8).unwrap();
        let u = &line.u;
        assert!(u.windows(2).all(|w| w[1] >= w[0]));
        assert!(u[100] > 0.0);
        let phi = phi_oracle(&p, 1.0, 200_000);
        let diff = ((-0.5 * u[100]).exp() - phi).abs();
        assert!(diff < 1e-9, "{diff} {phi}");
    }

    #[test]
    fn anchoring_reproduces_corner() {
        let p = PulseSet {
            v: vec![PulseProfile::new(0.3, 0.1, 0.2, PulseShape::Gaussian)],
            m: vec![PulseProfile::new(-0.2, 0.0, 0.3, PulseShape::Gaussian)],
            ..Default::default()
        };
        let corner = [1.0, 2.0, 3.0, 0.0];
        let line = build_initial_line(&p, corner, &nodes(21), 1e-8).unwrap();
        assert_eq!(line.at(0), corner);
    }

    #[test]
    fn refinement_converges_at_fourth_order() {
        let p = PulseSet {
            v: vec![PulseProfile::new(0.6, 0.5, 0.2, PulseShape::Gaussian)],
            w: vec![PulseProfile::new(0.3, 0.4, 0.2, PulseShape::Gaussian)],
            m: vec![PulseProfile::new(0.2, 0.6, 0.3, PulseShape::Gaussian)],
            u_slope: 0.1,
        };
        let end = |s: usize| *build_initial_line_with(&p, [0.0; 4], &nodes(11), 1e-8, s).unwrap().u.last().unwrap();
        let reference = end(512);
        let (e1, e2) = ((end(4) - reference).abs(), (end(8) - reference).abs());
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "order {order}");
    }

    #[test]
    fn large_amplitude_focuses() {
        // shoot for the smallest amplitude where phi(1) crosses zero
        let mut hi = 0.1;
        while phi_oracle(&v_pulse(hi), 1.0, 20_000) > 0.0 {
            hi += 0.1;
        }
        let mut lo = hi - 0.1;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if phi_oracle(&v_pulse(mid), 1.0, 20_000) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(build_initial_line(&v_pulse(0.9 * lo), [0.0; 4], &nodes(401), 1e-8).is_ok());
        match build_initial_line(&v_pulse(1.1 * lo), [0.0; 4], &nodes(401), 1e-8) {
            Err(InitialLineError::Focusing { theta }) => assert!(theta > 0.35 && theta <= 1.0, "{theta}"),
            other => panic!("expected focusing, got {other:?}"),
        }
    }

    #[test]
    fn invalid_pulses() {
        let bad =
            PulseSet { v: vec![PulseProfile::new(1.0, 0.95, 0.1, PulseShape::CompactBump)], ..Default::default() };
        assert!(matches!(
            build_initial_line(&bad, [0.0; 4], &nodes(5), 1e-8),
            Err(InitialLineError::SupportOutside { .. })
        ));
        let bad = PulseSet { v: vec![PulseProfile::new(1.0, 0.5, 0.0, PulseShape::Gaussian)], ..Default::default() };
        assert!(matches!(
            build_initial_line(&bad, [0.0; 4], &nodes(5), 1e-8),
            Err(InitialLineError::NonPositiveWidth(_))
        ));
        assert!(matches!(
            build_initial_line(&PulseSet::default(), [0.0; 4], &[0.0], 1e-8),
            Err(InitialLineError::TooFewNodes)
        ));
    }

    proptest! {
        #[test]
        fn shape_slopes_match_difference_quotients(s in -0.95f64..0.95, gauss in any::<bool>()) {
            let shape = if gauss { PulseShape::Gaussian } else { PulseShape::CompactBump };
            let h = 1e-6;
            let fd = (shape_value(shape, s + h) - shape_value(shape, s - h)) / (2.0 * h);
            prop_assert!((fd - shape_slope(shape, s)).abs() < 1e-5 * (1.0 + fd.abs()));
        }

        #[test]
        fn polarized_sandwich_u_is_monotone(a in 0.0f64..0.4, c in 0.3f64..0.7) {
            let p = PulseSet { v: vec![PulseProfile::new(a, c, 0.2, PulseShape::CompactBump)], ..Default::default() };
            let line = build_initial_line(&p, [0.0; 4], &nodes(41), 1e-8).unwrap();
            prop_assert!(line.u.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
