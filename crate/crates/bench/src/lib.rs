//! Fixed scenarios shared by the benchmarks.

use cpwave_core::{
    build_grid, pulse_boundary_data, BackgroundSpec, BoundaryData, CharacteristicGrid, Direction, FieldState,
    Polarization, PolarizedFamily, PulseProfile, PulseSet, PulseShape, Slice, SolverConfig,
};

pub struct Scenario {
    pub system: Polarization,
    pub grid: CharacteristicGrid,
    pub data: BoundaryData,
}

impl Scenario {
    pub fn solve(&self) -> FieldState {
        cpwave_core::solve_goursat(self.system, &self.data, &self.grid, &SolverConfig::default()).unwrap().state
    }
}

pub fn pulses(system: Polarization) -> PulseSet {
    PulseSet {
        v: vec![PulseProfile::new(0.5, 0.5, 0.12, PulseShape::Gaussian)],
        w: match system {
            Polarization::Plane => vec![],
            Polarization::General => vec![PulseProfile::new(0.3, 0.5, 0.12, PulseShape::Gaussian)],
        },
        ..Default::default()
    }
}

/// Pulses entering flat space-time across an outgoing spherical front,
/// on an `n x n` grid with `slices` transverse samples.
pub fn minkowski_pulse(system: Polarization, n: usize, slices: usize) -> Scenario {
    let ys: Vec<Slice> = (0..slices).map(|k| Slice::new(0.6 + 0.3 * k as f64, 0.0)).collect();
    let grid = build_grid((0.0, 1.0), (1.0, 2.0), n, n, ys).unwrap();
    let spec = BackgroundSpec::Minkowski { direction: Direction::Outgoing };
    let lines = grid.slices().iter().map(|s| spec.boundary_line(&grid.v().nodes(), *s).unwrap()).collect();
    let data = pulse_boundary_data(&grid, lines, &pulses(system), 1e-8).unwrap();
    Scenario { system, grid, data }
}

/// `U = -log(1 + theta^2 + v)` on the unit square.
pub fn exact_family(n: usize) -> Scenario {
    let grid = build_grid((0.0, 1.0), (0.0, 1.0), n, n, vec![Slice::equator()]).unwrap();
    let data = PolarizedFamily::standard().boundary_data(&grid).unwrap();
    Scenario { system: Polarization::Plane, grid, data }
}
