use cpwave_core::exact::{MGauge, PolarizedFamily, Quadratic, UDecomposition};
use cpwave_core::ricci::{identity_defects, ricci_residuals, RicciNorms, RING};
use cpwave_core::solver::{solve_goursat, SolveStatus, SolverConfig};
use cpwave_core::variational::{action_stationarity_check, PerturbationBank};
use cpwave_core::{build_grid, CharacteristicGrid, Field, FieldState, Polarization, Slice};

/// `f = 1 + theta^2`, `g = v` with `M` fixed by the theta-constraint, on a
/// square where `f', g' > 0`.
fn constrained() -> PolarizedFamily {
    PolarizedFamily { f: Quadratic::new(1.0, 0.0, 1.0), g: Quadratic::new(0.0, 1.0, 0.0), gauge: MGauge::Constrained }
}

fn grid(n: usize, range: (f64, f64)) -> CharacteristicGrid {
    build_grid(range, range, n, n, vec![Slice::equator()]).unwrap()
}

fn solved(fam: &PolarizedFamily, g: &CharacteristicGrid) -> FieldState {
    let r = solve_goursat(Polarization::Plane, &fam.boundary_data(g).unwrap(), g, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Completed);
    r.state
}

fn norms(s: &FieldState) -> RicciNorms {
    ricci_residuals(s).unwrap().norms[0]
}

fn ratios(e: &[f64]) -> Vec<f64> {
    e.windows(2).map(|w| w[0] / w[1]).collect()
}

#[test]
fn ricci_residuals_on_solver_output_are_second_order() {
    let levels: Vec<RicciNorms> =
        [51, 101, 201].iter().map(|&n| norms(&solved(&constrained(), &grid(n, (0.5, 1.5))))).collect();
    for pick in [|r: &RicciNorms| r.r00, |r: &RicciNorms| r.r01, |r: &RicciNorms| r.r_ab] {
        let e: Vec<f64> = levels.iter().map(pick).collect();
        assert!(ratios(&e).iter().all(|&q| q >= 3.5), "{e:?}");
    }
}

#[test]
fn ricci_residuals_vanish_on_the_exact_family() {
    // only the derivative stencils contribute here, so the decay is faster
    let e: Vec<f64> = [51, 101, 201]
        .iter()
        .map(|&n| norms(&constrained().exact_state(&grid(n, (0.5, 1.5))).unwrap()).max())
        .collect();
    assert!(ratios(&e).iter().all(|&q| q >= 3.5), "{e:?}");
    assert!(e[2] < 1e-8, "{e:?}");
}

#[test]
fn ricci_components_reduce_to_the_field_equations() {
    let mut r00 = Vec::new();
    for n in [51, 101] {
        let s = solved(&constrained(), &grid(n, (0.5, 1.5)));
        let d = identity_defects(&s).unwrap();
        let r = norms(&s);
        // the identities hold at stencil order, well below the residuals
        assert!(d.r00 < r.r00 && d.r01 < r.r01 && d.r_ab < r.r_ab, "{d:?} vs {r:?}");
        r00.push(d.r00.max(d.r01).max(d.r_ab));
    }
    assert!(r00[0] / r00[1] >= 12.0, "{r00:?}");
}

#[test]
fn r00_equals_the_theta_constraint_residual() {
    // the quadrature gauge violates the theta-constraint by -f''/(f + g)
    let fam = PolarizedFamily::standard();
    let mut gaps = Vec::new();
    for n in [51, 101] {
        let g = grid(n, (0.0, 1.0));
        let r = ricci_residuals(&fam.exact_state(&g).unwrap()).unwrap();
        let (th, vs) = (g.theta().nodes(), g.v().nodes());
        let gap = r.slices[0]
            .r00
            .indexed_iter()
            .map(|((i, j), x)| (x - fam.theta_residual(th[i + RING], vs[j + RING])).abs())
            .fold(0.0, f64::max);
        gaps.push(gap);
    }
    assert!(gaps[1] < 1e-6 && gaps[0] / gaps[1] >= 12.0, "{gaps:?}");
}

#[test]
fn ricci_ab_block_is_symmetric() {
    let r = ricci_residuals(&solved(&constrained(), &grid(31, (0.5, 1.5)))).unwrap();
    assert_eq!(r.slices[0].r_ab[0][1], r.slices[0].r_ab[1][0]);
}

fn shift_m(s: &FieldState, c: f64) -> FieldState {
    let mut slices = s.slices().to_vec();
    slices[0].get_mut(Field::M).mapv_inplace(|m| m + c);
    FieldState::new(s.grid().clone(), s.polarization(), slices).unwrap()
}

#[test]
fn constant_m_shift_keeps_ricci_residuals_vanishing() {
    let c = 0.7;
    // rounding in the mixed stencil on g01 grows like eps / h^2
    let s = constrained().exact_state(&grid(41, (0.5, 1.5))).unwrap();
    let (a, b) = (ricci_residuals(&s).unwrap(), ricci_residuals(&shift_m(&s, c)).unwrap());
    let (a, b) = (&a.slices[0], &b.slices[0]);
    let diff = |x: &ndarray::Array2<f64>, y: &ndarray::Array2<f64>, scale: f64| {
        x.iter().zip(y).map(|(p, q)| (scale * p - q).abs()).fold(0.0, f64::max)
    };
    assert!(diff(&a.r00, &b.r00, 1.0) <= 1e-12);
    assert!(diff(&a.r01, &b.r01, 1.0) <= 1e-12);
    // the transverse block carries the overall factor e^M
    for (x, y) in a.r_ab.iter().flatten().zip(b.r_ab.iter().flatten()) {
        assert!(diff(x, y, c.exp()) <= 1e-12);
    }
}

#[test]
fn stationarity_defects_are_second_order_on_solver_output() {
    for (fam, range) in [(PolarizedFamily::standard(), (0.0, 1.0)), (constrained(), (0.5, 1.5))] {
        let e: Vec<f64> = [51, 101, 201]
            .iter()
            .map(|&n| {
                let g = grid(n, range);
                action_stationarity_check(&solved(&fam, &g), &PerturbationBank::standard(&g)).unwrap().max_defect()
            })
            .collect();
        assert!(ratios(&e).iter().all(|&q| q >= 3.5), "{e:?}");
    }
}

#[test]
fn multiplier_derivative_matches_weighted_constraint() {
    let g = grid(101, (0.0, 1.0));
    let s = PolarizedFamily::standard().exact_state(&g).unwrap();
    let rep = action_stationarity_check(&s, &PerturbationBank::standard(&g)).unwrap();
    assert!(!rep.multiplier.is_empty());
    assert!(rep.multiplier.iter().all(|m| m.expected.abs() > 1e-6));
    assert!(rep.max_multiplier_error() <= 1e-8, "{}", rep.max_multiplier_error());
}

#[test]
fn corrupted_cell_is_detected() {
    let g = grid(101, (0.0, 1.0));
    let bank = PerturbationBank::standard(&g);
    let s = solved(&PolarizedFamily::standard(), &g);
    let base = action_stationarity_check(&s, &bank).unwrap().max_defect();
    let mut slices = s.slices().to_vec();
    slices[0].get_mut(Field::U)[[50, 50]] += 1e-3;
    let bad = FieldState::new(g.clone(), Polarization::Plane, slices).unwrap();
    let hit = action_stationarity_check(&bad, &bank).unwrap().max_defect();
    assert!(hit > 10.0 * base, "{hit} vs {base}");
}

fn state_from(dec: &UDecomposition, g: &CharacteristicGrid) -> FieldState {
    FieldState::from_fn(g.clone(), Polarization::Plane, |t, v| {
        let u = dec.u(t, v);
        [-0.5 * u, u, 0.0, 0.0]
    })
    .unwrap()
}

#[test]
fn gauge_shift_leaves_stationarity_defects_unchanged() {
    let g = grid(101, (0.0, 1.0));
    let dec = PolarizedFamily::standard().decomposition(&g).unwrap();
    let bank = PerturbationBank::standard(&g);
    let a = action_stationarity_check(&state_from(&dec, &g), &bank).unwrap();
    let b = action_stationarity_check(&state_from(&dec.with_gauge_shift(0.25), &g), &bank).unwrap();
    for (x, y) in a.stationarity_defects.iter().zip(&b.stationarity_defects) {
        assert!((x.normalized - y.normalized).abs() <= 1e-12, "{} vs {}", x.normalized, y.normalized);
    }
}
