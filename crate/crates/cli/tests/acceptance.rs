//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the lines are always printed; the process fails if any
//! criterion does.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cpwave_core::backgrounds::{
    invert_tortoise, rw_constraint_g, schwarzschild_r_v, schwarzschild_r_vv, BackgroundSpec, Direction, MATTER_P,
    RADIATION_P,
};
use cpwave_core::constraints::{constraint_report, g_of_line, g_transport_check, jump_report};
use cpwave_core::convergence::exact_error_study;
use cpwave_core::exact::{u_jump_relation, MGauge, PolarizedFamily, Quadratic};
use cpwave_core::initial_line::build_initial_line_with;
use cpwave_core::ricci::{identity_defects, ricci_residuals, RicciNorms};
use cpwave_core::solver::{solve_goursat, SolveResult, SolveStatus, SolverConfig};
use cpwave_core::variational::{action_stationarity_check, PerturbationBank};
use cpwave_core::{
    build_grid, build_initial_line, pulse_boundary_data, BoundaryData, CharacteristicGrid, Field, FieldState,
    LineSamples, Polarization, PulseProfile, PulseSet, PulseShape, Slice,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type GCase = (String, BackgroundSpec, (f64, f64), Box<dyn Fn(f64) -> f64>);
type Pick = (&'static str, fn(&RicciNorms) -> f64);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn square(n: usize, theta: (f64, f64), v: (f64, f64)) -> CharacteristicGrid {
    build_grid(theta, v, n, n, vec![Slice::equator()]).unwrap()
}

fn solve(sys: Polarization, d: &BoundaryData, g: &CharacteristicGrid) -> SolveResult {
    solve_goursat(sys, d, g, &SolverConfig::default()).unwrap()
}

fn completed(sys: Polarization, d: &BoundaryData, g: &CharacteristicGrid) -> SolveResult {
    let r = solve(sys, d, g);
    assert_eq!(r.status, SolveStatus::Completed);
    r
}

fn ratios(e: &[f64]) -> Vec<f64> {
    e.windows(2).map(|w| w[0] / w[1]).collect()
}

fn all_at_least(e: &[f64], q: f64) -> bool {
    ratios(e).iter().all(|&r| r >= q)
}

fn constrained_family() -> PolarizedFamily {
    PolarizedFamily { f: Quadratic::new(1.0, 0.0, 1.0), g: Quadratic::new(0.0, 1.0, 0.0), gauge: MGauge::Constrained }
}

fn pulses(sys: Polarization) -> PulseSet {
    PulseSet {
        v: vec![PulseProfile::new(0.5, 0.5, 0.12, PulseShape::Gaussian)],
        w: match sys {
            Polarization::Plane => vec![],
            Polarization::General => vec![PulseProfile::new(0.3, 0.5, 0.12, PulseShape::Gaussian)],
        },
        ..Default::default()
    }
}

fn minkowski_line(g: &CharacteristicGrid) -> LineSamples {
    BackgroundSpec::Minkowski { direction: Direction::Outgoing }.boundary_line(&g.v().nodes(), g.slices()[0]).unwrap()
}

fn pulse_run(n: usize, sys: Polarization) -> SolveResult {
    let g = square(n, (0.0, 1.0), (1.0, 2.0));
    let d = pulse_boundary_data(&g, vec![minkowski_line(&g)], &pulses(sys), 1e-8).unwrap();
    completed(sys, &d, &g)
}

fn criterion_1() -> Outcome {
    let fam = PolarizedFamily::standard();
    let base = square(26, (0.0, 1.0), (0.0, 1.0));
    let study = exact_error_study(
        Polarization::Plane,
        &base,
        3,
        &SolverConfig::default(),
        |g| fam.boundary_data(g),
        |g| fam.exact_state(g),
    )
    .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for f in Field::ALL {
        let orders = study.field_orders(f);
        if orders.iter().all(Option::is_none) {
            // V and W vanish identically on this family
            ok &= study.levels.iter().all(|l| l.linf[f as usize] == 0.0);
            parts.push(format!("{}: exact", f.name()));
            continue;
        }
        for o in &orders {
            ok &= o.is_some_and(|o| (1.8..=2.2).contains(&o));
        }
        parts.push(format!(
            "{}: {:?}",
            f.name(),
            orders.iter().map(|o| o.map(|o| (o * 1000.0).round() / 1000.0)).collect::<Vec<_>>()
        ));
    }
    let u101 = study.levels[2].linf[1];
    ok &= u101 < 1e-4;
    check(ok, format!("orders {} ; U error at 101x101 = {u101:.3e} (< 1e-4)", parts.join(", ")))
}

fn criterion_2() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;

    // the initial line solves the theta-constraint ODE to 1e-10
    let g = square(201, (0.0, 1.0), (1.0, 2.0));
    let corner = minkowski_line(&g).at(0);
    for sys in [Polarization::Plane, Polarization::General] {
        let line = build_initial_line(&pulses(sys), corner, &g.theta().nodes(), 1e-8).unwrap();
        let reference = build_initial_line_with(&pulses(sys), corner, &g.theta().nodes(), 1e-8, 256).unwrap();
        let ode = line.u.iter().zip(&reference.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ok &= ode <= 1e-10;
        parts.push(format!("{sys:?} ODE error {ode:.1e}"));
    }

    let flat = PolarizedFamily {
        f: Quadratic::new(1.0, 0.0, 0.0),
        g: Quadratic::new(0.0, 0.0, 0.0),
        gauge: MGauge::Quadrature,
    };
    let fg = square(101, (0.0, 1.0), (0.0, 1.0));
    let floor = constraint_report(&completed(Polarization::Plane, &flat.boundary_data(&fg).unwrap(), &fg).state)
        .unwrap()[0]
        .max_theta_residual();
    for sys in [Polarization::Plane, Polarization::General] {
        let e: Vec<f64> = [101, 201]
            .iter()
            .map(|&n| constraint_report(&pulse_run(n, sys).state).unwrap()[0].max_theta_residual())
            .collect();
        // the part above 5x the flat floor must shrink like h^2
        ok &= (e[0] - 5.0 * floor) / (e[1] - 5.0 * floor) >= 3.5;
        parts.push(format!("{sys:?} residual {:.3e} -> {:.3e} (x{:.2})", e[0], e[1], e[0] / e[1]));
    }
    check(ok, format!("flat floor {floor:.1e}; {}", parts.join("; ")))
}

fn criterion_3() -> Outcome {
    let e: Vec<f64> = [201, 401]
        .iter()
        .map(|&n| g_transport_check(&pulse_run(n, Polarization::Plane).state).unwrap()[0].linf)
        .collect();
    let transport_ok = e[0] / e[1] >= 3.5;

    // g'' = 1 keeps G = -1/(f + g) away from zero
    let fam = PolarizedFamily {
        f: Quadratic::new(1.0, 0.0, 1.0),
        g: Quadratic::new(0.0, 1.0, 0.5),
        gauge: MGauge::Quadrature,
    };
    let g = square(201, (0.0, 1.0), (0.0, 1.0));
    let d = fam.boundary_data(&g).unwrap();
    let rep = &jump_report(&completed(Polarization::Plane, &d, &g), &d).unwrap()[0];
    let defects = rep.log_g_defects();
    let worst = defects.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let jump_ok = defects.len() == g.n_v() && worst <= 1e-3;
    check(
        transport_ok && jump_ok,
        format!(
            "transport defect {:.3e} -> {:.3e} (x{:.2}); log-G jump defect {worst:.2e} at 201x201 ({} of {} nodes)",
            e[0],
            e[1],
            e[0] / e[1],
            defects.len(),
            g.n_v()
        ),
    )
}

fn criterion_4() -> Outcome {
    let fam = PolarizedFamily::standard();
    let mut rows = Vec::new();
    for n in [101, 201] {
        let g = square(n, (0.0, 1.0), (0.0, 1.0));
        let d = fam.boundary_data(&g).unwrap();
        let rep = &jump_report(&completed(Polarization::Plane, &d, &g), &d).unwrap()[0];
        let jumps = rep.u_jump(&d.boundary(0).u);
        let (lo, hi) = jumps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let expected = u_jump_relation(&fam.decomposition(&g).unwrap(), 1.0).unwrap().jump();
        let err = jumps.iter().fold(0.0f64, |m, x| m.max((x - expected).abs()));
        rows.push((hi - lo, err));
    }
    let (spread, err) = rows[1];
    let ratio = rows[0].1 / err;
    check(
        spread <= 1e-6 && (ratio >= 3.5 || err < 1e-10),
        format!("spread {spread:.2e} at 201x201; |jump - (f(1) - f(0))| {:.2e} -> {err:.2e} (x{ratio:.2})", rows[0].1),
    )
}

fn g_error(spec: BackgroundSpec, range: (f64, f64), n: usize, exact: &dyn Fn(f64) -> f64) -> f64 {
    let g = build_grid((0.0, 1.0), range, 2, n, vec![Slice::equator()]).unwrap();
    let v = g.v().nodes();
    let line = spec.boundary_line(&v, Slice::new(1.1, 0.0)).unwrap();
    g_of_line(&line, g.d_v()).iter().zip(&v).fold(0.0f64, |m, (gi, &vi)| m.max((gi - exact(vi)).abs()))
}

fn criterion_5() -> Outcome {
    let mut cases: Vec<GCase> = vec![
        (
            "minkowski".into(),
            BackgroundSpec::Minkowski { direction: Direction::Outgoing },
            (0.5, 2.0),
            Box::new(|_| 0.0),
        ),
        ("schwarzschild".into(), BackgroundSpec::Schwarzschild { mass: 0.5 }, (-4.0, 1.0), Box::new(|_| 0.0)),
    ];
    for k in [-1, 0, 1] {
        for p in [RADIATION_P, MATTER_P] {
            cases.push((
                format!("rw k={k} p={p:.3}"),
                BackgroundSpec::RobertsonWalker { k, p },
                (0.5, 2.0),
                Box::new(move |v| rw_constraint_g(v, k, p).unwrap()),
            ));
        }
    }
    let mut worst_ratio = f64::INFINITY;
    for (name, spec, range, exact) in &cases {
        let e: Vec<f64> = [101, 201, 401].iter().map(|&n| g_error(*spec, *range, n, exact.as_ref())).collect();
        let r = ratios(&e).into_iter().fold(f64::INFINITY, f64::min);
        if r < 3.5 {
            return Err(format!("{name}: G errors {e:?}"));
        }
        worst_ratio = worst_ratio.min(r);
    }
    // r_v and r_vv against sixth-order differences of the tortoise inversion
    let m = 0.5;
    let mut worst_id: f64 = 0.0;
    for v in [-6.0, -3.0, -1.0, 0.5, 2.0] {
        let h = 1e-2;
        let r = |k: f64| invert_tortoise(v + k * h, m).unwrap();
        let (r0, r1, r2, r3, rm1, rm2, rm3) = (r(0.0), r(1.0), r(2.0), r(3.0), r(-1.0), r(-2.0), r(-3.0));
        let d1 = (45.0 * (r1 - rm1) - 9.0 * (r2 - rm2) + (r3 - rm3)) / (60.0 * h);
        let d2 = (270.0 * (r1 + rm1) - 27.0 * (r2 + rm2) + 2.0 * (r3 + rm3) - 490.0 * r0) / (180.0 * h * h);
        worst_id = worst_id.max((d1 - schwarzschild_r_v(r0, m)).abs()).max((d2 - schwarzschild_r_vv(r0, m)).abs());
    }
    check(
        worst_id <= 1e-10,
        format!(
            "{} backgrounds, smallest G-error ratio {worst_ratio:.2}; r_v, r_vv identity error {worst_id:.1e}",
            cases.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let p = PulseSet {
        v: vec![PulseProfile::new(0.4, 0.45, 0.25, PulseShape::CompactBump)],
        m: vec![PulseProfile::new(0.1, 0.5, 0.2, PulseShape::Gaussian)],
        ..Default::default()
    };
    let g = build_grid((0.0, 1.0), (1.0, 2.0), 41, 33, vec![Slice::equator(), Slice::new(1.0, 0.0)]).unwrap();
    let spec = BackgroundSpec::Minkowski { direction: Direction::Outgoing };
    let lines = g.slices().iter().map(|s| spec.boundary_line(&g.v().nodes(), *s).unwrap()).collect();
    let d = pulse_boundary_data(&g, lines, &p, 1e-8).unwrap();
    let a = completed(Polarization::Plane, &d, &g);
    let b = completed(Polarization::General, &d, &g);
    let w0 = a.state.slices().iter().zip(b.state.slices()).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max);

    let g = build_grid((0.0, 1.0), (0.0, 2.0), 41, 21, vec![Slice::equator()]).unwrap();
    let p = PulseSet { w: vec![PulseProfile::new(0.3, 0.55, 0.2, PulseShape::CompactBump)], ..p };
    let bnd = LineSamples::from_fn(&g.v().nodes(), |_| [0.2, -0.1, 0.3, 0.05]);
    let d = pulse_boundary_data(&g, vec![bnd], &p, 1e-8).unwrap();
    let r = completed(Polarization::General, &d, &g);
    let f = r.state.slice(0);
    let mut drift: f64 = 0.0;
    for field in Field::ALL {
        let a = f.get(field);
        for ((i, _), &x) in a.indexed_iter() {
            drift = drift.max((x - a[[i, 0]]).abs());
        }
    }
    check(
        w0 <= 1e-12 && drift <= 1e-12,
        format!("W=0 general vs plane {w0:.1e}; v-independent drift {drift:.1e} (both <= 1e-12)"),
    )
}

fn criterion_7() -> Outcome {
    let fam = constrained_family();
    let states: Vec<FieldState> = [51, 101, 201]
        .iter()
        .map(|&n| {
            completed(
                Polarization::Plane,
                &fam.boundary_data(&square(n, (0.5, 1.5), (0.5, 1.5))).unwrap(),
                &square(n, (0.5, 1.5), (0.5, 1.5)),
            )
            .state
        })
        .collect();
    let norms: Vec<RicciNorms> = states.iter().map(|s| ricci_residuals(s).unwrap().norms[0]).collect();
    let picks: [Pick; 3] = [("R00", |r| r.r00), ("R01", |r| r.r01), ("Rab", |r| r.r_ab)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, pick) in picks {
        let e: Vec<f64> = norms.iter().map(pick).collect();
        ok &= all_at_least(&e, 3.5);
        parts.push(format!("{name} x{:.2}", ratios(&e).into_iter().fold(f64::INFINITY, f64::min)));
    }
    // identities between Ricci components and reduced residuals, at stencil order
    let ids: Vec<f64> = states[..2]
        .iter()
        .map(|s| {
            let d = identity_defects(s).unwrap();
            d.r00.max(d.r01).max(d.r_ab)
        })
        .collect();
    ok &= ids[1] < norms[1].max() && ids[0] / ids[1] >= 12.0;
    let r = ricci_residuals(&states[0]).unwrap();
    let symmetric = r.slices[0].r_ab[0][1] == r.slices[0].r_ab[1][0];
    ok &= symmetric;
    check(
        ok,
        format!(
            "residual decay {}; identity defect {:.1e} -> {:.1e}; (a,b) symmetric: {symmetric}",
            parts.join(", "),
            ids[0],
            ids[1]
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, fam, range) in
        [("quadrature", PolarizedFamily::standard(), (0.0, 1.0)), ("constrained", constrained_family(), (0.5, 1.5))]
    {
        let e: Vec<f64> = [51, 101, 201]
            .iter()
            .map(|&n| {
                let g = square(n, range, range);
                let s = completed(Polarization::Plane, &fam.boundary_data(&g).unwrap(), &g).state;
                action_stationarity_check(&s, &PerturbationBank::standard(&g)).unwrap().max_defect()
            })
            .collect();
        ok &= all_at_least(&e, 3.5);
        parts.push(format!("{name} defects {:.2e} -> {:.2e} -> {:.2e}", e[0], e[1], e[2]));
    }
    let g = square(101, (0.0, 1.0), (0.0, 1.0));
    let s = PolarizedFamily::standard().exact_state(&g).unwrap();
    let rep = action_stationarity_check(&s, &PerturbationBank::standard(&g)).unwrap();
    let mult = rep.max_multiplier_error();
    ok &= !rep.multiplier.is_empty() && mult <= 1e-8;
    check(ok, format!("{}; multiplier relative error {mult:.1e}", parts.join("; ")))
}

fn criterion_9() -> Outcome {
    let fam = PolarizedFamily {
        f: Quadratic::new(1.0, 0.0, -1.0),
        g: Quadratic::new(0.0, -1.0, 0.0),
        gauge: MGauge::Quadrature,
    };
    let g = square(91, (0.0, 0.9), (0.0, 0.9));
    let r = solve(Polarization::Plane, &fam.boundary_data(&g).unwrap(), &g);
    let Some(loc) = r.singular_location else {
        return Err(format!("status {:?} without a location", r.status));
    };
    let mut filled = 0;
    let mut finite = true;
    for i in 0..g.n_theta() {
        for j in 0..g.n_v() {
            if r.is_filled(0, i, j) {
                filled += 1;
                finite &= r.state.slice(0).at(i, j).iter().all(|x| x.is_finite());
            }
        }
    }
    let gap = 1.0 - loc.theta * loc.theta - loc.v;
    check(
        r.status == SolveStatus::Singular && finite && filled > 0,
        format!(
            "status {:?} at (theta, v) = ({:.3}, {:.3}), f + g there {gap:.3}; {filled} filled cells, all finite: {finite}",
            r.status, loc.theta, loc.v
        ),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/minkowski_pulse.toml");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let st = Command::new(env!("CARGO_BIN_EXE_cpwave"))
            .args(["jump", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
            .status()
            .unwrap();
        (st.code(), out)
    };
    let (ca, a) = run("a");
    let (cb, b) = run("b");
    if ca != Some(0) || cb != Some(0) {
        return Err(format!("exit codes {ca:?}, {cb:?}"));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let same = names.iter().all(|n| fs::read(a.join(n)).ok() == fs::read(b.join(n)).ok());
    let count_b = fs::read_dir(&b).unwrap().count();
    check(
        same && count_b == names.len(),
        format!("{} artifacts compared byte for byte, identical: {same}", names.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("convergence on the exact polarized family", criterion_1),
        ("theta-constraint preservation", criterion_2),
        ("G transport and log-G jump", criterion_3),
        ("U jump relation", criterion_4),
        ("background constraint values", criterion_5),
        ("reduction equivalences", criterion_6),
        ("Ricci residual oracle", criterion_7),
        ("discrete action stationarity", criterion_8),
        ("singularity handling", criterion_9),
        ("determinism", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {:>2} ({name}): {d} [{secs:.1}s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}): {d} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
