//! Scenario execution and artifact emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cpwave_core::constraints::{constraint_report, jump_report, LogGJump};
use cpwave_core::convergence::{exact_error_study, self_convergence_study, ConvergenceError, ConvergenceStudy};
use cpwave_core::exact::Profile;
use cpwave_core::initial_line::InitialLineError;
use cpwave_core::ricci::{identity_defects, ricci_residuals, RING};
use cpwave_core::solver::{solve_goursat, SolveResult, SolveStatus, StopReason};
use cpwave_core::variational::{action_stationarity_check, PerturbationBank};
use cpwave_core::{
    build_grid, pulse_boundary_data, BoundaryData, CharacteristicGrid, DataError, FieldState, LineSamples,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Report, ScenarioConfig};
use crate::error::CliError;
use crate::output::{ensure_dir, read_csv, read_solution, solution_table, Cell, GridNote, Table, TableEntry};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Solve,
    /// Verify a stored solution in `from`, or solve first when `None`.
    Verify {
        from: Option<PathBuf>,
    },
    Background,
    Convergence,
    Jump,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify { .. } => "verify",
            Command::Background => "background",
            Command::Convergence => "convergence",
            Command::Jump => "jump",
        }
    }
}

/// What a run left on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub tables: Vec<TableEntry>,
    pub manifest: Value,
    /// Set when the run stopped early; artifacts are still written.
    pub stopped: Option<String>,
}

/// Outcome of preparing characteristic data.
enum Prepared {
    Ready(BoundaryData),
    /// The initial line focuses before `theta_max`.
    Focusing {
        slice: usize,
        theta: f64,
    },
}

pub fn grid_of(cfg: &ScenarioConfig) -> Result<CharacteristicGrid, CliError> {
    let g = &cfg.grid;
    build_grid((g.theta[0], g.theta[1]), (g.v[0], g.v[1]), g.n_theta, g.n_v, g.slices.clone())
        .map_err(|e| CliError::Config { path: "grid".into(), message: e.to_string() })
}

fn config_err(path: &str, e: impl ToString) -> CliError {
    CliError::Config { path: path.to_string(), message: e.to_string() }
}

/// Boundary lines on `theta = theta_min` from a tabulated file.
fn table_lines(path: &Path, grid: &CharacteristicGrid) -> Result<Vec<LineSamples>, CliError> {
    let (header, rows) = read_csv(path)?;
    if header != ["v", "M", "U", "V", "W"] {
        return Err(config_err("boundary.table", format!("{}: expected header v,M,U,V,W", path.display())));
    }
    if rows.len() < 4 {
        return Err(config_err("boundary.table", "need at least 4 rows"));
    }
    let v0 = rows[0][0];
    let dv = (rows[rows.len() - 1][0] - v0) / (rows.len() - 1) as f64;
    let uniform = rows.iter().enumerate().all(|(k, r)| (r[0] - (v0 + k as f64 * dv)).abs() <= 1e-9 * dv.abs().max(1.0));
    if !(dv > 0.0) || !uniform {
        return Err(config_err("boundary.table", "v column must be increasing and uniformly spaced"));
    }
    let (lo, hi) = (grid.v().min(), grid.v().max());
    let last = rows[rows.len() - 1][0];
    if lo < v0 - 1e-12 || hi > last + 1e-12 {
        return Err(config_err("boundary.table", format!("table covers v in [{v0}, {last}], grid needs [{lo}, {hi}]")));
    }
    let mut profiles = Vec::with_capacity(4);
    for c in 1..5 {
        let values = rows.iter().map(|r| r[c]).collect();
        profiles.push(Profile::sampled(v0, dv, values).map_err(|e| config_err("boundary.table", e))?);
    }
    let vs = grid.v().nodes();
    let line = LineSamples::from_fn(&vs, |v| {
        [profiles[0].eval(v), profiles[1].eval(v), profiles[2].eval(v), profiles[3].eval(v)]
    });
    Ok(vec![line; grid.slices().len()])
}

fn boundary_lines(cfg: &ScenarioConfig, grid: &CharacteristicGrid) -> Result<Vec<LineSamples>, CliError> {
    if let Some(bg) = &cfg.boundary.background {
        let vs = grid.v().nodes();
        grid.slices()
            .iter()
            .enumerate()
            .map(|(k, s)| {
                bg.boundary_line(&vs, *s).map_err(|e| config_err(&format!("boundary.background (slice {k})"), e))
            })
            .collect()
    } else if let Some(path) = &cfg.boundary.table {
        table_lines(path, grid)
    } else {
        let fam = cfg.boundary.exact_polarized.expect("validated").family();
        let d = fam.boundary_data(grid).map_err(|e| config_err("boundary.exact_polarized", e))?;
        Ok((0..grid.slices().len()).map(|k| d.boundary(k).clone()).collect())
    }
}

fn prepare(cfg: &ScenarioConfig, grid: &CharacteristicGrid) -> Result<Prepared, CliError> {
    if let Some(ex) = &cfg.boundary.exact_polarized {
        let d = ex.family().boundary_data(grid).map_err(|e| config_err("boundary.exact_polarized", e))?;
        return Ok(Prepared::Ready(d));
    }
    let lines = boundary_lines(cfg, grid)?;
    match pulse_boundary_data(grid, lines, &cfg.pulse, cfg.tolerances.singular_threshold) {
        Ok(d) => Ok(Prepared::Ready(d)),
        Err(DataError::InitialLine { slice, source: InitialLineError::Focusing { theta } }) => {
            Ok(Prepared::Focusing { slice, theta })
        }
        Err(e) => Err(config_err("pulse", e)),
    }
}

/// Characteristic data for `grid`, as used by the convergence study.
pub fn boundary_data(cfg: &ScenarioConfig, grid: &CharacteristicGrid) -> Result<BoundaryData, CliError> {
    match prepare(cfg, grid)? {
        Prepared::Ready(d) => Ok(d),
        Prepared::Focusing { slice, theta } => {
            Err(CliError::Stopped(format!("initial line of slice {slice} focuses at theta = {theta}")))
        }
    }
}

#[derive(Serialize)]
struct StopJson {
    slice: usize,
    i: usize,
    j: usize,
    theta: f64,
    v: f64,
    reason: &'static str,
}

fn reason_name(r: &StopReason) -> &'static str {
    match r {
        StopReason::Focusing { .. } => "focusing",
        StopReason::NoRealRoot => "no_real_root",
        StopReason::NoConvergence { .. } => "no_convergence",
        StopReason::NonFinite => "non_finite",
        StopReason::WOverflow { .. } => "w_overflow",
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Completed => "completed",
        SolveStatus::Singular => "singular",
        SolveStatus::Diverged => "diverged",
    }
}

/// Collects tables and manifest fields for one run.
struct Emitter {
    dir: PathBuf,
    command: &'static str,
    config: ScenarioConfig,
    tables: Vec<TableEntry>,
    fields: BTreeMap<String, Value>,
    stopped: Option<String>,
}

impl Emitter {
    fn new(dir: &Path, command: &'static str, config: &ScenarioConfig) -> Result<Self, CliError> {
        ensure_dir(dir)?;
        Ok(Emitter {
            dir: dir.to_path_buf(),
            command,
            config: config.clone(),
            tables: Vec::new(),
            fields: BTreeMap::new(),
            stopped: None,
        })
    }

    fn table(&mut self, t: Table) -> Result<(), CliError> {
        let e = t.write(&self.dir)?;
        self.tables.push(e);
        Ok(())
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.fields.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    fn stop(&mut self, status: &str, message: String) {
        self.set("status", status);
        self.stopped = Some(message);
    }

    fn finish(mut self) -> Result<RunArtifacts, CliError> {
        self.fields.entry("status".into()).or_insert_with(|| json!("completed"));
        let mut m = serde_json::Map::new();
        m.insert("manifest_version".into(), json!(MANIFEST_VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert(
            "tool".into(),
            json!({ "name": "cpwave", "version": env!("CARGO_PKG_VERSION"), "core_version": cpwave_core::VERSION }),
        );
        m.insert("config".into(), serde_json::to_value(&self.config).map_err(|e| CliError::Numerical(e.to_string()))?);
        m.insert("tables".into(), serde_json::to_value(&self.tables).map_err(|e| CliError::Numerical(e.to_string()))?);
        for (k, v) in std::mem::take(&mut self.fields) {
            m.insert(k, v);
        }
        let manifest = Value::Object(m);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numerical(e.to_string()))? + "\n";
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::io(path, e))?;
        Ok(RunArtifacts { dir: self.dir, tables: self.tables, manifest, stopped: self.stopped })
    }
}

/// Solve and record status; `None` if the data could not be prepared.
fn solve_into(
    em: &mut Emitter,
    cfg: &ScenarioConfig,
    grid: &CharacteristicGrid,
) -> Result<Option<(BoundaryData, SolveResult)>, CliError> {
    let data = match prepare(cfg, grid)? {
        Prepared::Ready(d) => d,
        Prepared::Focusing { slice, theta } => {
            em.set("initial_line_focusing", json!({ "slice": slice, "theta": theta }));
            em.stop("singular", format!("initial line of slice {slice} focuses at theta = {theta}"));
            return Ok(None);
        }
    };
    let r = solve_goursat(cfg.system, &data, grid, &cfg.tolerances.solver())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    em.set("status", status_name(r.status));
    em.set("min_exp_neg_u", r.min_exp_neg_u);
    em.set("iterations", json!({ "max_iterations": r.stats.max_iterations, "max_residual": r.stats.max_residual }));
    let stop = r.singular_location.map(|s| StopJson {
        slice: s.slice,
        i: s.i,
        j: s.j,
        theta: s.theta,
        v: s.v,
        reason: reason_name(&s.reason),
    });
    em.set("stop", &stop);
    if let Some(s) = &stop {
        em.stop(status_name(r.status), format!("{} at theta = {}, v = {} (slice {})", s.reason, s.theta, s.v, s.slice));
    }
    Ok(Some((data, r)))
}

fn emit_solution(em: &mut Emitter, grid: &CharacteristicGrid, r: &SolveResult) -> Result<(), CliError> {
    for (k, f) in r.state.slices().iter().enumerate() {
        em.table(solution_table(grid, k, f, |i, j| r.is_filled(k, i, j)))?;
    }
    Ok(())
}

fn emit_constraints(em: &mut Emitter, state: &FieldState) -> Result<(), CliError> {
    let grid = state.grid();
    let reports = constraint_report(state).map_err(|e| CliError::Numerical(e.to_string()))?;
    let (th, vs) = (grid.theta().nodes(), grid.v().nodes());
    let mut norms = Vec::new();
    for (k, rep) in reports.iter().enumerate() {
        let cols = vec!["theta", "v", "theta_residual", "G", "transport_defect"];
        let mut t = Table::new(format!("constraints_slice_{k}.csv"), GridNote::new(grid, Some(k)), cols);
        let (rt, rv) = rep.theta_residual.dim();
        for (i, &theta) in th.iter().enumerate() {
            for (j, &v) in vs.iter().enumerate() {
                let res = (i >= 1 && i - 1 < rt && j < rv).then(|| rep.theta_residual[[i - 1, j]]);
                let defect = rep.transport_defect.as_ref().and_then(|d| {
                    let (dt, dv) = d.dim();
                    (i >= 1 && j >= 1 && i - 1 < dt && j - 1 < dv).then(|| d[[i - 1, j - 1]])
                });
                t.push(vec![theta.into(), v.into(), res.into(), rep.g[[i, j]].into(), defect.into()]);
            }
        }
        em.table(t)?;
        norms.push(json!({
            "slice": k,
            "max_theta_residual": rep.max_theta_residual(),
            "initial_line_theta_residual": rep.residual_norms.first().map(|n| n.linf),
            "max_transport_defect": rep.max_transport_defect(),
        }));
    }
    em.set("constraints", norms);
    Ok(())
}

fn emit_jump(em: &mut Emitter, data: &BoundaryData, r: &SolveResult) -> Result<(), CliError> {
    let grid = r.state.grid();
    let reports = jump_report(r, data).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut summary = Vec::new();
    for (k, rep) in reports.iter().enumerate() {
        let cols = vec![
            "v",
            "M_plus",
            "U_plus",
            "V_plus",
            "W_plus",
            "G_minus",
            "G_plus",
            "u_jump_defect",
            "log_g_kind",
            "log_g_value",
        ];
        let mut t = Table::new(format!("jump_slice_{k}.csv"), GridNote::new(grid, Some(k)), cols);
        for (n, &v) in rep.v.iter().enumerate() {
            let p = rep.plus_line.at(n);
            let (kind, value) = match rep.log_g[n] {
                LogGJump::Defect(d) => ("defect", d),
                LogGJump::ConstraintPreserving { g_plus } => ("constraint_preserving", g_plus),
                LogGJump::SignChange { g_plus, .. } => ("sign_change", g_plus),
            };
            t.push(vec![
                v.into(),
                p[0].into(),
                p[1].into(),
                p[2].into(),
                p[3].into(),
                rep.g_minus[n].into(),
                rep.g_plus[n].into(),
                rep.u_jump_defect[n].into(),
                Cell::Text(kind),
                value.into(),
            ]);
        }
        em.table(t)?;
        let jumps = rep.u_jump(&data.boundary(k).u);
        let (lo, hi) = jumps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let worst_log_g = rep.log_g_defects().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        summary.push(json!({
            "slice": k,
            "u_jump_spread": hi - lo,
            "max_log_g_defect": worst_log_g,
            "constraint_preserving": rep.constraint_preserving(),
        }));
    }
    em.set("jump", summary);
    Ok(())
}

fn emit_verification(em: &mut Emitter, state: &FieldState) -> Result<(), CliError> {
    let num = |e: &dyn std::fmt::Display| CliError::Numerical(e.to_string());
    emit_constraints(em, state)?;
    let grid = state.grid();
    let ricci = ricci_residuals(state).map_err(|e| num(&e))?;
    let (th, vs) = (grid.theta().nodes(), grid.v().nodes());
    for (k, s) in ricci.slices.iter().enumerate() {
        let cols = vec!["theta", "v", "R00", "R01", "R22", "R23", "R33"];
        let mut t = Table::new(format!("ricci_slice_{k}.csv"), GridNote::new(grid, Some(k)), cols);
        for ((i, j), &r00) in s.r00.indexed_iter() {
            t.push(vec![
                th[i + RING].into(),
                vs[j + RING].into(),
                r00.into(),
                s.r01[[i, j]].into(),
                s.r_ab[0][0][[i, j]].into(),
                s.r_ab[0][1][[i, j]].into(),
                s.r_ab[1][1][[i, j]].into(),
            ]);
        }
        em.table(t)?;
    }
    let norms: Vec<Value> = ricci.norms.iter().map(|n| json!({ "r00": n.r00, "r01": n.r01, "r_ab": n.r_ab })).collect();
    em.set("ricci", norms);
    let id = identity_defects(state).map_err(|e| num(&e))?;
    em.set("ricci_identity_defects", json!({ "r00": id.r00, "r01": id.r01, "r_ab": id.r_ab }));

    let rep = action_stationarity_check(state, &PerturbationBank::standard(grid)).map_err(|e| num(&e))?;
    em.set(
        "variational",
        json!({
            "action": rep.action_value,
            "max_stationarity_defect": rep.max_defect(),
            "max_multiplier_relative_error": rep.max_multiplier_error(),
            "lambda_derivative_norm": rep.lambda_derivative_norm,
        }),
    );
    Ok(())
}

fn emit_background(em: &mut Emitter, cfg: &ScenarioConfig, grid: &CharacteristicGrid) -> Result<(), CliError> {
    let vs = grid.v().nodes();
    let cols = vec!["v", "M", "U", "V", "W", "r", "t"];
    if let Some(bg) = &cfg.boundary.background {
        for (k, s) in grid.slices().iter().enumerate() {
            let pts = bg.sample(&vs, *s).map_err(|e| config_err("boundary.background", e))?;
            let mut t = Table::new(format!("boundary_slice_{k}.csv"), GridNote::new(grid, Some(k)), cols.clone());
            for (&v, p) in vs.iter().zip(&pts) {
                t.push(vec![v.into(), p.m.into(), p.u.into(), p.v.into(), p.w.into(), p.r.into(), p.t.into()]);
            }
            em.table(t)?;
        }
    } else {
        for (k, line) in boundary_lines(cfg, grid)?.iter().enumerate() {
            let mut t = Table::new(format!("boundary_slice_{k}.csv"), GridNote::new(grid, Some(k)), cols.clone());
            for (n, &v) in vs.iter().enumerate() {
                let p = line.at(n);
                t.push(vec![v.into(), p[0].into(), p[1].into(), p[2].into(), p[3].into(), Cell::Empty, Cell::Empty]);
            }
            em.table(t)?;
        }
    }
    Ok(())
}

fn convergence_study(cfg: &ScenarioConfig, grid: &CharacteristicGrid) -> Result<ConvergenceStudy, ConvergenceError> {
    let solver = cfg.tolerances.solver();
    let levels = cfg.convergence.levels;
    match &cfg.boundary.exact_polarized {
        Some(ex) => {
            let fam = ex.family();
            exact_error_study(cfg.system, grid, levels, &solver, |g| fam.boundary_data(g), |g| fam.exact_state(g))
        }
        None => self_convergence_study(cfg.system, grid, levels, &solver, |g| boundary_data(cfg, g)),
    }
}

fn emit_convergence(em: &mut Emitter, cfg: &ScenarioConfig, grid: &CharacteristicGrid) -> Result<(), CliError> {
    let study = match convergence_study(cfg, grid) {
        Ok(s) => s,
        Err(ConvergenceError::NotCompleted { level, status }) => {
            em.stop(status_name(status), format!("refinement level {level} stopped: {}", status_name(status)));
            return Ok(());
        }
        Err(ConvergenceError::Data { level, message }) if message.contains("focuses") => {
            em.stop("singular", format!("refinement level {level}: {message}"));
            return Ok(());
        }
        Err(e) => return Err(CliError::Numerical(e.to_string())),
    };
    let cols =
        vec!["level", "n_theta", "n_v", "err_M", "err_U", "err_V", "err_W", "order_M", "order_U", "order_V", "order_W"];
    let mut t = Table::new("convergence.csv", GridNote::new(grid, None), cols);
    for (k, l) in study.levels.iter().enumerate() {
        let mut row = vec![Cell::Int(k), Cell::Int(l.n_theta), Cell::Int(l.n_v)];
        row.extend(l.linf.iter().map(|&e| Cell::Num(e)));
        let orders = k.checked_sub(1).map(|p| study.orders[p]);
        row.extend((0..4).map(|f| Cell::from(orders.and_then(|o| o[f]))));
        t.push(row);
    }
    em.table(t)?;
    em.set("convergence", json!({ "kind": study.kind, "levels": study.levels, "orders": study.orders }));
    Ok(())
}

/// Run `command` for `cfg`, writing everything to `out`.
pub fn execute(command: &Command, cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    cfg.validate()?;
    let grid = grid_of(cfg)?;
    let mut em = Emitter::new(out, command.name(), cfg)?;
    match command {
        Command::Solve | Command::Jump => {
            if let Some((data, r)) = solve_into(&mut em, cfg, &grid)? {
                let wants = |rep: Report| cfg.output.reports.contains(&rep);
                if *command == Command::Jump || wants(Report::Solution) || r.status != SolveStatus::Completed {
                    emit_solution(&mut em, &grid, &r)?;
                }
                if r.status == SolveStatus::Completed {
                    if *command == Command::Solve && wants(Report::Constraints) {
                        emit_constraints(&mut em, &r.state)?;
                    }
                    if *command == Command::Jump || wants(Report::Jump) {
                        emit_jump(&mut em, &data, &r)?;
                    }
                }
            }
        }
        Command::Verify { from } => match from {
            Some(dir) => {
                let state = read_solution(dir, &grid, cfg.system)?;
                em.set("source", dir.display().to_string());
                emit_verification(&mut em, &state)?;
            }
            None => {
                if let Some((_, r)) = solve_into(&mut em, cfg, &grid)? {
                    emit_solution(&mut em, &grid, &r)?;
                    if r.status == SolveStatus::Completed {
                        emit_verification(&mut em, &r.state)?;
                    }
                }
            }
        },
        Command::Background => emit_background(&mut em, cfg, &grid)?,
        Command::Convergence => emit_convergence(&mut em, cfg, &grid)?,
    }
    em.finish()
}
