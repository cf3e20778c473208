//! CSV tables with a leading `# grid ...` line and 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cpwave_core::{CharacteristicGrid, Field, FieldState, Fields, Polarization};
use serde::Serialize;

use crate::error::CliError;

/// Grid declaration carried by every table and echoed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridNote {
    pub theta: [f64; 2],
    pub n_theta: usize,
    pub v: [f64; 2],
    pub n_v: usize,
    pub slice: Option<usize>,
    pub y: Option<f64>,
    pub z: Option<f64>,
}

impl GridNote {
    pub fn new(grid: &CharacteristicGrid, slice: Option<usize>) -> Self {
        let s = slice.map(|k| grid.slices()[k]);
        GridNote {
            theta: [grid.theta().min(), grid.theta().max()],
            n_theta: grid.n_theta(),
            v: [grid.v().min(), grid.v().max()],
            n_v: grid.n_v(),
            slice,
            y: s.map(|s| s.y),
            z: s.map(|s| s.z),
        }
    }

    fn line(&self) -> String {
        let mut s = format!(
            "# grid theta=[{:e},{:e}] n_theta={} v=[{:e},{:e}] n_v={}",
            self.theta[0], self.theta[1], self.n_theta, self.v[0], self.v[1], self.n_v
        );
        if let (Some(k), Some(y), Some(z)) = (self.slice, self.y, self.z) {
            let _ = write!(s, " slice={k} y={y:e} z={z:e}");
        }
        s
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(&'static str),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub grid: GridNote,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// Manifest entry of a written table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEntry {
    pub name: String,
    pub rows: usize,
    /// Rows dropped because a value was not finite.
    pub dropped: usize,
    pub grid: GridNote,
}

impl Table {
    pub fn new(name: impl Into<String>, grid: GridNote, columns: Vec<&'static str>) -> Self {
        Table { name: name.into(), grid, columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Render, skipping rows with a non-finite number.
    pub fn render(&self) -> (String, usize) {
        let mut out = self.grid.line();
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        let mut dropped = 0;
        for row in &self.rows {
            if row.iter().any(|c| matches!(c, Cell::Num(x) if !x.is_finite())) {
                dropped += 1;
                continue;
            }
            for (k, c) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Num(x) => {
                        let x = if *x == 0.0 { 0.0 } else { *x };
                        let _ = write!(out, "{x:.16e}");
                    }
                    Cell::Int(n) => {
                        let _ = write!(out, "{n}");
                    }
                    Cell::Text(t) => out.push_str(t),
                    Cell::Empty => {}
                }
            }
            out.push('\n');
        }
        (out, dropped)
    }

    pub fn write(&self, dir: &Path) -> Result<TableEntry, CliError> {
        let (text, dropped) = self.render();
        let path = dir.join(&self.name);
        fs::write(&path, text).map_err(|e| CliError::io(path, e))?;
        Ok(TableEntry { name: self.name.clone(), rows: self.rows.len() - dropped, dropped, grid: self.grid.clone() })
    }
}

pub const SOLUTION_COLUMNS: [&str; 6] = ["theta", "v", "M", "U", "V", "W"];

pub fn solution_file(slice: usize) -> String {
    format!("solution_slice_{slice}.csv")
}

/// Solution table of one slice; `filled` selects the nodes to emit.
pub fn solution_table(grid: &CharacteristicGrid, k: usize, f: &Fields, filled: impl Fn(usize, usize) -> bool) -> Table {
    let (th, vs) = (grid.theta().nodes(), grid.v().nodes());
    let mut t = Table::new(solution_file(k), GridNote::new(grid, Some(k)), SOLUTION_COLUMNS.to_vec());
    for (i, &theta) in th.iter().enumerate() {
        for (j, &v) in vs.iter().enumerate() {
            if filled(i, j) {
                let p = f.at(i, j);
                t.push(vec![theta.into(), v.into(), p[0].into(), p[1].into(), p[2].into(), p[3].into()]);
            }
        }
    }
    t
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Config { path: format!("{}:{}", path.display(), line), message: message.into() }
}

/// Numeric CSV rows after the header, with `#` lines skipped.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<String> = match lines.next() {
        Some((_, h)) => h.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(parse_err(path, 1, "empty table")),
    };
    let mut rows = Vec::new();
    for (n, l) in lines {
        let row: Result<Vec<f64>, _> = l.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| parse_err(path, n + 1, e.to_string()))?;
        if row.len() != header.len() {
            return Err(parse_err(path, n + 1, format!("expected {} columns, got {}", header.len(), row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Rebuild a full state from stored solution tables.
pub fn read_solution(dir: &Path, grid: &CharacteristicGrid, system: Polarization) -> Result<FieldState, CliError> {
    let (th0, dt) = (grid.theta().min(), grid.d_theta());
    let (v0, dv) = (grid.v().min(), grid.d_v());
    let mut slices = Vec::with_capacity(grid.slices().len());
    for k in 0..grid.slices().len() {
        let path: PathBuf = dir.join(solution_file(k));
        let (header, rows) = read_csv(&path)?;
        if header != SOLUTION_COLUMNS {
            return Err(parse_err(&path, 2, format!("expected header {}", SOLUTION_COLUMNS.join(","))));
        }
        let mut f = Fields::zeros(grid.n_theta(), grid.n_v());
        let mut seen = vec![false; grid.n_theta() * grid.n_v()];
        for row in rows {
            let i = ((row[0] - th0) / dt).round();
            let j = ((row[1] - v0) / dv).round();
            if !(i >= 0.0 && j >= 0.0 && (i as usize) < grid.n_theta() && (j as usize) < grid.n_v()) {
                return Err(parse_err(&path, 0, format!("node ({}, {}) is off the grid", row[0], row[1])));
            }
            let (i, j) = (i as usize, j as usize);
            f.set(i, j, [row[2], row[3], row[4], row[5]]);
            seen[i * grid.n_v() + j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(parse_err(&path, 0, "table does not cover the grid (partial run?)"));
        }
        if system == Polarization::Plane && f.get(Field::W).iter().any(|&w| w != 0.0) {
            return Err(parse_err(&path, 0, "plane-polarized system but W is nonzero"));
        }
        slices.push(f);
    }
    FieldState::new(grid.clone(), system, slices).map_err(|e| CliError::Numerical(e.to_string()))
}
