//! Scenario configuration.
//!
//! A scenario is a TOML file (or a `manifest.json` written by an earlier run,
//! whose `config` entry is read back). Keys:
//!
//! ```toml
//! system = "plane"            # or "general"
//!
//! [grid]
//! theta = [0.0, 1.0]
//! v = [1.0, 2.0]
//! n_theta = 101
//! n_v = 101
//! slices = [{ y = 1.5707963267948966, z = 0.0 }]
//!
//! [boundary.background]       # exactly one of background, table, exact_polarized
//! kind = "minkowski"
//! direction = "outgoing"
//!
//! [[pulse.V]]
//! amplitude = 0.5
//! center = 0.5
//! width = 0.12
//! shape = "gaussian"          # or "compact-bump"
//!
//! [output]
//! dir = "out"
//! reports = ["solution", "constraints"]
//!
//! [tolerances]
//! fixed_point_tol = 1e-12
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use cpwave_core::exact::{MGauge, PolarizedFamily, Quadratic};
use cpwave_core::{BackgroundSpec, Polarization, PulseSet, Slice, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: Polarization,
    pub grid: GridConfig,
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub pulse: PulseSet,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub theta: [f64; 2],
    pub v: [f64; 2],
    pub n_theta: usize,
    pub n_v: usize,
    #[serde(default = "default_slices")]
    pub slices: Vec<Slice>,
}

fn default_slices() -> Vec<Slice> {
    vec![Slice::equator()]
}

/// Source of the data on `theta = theta_min` (and, for the exact family,
/// on `v = v_min` too).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<BackgroundSpec>,
    /// CSV with header `v,M,U,V,W` on uniformly spaced `v`; used for every
    /// slice and interpolated with cubics onto the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_polarized: Option<ExactConfig>,
}

/// `U = -log(f + g)` with quadratic `f(theta)` and `g(v)`; coefficients are
/// `[c0, c1, c2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub f: [f64; 3],
    pub g: [f64; 3],
    #[serde(default)]
    pub gauge: GaugeChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeChoice {
    #[default]
    Quadrature,
    Constrained,
}

impl ExactConfig {
    pub fn family(&self) -> PolarizedFamily {
        let q = |c: [f64; 3]| Quadratic::new(c[0], c[1], c[2]);
        let gauge = match self.gauge {
            GaugeChoice::Quadrature => MGauge::Quadrature,
            GaugeChoice::Constrained => MGauge::Constrained,
        };
        PolarizedFamily { f: q(self.f), g: q(self.g), gauge }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Report {
    Solution,
    Constraints,
    Jump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Tables written by `solve`.
    #[serde(default = "default_reports")]
    pub reports: Vec<Report>,
}

fn default_reports() -> Vec<Report> {
    vec![Report::Solution, Report::Constraints]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, reports: default_reports() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub fixed_point_tol: f64,
    pub max_iterations: usize,
    /// `exp(-U)` below this is a focusing singularity (solver and initial line).
    pub singular_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SolverConfig::default();
        Tolerances {
            fixed_point_tol: s.fixed_point_tol,
            max_iterations: s.max_iterations,
            singular_threshold: s.singular_threshold,
        }
    }
}

impl Tolerances {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            fixed_point_tol: self.fixed_point_tol,
            max_iterations: self.max_iterations,
            singular_threshold: self.singular_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub levels: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { levels: 3 }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config { path: path.to_string(), message: message.into() }
}

impl ScenarioConfig {
    /// Read a TOML scenario or a JSON manifest. A relative table path is
    /// resolved against the directory of `path`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        if let Some(t) = &cfg.boundary.table {
            if t.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.boundary.table = Some(base.join(t));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid("<toml>", e.to_string().trim_end()))
    }

    /// Accepts either a bare config object or a manifest with a `config` key.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| invalid("<json>", e.to_string()))?;
        let inner = match value.get("config") {
            Some(c) if value.get("manifest_version").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| invalid("<json>", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let g = &self.grid;
        for (name, r) in [("grid.theta", g.theta), ("grid.v", g.v)] {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                return Err(invalid(name, format!("need finite min < max, got {r:?}")));
            }
        }
        if g.n_theta < 5 {
            return Err(invalid("grid.n_theta", format!("need at least 5 nodes, got {}", g.n_theta)));
        }
        if g.n_v < 5 {
            return Err(invalid("grid.n_v", format!("need at least 5 nodes, got {}", g.n_v)));
        }
        if g.slices.is_empty() {
            return Err(invalid("grid.slices", "need at least one slice"));
        }
        for (k, s) in g.slices.iter().enumerate() {
            if !(s.y.is_finite() && s.z.is_finite()) {
                return Err(invalid(&format!("grid.slices[{k}]"), "non-finite coordinate"));
            }
        }

        let b = &self.boundary;
        let sources = [b.background.is_some(), b.table.is_some(), b.exact_polarized.is_some()];
        if sources.iter().filter(|&&x| x).count() != 1 {
            return Err(invalid("boundary", "set exactly one of background, table, exact_polarized"));
        }
        if let Some(bg) = &b.background {
            bg.validate().map_err(|e| invalid("boundary.background", e.to_string()))?;
        }
        if let Some(ex) = &b.exact_polarized {
            if ex.f.iter().chain(&ex.g).any(|c| !c.is_finite()) {
                return Err(invalid("boundary.exact_polarized", "non-finite coefficient"));
            }
            if self.pulse != PulseSet::default() {
                return Err(invalid("pulse", "the exact family fixes its own initial line; remove the pulse block"));
            }
        }

        for (name, ps) in [("pulse.M", &self.pulse.m), ("pulse.V", &self.pulse.v), ("pulse.W", &self.pulse.w)] {
            for (k, p) in ps.iter().enumerate() {
                p.validate(g.theta[0], g.theta[1]).map_err(|e| invalid(&format!("{name}[{k}]"), e.to_string()))?;
            }
        }
        if !self.pulse.u_slope.is_finite() {
            return Err(invalid("pulse.u_slope", "not finite"));
        }
        if self.system == Polarization::Plane && !self.pulse.w.is_empty() {
            return Err(invalid("pulse.W", "plane-polarized runs carry no W pulse"));
        }

        let t = &self.tolerances;
        let positive = [
            ("tolerances.fixed_point_tol", t.fixed_point_tol),
            ("tolerances.singular_threshold", t.singular_threshold),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return Err(invalid(name, format!("must be positive, got {x}")));
            }
        }
        if t.max_iterations == 0 {
            return Err(invalid("tolerances.max_iterations", "must be at least 1"));
        }
        if self.convergence.levels < 2 {
            return Err(invalid("convergence.levels", "need at least 2 levels"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
system = "plane"
[grid]
theta = [0.0, 1.0]
v = [1.0, 2.0]
n_theta = 11
n_v = 11
[boundary.background]
kind = "minkowski"
direction = "outgoing"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid.slices, vec![Slice::equator()]);
        assert_eq!(c.tolerances, Tolerances::default());
        assert_eq!(c.output.reports, default_reports());
    }

    #[test]
    fn json_round_trip_through_manifest_shape() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let wrapped = serde_json::json!({ "manifest_version": 1, "config": c });
        let back = ScenarioConfig::from_json(&wrapped.to_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_name_the_offending_key() {
        let two = MINIMAL.to_string() + "[boundary.exact_polarized]\nf = [1.0, 0.0, 1.0]\ng = [0.0, 1.0, 0.0]\n";
        let e = ScenarioConfig::from_toml(&two).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("boundary"), "{e}");

        let small = MINIMAL.replace("n_v = 11", "n_v = 3");
        let e = ScenarioConfig::from_toml(&small).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("grid.n_v"), "{e}");

        let bad_pulse = MINIMAL.to_string()
            + "[[pulse.V]]\namplitude = 0.1\ncenter = 0.95\nwidth = 0.2\nshape = \"compact-bump\"\n";
        let e = ScenarioConfig::from_toml(&bad_pulse).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("pulse.V[0]"), "{e}");

        let unknown = MINIMAL.replace("n_v = 11", "n_v = 11\nspacing = 2");
        let e = ScenarioConfig::from_toml(&unknown).unwrap_err();
        assert!(e.to_string().contains("spacing"), "{e}");
    }
}
