//! JSON run configuration, with field-path error reporting.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::SpaceKind;
use crate::positivity::{DesingMap, PositivityKind, PositivitySet, PressureMethod};
use crate::presets::InitialCondition;
use crate::riemann::FluxModel;
use crate::solver::{BoundaryCondition, DgField, LimiterMode, Mesh1D, NumericalFlux, PointSetKind, Solver, SolverOptions};

fn default_pad() -> f64 {
    1e-12
}

fn default_true() -> bool {
    true
}

fn default_alpha() -> f64 {
    0.7
}

fn default_alpha_z() -> f64 {
    0.8
}

fn default_one() -> f64 {
    1.0
}

fn default_degree() -> usize {
    2
}

fn default_retries() -> usize {
    10
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub domain: [f64; 2],
    pub cells: usize,
    #[serde(default)]
    pub bc: BoundaryCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub kind: SpaceKind,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self { degree: default_degree(), kind: SpaceKind::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimiterConfig {
    #[serde(default)]
    pub mode: LimiterMode,
    /// Interior weight override; defaults to the optimal interval weight.
    #[serde(default)]
    pub m_bar: Option<f64>,
    #[serde(default = "default_pad")]
    pub eps_rho: f64,
    #[serde(default = "default_pad")]
    pub eps_p: f64,
    #[serde(default)]
    pub u_cap: Option<f64>,
    #[serde(default)]
    pub desing: DesingMap,
    #[serde(default)]
    pub points: PointSetKind,
    #[serde(default)]
    pub pressure_method: PressureMethod,
    #[serde(default = "default_true")]
    pub quick_check: bool,
    /// Scalar models only: enforce `bounds[0] <= u <= bounds[1]` instead of `u >= 0`.
    #[serde(default)]
    pub bounds: Option<[f64; 2]>,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        Self {
            mode: LimiterMode::default(),
            m_bar: None,
            eps_rho: default_pad(),
            eps_p: default_pad(),
            u_cap: None,
            desing: DesingMap::default(),
            points: PointSetKind::default(),
            pressure_method: PressureMethod::default(),
            quick_check: true,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_alpha_z")]
    pub alpha_z: f64,
    #[serde(default = "default_one")]
    pub dt_max: f64,
    /// Multiplies the approximate stability limit.
    #[serde(default = "default_one")]
    pub cfl: f64,
    #[serde(default)]
    pub snapshot_interval: Option<f64>,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub prefix: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), prefix: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: FluxModel<f64>,
    pub initial: InitialCondition,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub space: SpaceConfig,
    /// Defaults to `min(degree + 1, 3)`.
    #[serde(default)]
    pub rk_order: Option<usize>,
    #[serde(default)]
    pub flux: NumericalFlux,
    #[serde(default)]
    pub limiter: LimiterConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn problem_name(model: &FluxModel<f64>) -> &'static str {
    match model {
        FluxModel::Advection { .. } => "advection",
        FluxModel::Burgers => "burgers",
        FluxModel::ShallowWater { .. } => "shallow_water",
        FluxModel::Euler { .. } => "euler",
    }
}

impl RunConfig {
    /// Parses, fills defaults, and validates.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            // name the missing field in the path itself
            if let Some(rest) = message.strip_prefix("missing field `") {
                if let Some(field) = rest.split('`').next() {
                    path = if path == "." || path.is_empty() { field.to_string() } else { format!("{path}.{field}") };
                }
            }
            config_error(path, message)
        })?;
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_json(&text)
    }

    /// Expands every default so the result reproduces the run on its own.
    pub fn resolved(mut self) -> Self {
        self.rk_order = Some(self.rk_order.unwrap_or(3.min(self.space.degree + 1)));
        if self.output.prefix.is_none() {
            self.output.prefix = Some(problem_name(&self.problem).to_string());
        }
        self
    }

    pub fn prefix(&self) -> &str {
        self.output.prefix.as_deref().unwrap_or_else(|| problem_name(&self.problem))
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.mesh.domain;
        if !(hi > lo) {
            return Err(config_error("mesh.domain", "domain must satisfy x_lo < x_hi"));
        }
        if self.mesh.cells == 0 {
            return Err(config_error("mesh.cells", "cells must be positive"));
        }
        match self.rk_order {
            Some(1..=3) | None => {}
            Some(r) => return Err(config_error("rk_order", format!("rk_order must be 1, 2 or 3, got {r}"))),
        }
        match self.problem {
            FluxModel::ShallowWater { g } if !(g > 0.0) => return Err(config_error("problem.g", "g must be positive")),
            FluxModel::Euler { gamma } if !(gamma > 1.0) => {
                return Err(config_error("problem.gamma", "gamma must exceed 1"))
            }
            FluxModel::Advection { a } if !a.is_finite() => return Err(config_error("problem.a", "a must be finite")),
            _ => {}
        }
        let t = &self.time;
        if !(t.t_final > 0.0) {
            return Err(config_error("time.t_final", "t_final must be positive"));
        }
        for (name, v) in [("time.alpha", t.alpha), ("time.alpha_z", t.alpha_z)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config_error(name, format!("must lie in (0, 1), got {v}")));
            }
        }
        for (name, v) in [("time.dt_max", t.dt_max), ("time.cfl", t.cfl)] {
            if !(v > 0.0) {
                return Err(config_error(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(s) = t.snapshot_interval {
            if !(s > 0.0) {
                return Err(config_error("time.snapshot_interval", "must be positive"));
            }
        }
        let l = &self.limiter;
        for (name, v) in [("limiter.eps_rho", l.eps_rho), ("limiter.eps_p", l.eps_p)] {
            if !(v >= 0.0) {
                return Err(config_error(name, format!("pads must be nonnegative, got {v}")));
            }
        }
        if let Some(m) = l.m_bar {
            if !(m >= 1.0) {
                return Err(config_error("limiter.m_bar", format!("interior weight must be at least 1, got {m}")));
            }
        }
        if let Some(c) = l.u_cap {
            if !(c > 0.0) {
                return Err(config_error("limiter.u_cap", "u_cap must be positive"));
            }
        }
        if let Some([a, b]) = l.bounds {
            if self.problem.nvars() != 1 {
                return Err(config_error("limiter.bounds", "bounds apply to scalar problems only"));
            }
            if !(b - a > 2.0 * l.eps_rho) {
                return Err(config_error("limiter.bounds", "need bounds[1] - bounds[0] > 2 eps_rho"));
            }
        }
        self.initial.validate(&self.problem).map_err(|(sub, msg)| {
            config_error(if sub.is_empty() { "initial".to_string() } else { format!("initial.{sub}") }, msg)
        })
    }

    pub fn positivity_set(&self) -> PositivitySet<f64> {
        let mut set = PositivitySet::for_model(&self.problem);
        if let Some([u_min, u_max]) = self.limiter.bounds {
            set.kind = PositivityKind::ScalarBounds { u_min, u_max };
        }
        set.eps_rho = self.limiter.eps_rho;
        set.eps_p = self.limiter.eps_p;
        set.pressure_method = self.limiter.pressure_method;
        set
    }

    pub fn solver_options(&self, threads: usize) -> SolverOptions<f64> {
        let l = &self.limiter;
        let t = &self.time;
        let mut o = SolverOptions::new(self.space.degree);
        o.rk_order = self.rk_order.unwrap_or(3.min(self.space.degree + 1));
        o.flux = self.flux;
        o.limiter = l.mode;
        o.points = l.points;
        o.m_bar = l.m_bar;
        o.eps_rho = l.eps_rho;
        o.eps_p = l.eps_p;
        o.u_cap = l.u_cap;
        o.desing = l.desing;
        o.pressure_method = l.pressure_method;
        o.quick_check = l.quick_check;
        o.alpha = t.alpha;
        o.alpha_z = t.alpha_z;
        o.dt_max = t.dt_max;
        o.cfl = t.cfl;
        o.max_retries = t.max_retries;
        o.threads = threads.max(1);
        o
    }

    /// The solver and the projected initial field.
    pub fn build(&self, threads: usize) -> Result<(Solver<f64>, DgField<f64>)> {
        let [lo, hi] = self.mesh.domain;
        let mesh = Mesh1D::new(lo, hi, self.mesh.cells, self.mesh.bc)?;
        let solver = Solver::new(mesh, self.problem, self.positivity_set(), self.solver_options(threads))?;
        let field = solver.project(|x| self.initial.state(&self.problem, x));
        Ok((solver, field))
    }

    /// Snapshot times: 0, every interval, and the final time.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let tf = self.time.t_final;
        let mut out = vec![0.0];
        if let Some(dt) = self.time.snapshot_interval {
            let n = (tf / dt).floor() as usize;
            for i in 1..=n {
                let s = dt * i as f64;
                if s < tf * (1.0 - 1e-12) {
                    out.push(s);
                }
            }
        }
        out.push(tf);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "problem": {"kind": "advection", "a": 1.0},
        "initial": {"type": "sine", "mean": 1.0, "amplitude": 0.5},
        "mesh": {"domain": [0.0, 1.0], "cells": 20},
        "time": {"t_final": 0.1}
    }"#;

    #[test]
    fn defaults_are_expanded() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.rk_order, Some(3));
        assert_eq!(c.space.degree, 2);
        assert_eq!(c.limiter.mode, LimiterMode::Both);
        assert_eq!(c.time.alpha, 0.7);
        assert_eq!(c.time.alpha_z, 0.8);
        assert_eq!(c.limiter.eps_rho, 1e-12);
        assert_eq!(c.prefix(), "advection");
        let round = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&round).unwrap(), c);
    }

    #[test]
    fn euler_gamma_defaults() {
        let text = MINIMAL.replace(r#"{"kind": "advection", "a": 1.0}"#, r#"{"kind": "euler"}"#).replace(
            r#"{"type": "sine", "mean": 1.0, "amplitude": 0.5}"#,
            r#"{"type": "sod"}"#,
        );
        let c = RunConfig::from_json(&text).unwrap();
        assert_eq!(c.problem, FluxModel::Euler { gamma: 1.4 });
    }

    #[test]
    fn errors_name_field_paths() {
        let missing = MINIMAL.replace(r#", "cells": 20"#, "");
        match RunConfig::from_json(&missing).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "mesh.cells"),
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace(r#""t_final": 0.1"#, r#""t_final": 0.1, "alpha": 1.5"#);
        match RunConfig::from_json(&bad).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "time.alpha"),
            e => panic!("{e}"),
        }
        let wrong_type = MINIMAL.replace(r#""cells": 20"#, r#""cells": "many""#);
        match RunConfig::from_json(&wrong_type).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "mesh.cells"),
            e => panic!("{e}"),
        }
        let bad_enum = MINIMAL.replace(r#""cells": 20"#, r#""cells": 20, "bc": "reflective""#);
        match RunConfig::from_json(&bad_enum).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "mesh.bc"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn snapshot_schedule() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.time.snapshot_interval = Some(0.025);
        assert_eq!(c.snapshot_times().len(), 5);
        c.time.snapshot_interval = None;
        assert_eq!(c.snapshot_times(), vec![0.0, 0.1]);
    }
}
