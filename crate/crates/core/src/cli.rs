//! Command implementations behind the `posflow` binary.
//!
//! Snapshot CSV columns: `x_center`, the cell average of each conserved
//! variable, `min_<var>` (minimum over the cell's positivity points) for each
//! variable, and `theta` (smallest damping coefficient of the last step, empty
//! when limiting is off).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::convergence::{study, to_csv, ConvergenceProblem, StudyOptions};
use crate::error::Error;
use crate::poly::SpaceKind;
use crate::solver::{DgField, RunLog, Solver, StepDiagnostics};
use crate::verify::run_verify;
use crate::weights::{format_ratio, weight_table, WeightBracket, WeightTarget};

pub const OUTPUT_DIR_ENV: &str = "POSFLOW_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidArgument(_) | Error::Unsupported(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Per-step diagnostics as parallel arrays.
#[derive(Debug, Default, Serialize)]
pub struct StepArrays {
    pub time: Vec<f64>,
    pub dt: Vec<f64>,
    pub dt_stable: Vec<f64>,
    pub dt_zero: Vec<Option<f64>>,
    pub dt_pos: Vec<f64>,
    pub retries: Vec<usize>,
    pub theta_min: Vec<f64>,
    pub triggered: Vec<usize>,
    pub quick_hit_rate: Vec<f64>,
    pub mass: Vec<Vec<f64>>,
    pub min_average: Vec<Vec<f64>>,
}

impl StepArrays {
    fn from_steps(steps: &[StepDiagnostics]) -> Self {
        let mut a = Self::default();
        for s in steps {
            a.time.push(s.time);
            a.dt.push(s.dt);
            a.dt_stable.push(s.dt_stable);
            a.dt_zero.push(s.dt_zero);
            a.dt_pos.push(s.dt_pos);
            a.retries.push(s.retries);
            a.theta_min.push(s.theta_min.iter().copied().fold(1.0, f64::min));
            a.triggered.push(s.triggered);
            a.quick_hit_rate.push(s.quick_hit_rate);
            a.mass.push(s.mass.clone());
            a.min_average.push(s.min_average.clone());
        }
        a
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub m_bar: f64,
    pub variables: Vec<String>,
    pub functionals: Vec<String>,
    /// Minimum over the initial field and all steps of each positivity functional at the averages.
    pub min_average: Vec<f64>,
    /// Minimum pressure at the averages (gas dynamics only).
    pub min_pressure: Option<f64>,
    /// Largest change of each total from its initial value (boundary fluxes included).
    pub max_mass_change: Vec<f64>,
    /// The same relative to the initial total; `None` when that total is zero.
    pub max_relative_mass_drift: Vec<Option<f64>>,
    pub total_retries: usize,
    pub steps_with_limiting: usize,
    /// Every step satisfied `dt <= dt_stable` and `dt <= alpha_z dt_zero`.
    pub dt_checks_passed: bool,
    /// Why an unlimited run stopped early.
    pub stopped: Option<String>,
    pub snapshots: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub config: RunConfig,
    pub summary: RunSummary,
    pub steps: StepArrays,
}

fn snapshot_csv(solver: &Solver<f64>, field: &DgField<f64>, theta: Option<&[f64]>) -> String {
    let names = solver.model.variable_names();
    let mut s = String::from("x_center");
    for n in names {
        let _ = write!(s, ",{n}");
    }
    for n in names {
        let _ = write!(s, ",min_{n}");
    }
    s.push_str(",theta\n");
    let minima = solver.point_minima(field);
    for i in 0..field.cells() {
        let bar = field.average(i);
        let _ = write!(s, "{}", solver.mesh.center(i));
        for v in 0..field.nvars {
            let _ = write!(s, ",{}", bar[v]);
        }
        for v in 0..field.nvars {
            let _ = write!(s, ",{}", minima[i][v]);
        }
        match theta {
            Some(t) => {
                let _ = writeln!(s, ",{}", t[i]);
            }
            None => s.push_str(",\n"),
        }
    }
    s
}

/// Output directory: the environment override if set, else the config's.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => cfg.output.dir.clone(),
    }
}

pub fn cmd_run(config: &Path, threads: usize) -> Result<Diagnostics, CliError> {
    let cfg = RunConfig::from_path(config)?;
    let (solver, mut field) = cfg.build(threads)?;
    let dir = output_dir(&cfg);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let prefix = cfg.prefix().to_string();
    let mut written = Vec::new();
    let mut write_error = None;
    let initial_minima: Vec<f64> = solver.average_minima(&field).iter().map(|m| m.1).collect();
    let m0 = field.mass(solver.mesh.dx());
    let log: RunLog = solver.run(&mut field, cfg.time.t_final, &cfg.snapshot_times(), |f, theta| {
        let name = format!("{prefix}_t{:.3}.csv", f.time);
        let path = dir.join(&name);
        if let Err(e) = fs::write(&path, snapshot_csv(&solver, f, theta)) {
            write_error = Some(io_err(&path, e));
            return Err(Error::Io(path.display().to_string()));
        }
        written.push(name);
        Ok(())
    })
    .map_err(|e| write_error.take().unwrap_or_else(|| e.into()))?;

    let labels: Vec<String> = solver.functional_labels().iter().map(|s| s.to_string()).collect();
    let mut min_average = initial_minima;
    for s in &log.steps {
        for (m, v) in min_average.iter_mut().zip(&s.min_average) {
            *m = m.min(*v);
        }
    }
    let min_pressure = labels.iter().position(|l| l == "p").map(|i| min_average[i]);
    let mut change = vec![0.0f64; m0.len()];
    for s in &log.steps {
        for ((d, m), a) in change.iter_mut().zip(&s.mass).zip(&m0) {
            *d = d.max((m - a).abs());
        }
    }
    let drift = change.iter().zip(&m0).map(|(d, a)| (*a != 0.0).then(|| d / a.abs())).collect();
    let alpha_z = cfg.time.alpha_z;
    let dt_ok = log.steps.iter().all(|s| {
        s.dt <= s.dt_stable * (1.0 + 1e-14) && s.dt_zero.map_or(true, |z| s.dt <= alpha_z * z * (1.0 + 1e-14))
    });
    let summary = RunSummary {
        steps: log.steps.len(),
        final_time: field.time,
        m_bar: solver.m_bar(),
        variables: solver.model.variable_names().iter().map(|s| s.to_string()).collect(),
        functionals: labels,
        min_average,
        min_pressure,
        max_mass_change: change,
        max_relative_mass_drift: drift,
        total_retries: log.steps.iter().map(|s| s.retries).sum(),
        steps_with_limiting: log.steps.iter().filter(|s| s.triggered > 0).count(),
        dt_checks_passed: dt_ok,
        stopped: log.stopped.clone(),
        snapshots: written,
    };
    let diag = Diagnostics { config: cfg, summary, steps: StepArrays::from_steps(&log.steps) };
    let path = dir.join("diagnostics.json");
    let text = serde_json::to_string_pretty(&diag).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    if !dt_ok {
        return Err(CliError::Runtime("time step exceeded dt_stable or alpha_z * dt_zero".into()));
    }
    Ok(diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            other => Err(CliError::Usage(format!("unknown format '{other}', expected text or csv"))),
        }
    }
}

pub fn parse_space(s: &str) -> Result<SpaceKind, CliError> {
    match s {
        "total" | "total_degree" => Ok(SpaceKind::TotalDegree),
        "tensor" | "tensor_product" => Ok(SpaceKind::TensorProduct),
        other => Err(CliError::Usage(format!("unknown space '{other}', expected total or tensor"))),
    }
}

fn bracket_text(b: &WeightBracket) -> String {
    if b.is_exact() {
        format_ratio(b.lower)
    } else if matches!(b.target, WeightTarget::StarRegular(_)) {
        format!("<= {}", format_ratio(b.upper))
    } else {
        format!("[{}, {}]", format_ratio(b.lower), format_ratio(b.upper))
    }
}

pub fn cmd_weights(cell: &str, degree_max: usize, format: TableFormat, space: SpaceKind) -> Result<String, CliError> {
    let target: WeightTarget = cell.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let rows = weight_table(target, degree_max, space)?;
    let mut s = String::new();
    match format {
        TableFormat::Csv => {
            s.push_str("cell,k,lower,upper,provenance\n");
            for b in &rows {
                let _ = writeln!(s, "{},{},{},{},{}", target.name(), b.degree, format_ratio(b.lower), format_ratio(b.upper), b.provenance);
            }
        }
        TableFormat::Text => {
            let _ = writeln!(s, "{:<12} {:>3}  {:<16} {:<22} provenance", "cell", "k", "weight", "decimal");
            for b in &rows {
                let dec = if b.is_exact() {
                    format!("{:.6}", b.lower_f64())
                } else {
                    format!("[{:.6}, {:.6}]", b.lower_f64(), b.upper_f64())
                };
                let _ = writeln!(s, "{:<12} {:>3}  {:<16} {:<22} {}", target.name(), b.degree, bracket_text(b), dec, b.provenance);
            }
        }
    }
    Ok(s)
}

pub fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("{what}: '{t}' is not a nonnegative integer"))))
        .collect()
}

pub fn cmd_convergence(problem: &str, degrees: &[usize], grids: &[usize], opts: &StudyOptions) -> Result<String, CliError> {
    let problem: ConvergenceProblem = problem.parse()?;
    if grids.len() < 2 {
        return Err(CliError::Usage("need at least two grids to fit an order".into()));
    }
    if grids.contains(&0) {
        return Err(CliError::Usage("grids must be positive".into()));
    }
    let rows = study(problem, degrees, grids, opts).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(to_csv(&rows))
}

/// Report text and whether every property held.
pub fn cmd_verify(samples: usize, seed: u64) -> Result<(String, bool), CliError> {
    let r = run_verify(samples, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut text = r.render();
    if let Some(f) = r.first_failure() {
        let _ = writeln!(text, "first failing property: {}/{}", f.suite, f.name);
    }
    Ok((text, r.passed()))
}
