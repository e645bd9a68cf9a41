//! Grid-refinement studies on smooth periodic problems with exact solutions.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::positivity::PositivitySet;
use crate::presets::InitialCondition;
use crate::quadrature::gauss_legendre;
use crate::riemann::FluxModel;
use crate::solver::{BoundaryCondition, LimiterMode, Mesh1D, Solver, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceProblem {
    /// Linear advection over one period of a sine whose minimum is 1e-4, close
    /// enough to zero that the limiter engages on coarse grids.
    Advection,
    /// Density wave carried by uniform flow over one period.
    EulerDensityWave,
}

impl FromStr for ConvergenceProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "advection" => Ok(Self::Advection),
            "euler_density_wave" | "density_wave" => Ok(Self::EulerDensityWave),
            "burgers" | "shallow_water_dam_break" | "euler_sod" | "euler_double_rarefaction" | "euler_shu_osher" => {
                Err(Error::InvalidArgument(format!("{s} is not smooth; convergence needs a smooth problem")))
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown problem {other}; expected advection or euler_density_wave"
            ))),
        }
    }
}

impl ConvergenceProblem {
    pub fn name(self) -> &'static str {
        match self {
            Self::Advection => "advection",
            Self::EulerDensityWave => "euler_density_wave",
        }
    }

    pub fn model(self) -> FluxModel<f64> {
        match self {
            Self::Advection => FluxModel::Advection { a: 1.0 },
            Self::EulerDensityWave => FluxModel::Euler { gamma: 1.4 },
        }
    }

    pub fn initial(self) -> InitialCondition {
        match self {
            Self::Advection => InitialCondition::Sine { mean: 0.5, amplitude: 0.4999, waves: 1.0, clip_below: None },
            Self::EulerDensityWave => InitialCondition::DensityWave {
                rho_mean: 1.0,
                rho_amplitude: 0.5,
                velocity: 1.0,
                pressure: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub t_final: f64,
    /// `dt_max = dt_factor * dx^((k+1)/r)` keeps time error at spatial order.
    pub dt_factor: f64,
    pub threads: usize,
    /// Replaces the problem's default profile (must be smooth).
    pub initial: Option<InitialCondition>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { t_final: 1.0, dt_factor: 0.15, threads: 1, initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub problem: &'static str,
    pub degree: usize,
    pub cells: usize,
    pub limiter: bool,
    pub dx: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// Orders against the next coarser grid of the same series.
    pub order_l1: Option<f64>,
    pub order_l2: Option<f64>,
    pub order_linf: Option<f64>,
    /// Steps in which some cell was damped.
    pub limited_steps: usize,
}

/// Errors in the first conserved variable at time `t_final`, measured with
/// `k+3` Gauss points per cell.
pub fn measure(
    problem: ConvergenceProblem,
    degree: usize,
    cells: usize,
    limiter: bool,
    opts: &StudyOptions,
) -> Result<ErrorRow> {
    let model = problem.model();
    let init = opts.initial.clone().unwrap_or_else(|| problem.initial());
    if !init.is_smooth() {
        return Err(Error::InvalidArgument(format!("preset {} is not smooth", init.name())));
    }
    let mesh = Mesh1D::new(0.0, 1.0, cells, BoundaryCondition::Periodic)?;
    let dx: f64 = mesh.dx();
    let mut so = SolverOptions::new(degree);
    so.rk_order = (degree + 1).min(3);
    so.limiter = if limiter { LimiterMode::Both } else { LimiterMode::Off };
    so.dt_max = opts.dt_factor * dx.powf((degree as f64 + 1.0) / so.rk_order as f64);
    so.threads = opts.threads;
    let solver = Solver::new(mesh, model, PositivitySet::for_model(&model), so)?;
    let mut field = solver.project(|x| init.state(&model, x));
    let log = solver.run(&mut field, opts.t_final, &[], |_, _| Ok(()))?;
    if let Some(why) = log.stopped {
        return Err(Error::InvalidArgument(format!("unlimited run left the positive set: {why}")));
    }
    let rule = gauss_legendre::<f64>(degree + 3)?;
    let (mut l1, mut l2, mut linf) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..cells {
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let xi = p[0];
            let x = solver.mesh.left(i) + dx * xi;
            let e = (solver.eval_at(&field, i, xi)[0] - init.exact(&model, x, field.time, 1.0)?[0]).abs();
            l1 += dx * w * e;
            l2 += dx * w * e * e;
            linf = linf.max(e);
        }
    }
    Ok(ErrorRow {
        problem: problem.name(),
        degree,
        cells,
        limiter,
        dx,
        l1,
        l2: l2.sqrt(),
        linf,
        order_l1: None,
        order_l2: None,
        order_linf: None,
        limited_steps: log.steps.iter().filter(|s| s.triggered > 0).count(),
    })
}

fn order(coarse: f64, fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (coarse / fine).ln() / (h_coarse / h_fine).ln()
}

/// Every degree on every grid, limiting on and off, with fitted orders.
pub fn study(problem: ConvergenceProblem, degrees: &[usize], grids: &[usize], opts: &StudyOptions) -> Result<Vec<ErrorRow>> {
    if grids.is_empty() || degrees.is_empty() {
        return Err(Error::InvalidArgument("need at least one degree and one grid".into()));
    }
    let mut grids = grids.to_vec();
    grids.sort_unstable();
    let mut rows = Vec::new();
    for &k in degrees {
        for limiter in [true, false] {
            let mut prev: Option<ErrorRow> = None;
            for &n in &grids {
                let mut row = measure(problem, k, n, limiter, opts)?;
                if let Some(p) = &prev {
                    row.order_l1 = Some(order(p.l1, row.l1, p.dx, row.dx));
                    row.order_l2 = Some(order(p.l2, row.l2, p.dx, row.dx));
                    row.order_linf = Some(order(p.linf, row.linf, p.dx, row.dx));
                }
                prev = Some(row.clone());
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "problem,degree,cells,limiter,dx,l1,l2,linf,order_l1,order_l2,order_linf,limited_steps";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

pub fn to_csv(rows: &[ErrorRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{},{},{},{}",
            r.problem,
            r.degree,
            r.cells,
            if r.limiter { "on" } else { "off" },
            r.dx,
            r.l1,
            r.l2,
            r.linf,
            opt(r.order_l1),
            opt(r.order_l2),
            opt(r.order_linf),
            r.limited_steps
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_smooth_problems_are_rejected() {
        assert!("burgers".parse::<ConvergenceProblem>().is_err());
        assert!("nope".parse::<ConvergenceProblem>().is_err());
        assert_eq!("advection".parse::<ConvergenceProblem>().unwrap(), ConvergenceProblem::Advection);
        assert!(ConvergenceProblem::Advection.initial().is_smooth());
        assert!(ConvergenceProblem::EulerDensityWave.initial().is_smooth());
    }

    #[test]
    fn order_of_exact_halving() {
        assert!((order(4.0, 1.0, 0.2, 0.1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_constant_is_first_order() {
        let opts = StudyOptions { t_final: 0.25, ..Default::default() };
        let rows = study(ConvergenceProblem::Advection, &[0], &[40, 80], &opts).unwrap();
        let o = rows[1].order_l2.unwrap();
        assert!((o - 1.0).abs() < 0.15, "order {o}");
    }
}
