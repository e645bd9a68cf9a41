//! One-dimensional modal DG solver with outflow positivity limiting.
//!
//! Coefficients are stored `[cell][variable][mode]` in one flat vector. Every
//! stage limits the solution in place, builds interface fluxes from the
//! (possibly desingularized) boundary traces, and returns the modal right-hand
//! side together with the time-step bounds of that stage.

pub mod timestep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{legendre_derivatives, legendre_values, PolySpace};
use crate::positivity::{
    apply_damping, average_state, damping_pressure, desingularize_velocity, quick_check_with_bounds,
    retentional_state, DesingMap, PointTable, PositivityKind, PositivitySet, PressureMethod,
};
use crate::quadrature::{gauss_legendre, point, Point};
use crate::riemann::{FluxModel, State};
use crate::scalar::Scalar;
use crate::weights::{interval_weight, retentional_points};
use crate::geometry::CellKind;

pub use timestep::{affine_time_to_pad, dt_pos_formula, dt_stable_formula, euler_time_to_pad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    #[default]
    Periodic,
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D<T> {
    pub x_lo: T,
    pub x_hi: T,
    pub cells: usize,
    pub bc: BoundaryCondition,
}

impl<T: Scalar> Mesh1D<T> {
    pub fn new(x_lo: T, x_hi: T, cells: usize, bc: BoundaryCondition) -> Result<Self> {
        if cells == 0 || !(x_hi > x_lo) {
            return Err(Error::InvalidArgument(format!(
                "mesh needs cells > 0 and x_hi > x_lo (got {cells} cells on [{x_lo}, {x_hi}])"
            )));
        }
        Ok(Self { x_lo, x_hi, cells, bc })
    }

    pub fn dx(&self) -> T {
        (self.x_hi - self.x_lo) / T::from_usize_lossy(self.cells)
    }

    pub fn left(&self, i: usize) -> T {
        self.x_lo + self.dx() * T::from_usize_lossy(i)
    }

    pub fn center(&self, i: usize) -> T {
        self.left(i) + self.dx() * T::half()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NumericalFlux {
    #[default]
    Hll,
    Llf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LimiterMode {
    Off,
    Pointwise,
    Retentional,
    #[default]
    Both,
}

impl LimiterMode {
    pub fn is_on(self) -> bool {
        self != LimiterMode::Off
    }

    fn uses_points(self) -> bool {
        matches!(self, LimiterMode::Pointwise | LimiterMode::Both)
    }

    fn uses_retentional(self) -> bool {
        matches!(self, LimiterMode::Retentional | LimiterMode::Both)
    }
}

/// Points checked by the point-wise limiter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PointSetKind {
    /// Volume quadrature points, both boundary nodes, and the retentional points.
    #[default]
    Full,
    /// Boundary nodes and retentional points only.
    Minimal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub degree: usize,
    pub rk_order: usize,
    pub flux: NumericalFlux,
    pub limiter: LimiterMode,
    pub points: PointSetKind,
    /// Interior weight; `None` uses the optimal interval weight for the degree.
    pub m_bar: Option<T>,
    pub eps_rho: T,
    pub eps_p: T,
    pub u_cap: Option<T>,
    pub desing: DesingMap,
    pub pressure_method: PressureMethod,
    pub quick_check: bool,
    pub alpha: T,
    pub alpha_z: T,
    pub dt_max: T,
    /// Multiplies the approximate stability limit.
    pub cfl: T,
    pub max_retries: usize,
    pub threads: usize,
}

impl<T: Scalar> SolverOptions<T> {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            rk_order: 3.min(degree + 1),
            flux: NumericalFlux::Hll,
            limiter: LimiterMode::Both,
            points: PointSetKind::Full,
            m_bar: None,
            eps_rho: T::lit(1e-12),
            eps_p: T::lit(1e-12),
            u_cap: None,
            desing: DesingMap::Clip,
            pressure_method: PressureMethod::Secant,
            quick_check: true,
            alpha: T::lit(0.7),
            alpha_z: T::lit(0.8),
            dt_max: T::one(),
            cfl: T::one(),
            max_retries: 10,
            threads: 1,
        }
    }
}

/// Solution coefficients and time.
#[derive(Debug, Clone, PartialEq)]
pub struct DgField<T> {
    pub coeffs: Vec<T>,
    pub time: T,
    pub nvars: usize,
    pub dim: usize,
}

impl<T: Scalar> DgField<T> {
    pub fn cells(&self) -> usize {
        self.coeffs.len() / self.stride()
    }

    pub fn stride(&self) -> usize {
        self.nvars * self.dim
    }

    pub fn cell(&self, i: usize) -> &[T] {
        &self.coeffs[i * self.stride()..(i + 1) * self.stride()]
    }

    pub fn average(&self, i: usize) -> State<T> {
        average_state(self.cell(i), self.nvars, self.dim)
    }

    /// `dx * sum of averages` per variable.
    pub fn mass(&self, dx: T) -> Vec<T> {
        (0..self.nvars)
            .map(|v| {
                let mut acc = T::zero();
                for i in 0..self.cells() {
                    acc += self.cell(i)[v * self.dim];
                }
                acc * dx
            })
            .collect()
    }
}

/// Per-cell limiter outcome of one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellLimit<T> {
    pub theta: T,
    pub triggered: bool,
    pub quick: bool,
    /// Left and right boundary traces used for the fluxes.
    pub traces: [State<T>; 2],
}

/// Everything a stage needs to advance: right-hand side and step bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct StageEval<T> {
    pub rhs: Vec<T>,
    pub limits: Vec<CellLimit<T>>,
    /// Interface fluxes; entry `i` sits at the left face of cell `i`.
    pub fluxes: Vec<State<T>>,
    pub lambda: T,
    pub dt_stable: T,
    /// `alpha` times the time to exhaust the padded content; `None` when unlimited.
    pub dt_zero: Option<T>,
    pub dt_pos: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub time: f64,
    pub dt: f64,
    pub dt_stable: f64,
    pub dt_zero: Option<f64>,
    pub dt_pos: f64,
    pub retries: usize,
    /// Smallest damping coefficient of each RK stage.
    pub theta_min: Vec<f64>,
    /// Cells damped in at least one stage.
    pub triggered: usize,
    /// Fraction of cells the first stage cleared by the modal-bound check.
    pub quick_hit_rate: f64,
    pub mass: Vec<f64>,
    /// Minimum over cells of each positivity functional at the cell averages.
    pub min_average: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub diag: StepDiagnostics,
    /// Smallest damping coefficient of each cell over the stages.
    pub theta: Vec<T>,
}

/// Result of a time loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLog {
    pub steps: Vec<StepDiagnostics>,
    /// Set when an unlimited run stops at its first positivity violation.
    pub stopped: Option<String>,
}

/// Fixed per-degree tables.
#[derive(Debug, Clone)]
struct Tables<T> {
    space: PolySpace<T>,
    quad_points: Vec<T>,
    quad_weights: Vec<T>,
    /// `phi_j(xi_q)` as `[q][j]`.
    quad_values: Vec<Vec<T>>,
    /// `phi_j'(xi_q)` as `[q][j]`.
    quad_derivs: Vec<Vec<T>>,
    left: Vec<T>,
    right: Vec<T>,
    limiter_points: PointTable<T>,
    snapshot_points: PointTable<T>,
    mode_bounds: Vec<T>,
}

impl<T: Scalar> Tables<T> {
    fn new(k: usize, mode: LimiterMode, points: PointSetKind) -> Result<Self> {
        let space = PolySpace::interval(k);
        let gl = gauss_legendre::<T>(k + 1)?;
        let quad_points: Vec<T> = gl.points.iter().map(|p| p[0]).collect();
        let quad_weights = gl.weights.clone();
        let mut quad_values = Vec::new();
        let mut quad_derivs = Vec::new();
        for &x in &quad_points {
            let mut v = vec![T::zero(); k + 1];
            legendre_values(k, x, &mut v);
            quad_values.push(v);
            let mut d = vec![T::zero(); k + 1];
            legendre_derivatives(k, x, &mut d);
            quad_derivs.push(d);
        }
        let mut left = vec![T::zero(); k + 1];
        legendre_values(k, T::zero(), &mut left);
        let mut right = vec![T::zero(); k + 1];
        legendre_values(k, T::one(), &mut right);

        let ends = vec![point(&[T::zero()]), point(&[T::one()])];
        let interior: Vec<Point<T>> = retentional_points::<T>(CellKind::Interval, k)?.points;
        let full: Vec<Point<T>> =
            gl.points.iter().cloned().chain(ends.iter().cloned()).chain(interior.iter().cloned()).collect();
        let chosen: Vec<Point<T>> = match (mode.uses_points(), points) {
            (false, _) => ends.clone(),
            (true, PointSetKind::Full) => full.clone(),
            (true, PointSetKind::Minimal) => ends.iter().cloned().chain(interior.iter().cloned()).collect(),
        };
        let limiter_points = PointTable::new(&space, &chosen);
        let snapshot_points = PointTable::new(&space, &full);
        let mode_bounds = space.mode_bounds();
        Ok(Self {
            space,
            quad_points,
            quad_weights,
            quad_values,
            quad_derivs,
            left,
            right,
            limiter_points,
            snapshot_points,
            mode_bounds,
        })
    }
}

fn eval_modes<T: Scalar>(coeffs: &[T], nvars: usize, phi: &[T]) -> State<T> {
    let dim = phi.len();
    let mut s = State::zero();
    for v in 0..nvars {
        s[v] = coeffs[v * dim..(v + 1) * dim].iter().zip(phi).map(|(a, b)| *a * *b).sum();
    }
    s
}

/// Per-step record of the limiter across RK stages.
struct StageTrack<T> {
    stage_theta: Vec<T>,
    cell_theta: Vec<T>,
    cell_triggered: Vec<bool>,
    dt_zero: Option<T>,
}

impl<T: Scalar> StageTrack<T> {
    fn record(&mut self, e: &StageEval<T>) {
        self.stage_theta.push(e.limits.iter().fold(T::one(), |m, l| m.min(l.theta)));
        for ((t, hit), l) in self.cell_theta.iter_mut().zip(&mut self.cell_triggered).zip(&e.limits) {
            *t = t.min(l.theta);
            *hit |= l.triggered;
        }
        if let Some(z) = e.dt_zero {
            self.dt_zero = Some(self.dt_zero.map_or(z, |m| m.min(z)));
        }
    }
}

struct Stages<T> {
    coeffs: Vec<T>,
    track: StageTrack<T>,
}

pub struct Solver<T> {
    pub mesh: Mesh1D<T>,
    pub model: FluxModel<T>,
    pub set: PositivitySet<T>,
    pub opts: SolverOptions<T>,
    m_bar: T,
    tables: Tables<T>,
    pool: Option<rayon::ThreadPool>,
}

impl<T: Scalar> Solver<T> {
    pub fn new(mesh: Mesh1D<T>, model: FluxModel<T>, set: PositivitySet<T>, opts: SolverOptions<T>) -> Result<Self> {
        if !(1..=3).contains(&opts.rk_order) {
            return Err(Error::InvalidArgument(format!("rk_order must be 1, 2 or 3, got {}", opts.rk_order)));
        }
        for (name, v) in [("alpha", opts.alpha), ("alpha_z", opts.alpha_z)] {
            if !(v > T::zero() && v < T::one()) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(opts.dt_max > T::zero()) {
            return Err(Error::InvalidArgument("dt_max must be positive".into()));
        }
        let m_bar = opts.m_bar.unwrap_or_else(|| T::from_ratio(interval_weight(opts.degree)));
        if !(m_bar >= T::one()) {
            return Err(Error::InvalidArgument(format!("interior weight must be at least 1, got {m_bar}")));
        }
        let tables = Tables::new(opts.degree, opts.limiter, opts.points)?;
        let pool = if opts.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(opts.threads)
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { mesh, model, set, opts, m_bar, tables, pool })
    }

    pub fn m_bar(&self) -> T {
        self.m_bar
    }

    pub fn space(&self) -> &PolySpace<T> {
        &self.tables.space
    }

    pub fn nvars(&self) -> usize {
        self.model.nvars()
    }

    pub fn dim(&self) -> usize {
        self.opts.degree + 1
    }

    /// Projects `init` onto the space. Positivity variables are floored at
    /// their pads point-wise first, so every cell average starts padded.
    pub fn project<F: Fn(T) -> State<T>>(&self, init: F) -> DgField<T> {
        self.project_raw(|x| self.floor_state(init(x)))
    }

    /// L2 projection of `init` without flooring.
    pub fn project_raw<F: Fn(T) -> State<T>>(&self, init: F) -> DgField<T> {
        let (nv, dim) = (self.nvars(), self.dim());
        let dx = self.mesh.dx();
        let sub = 4;
        let gl = gauss_legendre::<T>(self.opts.degree + 3).expect("rule");
        let mut coeffs = vec![T::zero(); self.mesh.cells * nv * dim];
        let mut phi = vec![T::zero(); dim];
        for i in 0..self.mesh.cells {
            let c = &mut coeffs[i * nv * dim..(i + 1) * nv * dim];
            for s in 0..sub {
                for (p, &w) in gl.points.iter().zip(&gl.weights) {
                    let xi = (T::from_usize_lossy(s) + p[0]) / T::from_usize_lossy(sub);
                    let w = w / T::from_usize_lossy(sub);
                    let u = init(self.mesh.left(i) + dx * xi);
                    legendre_values(self.opts.degree, xi, &mut phi);
                    for v in 0..nv {
                        for j in 0..dim {
                            c[v * dim + j] += w * u[v] * phi[j];
                        }
                    }
                }
            }
        }
        DgField { coeffs, time: T::zero(), nvars: nv, dim }
    }

    /// Raises positivity variables to their pads (velocity and pressure kept
    /// for systems; a vacuum gets zero velocity).
    pub fn floor_state(&self, u: State<T>) -> State<T> {
        let (er, ep) = (self.set.eps_rho, self.set.eps_p);
        match (self.set.kind, self.model) {
            (PositivityKind::Scalar, _) => State::scalar(u[0].max(er)),
            (PositivityKind::ScalarBounds { u_min, u_max }, _) => State::scalar(u[0].max(u_min + er).min(u_max - er)),
            (PositivityKind::ShallowWater, _) => {
                let vel = if u[0] > T::zero() { u[1] / u[0] } else { T::zero() };
                let h = u[0].max(er);
                State::shallow_water(h, h * vel)
            }
            (PositivityKind::Euler { gamma }, _) => {
                let vel = if u[0] > T::zero() { u[1] / u[0] } else { T::zero() };
                let p = if u[0] > T::zero() { self.model.pressure(&u) } else { T::zero() };
                let rho = u[0].max(er);
                let p = p.max(ep);
                State::euler(rho, rho * vel, p / (gamma - T::one()) + T::half() * rho * vel * vel)
            }
        }
    }

    fn map_cells<R, F>(&self, data: &mut [T], stride: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, &mut [T]) -> R + Sync + Send,
    {
        match &self.pool {
            None => data.chunks_mut(stride).enumerate().map(|(i, c)| f(i, c)).collect(),
            Some(pool) => pool.install(|| data.par_chunks_mut(stride).enumerate().map(|(i, c)| f(i, c)).collect()),
        }
    }

    fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }

    /// The positivity set with pads lowered to the cell's own average values
    /// when rounding has left them just below the pad.
    fn cell_set(&self, bar: &State<T>) -> Result<PositivitySet<T>> {
        let mut set = self.set;
        for f in set.affine_functionals() {
            let v = f.apply(bar);
            if !(v > T::zero()) {
                return Err(Error::AverageOutsidePositiveSet {
                    cell: usize::MAX,
                    time: f64::NAN,
                    detail: format!("{} average is {v}", f.label),
                });
            }
            set.eps_rho = set.eps_rho.min(v);
        }
        if set.gamma().is_some() {
            let p = self.model.pressure(bar);
            if !(p > T::zero()) {
                return Err(Error::AverageOutsidePositiveSet {
                    cell: usize::MAX,
                    time: f64::NAN,
                    detail: format!("pressure of the average is {p}"),
                });
            }
            set.eps_p = set.eps_p.min(p);
        }
        set.pressure_method = self.opts.pressure_method;
        Ok(set)
    }

    fn desing(&self, s: State<T>) -> State<T> {
        match self.opts.u_cap {
            Some(cap) if self.opts.limiter.is_on() => desingularize_velocity(&self.model, &s, cap, self.opts.desing),
            _ => s,
        }
    }

    /// Limits one cell in place and returns its flux traces.
    pub fn limit_cell(&self, c: &mut [T]) -> Result<CellLimit<T>> {
        let (nv, dim) = (self.nvars(), self.dim());
        let t = &self.tables;
        let traces = |c: &[T]| [self.desing(eval_modes(c, nv, &t.left)), self.desing(eval_modes(c, nv, &t.right))];
        let mode = self.opts.limiter;
        if !mode.is_on() {
            return Ok(CellLimit { theta: T::one(), triggered: false, quick: false, traces: traces(c) });
        }
        let bar = average_state(c, nv, dim);
        let set = self.cell_set(&bar)?;
        let use_ret = mode.uses_retentional() && self.m_bar > T::one();
        let quick = self.opts.quick_check && quick_check_with_bounds(&set, &t.mode_bounds, c, nv);
        let mut theta = T::one();
        if !quick {
            // affine constraints (density first for systems): points and retentional together
            let states = t.limiter_points.states(c, nv);
            let mut th = set.theta_affine(&bar, &states)?.theta;
            if use_ret {
                let r = retentional_state(&t.space, c, nv, self.m_bar);
                th = th.min(set.theta_affine(&bar, &[r])?.theta);
            }
            apply_damping(c, nv, dim, th);
            theta = th;
            if set.gamma().is_some() {
                let states = t.limiter_points.states(c, nv);
                let tp = set.theta_pressure(&bar, &states)?.theta;
                apply_damping(c, nv, dim, tp);
                theta *= tp;
            }
        }
        let mut tr = traces(c);
        if let (Some(gamma), true) = (set.gamma(), use_ret) {
            // pressure of the unital retentional built from the flux traces
            let d0 = tr[0] - bar;
            let d1 = tr[1] - bar;
            let r = bar - (d0 + d1) * (T::half() / (self.m_bar - T::one()));
            let tq = damping_pressure(gamma, &bar, &r, set.eps_p, set.pressure_method)?;
            if tq < T::one() {
                apply_damping(c, nv, dim, tq);
                tr = [bar + d0 * tq, bar + d1 * tq];
                theta *= tq;
            }
        }
        Ok(CellLimit { theta, triggered: theta < T::one(), quick, traces: tr })
    }

    fn interface_flux(&self, ul: &State<T>, ur: &State<T>) -> State<T> {
        match self.opts.flux {
            NumericalFlux::Hll => self.model.hll_flux(ul, ur, self.model.signal_bounds(ul, ur)),
            NumericalFlux::Llf => {
                let s = self.model.max_abs_speed(ul).max(self.model.max_abs_speed(ur));
                self.model.llf_flux(ul, ur, s)
            }
        }
    }

    /// States on either side of the left face of cell `i` (`i == cells` is the right boundary).
    fn face_states(&self, limits: &[CellLimit<T>], i: usize) -> (State<T>, State<T>) {
        let n = self.mesh.cells;
        let periodic = self.mesh.bc == BoundaryCondition::Periodic;
        let left = if i == 0 {
            if periodic { limits[n - 1].traces[1] } else { limits[0].traces[0] }
        } else {
            limits[i - 1].traces[1]
        };
        let right = if i == n {
            if periodic { limits[0].traces[0] } else { limits[n - 1].traces[1] }
        } else {
            limits[i].traces[0]
        };
        (left, right)
    }

    /// Limits `coeffs` in place and evaluates the stage.
    pub fn evaluate(&self, coeffs: &mut [T], time: T) -> Result<StageEval<T>> {
        let (nv, dim) = (self.nvars(), self.dim());
        let stride = nv * dim;
        let n = self.mesh.cells;
        let tf = time.to_f64_lossy();
        let limits: Vec<Result<CellLimit<T>>> =
            self.map_cells(coeffs, stride, |i, c| self.limit_cell(c).map_err(|e| e.at(i, tf)));
        let limits: Vec<CellLimit<T>> = limits.into_iter().collect::<Result<_>>()?;

        let faces: Vec<(State<T>, T)> = self.map_range(n + 1, |i| {
            let (l, r) = self.face_states(&limits, i);
            let cap = self.model.speed_cap_at_node(&l, &r).max(self.model.speed_cap_left_face(&r, &l));
            (self.interface_flux(&l, &r), cap)
        });
        let lambda = faces.iter().fold(T::zero(), |m, f| m.max(f.1));
        let fluxes: Vec<State<T>> = faces.into_iter().map(|f| f.0).collect();
        let dx = self.mesh.dx();
        let dt_stable = dt_stable_formula(dx, self.opts.degree, lambda).map_or(self.opts.dt_max, |d| d * self.opts.cfl);
        let dt_pos = dt_pos_formula(dx, T::one() / self.m_bar, lambda).unwrap_or(self.opts.dt_max);

        let coeffs_ro: &[T] = coeffs;
        let per_cell: Vec<(Vec<T>, Option<T>)> = self.map_range(n, |i| {
            let c = &coeffs_ro[i * stride..(i + 1) * stride];
            let rhs = self.cell_rhs(c, &fluxes[i], &fluxes[i + 1]);
            let t0 = self.opts.limiter.is_on().then(|| self.time_to_pad(c, &fluxes[i], &fluxes[i + 1])).flatten();
            (rhs, t0)
        });
        let mut rhs = Vec::with_capacity(coeffs_ro.len());
        let mut t_min: Option<T> = None;
        for (r, t0) in per_cell {
            rhs.extend(r);
            if let Some(t0) = t0 {
                t_min = Some(t_min.map_or(t0, |m| m.min(t0)));
            }
        }
        let dt_zero = self.opts.limiter.is_on().then(|| t_min.map_or(self.opts.dt_max, |t| self.opts.alpha * t));
        Ok(StageEval { rhs, limits, fluxes, lambda, dt_stable, dt_zero, dt_pos })
    }

    /// `(1/dx) [ int f(U) phi_j' - h_R phi_j(1) + h_L phi_j(0) ]`.
    fn cell_rhs(&self, c: &[T], h_left: &State<T>, h_right: &State<T>) -> Vec<T> {
        let (nv, dim) = (self.nvars(), self.dim());
        let t = &self.tables;
        let inv_dx = T::one() / self.mesh.dx();
        let mut out = vec![T::zero(); nv * dim];
        for q in 0..t.quad_points.len() {
            let u = self.desing(eval_modes(c, nv, &t.quad_values[q]));
            let f = self.model.flux(&u);
            let w = t.quad_weights[q];
            for v in 0..nv {
                let wf = w * f[v];
                for j in 1..dim {
                    out[v * dim + j] += wf * t.quad_derivs[q][j];
                }
            }
        }
        for v in 0..nv {
            for j in 0..dim {
                let r = &mut out[v * dim + j];
                *r = (*r - h_right[v] * t.right[j] + h_left[v] * t.left[j]) * inv_dx;
            }
        }
        out
    }

    /// Time until the cell average reaches its pads under the current fluxes.
    fn time_to_pad(&self, c: &[T], h_left: &State<T>, h_right: &State<T>) -> Option<T> {
        let bar = average_state(c, self.nvars(), self.dim());
        let rate = (*h_right - *h_left) * (T::one() / self.mesh.dx());
        match self.set.gamma() {
            Some(gamma) => euler_time_to_pad(gamma, &bar, &rate, self.set.eps_rho, self.set.eps_p),
            None => self
                .set
                .affine_functionals()
                .iter()
                .filter_map(|f| affine_time_to_pad(f, &bar, &rate, self.set.eps_rho))
                .fold(None, |m: Option<T>, t| Some(m.map_or(t, |x| x.min(t)))),
        }
    }

    /// Largest step allowed by a stage, before the remaining-time cap.
    pub fn stage_dt(&self, e: &StageEval<T>) -> T {
        let mut dt = e.dt_stable.min(self.opts.dt_max);
        if let Some(z) = e.dt_zero {
            dt = dt.min(self.opts.alpha_z * z);
        }
        dt
    }

    fn stage_allows(&self, e: &StageEval<T>, dt: T) -> bool {
        e.dt_zero.map_or(true, |z| dt <= self.opts.alpha_z * z)
    }

    /// One SSP-RK step of at most `dt_cap`. On success the field advances.
    pub fn step(&self, field: &mut DgField<T>, dt_cap: T) -> Result<StepOutcome<T>> {
        let t0 = field.time;
        let mut u0 = field.coeffs.clone();
        let e0 = self.evaluate(&mut u0, t0)?;
        let mut dt = self.stage_dt(&e0).min(dt_cap);
        let mut retries = 0;
        loop {
            match self.try_stages(&u0, &e0, t0, dt)? {
                Some(st) => {
                    field.coeffs = st.coeffs;
                    field.time = t0 + dt;
                    let diag = self.diagnostics(field, &e0, dt, &st.track, retries);
                    return Ok(StepOutcome { diag, theta: st.track.cell_theta });
                }
                None => {
                    retries += 1;
                    if retries > self.opts.max_retries {
                        return Err(Error::TimeStepCollapse {
                            time: t0.to_f64_lossy(),
                            dt: dt.to_f64_lossy(),
                            retries: self.opts.max_retries,
                        });
                    }
                    dt = dt * T::half();
                }
            }
        }
    }

    fn try_stages(&self, u0: &[T], e0: &StageEval<T>, t0: T, dt: T) -> Result<Option<Stages<T>>> {
        let euler = |u: &[T], e: &StageEval<T>| -> Vec<T> { u.iter().zip(&e.rhs).map(|(a, r)| *a + dt * *r).collect() };
        let combine = |a: T, x: &[T], b: T, y: &[T]| -> Vec<T> { x.iter().zip(y).map(|(p, q)| a * *p + b * *q).collect() };
        let mut track = StageTrack {
            stage_theta: Vec::new(),
            cell_theta: vec![T::one(); e0.limits.len()],
            cell_triggered: vec![false; e0.limits.len()],
            dt_zero: None,
        };
        track.record(e0);
        let mut u = euler(u0, e0);
        let weights: &[(T, T, T)] = match self.opts.rk_order {
            1 => &[],
            2 => &[(T::half(), T::half(), T::one())],
            _ => &[
                (T::lit(0.75), T::lit(0.25), T::half()),
                (T::one() / T::lit(3.0), T::two() / T::lit(3.0), T::one()),
            ],
        };
        for &(a, b, c) in weights {
            let e = self.evaluate(&mut u, t0 + c * dt)?;
            if !self.stage_allows(&e, dt) {
                return Ok(None);
            }
            track.record(&e);
            let stepped = euler(&u, &e);
            u = combine(a, u0, b, &stepped);
        }
        Ok(Some(Stages { coeffs: u, track }))
    }

    fn diagnostics(
        &self,
        field: &DgField<T>,
        e0: &StageEval<T>,
        dt: T,
        track: &StageTrack<T>,
        retries: usize,
    ) -> StepDiagnostics {
        let n = e0.limits.len().max(1);
        StepDiagnostics {
            time: field.time.to_f64_lossy(),
            dt: dt.to_f64_lossy(),
            dt_stable: e0.dt_stable.to_f64_lossy(),
            dt_zero: track.dt_zero.map(|z| z.to_f64_lossy()),
            dt_pos: e0.dt_pos.to_f64_lossy(),
            retries,
            theta_min: track.stage_theta.iter().map(|t| t.to_f64_lossy()).collect(),
            triggered: track.cell_triggered.iter().filter(|&&t| t).count(),
            quick_hit_rate: e0.limits.iter().filter(|l| l.quick).count() as f64 / n as f64,
            mass: field.mass(self.mesh.dx()).iter().map(|m| m.to_f64_lossy()).collect(),
            min_average: self.average_minima(field).iter().map(|(_, v, _)| v.to_f64_lossy()).collect(),
        }
    }

    /// Advances to `t_final`, landing exactly on each snapshot time and calling
    /// `on_snapshot` with the field and the last per-cell damping coefficients
    /// (`None` before the first step or with limiting off). Unlimited runs stop
    /// at the first negative or non-finite average.
    pub fn run<F>(&self, field: &mut DgField<T>, t_final: T, snapshot_times: &[T], mut on_snapshot: F) -> Result<RunLog>
    where
        F: FnMut(&DgField<T>, Option<&[T]>) -> Result<()>,
    {
        let mut log = RunLog { steps: Vec::new(), stopped: None };
        let mut pending: Vec<T> = snapshot_times.iter().copied().filter(|&s| s <= t_final).collect();
        pending.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
        let eps = t_final * T::lit(1e-12);
        let mut theta: Option<Vec<T>> = None;
        let flush = |pending: &mut Vec<T>, field: &DgField<T>, theta: &Option<Vec<T>>, cb: &mut F| -> Result<()> {
            while pending.first().is_some_and(|&s| s <= field.time + eps) {
                pending.remove(0);
                cb(field, if self.opts.limiter.is_on() { theta.as_deref() } else { None })?;
            }
            Ok(())
        };
        flush(&mut pending, field, &theta, &mut on_snapshot)?;
        while field.time < t_final - eps {
            let target = pending.first().copied().unwrap_or(t_final).min(t_final);
            let out = self.step(field, target - field.time)?;
            let minima = self.average_minima(field);
            log.steps.push(out.diag);
            theta = Some(out.theta);
            if let Some((label, v, cell)) = minima.iter().find(|(_, v, _)| !(*v >= T::zero())) {
                let detail = format!("{label} average is {v}");
                if self.opts.limiter.is_on() {
                    return Err(Error::AverageOutsidePositiveSet { cell: *cell, time: field.time.to_f64_lossy(), detail });
                }
                log.stopped = Some(format!("cell {cell} at t={}: {detail}", field.time));
                on_snapshot(field, None)?;
                return Ok(log);
            }
            if field.time >= target - eps {
                field.time = field.time.max(target);
            }
            flush(&mut pending, field, &theta, &mut on_snapshot)?;
        }
        Ok(log)
    }

    /// Labels of the positivity functionals reported by [`Self::average_minima`].
    pub fn functional_labels(&self) -> Vec<&'static str> {
        let mut labels: Vec<&'static str> = self.set.affine_functionals().iter().map(|f| f.label).collect();
        if self.set.gamma().is_some() {
            labels.push("p");
        }
        labels
    }

    /// `(label, minimum over cells, argmin)` of each positivity functional at the averages.
    pub fn average_minima(&self, field: &DgField<T>) -> Vec<(&'static str, T, usize)> {
        let mut out: Vec<(&'static str, T, usize)> =
            self.functional_labels().into_iter().map(|l| (l, T::infinity(), 0)).collect();
        let affine = self.set.affine_functionals();
        for i in 0..field.cells() {
            let bar = field.average(i);
            let mut vals: Vec<T> = affine.iter().map(|f| f.apply(&bar)).collect();
            if self.set.gamma().is_some() {
                vals.push(self.model.pressure(&bar));
            }
            for (slot, v) in out.iter_mut().zip(vals) {
                if v.is_nan() || v < slot.1 {
                    slot.1 = v;
                    slot.2 = i;
                }
            }
        }
        out
    }

    /// Per-cell minimum of each variable over the full point set.
    pub fn point_minima(&self, field: &DgField<T>) -> Vec<State<T>> {
        let pts = &self.tables.snapshot_points;
        (0..field.cells())
            .map(|i| {
                let c = field.cell(i);
                let mut m = State([T::infinity(); 3]);
                for p in 0..pts.len() {
                    let s = pts.state(c, field.nvars, p);
                    for v in 0..field.nvars {
                        m[v] = m[v].min(s[v]);
                    }
                }
                m
            })
            .collect()
    }

    /// Value of the numerical solution at physical `x` in cell `i`.
    pub fn eval_at(&self, field: &DgField<T>, i: usize, xi: T) -> State<T> {
        let mut phi = vec![T::zero(); self.dim()];
        legendre_values(self.opts.degree, xi, &mut phi);
        eval_modes(field.cell(i), field.nvars, &phi)
    }
}
