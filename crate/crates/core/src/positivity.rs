//! Positivity sets, damping coefficients, and the limiters that damp the
//! non-constant modes of a cell toward its average.
//!
//! Cell coefficients are stored variable-major: `coeffs[v * dim + j]` is mode `j`
//! of variable `v`. Mode 0 is the cell average and is never written.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::PolySpace;
use crate::quadrature::Point;
use crate::riemann::{FluxModel, State};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PositivityKind<T> {
    /// `u >= pad`.
    Scalar,
    /// `u_min + pad <= u <= u_max - pad`, enforced by translation and negation.
    ScalarBounds { u_min: T, u_max: T },
    /// Depth `h >= pad`.
    ShallowWater,
    /// Density `rho >= eps_rho` and pressure `p >= eps_p`.
    Euler { gamma: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PressureMethod {
    #[default]
    Secant,
    QuadraticRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DesingMap {
    #[default]
    Clip,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivitySet<T> {
    pub kind: PositivityKind<T>,
    /// Pad on the scalar, depth, or density constraint.
    pub eps_rho: T,
    /// Pad on the pressure constraint.
    pub eps_p: T,
    pub pressure_method: PressureMethod,
}

/// `coef . u + offset >= pad`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine<T> {
    pub coef: [T; 3],
    pub offset: T,
    pub label: &'static str,
}

impl<T: Scalar> Affine<T> {
    pub fn apply(&self, u: &State<T>) -> T {
        self.coef[0] * u[0] + self.coef[1] * u[1] + self.coef[2] * u[2] + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingResult<T> {
    pub theta: T,
    pub triggered: bool,
    /// Constraint that produced the smallest coefficient (`"none"` if untriggered).
    pub binding: &'static str,
}

impl<T: Scalar> DampingResult<T> {
    pub fn untouched() -> Self {
        Self { theta: T::one(), triggered: false, binding: "none" }
    }

    fn from_theta(theta: T, binding: &'static str) -> Self {
        if theta < T::one() {
            Self { theta, triggered: true, binding }
        } else {
            Self::untouched()
        }
    }

    /// Sequential composition: the overall factor applied to the modes.
    pub fn then(self, next: Self) -> Self {
        let theta = self.theta * next.theta;
        let binding = if next.triggered && (!self.triggered || next.theta < self.theta) {
            next.binding
        } else {
            self.binding
        };
        Self { theta, triggered: self.triggered || next.triggered, binding }
    }
}

fn average_error(detail: String) -> Error {
    Error::AverageOutsidePositiveSet { cell: usize::MAX, time: f64::NAN, detail }
}

/// Largest `theta` in `[0, 1]` with `(1 - theta) a_bar + theta a_val >= pad`.
pub fn damping_affine<T: Scalar>(a_bar: T, a_val: T, pad: T) -> Result<T> {
    if !(a_bar >= pad) {
        return Err(average_error(format!("average value {a_bar} below pad {pad}")));
    }
    if a_val >= pad {
        return Ok(T::one());
    }
    Ok(((a_bar - pad) / (a_bar - a_val)).max(T::zero()).min(T::one()))
}

fn pressure_of<T: Scalar>(gamma: T, u: &State<T>) -> T {
    (gamma - T::one()) * (u[2] - u[1] * u[1] / (T::two() * u[0]))
}

/// Largest `theta` keeping the pressure of `(1 - theta) bar + theta val` at or
/// above `pad`. Densities of both states must be positive.
pub fn damping_pressure<T: Scalar>(
    gamma: T,
    bar: &State<T>,
    val: &State<T>,
    pad: T,
    method: PressureMethod,
) -> Result<T> {
    if !(bar[0] > T::zero()) || !(val[0] > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "pressure damping needs positive densities (got {} and {})",
            bar[0], val[0]
        )));
    }
    let p_bar = pressure_of(gamma, bar);
    if !(p_bar >= pad) {
        return Err(average_error(format!("average pressure {p_bar} below pad {pad}")));
    }
    let p_val = pressure_of(gamma, val);
    if p_val >= pad {
        return Ok(T::one());
    }
    let secant = ((p_bar - pad) / (p_bar - p_val)).max(T::zero()).min(T::one());
    match method {
        PressureMethod::Secant => Ok(secant),
        PressureMethod::QuadraticRoot => {
            // q(t) = (gamma-1)(rho E - m^2/2) - pad rho along the ray; p is concave
            // there, so q changes sign exactly once in (0, 1)
            let d = *val - *bar;
            let g1 = gamma - T::one();
            let a = g1 * (d[0] * d[2] - d[1] * d[1] / T::two());
            let b = g1 * (bar[0] * d[2] + d[0] * bar[2] - bar[1] * d[1]) - pad * d[0];
            let c = g1 * (bar[0] * bar[2] - bar[1] * bar[1] / T::two()) - pad * bar[0];
            let q = |t: T| (a * t + b) * t + c;
            let root = smallest_root_in_unit(a, b, c);
            match root {
                Some(t) if q(t).abs() <= T::lit(1e-9) * (c.abs() + b.abs() + a.abs()) => Ok(t.max(secant)),
                _ => Ok(bisect_sign_change(q, secant)),
            }
        }
    }
}

/// Real roots of `a t^2 + b t + c`, computed with the cancellation-free pairing
/// of the quadratic formula. A negligible `a` falls back to the linear root.
pub(crate) fn real_roots<T: Scalar>(a: T, b: T, c: T) -> Vec<T> {
    let eps = T::epsilon();
    let scale = a.abs() + b.abs() + c.abs();
    let mut roots = Vec::with_capacity(2);
    if a.abs() <= eps * scale {
        if b != T::zero() {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - T::lit(4.0) * a * c;
        if disc < T::zero() {
            return roots;
        }
        let s = disc.sqrt();
        let q = -T::half() * (b + if b >= T::zero() { s } else { -s });
        if q != T::zero() {
            roots.push(c / q);
        }
        roots.push(q / a);
    }
    roots.retain(|t| t.is_finite());
    roots
}

/// Smallest root of `a t^2 + b t + c` in `[0, 1]`.
pub(crate) fn smallest_root_in_unit<T: Scalar>(a: T, b: T, c: T) -> Option<T> {
    real_roots(a, b, c)
        .into_iter()
        .filter(|t| *t >= T::zero() && *t <= T::one())
        .fold(None, |best: Option<T>, t| Some(best.map_or(t, |b| b.min(t))))
}

/// Crossing of `f` from nonnegative to negative in `[lo, 1]`, found by bisection.
fn bisect_sign_change<T: Scalar, F: Fn(T) -> T>(f: F, lo: T) -> T {
    let (mut a, mut b) = (lo, T::one());
    if f(b) >= T::zero() {
        return b;
    }
    for _ in 0..200 {
        let m = (a + b) * T::half();
        if m <= a || m >= b {
            break;
        }
        if f(m) >= T::zero() {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

impl<T: Scalar> PositivitySet<T> {
    pub fn new(kind: PositivityKind<T>, eps_rho: T, eps_p: T) -> Self {
        Self { kind, eps_rho, eps_p, pressure_method: PressureMethod::Secant }
    }

    /// The default set for a flux model with pads of `1e-12`.
    pub fn for_model(model: &FluxModel<T>) -> Self {
        let kind = match model {
            FluxModel::Advection { .. } | FluxModel::Burgers => PositivityKind::Scalar,
            FluxModel::ShallowWater { .. } => PositivityKind::ShallowWater,
            FluxModel::Euler { gamma } => PositivityKind::Euler { gamma: *gamma },
        };
        Self::new(kind, T::lit(1e-12), T::lit(1e-12))
    }

    pub fn gamma(&self) -> Option<T> {
        match self.kind {
            PositivityKind::Euler { gamma } => Some(gamma),
            _ => None,
        }
    }

    /// The affine constraints (all with pad `eps_rho`).
    pub fn affine_functionals(&self) -> Vec<Affine<T>> {
        let z = T::zero();
        let one = T::one();
        match self.kind {
            PositivityKind::Scalar => vec![Affine { coef: [one, z, z], offset: z, label: "u" }],
            PositivityKind::ScalarBounds { u_min, u_max } => vec![
                Affine { coef: [one, z, z], offset: -u_min, label: "u_min" },
                Affine { coef: [-one, z, z], offset: u_max, label: "u_max" },
            ],
            PositivityKind::ShallowWater => vec![Affine { coef: [one, z, z], offset: z, label: "h" }],
            PositivityKind::Euler { .. } => vec![Affine { coef: [one, z, z], offset: z, label: "rho" }],
        }
    }

    /// Whether `u` satisfies every padded constraint.
    pub fn contains(&self, u: &State<T>) -> bool {
        self.affine_functionals().iter().all(|f| f.apply(u) >= self.eps_rho)
            && self.gamma().map_or(true, |g| pressure_of(g, u) >= self.eps_p)
    }

    /// Smallest damping over the affine constraints at the given point values.
    pub fn theta_affine(&self, bar: &State<T>, values: &[State<T>]) -> Result<DampingResult<T>> {
        let mut out = DampingResult::untouched();
        for f in self.affine_functionals() {
            let a_bar = f.apply(bar);
            for v in values {
                let t = damping_affine(a_bar, f.apply(v), self.eps_rho)?;
                if t < out.theta {
                    out = DampingResult::from_theta(t, f.label);
                }
            }
        }
        Ok(out)
    }

    /// Smallest pressure damping at the given point values (Euler only).
    pub fn theta_pressure(&self, bar: &State<T>, values: &[State<T>]) -> Result<DampingResult<T>> {
        let Some(gamma) = self.gamma() else {
            return Ok(DampingResult::untouched());
        };
        let mut out = DampingResult::untouched();
        for v in values {
            let t = damping_pressure(gamma, bar, v, self.eps_p, self.pressure_method)?;
            if t < out.theta {
                out = DampingResult::from_theta(t, "p");
            }
        }
        Ok(out)
    }
}

/// Basis values of a space at a fixed list of points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTable<T> {
    pub points: Vec<Point<T>>,
    dim: usize,
    values: Vec<T>,
}

impl<T: Scalar> PointTable<T> {
    pub fn new(space: &PolySpace<T>, points: &[Point<T>]) -> Self {
        let dim = space.dim();
        let mut values = vec![T::zero(); dim * points.len()];
        for (x, chunk) in points.iter().zip(values.chunks_mut(dim)) {
            space.basis_values(x, chunk);
        }
        Self { points: points.to_vec(), dim, values }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis_at(&self, p: usize) -> &[T] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    /// Value of variable `v` at point `p`.
    pub fn value(&self, coeffs: &[T], v: usize, p: usize) -> T {
        let c = &coeffs[v * self.dim..(v + 1) * self.dim];
        c.iter().zip(self.basis_at(p)).map(|(a, b)| *a * *b).sum()
    }

    pub fn state(&self, coeffs: &[T], nvars: usize, p: usize) -> State<T> {
        let mut s = State::zero();
        for v in 0..nvars {
            s[v] = self.value(coeffs, v, p);
        }
        s
    }

    pub fn states(&self, coeffs: &[T], nvars: usize) -> Vec<State<T>> {
        (0..self.len()).map(|p| self.state(coeffs, nvars, p)).collect()
    }
}

pub fn average_state<T: Scalar>(coeffs: &[T], nvars: usize, dim: usize) -> State<T> {
    let mut s = State::zero();
    for v in 0..nvars {
        s[v] = coeffs[v * dim];
    }
    s
}

/// Multiplies every non-constant mode by `theta`.
pub fn apply_damping<T: Scalar>(coeffs: &mut [T], nvars: usize, dim: usize, theta: T) {
    if theta >= T::one() {
        return;
    }
    for v in 0..nvars {
        for c in &mut coeffs[v * dim + 1..(v + 1) * dim] {
            *c *= theta;
        }
    }
}

/// Point-wise limiting: affine constraints first, then (Euler) pressure, each
/// damping the modes by the smallest coefficient over the points.
pub fn limit_pointwise<T: Scalar>(
    set: &PositivitySet<T>,
    coeffs: &mut [T],
    nvars: usize,
    table: &PointTable<T>,
) -> Result<DampingResult<T>> {
    let dim = table.dim();
    let bar = average_state(coeffs, nvars, dim);
    let first = set.theta_affine(&bar, &table.states(coeffs, nvars))?;
    apply_damping(coeffs, nvars, dim, first.theta);
    if set.gamma().is_none() {
        return Ok(first);
    }
    let second = set.theta_pressure(&bar, &table.states(coeffs, nvars))?;
    apply_damping(coeffs, nvars, dim, second.theta);
    Ok(first.then(second))
}

/// `U_bar + R(dU)` with the unital retentional `R(dU) = -B(dU) / (M - 1)`.
pub fn retentional_state<T: Scalar>(space: &PolySpace<T>, coeffs: &[T], nvars: usize, m_bar: T) -> State<T> {
    let dim = space.dim();
    let mut s = State::zero();
    for v in 0..nvars {
        let c = &coeffs[v * dim..(v + 1) * dim];
        let b_du: T = c[1..].iter().zip(&space.boundary_of_modes()[1..]).map(|(a, b)| *a * *b).sum();
        s[v] = c[0] - b_du / (m_bar - T::one());
    }
    s
}

fn check_weight<T: Scalar>(m_bar: T) -> Result<()> {
    if !(m_bar > T::one()) {
        return Err(Error::InvalidArgument(format!("retentional limiting needs M > 1, got {m_bar}")));
    }
    Ok(())
}

/// Retentional limiting of the affine constraints.
pub fn limit_retentional_affine<T: Scalar>(
    set: &PositivitySet<T>,
    space: &PolySpace<T>,
    coeffs: &mut [T],
    nvars: usize,
    m_bar: T,
) -> Result<DampingResult<T>> {
    check_weight(m_bar)?;
    let dim = space.dim();
    let bar = average_state(coeffs, nvars, dim);
    let r = retentional_state(space, coeffs, nvars, m_bar);
    let res = set.theta_affine(&bar, &[r])?;
    apply_damping(coeffs, nvars, dim, res.theta);
    Ok(res)
}

/// Retentional limiting of the pressure constraint (Euler only).
pub fn limit_retentional_pressure<T: Scalar>(
    set: &PositivitySet<T>,
    space: &PolySpace<T>,
    coeffs: &mut [T],
    nvars: usize,
    m_bar: T,
) -> Result<DampingResult<T>> {
    check_weight(m_bar)?;
    let dim = space.dim();
    let bar = average_state(coeffs, nvars, dim);
    let r = retentional_state(space, coeffs, nvars, m_bar);
    let res = set.theta_pressure(&bar, &[r])?;
    apply_damping(coeffs, nvars, dim, res.theta);
    Ok(res)
}

/// Retentional limiting: damps the modes until the unital retentional state
/// `(M C(U) - B(U)) / (M - 1)` lies in the padded positive set.
pub fn limit_retentional<T: Scalar>(
    set: &PositivitySet<T>,
    space: &PolySpace<T>,
    coeffs: &mut [T],
    nvars: usize,
    m_bar: T,
) -> Result<DampingResult<T>> {
    let first = limit_retentional_affine(set, space, coeffs, nvars, m_bar)?;
    let second = limit_retentional_pressure(set, space, coeffs, nvars, m_bar)?;
    Ok(first.then(second))
}

/// Rescales the velocity so its magnitude does not exceed `u_cap` (Clip), or
/// smoothly reduces it (Spline `x(2 - x)`). Euler keeps the internal energy.
pub fn desingularize_velocity<T: Scalar>(model: &FluxModel<T>, state: &State<T>, u_cap: T, map: DesingMap) -> State<T> {
    if !matches!(model, FluxModel::ShallowWater { .. } | FluxModel::Euler { .. }) {
        return *state;
    }
    let (rho, m) = (state[0], state[1]);
    let speed = (m / rho).abs();
    if !(speed > u_cap) {
        return *state;
    }
    let x = u_cap / speed;
    let factor = match map {
        DesingMap::Clip => x,
        DesingMap::Spline => x * (T::two() - x),
    };
    let mut out = *state;
    out[1] = m * factor;
    if matches!(model, FluxModel::Euler { .. }) {
        let internal = state[2] - m * m / (T::two() * rho);
        out[2] = internal + out[1] * out[1] / (T::two() * rho);
    }
    out
}

/// Certifies positivity from modal coefficient bounds. Never returns a false
/// positive; returns false whenever the bounds are inconclusive.
pub fn quick_positivity_check<T: Scalar>(set: &PositivitySet<T>, space: &PolySpace<T>, coeffs: &[T], nvars: usize) -> bool {
    quick_check_with_bounds(set, &space.mode_bounds(), coeffs, nvars)
}

/// [`quick_positivity_check`] with precomputed `|phi_j|` bounds.
pub fn quick_check_with_bounds<T: Scalar>(set: &PositivitySet<T>, bounds: &[T], coeffs: &[T], nvars: usize) -> bool {
    let dim = bounds.len();
    let range = |v: usize| {
        let c = &coeffs[v * dim..(v + 1) * dim];
        let spread: T = c[1..].iter().zip(&bounds[1..]).map(|(a, b)| a.abs() * *b).sum();
        (c[0] - spread, c[0] + spread)
    };
    let pad = set.eps_rho;
    match set.kind {
        PositivityKind::Scalar | PositivityKind::ShallowWater => range(0).0 >= pad,
        PositivityKind::ScalarBounds { u_min, u_max } => {
            let (lo, hi) = range(0);
            lo - u_min >= pad && u_max - hi >= pad
        }
        PositivityKind::Euler { gamma } => {
            debug_assert_eq!(nvars, 3);
            let (rho_lo, rho_hi) = range(0);
            let (m_lo, m_hi) = range(1);
            let (e_lo, _) = range(2);
            if !(rho_lo >= pad) || !(e_lo >= T::zero()) {
                return false;
            }
            let m_max = m_lo.abs().max(m_hi.abs());
            let p_min = rho_lo * e_lo - m_max * m_max / T::two();
            p_min > set.eps_p * rho_hi / (gamma - T::one())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::quadrature::{gauss_legendre, point};
    use crate::weights::{interval_weight, to_f64};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    const GAMMA: f64 = 1.4;

    fn euler_set() -> PositivitySet<f64> {
        PositivitySet::new(PositivityKind::Euler { gamma: GAMMA }, 1e-12, 1e-12)
    }

    fn scalar_set(pad: f64) -> PositivitySet<f64> {
        PositivitySet::new(PositivityKind::Scalar, pad, pad)
    }

    fn euler_state(rho: f64, v: f64, p: f64) -> State<f64> {
        State::euler(rho, rho * v, p / (GAMMA - 1.0) + 0.5 * rho * v * v)
    }

    /// Dense sampling points on [0, 1] including both ends.
    fn grid(n: usize) -> Vec<Point<f64>> {
        (0..=n).map(|i| point(&[i as f64 / n as f64])).collect()
    }

    fn full_points(k: usize) -> Vec<Point<f64>> {
        let mut pts = gauss_legendre::<f64>(k + 1).unwrap().points;
        pts.push(point(&[0.0]));
        pts.push(point(&[1.0]));
        pts
    }

    #[test]
    fn damping_affine_examples() {
        assert_eq!(damping_affine(2.0, 3.0, 0.0).unwrap(), 1.0);
        assert_eq!(damping_affine(1.0, -1.0, 0.0).unwrap(), 0.5);
        assert_relative_eq!(damping_affine(1.0, -1.0, 0.1).unwrap(), 0.45, epsilon = 1e-15);
        assert!(matches!(damping_affine(0.05, 1.0, 0.1), Err(Error::AverageOutsidePositiveSet { .. })));
    }

    #[test]
    fn damping_pressure_examples() {
        let bar = State::euler(1.0, 0.0, 1.0);
        let pad = 1e-3;
        let val = State::euler(1.0, 0.0, 2.0 * pad / (GAMMA - 1.0));
        assert_eq!(damping_pressure(GAMMA, &bar, &val, pad, PressureMethod::Secant).unwrap(), 1.0);
        let val = State::euler(1.0, 0.0, -1.0);
        let t = damping_pressure(GAMMA, &bar, &val, 0.0, PressureMethod::Secant).unwrap();
        assert_eq!(t, 0.5);
        let mid = bar * (1.0 - t) + val * t;
        assert_eq!(pressure_of(GAMMA, &mid), 0.0);
        let q = damping_pressure(GAMMA, &bar, &val, 0.0, PressureMethod::QuadraticRoot).unwrap();
        assert_relative_eq!(q, 0.5, epsilon = 1e-14);
        // tie at the pad
        let val = State::euler(1.0, 0.0, pad / (GAMMA - 1.0));
        assert_eq!(damping_pressure(GAMMA, &bar, &val, pad, PressureMethod::Secant).unwrap(), 1.0);
        assert!(damping_pressure(GAMMA, &State::euler(1.0, 0.0, 0.0), &bar, 0.1, PressureMethod::Secant).is_err());
    }

    #[test]
    fn pointwise_examples() {
        let space = PolySpace::<f64>::interval(2);
        let set = scalar_set(0.0);
        // U = a + b x + c x^2 with average 1, U(0) = -1, U(1) = 1.5
        let a = -1.0;
        let c = (1.0 - a - (1.5 - a) / 2.0) / (1.0 / 3.0 - 0.5);
        let b = 1.5 - a - c;
        let p = Polynomial::project(Arc::new(space.clone()), |x| a + b * x[0] + c * x[0] * x[0]);
        let mut coeffs = p.coeffs.clone();
        let table = PointTable::new(&space, &full_points(2));
        let res = limit_pointwise(&set, &mut coeffs, 1, &table).unwrap();
        assert_relative_eq!(res.theta, 0.5, epsilon = 1e-13);
        assert!(res.triggered);
        assert_eq!(coeffs[0], p.coeffs[0]);
        assert!(space.eval(&coeffs, &point(&[0.0])).abs() <= 1e-13);

        // upper bound through negation: avg 0.5, U(1) = 1.5, u_max = 1
        let bounds = PositivitySet::new(PositivityKind::ScalarBounds { u_min: -10.0, u_max: 1.0 }, 0.0, 0.0);
        let lin = Polynomial::project(Arc::new(space.clone()), |x| -0.5 + 2.0 * x[0]);
        let mut coeffs = lin.coeffs.clone();
        let res = limit_pointwise(&bounds, &mut coeffs, 1, &table).unwrap();
        assert_relative_eq!(res.theta, 0.5, epsilon = 1e-13);
        assert_eq!(res.binding, "u_max");

        // positive everywhere: untouched
        let pos = Polynomial::project(Arc::new(space.clone()), |x| 1.0 + x[0] * x[0]);
        let mut coeffs = pos.coeffs.clone();
        let res = limit_pointwise(&set, &mut coeffs, 1, &table).unwrap();
        assert!(!res.triggered && res.theta == 1.0);
        assert_eq!(coeffs, pos.coeffs);
    }

    #[test]
    fn retentional_examples() {
        let space = PolySpace::<f64>::interval(2);
        let set = scalar_set(0.0);
        // average 1, B(dU) = 4 with M = 3 -> theta = (M-1) avg / B(dU) = 1/2
        let b2 = space.boundary_of_modes()[2];
        let mut coeffs = vec![1.0, 0.0, 4.0 / b2];
        let res = limit_retentional(&set, &space, &mut coeffs, 1, 3.0).unwrap();
        assert_relative_eq!(res.theta, 0.5, epsilon = 1e-14);
        let mut constant = vec![2.0, 0.0, 0.0];
        assert_eq!(limit_retentional(&set, &space, &mut constant, 1, 1.5).unwrap().theta, 1.0);
        assert!(limit_retentional(&set, &space, &mut constant, 1, 1.0).is_err());
    }

    #[test]
    fn desingularization_examples() {
        let sw = FluxModel::ShallowWater { g: 9.81 };
        let s = State::shallow_water(2.0, 2.0);
        assert_eq!(desingularize_velocity(&sw, &s, 1.0, DesingMap::Clip), s);
        let s = State::shallow_water(0.5, 1.0); // |u| = 2
        let c = desingularize_velocity(&sw, &s, 1.0, DesingMap::Clip);
        assert_eq!(c[1] / c[0], 1.0);
        let sp = desingularize_velocity(&sw, &s, 1.0, DesingMap::Spline);
        assert_eq!(sp[1] / sp[0], 1.5);
        let eu = FluxModel::Euler { gamma: GAMMA };
        let s = euler_state(0.1, 30.0, 0.2);
        let c = desingularize_velocity(&eu, &s, 10.0, DesingMap::Clip);
        assert_eq!(c[0], s[0]);
        assert_relative_eq!(c[1] / c[0], 10.0, epsilon = 1e-13);
        assert_relative_eq!(pressure_of(GAMMA, &c), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn quick_check_examples() {
        let space = PolySpace::<f64>::interval(3);
        let set = scalar_set(1e-12);
        assert!(quick_positivity_check(&set, &space, &[2.0, 0.0, 0.0, 0.0], 1));
        // sum |c_j| sqrt(2j+1) < 1
        assert!(quick_positivity_check(&set, &space, &[1.0, 0.2, 0.1, 0.05], 1));
        assert!(!quick_positivity_check(&set, &space, &[1.0, 0.6, 0.0, 0.0], 1));
        let e = euler_set();
        let mut c = vec![0.0; 12];
        c[0] = 1e-3;
        c[1] = 0.01;
        c[8] = 2.5;
        assert!(!quick_positivity_check(&e, &space, &c, 3));
        let mut c = vec![0.0; 12];
        c[0] = 1.0;
        c[8] = 2.5;
        assert!(quick_positivity_check(&e, &space, &c, 3));
    }

    fn random_coeffs(seed: &[f64], k: usize, avg: f64) -> Vec<f64> {
        let mut c: Vec<f64> = seed.iter().take(k + 1).copied().collect();
        c[0] = avg;
        c
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn positive_set_is_convex(r1 in 1e-6f64..10.0, v1 in -5.0f64..5.0, p1 in 1e-6f64..10.0, r2 in 1e-6f64..10.0, v2 in -5.0f64..5.0, p2 in 1e-6f64..10.0, s in 0.0f64..1.0) {
            let set = euler_set();
            let (a, b) = (euler_state(r1, v1, p1), euler_state(r2, v2, p2));
            prop_assume!(set.contains(&a) && set.contains(&b));
            prop_assert!(set.contains(&(a * s + b * (1.0 - s))));
        }

        #[test]
        fn secant_is_safe_and_below_quadratic(r1 in 1e-3f64..10.0, v1 in -5.0f64..5.0, p1 in 1e-3f64..10.0, r2 in 1e-3f64..10.0, v2 in -5.0f64..5.0, e2 in -10.0f64..10.0, pad in 0.0f64..1e-3) {
            let bar = euler_state(r1, v1, p1);
            let val = State::euler(r2, r2 * v2, e2);
            let s = damping_pressure(GAMMA, &bar, &val, pad, PressureMethod::Secant).unwrap();
            let q = damping_pressure(GAMMA, &bar, &val, pad, PressureMethod::QuadraticRoot).unwrap();
            let mix = bar * (1.0 - s) + val * s;
            prop_assert!(pressure_of(GAMMA, &mix) >= pad - 1e-12 * (1.0 + p1));
            prop_assert!(s <= q + 1e-12);
            let mix = bar * (1.0 - q) + val * q;
            prop_assert!(pressure_of(GAMMA, &mix) >= pad - 1e-9 * (1.0 + p1 + e2.abs()));
        }

        #[test]
        fn pointwise_limiter_properties(seed in prop::collection::vec(-2.0f64..2.0, 5), avg in 0.01f64..2.0, extra in 0.0f64..1.0) {
            let k = 4;
            let space = PolySpace::<f64>::interval(k);
            let set = scalar_set(1e-12);
            let table = PointTable::new(&space, &full_points(k));
            let orig = random_coeffs(&seed, k, avg);
            let mut c = orig.clone();
            let res = limit_pointwise(&set, &mut c, 1, &table).unwrap();
            // averages bit-identical
            prop_assert_eq!(c[0].to_bits(), orig[0].to_bits());
            // soundness at the points
            for p in 0..table.len() {
                prop_assert!(table.value(&c, 0, p) >= 1e-12 - 1e-12);
            }
            // idempotence
            let mut again = c.clone();
            let second = limit_pointwise(&set, &mut again, 1, &table).unwrap();
            prop_assert!(second.theta >= 1.0 - 1e-12);
            // enlarging the point set can only decrease theta
            let mut pts = full_points(k);
            pts.push(point(&[extra]));
            let bigger = PointTable::new(&space, &pts);
            let mut c2 = orig.clone();
            let res2 = limit_pointwise(&set, &mut c2, 1, &bigger).unwrap();
            prop_assert!(res2.theta <= res.theta + 1e-15);
        }

        #[test]
        fn euler_pointwise_soundness(seed in prop::collection::vec(-1.0f64..1.0, 9), rho in 0.01f64..2.0, p in 0.01f64..2.0, v in -2.0f64..2.0) {
            let k = 2;
            let space = PolySpace::<f64>::interval(k);
            let set = euler_set();
            let table = PointTable::new(&space, &full_points(k));
            let bar = euler_state(rho, v, p);
            let mut c = vec![0.0; 9];
            for var in 0..3 {
                c[var * 3] = bar[var];
                c[var * 3 + 1] = seed[var * 3 + 1] * (1.0 + bar[var].abs());
                c[var * 3 + 2] = seed[var * 3 + 2] * (1.0 + bar[var].abs());
            }
            let before: Vec<u64> = (0..3).map(|v| c[v * 3].to_bits()).collect();
            limit_pointwise(&set, &mut c, 3, &table).unwrap();
            for v in 0..3 {
                prop_assert_eq!(c[v * 3].to_bits(), before[v]);
            }
            for s in table.states(&c, 3) {
                prop_assert!(s[0] >= 1e-12 - 1e-12);
                prop_assert!(pressure_of(GAMMA, &s) >= 1e-12 - 1e-10);
            }
            let mut r = c.clone();
            limit_retentional(&set, &space, &mut r, 3, 3.0).unwrap();
            let rs = retentional_state(&space, &r, 3, 3.0);
            prop_assert!(rs[0] >= 1e-12 - 1e-12);
            prop_assert!(pressure_of(GAMMA, &rs) >= 1e-12 - 1e-10);
        }

        #[test]
        fn retentional_soundness_and_crowding(seed in prop::collection::vec(-2.0f64..2.0, 7), avg in 0.01f64..2.0) {
            let k = 6;
            let space = PolySpace::<f64>::interval(k);
            let set = scalar_set(0.0);
            let m = to_f64(interval_weight(k));
            let orig = random_coeffs(&seed, k, avg);
            let mut c = orig.clone();
            limit_retentional(&set, &space, &mut c, 1, m).unwrap();
            prop_assert_eq!(c[0].to_bits(), orig[0].to_bits());
            let r = retentional_state(&space, &c, 1, m);
            prop_assert!(r[0] >= -1e-12);
            prop_assert!(space.boundary_crowding(&c).unwrap() <= m + 1e-10);
            let mut again = c.clone();
            prop_assert!(limit_retentional(&set, &space, &mut again, 1, m).unwrap().theta >= 1.0 - 1e-12);
        }

        #[test]
        fn nonnegative_polynomials_are_not_damped_at_the_optimal_weight(seed in prop::collection::vec(-1.0f64..1.0, 4)) {
            // squares are nonnegative on the cell, and the optimal weight is admissible
            let k = 6;
            let space = Arc::new(PolySpace::<f64>::interval(k));
            let q = |x: f64| seed[0] + seed[1] * x + seed[2] * x * x + seed[3] * x * x * x;
            let p = Polynomial::project(space.clone(), |x| q(x[0]).powi(2) + 1e-9);
            let mut c = p.coeffs.clone();
            let m = to_f64(interval_weight(k));
            let res = limit_retentional(&scalar_set(0.0), &space, &mut c, 1, m).unwrap();
            prop_assert!(res.theta >= 1.0 - 1e-9);
        }

        #[test]
        fn quick_check_is_sound(seed in prop::collection::vec(-0.5f64..0.5, 4), avg in 0.01f64..3.0) {
            let k = 3;
            let space = PolySpace::<f64>::interval(k);
            let set = scalar_set(1e-12);
            let c = random_coeffs(&seed, k, avg);
            if quick_positivity_check(&set, &space, &c, 1) {
                for x in grid(400) {
                    prop_assert!(space.eval(&c, &x) >= 1e-12);
                }
                let table = PointTable::new(&space, &full_points(k));
                let mut d = c.clone();
                prop_assert_eq!(limit_pointwise(&set, &mut d, 1, &table).unwrap().theta, 1.0);
            }
        }
    }

    #[test]
    fn nodal_positivity_implies_retentional_positivity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for k in [2usize, 4, 6] {
            let n = k / 2;
            let space = PolySpace::<f64>::interval(k);
            let gl = crate::quadrature::gauss_lobatto::<f64>(n);
            let table = PointTable::new(&space, &gl.points);
            let m = to_f64(interval_weight(k));
            let mut tested = 0;
            while tested < 200 {
                let c: Vec<f64> = (0..=k).map(|j| if j == 0 { rng.gen_range(0.1..1.0) } else { rng.gen_range(-1.0..1.0) }).collect();
                if (0..table.len()).any(|p| table.value(&c, 0, p) < 0.0) {
                    continue;
                }
                tested += 1;
                let r = retentional_state(&space, &c, 1, m);
                assert!(r[0] >= -1e-12, "k={k}: {}", r[0]);
            }
        }
    }
}
