//! Time-step controls: the approximate stability limit, the guaranteed
//! positivity step from the boundary weight, and direct outflow capping.

use crate::positivity::{real_roots, Affine};
use crate::riemann::State;
use crate::scalar::Scalar;

/// `dx / ((k + 1/2) lambda)`; `None` when `lambda` is not positive.
pub fn dt_stable_formula<T: Scalar>(dx: T, k: usize, lambda: T) -> Option<T> {
    (lambda > T::zero()).then(|| dx / ((T::from_usize_lossy(k) + T::half()) * lambda))
}

/// `W dx / (2 lambda)` with the boundary weight `W = 1 / M`.
pub fn dt_pos_formula<T: Scalar>(dx: T, w_bar: T, lambda: T) -> Option<T> {
    (lambda > T::zero()).then(|| w_bar * dx / (T::two() * lambda))
}

/// Pad actually targeted by outflow capping: never more than half the current
/// value, so a cell sitting at its pad still admits a positive step.
pub fn outflow_pad<T: Scalar>(pad: T, value: T) -> T {
    pad.min(value * T::half())
}

/// Time until an affine constraint reaches its pad under the average rate of
/// change `-rate`. `None` when the constraint is not decreasing.
pub fn affine_time_to_pad<T: Scalar>(f: &Affine<T>, bar: &State<T>, rate: &State<T>, pad: T) -> Option<T> {
    let value = f.apply(bar);
    let slope = f.coef[0] * rate[0] + f.coef[1] * rate[1] + f.coef[2] * rate[2];
    (slope > T::zero()).then(|| ((value - outflow_pad(pad, value)) / slope).max(T::zero()))
}

/// Largest `t` with density and pressure of `bar - t rate` at or above their
/// pads, in closed form: density is linear in `t` and `rho p` quadratic.
/// `None` when neither constraint is ever reached.
pub fn euler_time_to_pad<T: Scalar>(gamma: T, bar: &State<T>, rate: &State<T>, eps_rho: T, eps_p: T) -> Option<T> {
    let g1 = gamma - T::one();
    let eps_rho = outflow_pad(eps_rho, bar[0]);
    let p_bar = g1 * (bar[2] - bar[1] * bar[1] / (T::two() * bar[0]));
    let eps_p = outflow_pad(eps_p, p_bar);
    let t_rho = (rate[0] > T::zero()).then(|| ((bar[0] - eps_rho) / rate[0]).max(T::zero()));
    let (r, m, e) = (bar[0], bar[1], bar[2]);
    let (dr, dm, de) = (rate[0], rate[1], rate[2]);
    // q(t) = g1 (rho E - m^2 / 2) - eps_p rho along bar - t rate; the
    // coefficients cancel badly at high Mach, hence the compensated sums
    let a = g1 * dot2(&[(dr, de), (-dm, dm * T::half())]);
    let b = -g1 * dot2(&[(r, de), (dr, e), (-m, dm)]) + eps_p * dr;
    let c = g1 * dot2(&[(r, e), (-m, m * T::half())]) - eps_p * r;
    let t_p = real_roots(a, b, c).into_iter().filter(|t| *t > T::zero()).fold(None, |acc: Option<T>, t| {
        Some(acc.map_or(t, |x| x.min(t)))
    });
    match (t_rho, t_p) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

/// `sum x_i y_i` in twice the working precision (error-free products and sums).
fn dot2<T: Scalar>(terms: &[(T, T)]) -> T {
    let (mut s, mut c) = (T::zero(), T::zero());
    for &(x, y) in terms {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        c += (s - (t - z)) + (p - z) + pe;
        s = t;
    }
    s + c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn formula_instances() {
        assert_relative_eq!(dt_stable_formula(0.1, 2, 1.0).unwrap(), 0.04, epsilon = 1e-15);
        assert_relative_eq!(dt_stable_formula(0.1, 0, 1.0).unwrap(), 0.2, epsilon = 1e-15);
        assert!(dt_stable_formula(0.1, 2, 0.0).is_none());
        assert_relative_eq!(dt_pos_formula(0.1, 1.0 / 3.0, 1.0).unwrap(), 0.1 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(dt_pos_formula(0.1, 1.0, 1.0).unwrap(), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn scalar_outflow_cap() {
        let f = Affine { coef: [1.0, 0.0, 0.0], offset: 0.0, label: "u" };
        let t = affine_time_to_pad(&f, &State::scalar(1.0), &State::scalar(2.0), 0.0).unwrap();
        assert_eq!(0.7 * t, 0.35);
        assert!(affine_time_to_pad(&f, &State::scalar(1.0), &State::scalar(-2.0), 0.0).is_none());
        assert!(affine_time_to_pad(&f, &State::scalar(1.0), &State::scalar(0.0), 0.0).is_none());
    }

    #[test]
    fn dot2_recovers_cancelled_products() {
        let x = 1.0 + f64::EPSILON;
        // x*x - (1 + 2 eps) = eps^2 exactly, lost entirely by naive evaluation
        assert_eq!(x * x - (1.0 + 2.0 * f64::EPSILON), 0.0);
        assert_eq!(dot2(&[(x, x), (-1.0, 1.0 + 2.0 * f64::EPSILON)]), f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn euler_at_rest_never_limited_without_outflow() {
        let bar = State::euler(1.0, 0.0, 2.5);
        assert!(euler_time_to_pad(1.4, &bar, &State::zero(), 1e-12, 1e-12).is_none());
    }
}
