//! One-dimensional Gauss rules and the generic [`QuadratureRule`] container.
//!
//! Nodes are found by Newton iteration on Legendre polynomials in `f64` and then
//! rounded once into the target scalar type.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Position in canonical coordinates. Cells have dimension at most three;
/// unused trailing coordinates are zero.
pub type Point<T> = [T; 3];

pub fn point<T: Scalar>(coords: &[T]) -> Point<T> {
    let mut p = [T::zero(); 3];
    p[..coords.len()].copy_from_slice(coords);
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    pub dim: usize,
    pub points: Vec<Point<T>>,
    pub weights: Vec<T>,
    /// Total polynomial degree integrated exactly.
    pub exactness: usize,
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub fn integrate<F: FnMut(&Point<T>) -> T>(&self, mut f: F) -> T {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, &w)| w * f(x))
            .sum()
    }

    /// Rescales the weights so they sum to one (the rule then computes an average).
    pub fn normalized(mut self) -> Self {
        let total = self.total_weight();
        for w in &mut self.weights {
            *w /= total;
        }
        self
    }

    pub fn scaled(mut self, factor: T) -> Self {
        for w in &mut self.weights {
            *w *= factor;
        }
        self
    }

    pub(crate) fn cast<S: Scalar>(&self) -> QuadratureRule<S> {
        QuadratureRule {
            dim: self.dim,
            points: self
                .points
                .iter()
                .map(|p| p.map(|c| S::lit(c.to_f64_lossy())))
                .collect(),
            weights: self.weights.iter().map(|w| S::lit(w.to_f64_lossy())).collect(),
            exactness: self.exactness,
        }
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub(crate) fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for j in 2..=n {
        let jf = j as f64;
        let p_next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(±1) = (±1)^{n+1} n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub(crate) fn gauss_legendre_ref(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`, weights summing to one.
pub fn gauss_legendre<T: Scalar>(n: usize) -> Result<QuadratureRule<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "Gauss-Legendre rule needs at least one point".into(),
        ));
    }
    let (x, w) = gauss_legendre_ref(n);
    Ok(QuadratureRule {
        dim: 1,
        points: x.iter().map(|&xi| point(&[T::lit(0.5 * (xi + 1.0))])).collect(),
        weights: w.iter().map(|&wi| T::lit(0.5 * wi)).collect(),
        exactness: 2 * n - 1,
    })
}

/// Gauss-Lobatto nodes on `[-1, 1]` with `n_interior` interior points.
pub(crate) fn gauss_lobatto_ref(n_interior: usize) -> (Vec<f64>, Vec<f64>) {
    let total = n_interior + 2;
    let deg = total - 1;
    let mut nodes = vec![-1.0];
    for i in 1..=n_interior {
        // interior nodes are the roots of P'_deg; Chebyshev-Lobatto initial guess
        let mut x = -(std::f64::consts::PI * i as f64 / deg as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(deg, x);
            let d2p = (2.0 * x * dp - (deg * (deg + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        nodes.push(x);
    }
    nodes.push(1.0);
    let norm = 2.0 / (deg * total) as f64;
    let weights = nodes
        .iter()
        .map(|&x| {
            let (p, _) = legendre_with_derivative(deg, x);
            norm / (p * p)
        })
        .collect();
    (nodes, weights)
}

/// Gauss-Lobatto rule on `[0, 1]` including both endpoints, weights summing to one.
///
/// Exact for degree `2 n_interior + 1`. The endpoint weight is
/// `1 / ((n + 1)(n + 2))`, see [`gauss_lobatto_end_weight`].
pub fn gauss_lobatto<T: Scalar>(n_interior: usize) -> QuadratureRule<T> {
    let (x, w) = gauss_lobatto_ref(n_interior);
    let end = gauss_lobatto_end_weight(n_interior);
    let last = x.len() - 1;
    QuadratureRule {
        dim: 1,
        points: x.iter().map(|&xi| point(&[T::lit(0.5 * (xi + 1.0))])).collect(),
        weights: w
            .iter()
            .enumerate()
            .map(|(i, &wi)| {
                if i == 0 || i == last {
                    T::from_ratio(end)
                } else {
                    T::lit(0.5 * wi)
                }
            })
            .collect(),
        exactness: 2 * n_interior + 1,
    }
}

/// Exact endpoint weight of the normalized Gauss-Lobatto rule with `n_interior`
/// interior points.
pub fn gauss_lobatto_end_weight(n_interior: usize) -> Rational64 {
    let n = n_interior as i64;
    Rational64::new(1, (n + 1) * (n + 2))
}
