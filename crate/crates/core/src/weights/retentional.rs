//! Optimal retentional points: interior quadrature points which, combined with
//! the boundary average, reproduce the cell average on the representation space.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::geometry::{cast_point, CanonicalCell, CellKind};
use crate::linalg::least_squares;
use crate::poly::{PolySpace, SpaceKind};
use crate::quadrature::{gauss_lobatto, gauss_lobatto_end_weight, Point};
use crate::scalar::Scalar;
use crate::weights::{cubic_simplex_weight, quadratic_star_weight, to_f64};

/// Rule `avg_K p = sum w_x p(x) + W * B(p)` exact on the representation space.
#[derive(Debug, Clone, PartialEq)]
pub struct RetentionalPoints<T> {
    pub points: Vec<Point<T>>,
    pub weights: Vec<T>,
    /// Boundary weight `W = 1 / M`.
    pub boundary_weight: T,
    pub boundary_weight_exact: Rational64,
}

impl<T: Scalar> RetentionalPoints<T> {
    /// Interior weight `M = 1 / W`.
    pub fn interior_weight(&self) -> Rational64 {
        self.boundary_weight_exact.recip()
    }

    /// Largest deviation of the rule from the cell average over the basis of `space`.
    pub fn max_residual(&self, space: &PolySpace<T>) -> T {
        let n = space.dim();
        let mut vals = vec![T::zero(); n];
        let mut acc: Vec<T> = (0..n)
            .map(|j| {
                let cell_avg = if j == 0 { T::one() } else { T::zero() };
                cell_avg - self.boundary_weight * space.boundary_of_modes()[j]
            })
            .collect();
        for (x, &w) in self.points.iter().zip(&self.weights) {
            space.basis_values(x, &mut vals);
            for (a, v) in acc.iter_mut().zip(&vals) {
                *a -= w * *v;
            }
        }
        acc.into_iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

fn empty<T: Scalar>() -> RetentionalPoints<T> {
    RetentionalPoints {
        points: Vec::new(),
        weights: Vec::new(),
        boundary_weight: T::one(),
        boundary_weight_exact: Rational64::from_integer(1),
    }
}

fn center_only<T: Scalar>(cell: &CanonicalCell, dim: usize) -> RetentionalPoints<T> {
    let w = quadratic_star_weight(dim).recip();
    RetentionalPoints {
        points: vec![cast_point(&cell.center())],
        weights: vec![T::one() - T::from_ratio(w)],
        boundary_weight: T::from_ratio(w),
        boundary_weight_exact: w,
    }
}

/// Retentional points for the supported (cell, degree) pairs of total-degree spaces.
pub fn retentional_points<T: Scalar>(cell: CellKind, k: usize) -> Result<RetentionalPoints<T>> {
    let geometry = CanonicalCell::new(cell)?;
    let unsupported = || {
        Err(Error::Unsupported(format!(
            "no retentional points known for {} at degree {k}; use tabulated_weight (retentional limiting needs no points)",
            cell.name()
        )))
    };
    match cell {
        CellKind::Interval => {
            let n = k / 2;
            if n == 0 {
                return Ok(empty());
            }
            let gl = gauss_lobatto::<T>(n);
            let w = gauss_lobatto_end_weight(n) * 2;
            Ok(RetentionalPoints {
                points: gl.points[1..=n].to_vec(),
                weights: gl.weights[1..=n].to_vec(),
                boundary_weight: T::from_ratio(w),
                boundary_weight_exact: w,
            })
        }
        _ if k <= 1 => Ok(empty()),
        CellKind::Box(d) | CellKind::Sphere(d) if k <= 3 => Ok(center_only(&geometry, d)),
        CellKind::Simplex(d) if k == 2 => Ok(center_only(&geometry, d)),
        CellKind::Simplex(d) if k == 3 => {
            let w = cubic_simplex_weight(d)?.recip();
            let space = PolySpace::<f64>::new(geometry.clone(), 3, SpaceKind::TotalDegree)?;
            let centers: Vec<Point<f64>> = geometry.face_centers()?.iter().map(cast_point).collect();
            let origin = cast_point::<f64>(&geometry.center());
            let n = space.dim();
            let mut at_center = vec![0.0; n];
            space.basis_values(&origin, &mut at_center);
            let mut at_faces = vec![0.0; n];
            let mut vals = vec![0.0; n];
            for c in &centers {
                space.basis_values(c, &mut vals);
                for (a, v) in at_faces.iter_mut().zip(&vals) {
                    *a += v;
                }
            }
            let rows: Vec<Vec<f64>> = (0..n).map(|j| vec![at_center[j], at_faces[j]]).collect();
            let rhs: Vec<f64> = (0..n)
                .map(|j| (if j == 0 { 1.0 } else { 0.0 }) - to_f64(w) * space.boundary_of_modes()[j])
                .collect();
            let (sol, resid) = least_squares(&rows, &rhs)
                .ok_or_else(|| Error::InvalidArgument("singular retentional system".into()))?;
            if resid > 1e-11 || sol.iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "cubic retentional rule inconsistent (residual {resid:e})"
                )));
            }
            let mut points = vec![cast_point(&geometry.center())];
            let mut weights = vec![T::lit(sol[0])];
            for c in geometry.face_centers()? {
                points.push(cast_point(&c));
                weights.push(T::lit(sol[1]));
            }
            Ok(RetentionalPoints { points, weights, boundary_weight: T::from_ratio(w), boundary_weight_exact: w })
        }
        _ => unsupported(),
    }
}
