//! Explicit maximizers of the boundary crowding.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{cast_point, CanonicalCell, CellKind};
use crate::linalg::{null_space, orthonormal_span};
use crate::poly::{PolySpace, Polynomial, SpaceKind};
use crate::quadrature::gauss_lobatto;

/// `prod (x - x_i)^2` over the `n` interior Gauss-Lobatto points, as a member of
/// the degree-`2n` interval space. Its crowding is `(n+1)(n+2)/2`.
pub fn interval_optimizer(n: usize) -> Polynomial<f64> {
    let space = Arc::new(PolySpace::interval(2 * n));
    let gl = gauss_lobatto::<f64>(n);
    let roots: Vec<f64> = gl.points[1..=n].iter().map(|p| p[0]).collect();
    Polynomial::project(space, |x| roots.iter().map(|r| (x[0] - r).powi(2)).product())
}

/// Orthonormal coefficient vectors spanning the polynomials in `space` that are
/// invariant under the isometries of its cell (range of the averaging operator).
pub fn invariant_subspace(space: &PolySpace<f64>) -> Vec<Vec<f64>> {
    let group = space.cell().isometries();
    let n = space.dim();
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut unit = vec![0.0; n];
            unit[j] = 1.0;
            space.project_coeffs(|x| {
                group.iter().map(|g| space.eval(&unit, &g.apply(x))).sum::<f64>() / group.len() as f64
            })
        })
        .collect();
    orthonormal_span(&columns, 1e-9)
}

/// The isometry-invariant cubic on the triangle or tetrahedron vanishing at the
/// centroid and at the face centers, scaled to unit cell average.
pub fn invariant_cubic_optimizer(dim: usize) -> Result<Polynomial<f64>> {
    if !(2..=3).contains(&dim) {
        return Err(Error::Unsupported(format!("invariant cubic optimizer for D = {dim}")));
    }
    let cell = CanonicalCell::new(CellKind::Simplex(dim))?;
    let face_center = cell.face_centers()?[0];
    let space = Arc::new(PolySpace::<f64>::new(cell.clone(), 3, SpaceKind::TotalDegree)?);
    let inv = invariant_subspace(&space);
    let zeros = [cast_point::<f64>(&cell.center()), cast_point::<f64>(&face_center)];
    let conditions: Vec<Vec<f64>> = zeros.iter().map(|z| inv.iter().map(|v| space.eval(v, z)).collect()).collect();
    let ns = null_space(&conditions, 1e-10);
    if ns.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected a one-dimensional family of invariant cubics, found {}",
            ns.len()
        )));
    }
    let mut coeffs = vec![0.0; space.dim()];
    for (t, v) in ns[0].iter().zip(&inv) {
        for (c, vi) in coeffs.iter_mut().zip(v) {
            *c += t * vi;
        }
    }
    let avg = coeffs[0];
    for c in &mut coeffs {
        *c /= avg;
    }
    Polynomial::new(space, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{cubic_simplex_weight, interval_weight, to_f64};

    #[test]
    fn interval_optimizers_attain_closed_form() {
        for n in 1..=5 {
            let p = interval_optimizer(n);
            let c = p.boundary_crowding().unwrap();
            assert!((c - to_f64(interval_weight(2 * n))).abs() <= 1e-10, "n={n}: {c}");
        }
    }

    #[test]
    fn invariant_subspace_dimensions() {
        // invariants of degree <= 3: 1, r^2 and one cubic
        for d in [2, 3] {
            let cell = CanonicalCell::new(CellKind::Simplex(d)).unwrap();
            let s = PolySpace::<f64>::new(cell, 3, SpaceKind::TotalDegree).unwrap();
            assert_eq!(invariant_subspace(&s).len(), 3);
        }
        let sq = PolySpace::<f64>::new(CanonicalCell::new(CellKind::Box(2)).unwrap(), 3, SpaceKind::TotalDegree).unwrap();
        // 1, x^2 + y^2
        assert_eq!(invariant_subspace(&sq).len(), 2);
    }

    #[test]
    fn cubic_optimizers_attain_closed_form() {
        for d in [2, 3] {
            let p = invariant_cubic_optimizer(d).unwrap();
            let c = p.boundary_crowding().unwrap();
            assert!((c - to_f64(cubic_simplex_weight(d).unwrap())).abs() <= 1e-10, "D={d}: {c}");
        }
        assert!(invariant_cubic_optimizer(4).is_err());
    }

    #[test]
    fn triangle_optimizer_matches_barycentric_form() {
        // 1 - 4 s2 + 9 s3 in barycentric coordinates, up to scale
        let p = invariant_cubic_optimizer(2).unwrap();
        let cell = p.space.cell().clone();
        let (pts, _) = cell.lattice(7).unwrap();
        let bary = |x: &[f64; 3]| -> [f64; 3] {
            let fc = cell.face_centers().unwrap();
            // lambda_i = (1 - n_i . x) / 3 with n_i the normal of the face opposite vertex i
            let mut l = [0.0; 3];
            for i in 0..3 {
                l[i] = (1.0 - (fc[i][0] * x[0] + fc[i][1] * x[1])) / 3.0;
            }
            l
        };
        let reference = |x: &[f64; 3]| {
            let l = bary(x);
            let s2 = l[0] * l[1] + l[1] * l[2] + l[0] * l[2];
            let s3 = l[0] * l[1] * l[2];
            1.0 - 4.0 * s2 + 9.0 * s3
        };
        let scale = p.eval(&pts[0]) / reference(&pts[0]);
        for x in &pts {
            assert!((p.eval(x) - scale * reference(x)).abs() <= 1e-10);
        }
    }

    #[test]
    fn optimizers_are_nonnegative_and_touch_zero() {
        let tri = invariant_cubic_optimizer(2).unwrap();
        let tet = invariant_cubic_optimizer(3).unwrap();
        for p in [tri, tet] {
            let cell = p.space.cell().clone();
            let (mut pts, _) = cell.lattice(24).unwrap();
            pts.push(cell.center());
            pts.extend(cell.face_centers().unwrap());
            let min = pts.iter().map(|x| p.eval(x)).fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10, "{min}");
            assert!(min <= 1e-8);
        }
        for n in 1..=5 {
            let p = interval_optimizer(n);
            let gl = gauss_lobatto::<f64>(n);
            let mut pts: Vec<[f64; 3]> = (0..=2000).map(|i| [i as f64 / 2000.0, 0.0, 0.0]).collect();
            pts.extend(gl.points.iter().copied());
            let min = pts.iter().map(|x| p.eval(x)).fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10 && min <= 1e-8, "n={n}: {min}");
        }
    }
}
