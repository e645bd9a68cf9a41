//! Representation spaces on canonical cells and the linear functionals on them.
//!
//! Every space carries a basis that is orthonormal under the cell-average inner
//! product `<f, g> = avg_K f g`, so the first basis function is the constant 1 and
//! the cell average is the first coefficient.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CanonicalCell, CellKind};
use crate::quadrature::{Point, QuadratureRule};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    /// `P^k_D`: total degree at most k.
    #[default]
    TotalDegree,
    /// `Q^k`: degree at most k in each variable.
    TensorProduct,
}

#[derive(Debug, Clone, PartialEq)]
enum Basis<T> {
    /// `sqrt(2j+1) P_j(2x - 1)` on `[0, 1]`.
    Legendre,
    /// `phi_j = sum_i coef[j][i] * x^{e_i}` (lower triangular).
    Monomial { coef: Vec<Vec<T>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolySpace<T> {
    cell: CanonicalCell,
    degree: usize,
    kind: SpaceKind,
    exponents: Vec<[u32; 3]>,
    basis: Basis<T>,
    /// Normalized volume rule exact to degree `2 * max_total_degree`.
    average_rule: QuadratureRule<T>,
    /// Normalized boundary-average rule exact to `max_total_degree`.
    boundary_rule: QuadratureRule<T>,
    /// Boundary average of each basis function.
    boundary_of_mode: Vec<T>,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn exponent_set(dim: usize, degree: usize, kind: SpaceKind) -> Vec<[u32; 3]> {
    let k = degree as u32;
    let range = |active: bool| if active { 0..=k } else { 0..=0 };
    let mut out = Vec::new();
    for a in range(true) {
        for b in range(dim > 1) {
            for c in range(dim > 2) {
                let keep = match kind {
                    SpaceKind::TotalDegree => a + b + c <= k,
                    SpaceKind::TensorProduct => true,
                };
                if keep {
                    out.push([a, b, c]);
                }
            }
        }
    }
    // graded order so that the constant comes first and truncation by degree is a prefix
    out.sort_by_key(|e| (e[0] + e[1] + e[2], std::cmp::Reverse(*e)));
    out
}

fn monomial<T: Scalar>(x: &Point<T>, e: &[u32; 3]) -> T {
    x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32)
}

/// Orthonormal Legendre values `sqrt(2j+1) P_j(2x-1)` for `j = 0..=k`.
pub(crate) fn legendre_values<T: Scalar>(k: usize, x: T, out: &mut [T]) {
    let s = T::two() * x - T::one();
    let mut p_prev = T::one();
    let mut p = s;
    for j in 0..=k {
        let pj = match j {
            0 => T::one(),
            1 => s,
            _ => {
                let jf = T::from_usize_lossy(j);
                let next = ((T::two() * jf - T::one()) * s * p - (jf - T::one()) * p_prev) / jf;
                p_prev = p;
                p = next;
                next
            }
        };
        out[j] = T::from_usize_lossy(2 * j + 1).sqrt() * pj;
    }
}

/// Derivatives in x of the orthonormal Legendre basis on `[0, 1]`.
pub(crate) fn legendre_derivatives<T: Scalar>(k: usize, x: T, out: &mut [T]) {
    // d/dx P_j(2x-1) = 2 P_j'(s); P_j' = sum over l = j-1, j-3, .. of (2l+1) P_l
    let mut vals = vec![T::zero(); k + 1];
    legendre_values(k, x, &mut vals);
    for j in 0..=k {
        let mut acc = T::zero();
        let mut l = j as isize - 1;
        while l >= 0 {
            // vals[l] = sqrt(2l+1) P_l
            acc += T::from_usize_lossy(2 * l as usize + 1).sqrt() * vals[l as usize];
            l -= 2;
        }
        out[j] = T::two() * T::from_usize_lossy(2 * j + 1).sqrt() * acc;
    }
}

impl<T: Scalar> PolySpace<T> {
    pub fn new(cell: CanonicalCell, degree: usize, kind: SpaceKind) -> Result<Self> {
        let dim = cell.dim();
        let exponents = exponent_set(dim, degree, kind);
        let max_deg = exponents.iter().map(|e| (e[0] + e[1] + e[2]) as usize).max().unwrap_or(0);
        let avg64 = cell.volume_rule::<f64>(2 * max_deg).normalized();
        let basis = if cell.kind() == CellKind::Interval {
            Basis::Legendre
        } else {
            Basis::Monomial { coef: gram_schmidt(&exponents, &avg64) }
        };
        let average_rule = avg64.cast::<T>();
        let boundary_rule = cell.boundary_average_rule::<T>(max_deg);
        let mut space = Self {
            cell,
            degree,
            kind,
            exponents,
            basis,
            average_rule,
            boundary_rule,
            boundary_of_mode: Vec::new(),
        };
        space.boundary_of_mode = match space.basis {
            Basis::Legendre => (0..space.dim())
                .map(|j| {
                    if j % 2 == 0 {
                        T::from_usize_lossy(2 * j + 1).sqrt()
                    } else {
                        T::zero()
                    }
                })
                .collect(),
            Basis::Monomial { .. } => {
                let mut acc = vec![T::zero(); space.dim()];
                let mut vals = vec![T::zero(); space.dim()];
                for (x, &w) in space.boundary_rule.points.iter().zip(&space.boundary_rule.weights) {
                    space.basis_values(x, &mut vals);
                    for (a, v) in acc.iter_mut().zip(&vals) {
                        *a += w * *v;
                    }
                }
                acc
            }
        };
        Ok(space)
    }

    /// One-dimensional Legendre space on the `[0, 1]` interval.
    pub fn interval(degree: usize) -> Self {
        Self::new(CanonicalCell::new(CellKind::Interval).expect("interval"), degree, SpaceKind::TotalDegree)
            .expect("interval space")
    }

    pub fn cell(&self) -> &CanonicalCell {
        &self.cell
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Number of basis functions.
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Expected dimension from the counting formula.
    pub fn expected_dim(dim: usize, degree: usize, kind: SpaceKind) -> usize {
        match kind {
            SpaceKind::TotalDegree => binomial(degree + dim, dim),
            SpaceKind::TensorProduct => (degree + 1).pow(dim as u32),
        }
    }

    pub fn exponents(&self) -> &[[u32; 3]] {
        &self.exponents
    }

    pub fn average_rule(&self) -> &QuadratureRule<T> {
        &self.average_rule
    }

    /// Normalized boundary-average rule exact to the space's top degree.
    pub fn boundary_rule(&self) -> &QuadratureRule<T> {
        &self.boundary_rule
    }

    /// Coefficients in the monomial basis (exponents as in [`Self::exponents`]),
    /// or `None` for the Legendre interval basis.
    pub fn monomial_coefficients(&self, coeffs: &[T]) -> Option<Vec<T>> {
        match &self.basis {
            Basis::Legendre => None,
            Basis::Monomial { coef } => {
                let mut out = vec![T::zero(); self.dim()];
                for (c, row) in coeffs.iter().zip(coef) {
                    for (o, r) in out.iter_mut().zip(row) {
                        *o += *c * *r;
                    }
                }
                Some(out)
            }
        }
    }

    pub fn basis_values(&self, x: &Point<T>, out: &mut [T]) {
        match &self.basis {
            Basis::Legendre => legendre_values(self.degree, x[0], out),
            Basis::Monomial { coef } => {
                let mono: Vec<T> = self.exponents.iter().map(|e| monomial(x, e)).collect();
                for (o, row) in out.iter_mut().zip(coef) {
                    *o = row.iter().zip(&mono).map(|(c, m)| *c * *m).sum();
                }
            }
        }
    }

    pub fn eval(&self, coeffs: &[T], x: &Point<T>) -> T {
        let mut vals = vec![T::zero(); self.dim()];
        self.basis_values(x, &mut vals);
        coeffs.iter().zip(&vals).map(|(c, v)| *c * *v).sum()
    }

    pub fn cell_average(&self, coeffs: &[T]) -> T {
        coeffs[0]
    }

    /// Boundary average: face average for polytopes, surface average for spheres.
    pub fn boundary_average(&self, coeffs: &[T]) -> T {
        coeffs.iter().zip(&self.boundary_of_mode).map(|(c, b)| *c * *b).sum()
    }

    /// Boundary average of each basis function.
    pub fn boundary_of_modes(&self) -> &[T] {
        &self.boundary_of_mode
    }

    /// Arithmetic mean over faces of each face average.
    pub fn boundary_face_average(&self, coeffs: &[T]) -> Result<T> {
        if !self.cell.kind().is_polytope() {
            return Err(Error::NoPolytopeFaces);
        }
        Ok(self.boundary_average(coeffs))
    }

    /// Ratio of boundary average to cell average.
    pub fn boundary_crowding(&self, coeffs: &[T]) -> Result<T> {
        let avg = self.cell_average(coeffs);
        if !(avg > T::zero()) {
            return Err(Error::CrowdingUndefined(avg.to_f64_lossy()));
        }
        Ok(self.boundary_average(coeffs) / avg)
    }

    /// L2 projection using the degree-2k average rule.
    pub fn project_coeffs<F: FnMut(&Point<T>) -> T>(&self, mut f: F) -> Vec<T> {
        let mut coeffs = vec![T::zero(); self.dim()];
        let mut vals = vec![T::zero(); self.dim()];
        for (x, &w) in self.average_rule.points.iter().zip(&self.average_rule.weights) {
            let fx = f(x);
            self.basis_values(x, &mut vals);
            for (c, v) in coeffs.iter_mut().zip(&vals) {
                *c += w * fx * *v;
            }
        }
        coeffs
    }

    /// Upper bound on `|phi_j|` over the cell for each mode.
    pub fn mode_bounds(&self) -> Vec<T> {
        match &self.basis {
            Basis::Legendre => (0..self.dim()).map(|j| T::from_usize_lossy(2 * j + 1).sqrt()).collect(),
            Basis::Monomial { coef } => {
                // |x_i| <= R on the cell, so |x^e| <= R^{|e|}
                let r = self
                    .cell
                    .vertices()
                    .iter()
                    .flat_map(|v| v.iter().map(|c| c.abs()))
                    .fold(1.0f64, f64::max);
                coef.iter()
                    .map(|row| {
                        row.iter()
                            .zip(&self.exponents)
                            .map(|(c, e)| c.abs() * T::lit(r.powi((e[0] + e[1] + e[2]) as i32)))
                            .sum()
                    })
                    .collect()
            }
        }
    }
}

/// Modified Gram-Schmidt (two passes) of the monomials under the average rule.
fn gram_schmidt<T: Scalar>(exponents: &[[u32; 3]], rule: &QuadratureRule<f64>) -> Vec<Vec<T>> {
    let n = exponents.len();
    let m = rule.len();
    // values[j][q] of the current basis function j at node q
    let mono: Vec<Vec<f64>> = exponents
        .iter()
        .map(|e| rule.points.iter().map(|x| monomial(x, e)).collect())
        .collect();
    let inner = |a: &[f64], b: &[f64]| -> f64 { (0..m).map(|q| rule.weights[q] * a[q] * b[q]).sum() };
    let mut coef: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut vals: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut c = vec![0.0; n];
        c[j] = 1.0;
        let mut v = mono[j].clone();
        for _pass in 0..2 {
            for i in 0..j {
                let r = inner(&v, &vals[i]);
                for q in 0..m {
                    v[q] -= r * vals[i][q];
                }
                for l in 0..n {
                    c[l] -= r * coef[i][l];
                }
            }
        }
        let nrm = inner(&v, &v).sqrt();
        for q in 0..m {
            v[q] /= nrm;
        }
        for l in 0..n {
            c[l] /= nrm;
        }
        coef.push(c);
        vals.push(v);
    }
    coef.into_iter().map(|row| row.into_iter().map(T::lit).collect()).collect()
}

/// A member of a representation space.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    pub space: Arc<PolySpace<T>>,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn new(space: Arc<PolySpace<T>>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                space.dim()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn constant(space: Arc<PolySpace<T>>, c: T) -> Self {
        let mut coeffs = vec![T::zero(); space.dim()];
        coeffs[0] = c;
        Self { space, coeffs }
    }

    pub fn project<F: FnMut(&Point<T>) -> T>(space: Arc<PolySpace<T>>, f: F) -> Self {
        let coeffs = space.project_coeffs(f);
        Self { space, coeffs }
    }

    pub fn eval(&self, x: &Point<T>) -> T {
        self.space.eval(&self.coeffs, x)
    }

    pub fn cell_average(&self) -> T {
        self.space.cell_average(&self.coeffs)
    }

    pub fn boundary_average(&self) -> T {
        self.space.boundary_average(&self.coeffs)
    }

    pub fn boundary_face_average(&self) -> Result<T> {
        self.space.boundary_face_average(&self.coeffs)
    }

    pub fn boundary_crowding(&self) -> Result<T> {
        self.space.boundary_crowding(&self.coeffs)
    }

    /// `s * self + t * other` in the same space.
    pub fn combine(&self, s: T, other: &Self, t: T) -> Self {
        Self {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| s * *a + t * *b).collect(),
        }
    }
}
