//! Canonical mesh cells and the volume and boundary quadratures built on them.
//!
//! The interval is `[0, 1]`. Every other cell is centered on the origin with
//! radius one, i.e. `n·x = 1` on the boundary: boxes are `[-1, 1]^D`, simplices
//! are regular with inradius one, spheres are unit balls.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_ref, point, Point, QuadratureRule};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Interval,
    Box(usize),
    Simplex(usize),
    Sphere(usize),
}

impl CellKind {
    pub fn dim(self) -> usize {
        match self {
            CellKind::Interval => 1,
            CellKind::Box(d) | CellKind::Simplex(d) | CellKind::Sphere(d) => d,
        }
    }

    pub fn is_polytope(self) -> bool {
        !matches!(self, CellKind::Sphere(_))
    }

    /// Short name used by the CLI and in tables.
    pub fn name(self) -> String {
        match self {
            CellKind::Interval => "interval".into(),
            CellKind::Box(2) => "square".into(),
            CellKind::Box(3) => "cube".into(),
            CellKind::Simplex(2) => "triangle".into(),
            CellKind::Simplex(3) => "tetrahedron".into(),
            CellKind::Box(d) => format!("box{d}"),
            CellKind::Simplex(d) => format!("simplex{d}"),
            CellKind::Sphere(d) => format!("sphere{d}"),
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "interval" => CellKind::Interval,
            "square" | "box2" => CellKind::Box(2),
            "cube" | "box3" => CellKind::Box(3),
            "triangle" | "simplex2" => CellKind::Simplex(2),
            "tetrahedron" | "simplex3" => CellKind::Simplex(3),
            "sphere1" => CellKind::Sphere(1),
            "sphere2" | "disk" => CellKind::Sphere(2),
            "sphere3" | "ball" => CellKind::Sphere(3),
            other => return Err(Error::InvalidArgument(format!("unknown cell kind '{other}'"))),
        })
    }
}

/// An affine isometry `x -> matrix * x + shift` mapping the cell onto itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isometry {
    pub matrix: [[f64; 3]; 3],
    pub shift: [f64; 3],
}

impl Isometry {
    pub fn apply<T: Scalar>(&self, x: &Point<T>) -> Point<T> {
        let mut y = [T::zero(); 3];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::lit(self.shift[i]);
            for (j, xj) in x.iter().enumerate() {
                acc += T::lit(self.matrix[i][j]) * *xj;
            }
            *yi = acc;
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face<T> {
    /// Face measure `dA_e` (length, area, or 1 for a point face).
    pub measure: T,
    /// Weights sum to `measure`.
    pub rule: QuadratureRule<T>,
    pub normal: Point<T>,
    pub center: Point<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceSet<T> {
    pub faces: Vec<Face<T>>,
}

impl<T: Scalar> FaceSet<T> {
    pub fn total_measure(&self) -> T {
        self.faces.iter().map(|f| f.measure).sum()
    }

    /// Arithmetic mean over faces of the average on each face.
    pub fn face_average<F: FnMut(&Point<T>) -> T>(&self, mut f: F) -> T {
        let n = T::from_usize_lossy(self.faces.len());
        self.faces
            .iter()
            .map(|face| face.rule.integrate(&mut f) / face.measure)
            .sum::<T>()
            / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCell {
    kind: CellKind,
    vertices: Vec<[f64; 3]>,
}

/// Number of Gauss points in one direction integrating degree `q` exactly.
fn gl_points(q: usize) -> usize {
    q / 2 + 1
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let d = det3(m);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / d;
        }
    }
    inv
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Collapsed-coordinate rule on the reference simplex with vertices 0, e_1, .., e_D.
fn reference_simplex_rule(dim: usize, q: usize) -> Vec<([f64; 3], f64)> {
    match dim {
        1 => {
            let (x, w) = gauss_legendre_ref(gl_points(q));
            x.iter().zip(&w).map(|(&xi, &wi)| ([0.5 * (xi + 1.0), 0.0, 0.0], 0.5 * wi)).collect()
        }
        2 => {
            let (xu, wu) = gauss_legendre_ref(gl_points(q + 1));
            let (xv, wv) = gauss_legendre_ref(gl_points(q));
            let mut out = Vec::new();
            for (&a, &wa) in xu.iter().zip(&wu) {
                let u = 0.5 * (a + 1.0);
                for (&b, &wb) in xv.iter().zip(&wv) {
                    let v = 0.5 * (b + 1.0);
                    out.push(([u, v * (1.0 - u), 0.0], 0.25 * wa * wb * (1.0 - u)));
                }
            }
            out
        }
        3 => {
            let (xu, wu) = gauss_legendre_ref(gl_points(q + 2));
            let (xv, wv) = gauss_legendre_ref(gl_points(q + 1));
            let (xw, ww) = gauss_legendre_ref(gl_points(q));
            let mut out = Vec::new();
            for (&a, &wa) in xu.iter().zip(&wu) {
                let u = 0.5 * (a + 1.0);
                for (&b, &wb) in xv.iter().zip(&wv) {
                    let v = 0.5 * (b + 1.0);
                    for (&c, &wc) in xw.iter().zip(&ww) {
                        let w = 0.5 * (c + 1.0);
                        out.push((
                            [u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)],
                            0.125 * wa * wb * wc * (1.0 - u) * (1.0 - u) * (1.0 - v),
                        ));
                    }
                }
            }
            out
        }
        _ => unreachable!("simplex dimension checked at construction"),
    }
}

/// Maps a reference-simplex rule onto the simplex spanned by `verts`
/// (`verts.len() == dim + 1`), scaling weights to sum to its `dim`-measure.
fn mapped_simplex_rule(verts: &[[f64; 3]], q: usize) -> (Vec<[f64; 3]>, Vec<f64>, f64) {
    let dim = verts.len() - 1;
    let edges: Vec<[f64; 3]> = verts[1..].iter().map(|v| sub(v, &verts[0])).collect();
    let measure = simplex_measure(&edges);
    let reference = reference_simplex_rule(dim, q);
    let ref_measure: f64 = reference.iter().map(|(_, w)| w).sum();
    let mut pts = Vec::with_capacity(reference.len());
    let mut wts = Vec::with_capacity(reference.len());
    for (xi, w) in reference {
        let mut x = verts[0];
        for (e, c) in edges.iter().zip(xi.iter()) {
            for k in 0..3 {
                x[k] += c * e[k];
            }
        }
        pts.push(x);
        wts.push(w * measure / ref_measure);
    }
    (pts, wts, measure)
}

/// `dim`-measure of the simplex spanned by the edge vectors (Gram determinant).
fn simplex_measure(edges: &[[f64; 3]]) -> f64 {
    let d = edges.len();
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let g: Vec<Vec<f64>> = edges.iter().map(|a| edges.iter().map(|b| dot(a, b)).collect()).collect();
    let det = match d {
        1 => g[0][0],
        2 => g[0][0] * g[1][1] - g[0][1] * g[1][0],
        3 => det3(&[
            [g[0][0], g[0][1], g[0][2]],
            [g[1][0], g[1][1], g[1][2]],
            [g[2][0], g[2][1], g[2][2]],
        ]),
        _ => unreachable!(),
    };
    let fact = [1.0, 1.0, 2.0, 6.0][d];
    det.sqrt() / fact
}

impl CanonicalCell {
    pub fn new(kind: CellKind) -> Result<Self> {
        let s3 = 3f64.sqrt();
        let vertices = match kind {
            CellKind::Interval => vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            CellKind::Box(d @ (2 | 3)) => {
                let mut v = Vec::new();
                for mask in 0..(1usize << d) {
                    let mut p = [0.0; 3];
                    for (i, c) in p.iter_mut().enumerate().take(d) {
                        *c = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    }
                    v.push(p);
                }
                v
            }
            CellKind::Simplex(2) => vec![[0.0, 2.0, 0.0], [-s3, -1.0, 0.0], [s3, -1.0, 0.0]],
            CellKind::Simplex(3) => vec![
                [s3, s3, s3],
                [s3, -s3, -s3],
                [-s3, s3, -s3],
                [-s3, -s3, s3],
            ],
            CellKind::Sphere(1..=3) => Vec::new(),
            other => {
                return Err(Error::Unsupported(format!(
                    "cell kind {other:?} (boxes and simplices need D in 2..=3, spheres D in 1..=3)"
                )))
            }
        };
        Ok(Self { kind, vertices })
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    /// Centered on the origin with `n·x = 1` on the boundary.
    pub fn is_star_regular(&self) -> bool {
        !matches!(self.kind, CellKind::Interval)
    }

    pub fn center(&self) -> [f64; 3] {
        match self.kind {
            CellKind::Interval => [0.5, 0.0, 0.0],
            _ => [0.0; 3],
        }
    }

    pub fn volume(&self) -> f64 {
        match self.kind {
            CellKind::Interval => 1.0,
            CellKind::Box(d) => 2f64.powi(d as i32),
            CellKind::Simplex(2) => 3.0 * 3f64.sqrt(),
            CellKind::Simplex(_) => 8.0 * 3f64.sqrt(),
            CellKind::Sphere(1) => 2.0,
            CellKind::Sphere(2) => PI,
            CellKind::Sphere(_) => 4.0 * PI / 3.0,
        }
    }

    pub fn boundary_area(&self) -> f64 {
        match self.kind {
            CellKind::Interval => 2.0,
            CellKind::Sphere(1) => 2.0,
            CellKind::Sphere(2) => 2.0 * PI,
            CellKind::Sphere(_) => 4.0 * PI,
            // radius one: A = D V
            _ => self.dim() as f64 * self.volume(),
        }
    }

    /// Edge length of the cell (diameter along an edge); used for grid spacing.
    fn edge_length(&self) -> f64 {
        match self.kind {
            CellKind::Interval => 1.0,
            CellKind::Box(_) | CellKind::Sphere(_) => 2.0,
            CellKind::Simplex(2) => 2.0 * 3f64.sqrt(),
            CellKind::Simplex(_) => 2.0 * 6f64.sqrt(),
        }
    }

    /// Vertex sets of the faces (polytopes only).
    fn face_vertices(&self) -> Result<Vec<Vec<[f64; 3]>>> {
        match self.kind {
            CellKind::Interval => Ok(vec![vec![[0.0; 3]], vec![[1.0, 0.0, 0.0]]]),
            CellKind::Box(d) => {
                let mut faces = Vec::new();
                for axis in 0..d {
                    for side in [-1.0, 1.0] {
                        let verts = self
                            .vertices
                            .iter()
                            .filter(|v| v[axis] == side)
                            .copied()
                            .collect();
                        faces.push(verts);
                    }
                }
                Ok(faces)
            }
            CellKind::Simplex(_) => Ok((0..self.vertices.len())
                .map(|skip| {
                    self.vertices
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect()),
            CellKind::Sphere(_) => Err(Error::NoPolytopeFaces),
        }
    }

    /// Face centers (polytopes only).
    pub fn face_centers(&self) -> Result<Vec<[f64; 3]>> {
        Ok(self
            .face_vertices()?
            .iter()
            .map(|vs| {
                let n = vs.len() as f64;
                let mut c = [0.0; 3];
                for v in vs {
                    for k in 0..3 {
                        c[k] += v[k] / n;
                    }
                }
                c
            })
            .collect())
    }

    /// Face decomposition with per-face rules exact to `surface_degree`.
    pub fn face_set<T: Scalar>(&self, surface_degree: usize) -> Result<FaceSet<T>> {
        let dim = self.dim();
        let centers = self.face_centers()?;
        let mut faces = Vec::new();
        for (verts, center) in self.face_vertices()?.into_iter().zip(centers) {
            let (pts, wts, measure) = match self.kind {
                CellKind::Interval => (vec![verts[0]], vec![1.0], 1.0),
                CellKind::Box(_) => {
                    // tensor Gauss rule on the (D-1)-dimensional square face
                    let fixed = (0..dim).find(|&a| verts.iter().all(|v| v[a] == verts[0][a])).unwrap();
                    let free: Vec<usize> = (0..dim).filter(|&a| a != fixed).collect();
                    let (x, w) = gauss_legendre_ref(gl_points(surface_degree));
                    let mut pts = Vec::new();
                    let mut wts = Vec::new();
                    let mut idx = vec![0usize; free.len()];
                    loop {
                        let mut p = [0.0; 3];
                        p[fixed] = verts[0][fixed];
                        let mut wt = 1.0;
                        for (slot, &axis) in free.iter().enumerate() {
                            p[axis] = x[idx[slot]];
                            wt *= w[idx[slot]];
                        }
                        pts.push(p);
                        wts.push(wt);
                        let mut s = 0;
                        loop {
                            if s == idx.len() {
                                break;
                            }
                            idx[s] += 1;
                            if idx[s] < x.len() {
                                break;
                            }
                            idx[s] = 0;
                            s += 1;
                        }
                        if s == idx.len() {
                            break;
                        }
                    }
                    (pts, wts, 2f64.powi(free.len() as i32))
                }
                CellKind::Simplex(_) => mapped_simplex_rule(&verts, surface_degree),
                CellKind::Sphere(_) => unreachable!(),
            };
            let normal = match self.kind {
                CellKind::Interval => [if center[0] > 0.5 { 1.0 } else { -1.0 }, 0.0, 0.0],
                _ => {
                    let r = norm(&center);
                    [center[0] / r, center[1] / r, center[2] / r]
                }
            };
            faces.push(Face {
                measure: T::lit(measure),
                rule: QuadratureRule {
                    dim,
                    points: pts.iter().map(|p| p.map(T::lit)).collect(),
                    weights: wts.iter().map(|&w| T::lit(w)).collect(),
                    exactness: surface_degree,
                },
                normal: normal.map(T::lit),
                center: center.map(T::lit),
            });
        }
        Ok(FaceSet { faces })
    }

    /// Volume rule exact to `degree`, weights summing to the cell volume.
    pub fn volume_rule<T: Scalar>(&self, degree: usize) -> QuadratureRule<T> {
        let (pts, wts): (Vec<[f64; 3]>, Vec<f64>) = match self.kind {
            CellKind::Interval => {
                let (x, w) = gauss_legendre_ref(gl_points(degree));
                (
                    x.iter().map(|&xi| [0.5 * (xi + 1.0), 0.0, 0.0]).collect(),
                    w.iter().map(|&wi| 0.5 * wi).collect(),
                )
            }
            CellKind::Sphere(1) => {
                let (x, w) = gauss_legendre_ref(gl_points(degree));
                (x.iter().map(|&xi| [xi, 0.0, 0.0]).collect(), w)
            }
            CellKind::Box(d) => {
                let (x, w) = gauss_legendre_ref(gl_points(degree));
                let n = x.len();
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for flat in 0..n.pow(d as u32) {
                    let mut p = [0.0; 3];
                    let mut wt = 1.0;
                    let mut rem = flat;
                    for c in p.iter_mut().take(d) {
                        *c = x[rem % n];
                        wt *= w[rem % n];
                        rem /= n;
                    }
                    pts.push(p);
                    wts.push(wt);
                }
                (pts, wts)
            }
            CellKind::Simplex(_) => {
                let (p, w, _) = mapped_simplex_rule(&self.vertices, degree);
                (p, w)
            }
            CellKind::Sphere(2) => {
                let (xr, wr) = gauss_legendre_ref(gl_points(degree + 1));
                let na = degree + 1;
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for (&a, &wa) in xr.iter().zip(&wr) {
                    let r = 0.5 * (a + 1.0);
                    for j in 0..na {
                        let phi = 2.0 * PI * j as f64 / na as f64;
                        pts.push([r * phi.cos(), r * phi.sin(), 0.0]);
                        wts.push(0.5 * wa * r * 2.0 * PI / na as f64);
                    }
                }
                (pts, wts)
            }
            CellKind::Sphere(_) => {
                let (xr, wr) = gauss_legendre_ref(gl_points(degree + 2));
                let (pts_s, wts_s) = sphere_surface(degree);
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for (&a, &wa) in xr.iter().zip(&wr) {
                    let r = 0.5 * (a + 1.0);
                    for (s, &ws) in pts_s.iter().zip(&wts_s) {
                        pts.push([r * s[0], r * s[1], r * s[2]]);
                        wts.push(0.5 * wa * r * r * ws * 4.0 * PI);
                    }
                }
                (pts, wts)
            }
        };
        QuadratureRule {
            dim: self.dim(),
            points: pts.iter().map(|p| p.map(T::lit)).collect(),
            weights: wts.iter().map(|&w| T::lit(w)).collect(),
            exactness: degree,
        }
    }

    /// Rule computing the boundary average, weights summing to one.
    ///
    /// For polytopes this is the arithmetic mean over faces of each face
    /// average; for spheres it is the surface average.
    pub fn boundary_average_rule<T: Scalar>(&self, degree: usize) -> QuadratureRule<T> {
        let (pts, wts): (Vec<[f64; 3]>, Vec<f64>) = match self.kind {
            CellKind::Sphere(1) => (vec![[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], vec![0.5, 0.5]),
            CellKind::Sphere(2) => {
                let na = degree + 1;
                (
                    (0..na)
                        .map(|j| {
                            let phi = 2.0 * PI * j as f64 / na as f64;
                            [phi.cos(), phi.sin(), 0.0]
                        })
                        .collect(),
                    vec![1.0 / na as f64; na],
                )
            }
            CellKind::Sphere(_) => sphere_surface(degree),
            _ => {
                let fs = self.face_set::<f64>(degree).expect("polytope has faces");
                let nf = fs.faces.len() as f64;
                let mut pts = Vec::new();
                let mut wts = Vec::new();
                for f in &fs.faces {
                    for (p, w) in f.rule.points.iter().zip(&f.rule.weights) {
                        pts.push(*p);
                        wts.push(w / (f.measure * nf));
                    }
                }
                (pts, wts)
            }
        };
        QuadratureRule {
            dim: self.dim(),
            points: pts.iter().map(|p| p.map(T::lit)).collect(),
            weights: wts.iter().map(|&w| T::lit(w)).collect(),
            exactness: degree,
        }
    }

    /// Boundary points paired with outward unit normals, taken from the
    /// boundary rule of the given degree.
    pub fn boundary_samples(&self, degree: usize) -> Vec<([f64; 3], [f64; 3])> {
        match self.kind {
            CellKind::Sphere(_) => self
                .boundary_average_rule::<f64>(degree)
                .points
                .into_iter()
                .map(|p| (p, p))
                .collect(),
            _ => {
                let fs = self.face_set::<f64>(degree).expect("polytope");
                fs.faces
                    .iter()
                    .flat_map(|f| f.rule.points.iter().map(move |p| (*p, f.normal)))
                    .collect()
            }
        }
    }

    pub fn contains(&self, x: &[f64; 3], tol: f64) -> bool {
        match self.kind {
            CellKind::Interval => x[0] >= -tol && x[0] <= 1.0 + tol,
            CellKind::Box(d) => x.iter().take(d).all(|c| c.abs() <= 1.0 + tol),
            CellKind::Sphere(_) => norm(x) <= 1.0 + tol,
            CellKind::Simplex(_) => self.face_centers().unwrap().iter().all(|c| {
                // n = c for radius one
                c[0] * x[0] + c[1] * x[1] + c[2] * x[2] <= 1.0 + tol
            }),
        }
    }

    /// Symmetry group elements used to symmetrize polynomials.
    ///
    /// Finite for polytopes; spheres return the signed permutations (a finite
    /// subgroup of their isometries).
    pub fn isometries(&self) -> Vec<Isometry> {
        let id3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        match self.kind {
            CellKind::Interval => vec![
                Isometry { matrix: id3, shift: [0.0; 3] },
                Isometry { matrix: [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], shift: [1.0, 0.0, 0.0] },
            ],
            CellKind::Box(d) | CellKind::Sphere(d) => {
                let mut out = Vec::new();
                for perm in permutations(d) {
                    for signs in 0..(1usize << d) {
                        let mut m = [[0.0; 3]; 3];
                        for (i, &j) in perm.iter().enumerate() {
                            m[i][j] = if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
                        }
                        for k in d..3 {
                            m[k][k] = 1.0;
                        }
                        out.push(Isometry { matrix: m, shift: [0.0; 3] });
                    }
                }
                out
            }
            CellKind::Simplex(d) => {
                // linear map sending v_i to v_sigma(i); determined by D vertices
                let mut basis = [[0.0; 3]; 3];
                for j in 0..3 {
                    for i in 0..3 {
                        basis[i][j] = if j < d { self.vertices[j + 1][i] } else if i == j { 1.0 } else { 0.0 };
                    }
                }
                let inv = inverse3(&basis);
                permutations(d + 1)
                    .into_iter()
                    .map(|sigma| {
                        let mut image = [[0.0; 3]; 3];
                        for j in 0..3 {
                            for i in 0..3 {
                                image[i][j] = if j < d {
                                    self.vertices[sigma[j + 1]][i]
                                } else if i == j {
                                    1.0
                                } else {
                                    0.0
                                };
                            }
                        }
                        let mut m = [[0.0; 3]; 3];
                        for i in 0..3 {
                            for j in 0..3 {
                                m[i][j] = (0..3).map(|k| image[i][k] * inv[k][j]).sum();
                            }
                        }
                        Isometry { matrix: m, shift: [0.0; 3] }
                    })
                    .collect()
            }
        }
    }

    /// Lattice covering the cell, together with a bound on the diameter of the
    /// lattice simplices that triangulate it. Every point of the cell lies in a
    /// simplex with lattice vertices no longer than the returned diameter.
    pub fn lattice(&self, n: usize) -> Result<(Vec<[f64; 3]>, f64)> {
        let nf = n as f64;
        match self.kind {
            CellKind::Interval => Ok(((0..=n).map(|i| [i as f64 / nf, 0.0, 0.0]).collect(), 1.0 / nf)),
            CellKind::Box(d) => {
                let mut pts = Vec::new();
                for flat in 0..(n + 1).pow(d as u32) {
                    let mut p = [0.0; 3];
                    let mut rem = flat;
                    for c in p.iter_mut().take(d) {
                        *c = -1.0 + 2.0 * (rem % (n + 1)) as f64 / nf;
                        rem /= n + 1;
                    }
                    pts.push(p);
                }
                Ok((pts, 2.0 * (d as f64).sqrt() / nf))
            }
            CellKind::Simplex(d) => {
                let v = &self.vertices;
                let mut pts = Vec::new();
                let mut push = |c: &[usize]| {
                    let c0 = n - c.iter().sum::<usize>();
                    let mut p = [0.0; 3];
                    for k in 0..3 {
                        p[k] = v[0][k] * c0 as f64 / nf
                            + c.iter().enumerate().map(|(i, &ci)| v[i + 1][k] * ci as f64 / nf).sum::<f64>();
                    }
                    pts.push(p);
                };
                if d == 2 {
                    for a in 0..=n {
                        for b in 0..=(n - a) {
                            push(&[a, b]);
                        }
                    }
                } else {
                    for a in 0..=n {
                        for b in 0..=(n - a) {
                            for c in 0..=(n - a - b) {
                                push(&[a, b, c]);
                            }
                        }
                    }
                }
                let factor = if d == 2 { 1.0 } else { 2f64.sqrt() };
                Ok((pts, factor * self.edge_length() / nf))
            }
            CellKind::Sphere(_) => Err(Error::Unsupported("lattice triangulation of a sphere".into())),
        }
    }
}

/// Unit-sphere surface rule in 3D exact to `degree`, weights summing to one.
fn sphere_surface(degree: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let (xt, wt) = gauss_legendre_ref(gl_points(degree));
    let na = degree + 1;
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for (&ct, &w) in xt.iter().zip(&wt) {
        let st = (1.0 - ct * ct).sqrt();
        for j in 0..na {
            let phi = 2.0 * PI * j as f64 / na as f64;
            pts.push([st * phi.cos(), st * phi.sin(), ct]);
            wts.push(0.5 * w / na as f64);
        }
    }
    (pts, wts)
}

/// Point on the physical interval `[lo, lo + dx]` for a canonical coordinate in `[0, 1]`.
pub fn to_physical<T: Scalar>(lo: T, dx: T, xi: T) -> T {
    lo + dx * xi
}

pub(crate) fn cast_point<T: Scalar>(p: &[f64; 3]) -> Point<T> {
    point(&[T::lit(p[0]), T::lit(p[1]), T::lit(p[2])])
}
