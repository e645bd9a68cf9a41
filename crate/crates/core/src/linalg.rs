//! Small dense linear algebra on `f64` used by the weights engine.

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` for a numerically singular matrix.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Least-squares solution of an overdetermined system via normal equations,
/// together with the maximum absolute residual.
pub(crate) fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = a.first()?.len();
    let mut ata = vec![vec![0.0; n]; n];
    let mut atb = vec![0.0; n];
    for (row, &bi) in a.iter().zip(b) {
        for i in 0..n {
            atb[i] += row[i] * bi;
            for j in 0..n {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let x = solve(ata, atb)?;
    let resid = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| (row.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>() - bi).abs())
        .fold(0.0, f64::max);
    Some((x, resid))
}

/// Orthonormal basis (Euclidean) for the span of the given vectors, dropping
/// directions with relative norm below `tol`.
pub(crate) fn orthonormal_span(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let scale = vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _pass in 0..2 {
            for b in &basis {
                let r: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= r * bi;
                }
            }
        }
        let nrm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > tol * scale.max(1e-300) {
            basis.push(w.into_iter().map(|x| x / nrm).collect());
        }
    }
    basis
}

/// Basis of the null space of the `m x n` matrix `a` (row echelon with pivoting).
pub(crate) fn null_space(a: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let mut r: Vec<Vec<f64>> = a.to_vec();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == m {
            break;
        }
        let piv = (row..m).max_by(|&i, &j| r[i][col].abs().total_cmp(&r[j][col].abs())).unwrap();
        if r[piv][col].abs() <= tol {
            continue;
        }
        r.swap(row, piv);
        let p = r[row][col];
        for k in 0..n {
            r[row][k] /= p;
        }
        for i in 0..m {
            if i != row {
                let f = r[i][col];
                if f != 0.0 {
                    for k in 0..n {
                        r[i][k] -= f * r[row][k];
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![0.0; n];
            v[fc] = 1.0;
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = -r[i][fc];
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn null_space_of_rank_one() {
        let ns = null_space(&[vec![1.0, 1.0, 1.0]], 1e-12);
        assert_eq!(ns.len(), 2);
        for v in ns {
            assert!(v.iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn span_drops_dependent_vectors() {
        let b = orthonormal_span(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.0]], 1e-10);
        assert_eq!(b.len(), 2);
    }
}
