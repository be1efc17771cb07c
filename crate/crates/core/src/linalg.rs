//! Eigenvalues of real symmetric tridiagonal matrices by the implicit QL method.

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Returns the eigenvalues of the symmetric tridiagonal matrix with main
/// diagonal `diag` and first off-diagonal `off` (`off.len() == diag.len() - 1`),
/// sorted ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(crate::error::invalid(format!(
            "off-diagonal length {} does not match dimension {}",
            off.len(),
            n
        )));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::DiagonalizationFailure { iterations: sweeps });
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    // underflow: split the matrix and restart at the same l
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if the matrix is numerically singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Linear least squares through the normal equations.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let m = rows.first()?.len();
    let mut ata = vec![vec![0.0; m]; m];
    let mut aty = vec![0.0; m];
    for (r, &v) in rows.iter().zip(y) {
        for i in 0..m {
            aty[i] += r[i] * v;
            for j in 0..m {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    solve_dense(ata, aty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
        let n = diag.len();
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diag[i]
            } else if i + 1 == j {
                off[i]
            } else if j + 1 == i {
                off[j]
            } else {
                0.0
            }
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    #[test]
    fn diagonal_matrix_is_sorted_diagonal() {
        let ev = tridiagonal_eigenvalues(&[3.0, -1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_eq!(ev, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let (a, b, c) = (1.5, -0.7, 0.3);
        let ev = tridiagonal_eigenvalues(&[a, c], &[b]).unwrap();
        let mean = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        assert!((ev[0] - (mean - rad)).abs() < 1e-14);
        assert!((ev[1] - (mean + rad)).abs() < 1e-14);
    }

    #[test]
    fn matches_dense_solver_on_charge_basis_matrix() {
        let ncut = 20i32;
        let (ej, ec) = (17.3, 0.21);
        let diag: Vec<f64> = (-ncut..=ncut).map(|n| 4.0 * ec * (n * n) as f64).collect();
        let off = vec![-0.5 * ej; diag.len() - 1];
        let ours = tridiagonal_eigenvalues(&diag, &off).unwrap();
        let dense = dense_eigenvalues(&diag, &off);
        for (a, b) in ours.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn dense_solve_against_nalgebra_lu() {
        let a = vec![vec![2.0, -1.0, 0.5], vec![0.3, 4.0, -2.0], vec![1.0, 1.0, 1.0]];
        let b = vec![1.0, -2.0, 0.25];
        let x = solve_dense(a.clone(), b.clone()).unwrap();
        let na = DMatrix::from_fn(3, 3, |i, j| a[i][j]);
        let nx = na.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..3 {
            assert!((x[i] - nx[i]).abs() < 1e-14);
        }
        assert!(solve_dense(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn least_squares_recovers_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 3.0 - 0.5 * i as f64).collect();
        let c = least_squares(&rows, &y).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-12 && (c[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        assert!(tridiagonal_eigenvalues(&[1.0, 2.0], &[]).is_err());
    }
}
