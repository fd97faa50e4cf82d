//! Householder QR with column pivoting for dense least-squares problems.
//!
//! Columns are equilibrated to unit norm before factorization, so rank
//! decisions and the condition estimate do not depend on column scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold below which trailing columns count as dependent.
pub const DEFAULT_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresSolution {
    pub coefficients: Vec<f64>,
    /// `||A x - b||_2` for the returned coefficients.
    pub residual_norm: f64,
    pub rank: usize,
    /// Ratio of the largest to the smallest retained pivot of the equilibrated matrix.
    pub condition_estimate: f64,
    /// Columns judged linearly dependent. Basic solutions give them zero coefficients.
    pub dropped_columns: Vec<usize>,
}

impl LeastSquaresSolution {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.coefficients.len()
    }
}

/// Minimizes `||A x - b||_2` for a row-major `rows x cols` matrix `a`.
pub fn solve_least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64], rcond: f64) -> Result<LeastSquaresSolution> {
    if a.len() != rows * cols || b.len() != rows {
        return Err(Error::ShapeMismatch {
            expected: format!("{rows}x{cols} matrix and {rows} right-hand-side values"),
            got: format!("{} matrix values and {} right-hand-side values", a.len(), b.len()),
        });
    }
    if cols == 0 {
        return Err(Error::InvalidConfig("least squares with no columns".into()));
    }
    if rows < cols {
        return Err(Error::Underdetermined {
            samples: rows,
            basis: cols,
        });
    }
    solve_basic(a, rows, cols, b, rcond)
}

/// Like [`solve_least_squares`] but accepts wide matrices, returning a basic
/// solution with at most `rows` nonzero coefficients.
pub fn solve_basic(a: &[f64], rows: usize, cols: usize, b: &[f64], rcond: f64) -> Result<LeastSquaresSolution> {
    solve(a, rows, cols, b, rcond, false)
}

/// Least-squares solution of smallest norm (in equilibrated coordinates),
/// for any shape. Dependent columns share the weight instead of being zeroed.
pub fn solve_min_norm(a: &[f64], rows: usize, cols: usize, b: &[f64], rcond: f64) -> Result<LeastSquaresSolution> {
    solve(a, rows, cols, b, rcond, true)
}

fn solve(a: &[f64], rows: usize, cols: usize, b: &[f64], rcond: f64, min_norm: bool) -> Result<LeastSquaresSolution> {
    if a.len() != rows * cols || b.len() != rows {
        return Err(Error::ShapeMismatch {
            expected: format!("{rows}x{cols} matrix and {rows} right-hand-side values"),
            got: format!("{} matrix values and {} right-hand-side values", a.len(), b.len()),
        });
    }
    if cols == 0 {
        return Err(Error::InvalidConfig("least squares with no columns".into()));
    }
    if let Some(i) = a.iter().chain(b).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("least-squares input entry {i} is not finite")));
    }

    // Column-major copy, equilibrated.
    let mut cm = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            cm[c * rows + r] = a[r * cols + c];
        }
    }
    let mut scale = vec![1.0; cols];
    for (c, s) in scale.iter_mut().enumerate() {
        let col = &mut cm[c * rows..(c + 1) * rows];
        let norm = norm2(col);
        if norm > 0.0 {
            *s = norm;
            col.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut diag = vec![0.0; cols];
    let steps = cols.min(rows);

    // Partial column norms, downdated after each step and recomputed when
    // cancellation makes the downdate unreliable.
    let mut partial: Vec<f64> = (0..cols).map(|c| norm2(&cm[c * rows..(c + 1) * rows])).collect();
    let mut reference = partial.clone();
    let tol = f64::EPSILON.sqrt();

    for j in 0..steps {
        let mut best = j;
        for c in j + 1..cols {
            if partial[c] > partial[best] {
                best = c;
            }
        }
        if best != j {
            for r in 0..rows {
                cm.swap(j * rows + r, best * rows + r);
            }
            perm.swap(j, best);
            partial.swap(j, best);
            reference.swap(j, best);
        }

        let (head, tail) = cm.split_at_mut((j + 1) * rows);
        let v = &mut head[j * rows + j..];
        let alpha = norm2(v);
        if alpha == 0.0 {
            diag[j] = 0.0;
            continue;
        }
        let beta = if v[0] > 0.0 { -alpha } else { alpha };
        v[0] -= beta;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        // Reflector H = I - 2 v v^T / (v^T v) maps the column to beta * e1.
        for c in 0..cols - j - 1 {
            let col = &mut tail[c * rows + j..(c + 1) * rows];
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            col.iter_mut().zip(v.iter()).for_each(|(x, vi)| *x -= f * vi);
        }
        let dot: f64 = v.iter().zip(&rhs[j..]).map(|(a, b)| a * b).sum();
        let f = 2.0 * dot / vnorm2;
        rhs[j..].iter_mut().zip(v.iter()).for_each(|(x, vi)| *x -= f * vi);
        diag[j] = beta;

        for c in j + 1..cols {
            if partial[c] == 0.0 {
                continue;
            }
            let r = cm[c * rows + j].abs() / partial[c];
            let t = (1.0 - r * r).max(0.0);
            let ratio = partial[c] / reference[c];
            if t * ratio * ratio <= tol {
                partial[c] = norm2(&cm[c * rows + j + 1..(c + 1) * rows]);
                reference[c] = partial[c];
            } else {
                partial[c] *= t.sqrt();
            }
        }
    }

    let max_pivot = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let rank = diag
        .iter()
        .take_while(|d| max_pivot > 0.0 && d.abs() > rcond * max_pivot)
        .count();

    // Back substitution on the leading rank x rank block of R.
    let r_at = |i: usize, c: usize| -> f64 {
        if i == c {
            diag[i]
        } else {
            cm[c * rows + i]
        }
    };
    let mut z = vec![0.0; cols];
    if min_norm && rank < cols {
        // Complete orthogonal decomposition: factor T^T = Q2 S for the leading
        // rank rows T of R, then z = Q2 [S^-T c; 0].
        let mut t = vec![0.0; cols * rank];
        for i in 0..rank {
            for c in i..cols {
                t[i * cols + c] = r_at(i, c);
            }
        }
        let mut vs: Vec<(Vec<f64>, f64)> = Vec::with_capacity(rank);
        let mut sdiag = vec![0.0; rank];
        for j in 0..rank {
            let (head, tail) = t.split_at_mut((j + 1) * cols);
            let col = &mut head[j * cols + j..];
            let alpha = norm2(col);
            let beta = if col[0] > 0.0 { -alpha } else { alpha };
            let mut v = col.to_vec();
            v[0] -= beta;
            let vnorm2: f64 = v.iter().map(|x| x * x).sum();
            for k in 0..rank - j - 1 {
                let other = &mut tail[k * cols + j..(k + 1) * cols];
                let dot: f64 = v.iter().zip(other.iter()).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                other.iter_mut().zip(&v).for_each(|(x, vi)| *x -= f * vi);
            }
            sdiag[j] = beta;
            vs.push((v, vnorm2));
        }
        // S[k][i] for k < i sits in column i of the reflected T^T, row k.
        let mut u = vec![0.0; rank];
        for i in 0..rank {
            let mut acc = rhs[i];
            for k in 0..i {
                acc -= t[i * cols + k] * u[k];
            }
            u[i] = acc / sdiag[i];
        }
        z[..rank].copy_from_slice(&u);
        for (j, (v, vnorm2)) in vs.iter().enumerate().rev() {
            let seg = &mut z[j..];
            let dot: f64 = v.iter().zip(seg.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            seg.iter_mut().zip(v).for_each(|(x, vi)| *x -= f * vi);
        }
    } else {
        for i in (0..rank).rev() {
            let mut acc = rhs[i];
            for (c, &zc) in z.iter().enumerate().take(rank).skip(i + 1) {
                acc -= r_at(i, c) * zc;
            }
            z[i] = acc / diag[i];
        }
    }
    let residual_norm = norm2(&rhs[rank..]);

    let mut coefficients = vec![0.0; cols];
    for (k, &col) in perm.iter().enumerate() {
        coefficients[col] = z[k] / scale[col];
    }
    let mut dropped_columns: Vec<usize> = perm[rank..].to_vec();
    dropped_columns.sort_unstable();
    let condition_estimate = if rank == 0 {
        f64::INFINITY
    } else {
        max_pivot / diag[rank - 1].abs()
    };

    Ok(LeastSquaresSolution {
        coefficients,
        residual_norm,
        rank,
        condition_estimate,
        dropped_columns,
    })
}

/// Euclidean norm with scaling against overflow and underflow.
fn norm2(xs: &[f64]) -> f64 {
    let max = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|x| (x / max) * (x / max)).sum();
    max * sum.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_columns_give_projection() {
        // Columns e1, e2 of R^3 scaled to be orthonormal.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = [s, s, s, -s, 0.0, 0.0];
        let y = [3.0 * s + 2.0 * s, 3.0 * s - 2.0 * s, 0.0];
        let sol = solve_least_squares(&a, 3, 2, &y, DEFAULT_RCOND).unwrap();
        // alpha = Phi^T y
        assert!((sol.coefficients[0] - 3.0).abs() < 1e-14);
        assert!((sol.coefficients[1] - 2.0).abs() < 1e-14);
        assert!(sol.residual_norm < 1e-14);
        assert_eq!(sol.rank, 2);
    }

    #[test]
    fn duplicate_column_is_dropped() {
        let rows = 10;
        let mut a = Vec::new();
        let mut y = Vec::new();
        for i in 0..rows {
            let x = i as f64 / 3.0;
            a.extend_from_slice(&[1.0, x, x]);
            y.push(2.0 + 4.0 * x);
        }
        let sol = solve_least_squares(&a, rows, 3, &y, DEFAULT_RCOND).unwrap();
        assert!(sol.rank_deficient());
        assert_eq!(sol.rank, 2);
        assert_eq!(sol.dropped_columns.len(), 1);
        let dropped = sol.dropped_columns[0];
        assert!(dropped == 1 || dropped == 2);
        assert_eq!(sol.coefficients[dropped], 0.0);
        assert!((sol.coefficients[1] + sol.coefficients[2] - 4.0).abs() < 1e-12);
        assert!((sol.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn inconsistent_system_residual() {
        // Fit a constant to (0, 2): best is 1 with residual sqrt(2).
        let sol = solve_least_squares(&[1.0, 1.0], 2, 1, &[0.0, 2.0], DEFAULT_RCOND).unwrap();
        assert!((sol.coefficients[0] - 1.0).abs() < 1e-15);
        assert!((sol.residual_norm - 2f64.sqrt()).abs() < 1e-15);
        assert!((sol.condition_estimate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            solve_least_squares(&[1.0, 2.0], 1, 2, &[1.0], DEFAULT_RCOND),
            Err(Error::Underdetermined { samples: 1, basis: 2 })
        ));
        assert!(matches!(
            solve_least_squares(&[1.0, f64::NAN], 2, 1, &[1.0, 1.0], DEFAULT_RCOND),
            Err(Error::NonFinite(_))
        ));
        assert!(solve_least_squares(&[1.0, 2.0], 2, 1, &[1.0], DEFAULT_RCOND).is_err());
    }

    #[test]
    fn wide_system_gets_basic_solution() {
        // x0 + x1 + x2 = 3, x0 - x2 = 0
        let a = [1.0, 1.0, 1.0, 1.0, 0.0, -1.0];
        let sol = solve_basic(&a, 2, 3, &[3.0, 0.0], DEFAULT_RCOND).unwrap();
        assert_eq!(sol.rank, 2);
        assert_eq!(sol.dropped_columns.len(), 1);
        assert!(sol.residual_norm < 1e-14);
        let c = &sol.coefficients;
        assert!((c[0] + c[1] + c[2] - 3.0).abs() < 1e-14);
        assert!((c[0] - c[2]).abs() < 1e-14);
    }

    #[test]
    fn min_norm_splits_duplicate_columns() {
        let rows = 6;
        let mut a = Vec::new();
        let mut y = Vec::new();
        for i in 0..rows {
            let x = i as f64;
            a.extend_from_slice(&[1.0, x, x]);
            y.push(1.0 + 4.0 * x);
        }
        let sol = solve_min_norm(&a, rows, 3, &y, DEFAULT_RCOND).unwrap();
        assert_eq!(sol.rank, 2);
        assert!((sol.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((sol.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((sol.coefficients[2] - 2.0).abs() < 1e-12);
        // wide system: x0 + x1 = 2 has minimum-norm solution (1, 1)
        let sol = solve_min_norm(&[1.0, 1.0], 1, 2, &[2.0], DEFAULT_RCOND).unwrap();
        assert!((sol.coefficients[0] - 1.0).abs() < 1e-15);
        assert!((sol.coefficients[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let sol = solve_least_squares(&[0.0; 6], 3, 2, &[1.0, 2.0, 3.0], DEFAULT_RCOND).unwrap();
        assert_eq!(sol.rank, 0);
        assert_eq!(sol.coefficients, vec![0.0, 0.0]);
        assert!((sol.residual_norm - 14f64.sqrt()).abs() < 1e-14);
    }
}
