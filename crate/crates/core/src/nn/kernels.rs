//! Dense row-major matrix products for the three shapes backprop needs.
//!
//! Large products go through `matrixmultiply`; thin ones (a dimension below
//! `GEMM_MIN`) use loops that stay vectorizable along the long axis.

const GEMM_MIN: usize = 16;

#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: every caller passes a dense m x k (resp. k x n, m x n) operand,
    // possibly transposed via its strides; the lengths are checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ta.iter().zip(tb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut dst = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
    dst
}

/// `c (m x n) += a (m x k) * b^T`, with `b` stored `n x k`.
pub(crate) fn add_a_bt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    if m.min(k).min(n) >= GEMM_MIN {
        gemm(m, k, n, a, k, 1, b, 1, k, 1.0, c);
    } else if k >= n {
        for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
            for (cj, b_row) in c_row.iter_mut().zip(b.chunks_exact(k)) {
                *cj += dot(a_row, b_row);
            }
        }
    } else {
        let bt = transpose(b, n, k);
        add_a_b(a, &bt, c, m, k, n);
    }
}

/// `c (m x n) += a (m x k) * b (k x n)`.
pub(crate) fn add_a_b(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    if m.min(k).min(n) >= GEMM_MIN {
        gemm(m, k, n, a, k, 1, b, n, 1, 1.0, c);
    } else if n == 1 {
        for (a_row, cj) in a.chunks_exact(k).zip(c.iter_mut()) {
            *cj += dot(a_row, b);
        }
    } else {
        for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
            for (&aip, b_row) in a_row.iter().zip(b.chunks_exact(n)) {
                axpy(aip, b_row, c_row);
            }
        }
    }
}

/// `c (m x n) += a^T * b`, with `a` stored `r x m` and `b` stored `r x n`.
pub(crate) fn add_at_b(a: &[f64], b: &[f64], c: &mut [f64], r: usize, m: usize, n: usize) {
    if m.min(r).min(n) >= GEMM_MIN {
        gemm(m, r, n, a, 1, m, b, n, 1, 1.0, c);
        return;
    }
    if n >= m {
        for (a_row, b_row) in a.chunks_exact(m).zip(b.chunks_exact(n)) {
            for (&ai, c_row) in a_row.iter().zip(c.chunks_exact_mut(n)) {
                axpy(ai, b_row, c_row);
            }
        }
    } else {
        // accumulate c^T (n x m) with the long axis innermost, then transpose back
        let mut ct = vec![0.0; n * m];
        for (a_row, b_row) in a.chunks_exact(m).zip(b.chunks_exact(n)) {
            for (&bj, ct_row) in b_row.iter().zip(ct.chunks_exact_mut(m)) {
                axpy(bj, a_row, ct_row);
            }
        }
        for (cv, tv) in c.iter_mut().zip(transpose(&ct, n, m)) {
            *cv += tv;
        }
    }
}
