//! DP tile kernels on row-major buffers.

/// In-place lower Cholesky of an `n x n` tile; on failure returns the row of
/// the first non-positive pivot.
pub fn potrf(a: &mut [f64], n: usize) -> Result<(), usize> {
    crate::linalg::cholesky_lower(a, n)
}

/// Solves `X Lᵀ = A` for `X`, overwriting `a` (`rows x n`) with `X`.
pub fn trsm(l: &[f64], n: usize, a: &mut [f64], rows: usize) {
    for r in 0..rows {
        let x = &mut a[r * n..(r + 1) * n];
        for c in 0..n {
            let lrow = &l[c * n..c * n + c];
            let s = dot(&x[..c], lrow);
            x[c] = (x[c] - s) / l[c * n + c];
        }
    }
}

/// `C -= A Aᵀ` on the lower triangle of the `rows x rows` tile `c`.
pub fn syrk(a: &[f64], rows: usize, inner: usize, c: &mut [f64]) {
    for r in 0..rows {
        let ar = &a[r * inner..(r + 1) * inner];
        for s in 0..=r {
            c[r * rows + s] -= dot(ar, &a[s * inner..(s + 1) * inner]);
        }
    }
}

/// `C -= A Bᵀ` with `A: rows x inner`, `B: cols x inner`, `C: rows x cols`.
pub fn gemm(a: &[f64], rows: usize, b: &[f64], cols: usize, inner: usize, c: &mut [f64]) {
    for r in 0..rows {
        let ar = &a[r * inner..(r + 1) * inner];
        let cr = &mut c[r * cols..(r + 1) * cols];
        for (s, cv) in cr.iter_mut().enumerate() {
            *cv -= dot(ar, &b[s * inner..(s + 1) * inner]);
        }
    }
}

/// Four-lane dot product with a fixed summation order.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &y[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let o = 4 * c;
        acc[0] += x[o] * y[o];
        acc[1] += x[o + 1] * y[o + 1];
        acc[2] += x[o + 2] * y[o + 2];
        acc[3] += x[o + 3] * y[o + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for o in 4 * chunks..n {
        s += x[o] * y[o];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trsm_inverts_lower_transpose() {
        let l = [2.0, 0.0, 1.0, 3.0];
        // X = [[1, 2]] → X Lᵀ = [[2, 1 + 6]]
        let mut a = [2.0, 7.0];
        trsm(&l, 2, &mut a, 1);
        assert_eq!(a, [1.0, 2.0]);
    }

    #[test]
    fn gemm_and_syrk_agree_on_square_case() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut c1 = [0.0; 4];
        gemm(&a, 2, &a, 2, 3, &mut c1);
        let mut c2 = [0.0; 4];
        syrk(&a, 2, 3, &mut c2);
        assert_eq!(c1[0], -14.0);
        assert_eq!(c1[2], -32.0);
        assert_eq!(c2[0], c1[0]);
        assert_eq!(c2[2], c1[2]);
        assert_eq!(c2[3], c1[3]);
        assert_eq!(c2[1], 0.0);
    }
}
