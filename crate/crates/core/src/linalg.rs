//! Small dense kernels shared by the fitting code and the test oracles.

/// Thin QR of a tall column-major matrix by twice-iterated modified
/// Gram–Schmidt. Columns that are numerically dependent on earlier ones are
/// dropped; `kept` lists the surviving original column indices.
#[derive(Debug, Clone)]
pub struct ThinQr {
    rows: usize,
    q: Vec<f64>,
    r: Vec<f64>,
    kept: Vec<usize>,
}

impl ThinQr {
    /// `columns[j]` is column j. A column is dropped when less than
    /// `rel_tol` of its norm survives orthogonalisation.
    pub fn new(columns: &[Vec<f64>], rel_tol: f64) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        let mut q: Vec<f64> = Vec::new();
        let mut kept = Vec::new();
        let mut r_cols: Vec<Vec<f64>> = Vec::new();
        for (j, col) in columns.iter().enumerate() {
            debug_assert_eq!(col.len(), rows);
            let norm0 = norm(col);
            let mut v = col.clone();
            let k = kept.len();
            let mut coeffs = vec![0.0; k];
            for _ in 0..2 {
                for c in 0..k {
                    let qc = &q[c * rows..(c + 1) * rows];
                    let d = dot(qc, &v);
                    coeffs[c] += d;
                    axpy(-d, qc, &mut v);
                }
            }
            let nv = norm(&v);
            if norm0 == 0.0 || nv <= rel_tol * norm0 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            q.extend_from_slice(&v);
            coeffs.push(nv);
            r_cols.push(coeffs);
            kept.push(j);
        }
        let k = kept.len();
        let mut r = vec![0.0; k * k];
        for (c, col) in r_cols.iter().enumerate() {
            for (row, v) in col.iter().enumerate() {
                r[row * k + c] = *v;
            }
        }
        Self { rows, q, r, kept }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn q_col(&self, c: usize) -> &[f64] {
        &self.q[c * self.rows..(c + 1) * self.rows]
    }

    /// `Qᵀ y`.
    pub fn qt_mul(&self, y: &[f64]) -> Vec<f64> {
        (0..self.rank()).map(|c| dot(self.q_col(c), y)).collect()
    }

    /// `y - Q Qᵀ y`, orthogonalised twice for accuracy.
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut v = y.to_vec();
        for _ in 0..2 {
            for c in 0..self.rank() {
                let qc = self.q_col(c);
                let d = dot(qc, &v);
                axpy(-d, qc, &mut v);
            }
        }
        v
    }

    /// Solves `R x = b` for the kept columns.
    pub fn solve_r(&self, b: &[f64]) -> Vec<f64> {
        let k = self.rank();
        let mut x = b.to_vec();
        for i in (0..k).rev() {
            let mut s = x[i];
            for j in i + 1..k {
                s -= self.r[i * k + j] * x[j];
            }
            x[i] = s / self.r[i * k + i];
        }
        x
    }

    /// Least-squares coefficients in the original column order; dropped
    /// columns get zero.
    pub fn solve_full(&self, y: &[f64], n_columns: usize) -> Vec<f64> {
        let x = self.solve_r(&self.qt_mul(y));
        let mut out = vec![0.0; n_columns];
        for (c, &j) in self.kept.iter().enumerate() {
            out[j] = x[c];
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// In-place lower Cholesky of a row-major `n x n` matrix. On failure returns
/// the row of the first non-positive pivot. The strict upper triangle is zeroed.
pub fn cholesky_lower(a: &mut [f64], n: usize) -> Result<(), usize> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    Ok(())
}

/// `L Lᵀ` for a row-major lower-triangular `n x n` matrix.
pub fn lower_gram(l: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s = dot(&l[i * n..i * n + j + 1], &l[j * n..j * n + j + 1]);
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

pub fn frobenius(a: &[f64]) -> f64 {
    norm(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_least_squares_and_column_drop() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 / 10.0).collect();
        let ones = vec![1.0; 20];
        let twice: Vec<f64> = t.iter().map(|x| 2.0 * x).collect();
        let sq: Vec<f64> = t.iter().map(|x| x * x).collect();
        let y: Vec<f64> = t.iter().map(|x| 1.0 - 3.0 * x + 0.5 * x * x).collect();
        let qr = ThinQr::new(&[ones, t.clone(), twice, sq], 1e-10);
        assert_eq!(qr.kept(), &[0, 1, 3]);
        let beta = qr.solve_full(&y, 4);
        assert!((beta[0] - 1.0).abs() < 1e-12);
        assert!((beta[1] + 3.0).abs() < 1e-12);
        assert_eq!(beta[2], 0.0);
        assert!((beta[3] - 0.5).abs() < 1e-12);
        assert!(norm(&qr.residual(&y)) < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = vec![4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let mut l = a.clone();
        cholesky_lower(&mut l, 3).unwrap();
        let back = lower_gram(&l, 3);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).abs() < 1e-14);
        }
        let mut bad = vec![1.0, 2.0, 2.0, 1.0];
        assert_eq!(cholesky_lower(&mut bad, 2), Err(1));
    }
}
