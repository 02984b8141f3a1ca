//! Small dense matrix kernel: general matrices, symmetric positive definite
//! matrices and their Cholesky factorizations.
//!
//! Everything here targets low dimension (parameter dimensions of a few
//! dozen at most), so plain O(d^3) algorithms on row-major storage are used
//! throughout.

use serde::Serialize;

use super::NumError;

/// Relative tolerance for the symmetry check on [`SpdMatrix`] inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumError> {
        if rows.is_empty() {
            return Err(NumError::InvalidArgument("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(NumError::InvalidArgument("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::InvalidArgument(format!(
                "flat data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= *b;
        }
        out
    }

    pub fn add_assign_scaled(&mut self, other: &Matrix, c: f64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * *b;
        }
    }

    /// Rank-one update `self += c * u * u^T`.
    pub fn add_outer(&mut self, u: &[f64], c: f64) {
        assert!(self.is_square() && self.rows == u.len());
        for i in 0..self.rows {
            let ci = c * u[i];
            let row = self.row_mut(i);
            for j in 0..u.len() {
                row[j] += ci * u[j];
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute difference between `m[i][j]` and `m[j][i]`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Returns `(M + M^T) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square());
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^T = M`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Factors the symmetrized input `(M + M^T)/2`, requiring every pivot to
    /// be strictly positive.
    pub fn factor(m: &Matrix) -> Result<Self, NumError> {
        Self::factor_with_floor(m, 0.0)
    }

    /// Like [`Cholesky::factor`] but rejects pivots whose squared value falls
    /// at or below `floor` (an absolute threshold on the diagonal residual).
    pub fn factor_with_floor(m: &Matrix, floor: f64) -> Result<Self, NumError> {
        if !m.is_square() {
            return Err(NumError::InvalidArgument(format!(
                "cannot factor a {}x{} matrix",
                m.rows, m.cols
            )));
        }
        let a = m.symmetrized();
        let d = a.rows();
        let mut l = Matrix::zeros(d, d);
        for j in 0..d {
            let mut s = a[(j, j)];
            for k in 0..j {
                s -= l[(j, k)] * l[(j, k)];
            }
            if s <= floor {
                return Err(NumError::NotPositiveDefinite { pivot: j });
            }
            let ljj = s.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..d {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L L^T x = b`.
    #[allow(clippy::needless_range_loop)] // substitution reads clearest indexed
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(b.len(), d);
        // forward: L y = b
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        // backward: L^T x = y
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Computes `(L L^T)^{-1}` by solving against the identity; the result is
    /// symmetrized so it is symmetric regardless of rounding.
    pub fn inverse(&self) -> Matrix {
        let d = self.dim();
        let mut inv = Matrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrized()
    }

    /// Applies the factor to a vector: `L v`.
    pub fn mul_lower(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(v.len(), d);
        let mut out = vec![0.0; d];
        for i in 0..d {
            out[i] = dot(&self.l.row(i)[..=i], &v[..=i]);
        }
        out
    }
}

/// Symmetric positive definite matrix, validated at construction.
///
/// Inputs must be symmetric to within [`SYMMETRY_TOL`] relative to the
/// largest entry; the stored matrix is the symmetrized `(M + M^T)/2` and its
/// Cholesky factor is kept alongside it.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    m: Matrix,
    chol: Cholesky,
}

impl SpdMatrix {
    pub fn new(m: Matrix) -> Result<Self, NumError> {
        if !m.is_square() {
            return Err(NumError::InvalidArgument(format!(
                "SPD matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.all_finite() {
            return Err(NumError::InvalidArgument("SPD matrix has non-finite entries".into()));
        }
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        let asymmetry = m.max_asymmetry() / scale;
        if asymmetry > SYMMETRY_TOL {
            return Err(NumError::NotSymmetric {
                asymmetry,
                tol: SYMMETRY_TOL,
            });
        }
        let sym = m.symmetrized();
        let chol = Cholesky::factor(&sym)?;
        Ok(SpdMatrix { m: sym, chol })
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix::new(Matrix::identity(dim)).expect("identity is SPD")
    }

    pub fn diag(entries: &[f64]) -> Result<Self, NumError> {
        SpdMatrix::new(Matrix::diag(entries))
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Inverse via the cached Cholesky factor; satisfies
    /// `||M * inv - I||_F <= 1e-8 * d` for well-conditioned inputs.
    pub fn inverse(&self) -> SpdMatrix {
        let inv = self.chol.inverse();
        let chol = Cholesky::factor(&inv).expect("inverse of SPD is SPD");
        SpdMatrix { m: inv, chol }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.chol.solve(b)
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.m.serialize(serializer)
    }
}

/// Inverse of an SPD matrix via Cholesky.
pub fn spd_inverse(m: &SpdMatrix) -> SpdMatrix {
    m.inverse()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Neumaier compensated sum; keeps the error near one ulp independent of
/// length.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn identity_inverse_is_identity() {
        let id = SpdMatrix::identity(2);
        let inv = id.inverse();
        assert_eq!(inv.as_matrix(), &Matrix::identity(2));
    }

    #[test]
    fn diagonal_inverse() {
        let m = SpdMatrix::diag(&[4.0, 1.0]).unwrap();
        let inv = m.inverse();
        assert_close(inv.as_matrix()[(0, 0)], 0.25, 1e-15);
        assert_close(inv.as_matrix()[(1, 1)], 1.0, 1e-15);
        assert_close(inv.as_matrix()[(0, 1)], 0.0, 1e-15);
    }

    #[test]
    fn random_spd_inverse_reconstructs_identity() {
        // A = L L^T from a seeded lower factor with positive diagonal.
        let mut rng = crate::numkit::RngStream::new(42, 0);
        for d in [1usize, 3, 6] {
            let mut l = Matrix::zeros(d, d);
            for i in 0..d {
                for j in 0..=i {
                    let u = crate::numkit::standard_normal(&mut rng);
                    l[(i, j)] = if i == j { 0.5 + u.abs() } else { 0.3 * u };
                }
            }
            let a = l.matmul(&l.transpose());
            let spd = SpdMatrix::new(a.clone()).unwrap();
            let inv = spd.inverse();
            let resid = a.matmul(inv.as_matrix()).sub(&Matrix::identity(d));
            assert!(resid.frobenius_norm() <= 1e-8 * d as f64);
        }
    }

    #[test]
    fn cholesky_round_trip() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.2],
            vec![0.5, -0.2, 2.0],
        ])
        .unwrap();
        let c = Cholesky::factor(&a).unwrap();
        let back = c.lower().matmul(&c.lower().transpose());
        let rel = back.sub(&a).frobenius_norm() / a.frobenius_norm();
        assert!(rel <= 1e-10, "round-trip relative error {rel}");
    }

    #[test]
    fn non_positive_pivot_reports_index() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        match Cholesky::factor(&a) {
            Err(NumError::NotPositiveDefinite { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(SpdMatrix::new(a), Err(NumError::NotSymmetric { .. })));
    }

    #[test]
    fn solve_matches_direct_inverse() {
        let a = Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.5]]).unwrap();
        let spd = SpdMatrix::new(a.clone()).unwrap();
        let b = vec![1.0, -2.0];
        let x = spd.solve(&b);
        let back = a.mul_vec(&x);
        assert_close(back[0], b[0], 1e-12);
        assert_close(back[1], b[1], 1e-12);
    }

    #[test]
    fn compensated_sum_is_stable() {
        let v = vec![1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(&v), 2.0);
    }
}
