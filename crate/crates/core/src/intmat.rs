//! Exact integer matrices.
//!
//! Lattice Gram matrices, group-constraint solutions and unimodular basis
//! changes all have to be handled without floating-point drift: membership
//! tests and coset arithmetic are exact statements about integers.  This
//! module wraps `DMatrix<i64>` with fraction-free determinants and adjugates
//! so those statements stay exact.

use nalgebra::DMatrix;

use crate::error::CoreError;
use crate::symplectic::RealMatrix;

/// Dense integer matrix with exact determinant/adjugate support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix(pub DMatrix<i64>);

impl IntMatrix {
    pub fn zeros(r: usize, c: usize) -> Self {
        IntMatrix(DMatrix::zeros(r, c))
    }

    pub fn identity(n: usize) -> Self {
        IntMatrix(DMatrix::identity(n, n))
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        IntMatrix(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
    }

    /// Standard symplectic form `[[0, I], [-I, 0]]` in `(q.., p..)` ordering.
    pub fn omega(num_modes: usize) -> Self {
        let n = num_modes;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            m[(j, n + j)] = 1;
            m[(n + j, j)] = -1;
        }
        IntMatrix(m)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn transpose(&self) -> Self {
        IntMatrix(self.0.transpose())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        IntMatrix(&self.0 * &rhs.0)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        IntMatrix(&self.0 + &rhs.0)
    }

    pub fn to_real(&self) -> RealMatrix {
        self.0.map(|v| v as f64)
    }

    /// Round a real matrix to integers, failing if any entry sits further
    /// than `tol` from the nearest integer.
    pub fn from_real(m: &RealMatrix, tol: f64) -> Result<Self, CoreError> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                let r = v.round();
                if (v - r).abs() > tol {
                    return Err(CoreError::NotIntegral(format!(
                        "entry ({i},{j}) = {v} is not an integer"
                    )));
                }
                out[(i, j)] = r as i64;
            }
        }
        Ok(IntMatrix(out))
    }

    /// Fraction-free (Bareiss) determinant, computed in `i128`.
    pub fn det(&self) -> i128 {
        let n = self.nrows();
        assert_eq!(n, self.ncols(), "determinant of non-square matrix");
        if n == 0 {
            return 1;
        }
        let mut a: Vec<i128> = self.0.iter().map(|&v| v as i128).collect();
        // column-major storage from nalgebra; index (i, j) -> i + j * n
        let idx = |i: usize, j: usize| i + j * n;
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n - 1 {
            if a[idx(k, k)] == 0 {
                let Some(pivot) = (k + 1..n).find(|&i| a[idx(i, k)] != 0) else {
                    return 0;
                };
                for j in 0..n {
                    a.swap(idx(k, j), idx(pivot, j));
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = a[idx(i, j)] * a[idx(k, k)] - a[idx(i, k)] * a[idx(k, j)];
                    a[idx(i, j)] = v / prev;
                }
                a[idx(i, k)] = 0;
            }
            prev = a[idx(k, k)];
        }
        sign * a[idx(n - 1, n - 1)]
    }

    /// Adjugate matrix: `adj(A) * A = det(A) * I`, exact in integers.
    pub fn adjugate(&self) -> Self {
        let n = self.nrows();
        assert_eq!(n, self.ncols(), "adjugate of non-square matrix");
        if n == 0 {
            return IntMatrix::identity(0);
        }
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let minor = self.minor(j, i);
                let c = minor.det();
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                out[(i, j)] = i64::try_from(sign * c).expect("adjugate overflow");
            }
        }
        IntMatrix(out)
    }

    fn minor(&self, drop_row: usize, drop_col: usize) -> Self {
        let n = self.nrows();
        let mut m = DMatrix::zeros(n - 1, n - 1);
        let mut ii = 0;
        for i in 0..n {
            if i == drop_row {
                continue;
            }
            let mut jj = 0;
            for j in 0..n {
                if j == drop_col {
                    continue;
                }
                m[(ii, jj)] = self.0[(i, j)];
                jj += 1;
            }
            ii += 1;
        }
        IntMatrix(m)
    }

    /// Exact inverse for unimodular matrices (`det = +-1`).
    pub fn inverse_unimodular(&self) -> Result<Self, CoreError> {
        let d = self.det();
        match d {
            1 => Ok(self.adjugate()),
            -1 => {
                let adj = self.adjugate();
                Ok(IntMatrix(-adj.0))
            }
            _ => Err(CoreError::InvalidGenerator(format!(
                "matrix with det {d} is not unimodular"
            ))),
        }
    }
}
