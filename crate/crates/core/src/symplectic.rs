//! Symplectic linear algebra: the form itself, affine Gaussian operations,
//! and the Williamson normal form of covariance matrices.
//!
//! Quadratures are ordered `(q_1..q_N, p_1..p_N)` everywhere; displacements
//! are measured in units of `l = sqrt(2*pi)`.

use nalgebra::{DMatrix, DVector};

use crate::error::CoreError;
use crate::intmat::IntMatrix;
use crate::Result;

pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

/// Max-entry tolerance for `M Omega M^T = Omega`; loose enough to survive
/// hundred-gate products, tight enough to catch construction mistakes.
pub const SYMPLECTIC_TOL: f64 = 1e-9;

/// Standard symplectic form on `N` modes.
pub fn omega(num_modes: usize) -> Result<IntMatrix> {
    if num_modes == 0 {
        return Err(CoreError::Dimension("omega needs at least one mode".into()));
    }
    Ok(IntMatrix::omega(num_modes))
}

/// Real-valued symplectic form, for floating-point expressions.
pub fn omega_real(num_modes: usize) -> RealMatrix {
    IntMatrix::omega(num_modes).to_real()
}

/// Max-entry residual of the symplectic condition.
pub fn symplectic_residual(m: &RealMatrix) -> f64 {
    let n = m.nrows() / 2;
    let w = omega_real(n);
    let r = m * &w * m.transpose() - &w;
    r.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// A Gaussian unitary acting on phase space as `xi -> M xi + lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGaussianOp {
    pub m: RealMatrix,
    pub lambda: RealVector,
}

impl AffineGaussianOp {
    pub fn new(m: RealMatrix, lambda: RealVector) -> Result<Self> {
        let dim = m.nrows();
        if dim == 0 || dim % 2 != 0 || m.ncols() != dim || lambda.len() != dim {
            return Err(CoreError::Dimension(format!(
                "affine op needs square even-dimensional M and matching shift, got {}x{} with shift {}",
                m.nrows(),
                m.ncols(),
                lambda.len()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) || lambda.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Dimension("non-finite entry in affine op".into()));
        }
        let residual = symplectic_residual(&m);
        if residual > SYMPLECTIC_TOL {
            return Err(CoreError::NotSymplectic { residual });
        }
        Ok(AffineGaussianOp { m, lambda })
    }

    pub fn identity(num_modes: usize) -> Self {
        AffineGaussianOp {
            m: RealMatrix::identity(2 * num_modes, 2 * num_modes),
            lambda: RealVector::zeros(2 * num_modes),
        }
    }

    /// Pure displacement by `lambda`.
    pub fn translation(lambda: RealVector) -> Self {
        let dim = lambda.len();
        AffineGaussianOp {
            m: RealMatrix::identity(dim, dim),
            lambda,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn num_modes(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn apply(&self, xi: &RealVector) -> RealVector {
        &self.m * xi + &self.lambda
    }

    /// Inverse operation; symplectic inverse is `-Omega M^T Omega`.
    pub fn inverse(&self) -> Self {
        let n = self.num_modes();
        let w = omega_real(n);
        let m_inv = -(&w * self.m.transpose() * &w);
        let lambda = -(&m_inv * &self.lambda);
        AffineGaussianOp { m: m_inv, lambda }
    }
}

/// Composition `g . h`: applying the result equals applying `h`, then `g`.
pub fn compose_affine(g: &AffineGaussianOp, h: &AffineGaussianOp) -> Result<AffineGaussianOp> {
    if g.dim() != h.dim() {
        return Err(CoreError::Dimension(format!(
            "composing ops of dimension {} and {}",
            g.dim(),
            h.dim()
        )));
    }
    Ok(AffineGaussianOp {
        m: &g.m * &h.m,
        lambda: &g.m * &h.lambda + &g.lambda,
    })
}

/// Symmetric square root of an SPD matrix.
pub fn sqrt_spd(sigma: &RealMatrix) -> Result<RealMatrix> {
    spd_power(sigma, 0.5)
}

/// `sigma^exponent` through the eigendecomposition, for symmetric positive
/// definite `sigma`.
pub fn spd_power(sigma: &RealMatrix, exponent: f64) -> Result<RealMatrix> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(CoreError::Dimension("power of non-square matrix".into()));
    }
    let sym_residual = (sigma - sigma.transpose()).amax();
    if sym_residual > 1e-9 * (1.0 + sigma.amax()) {
        return Err(CoreError::NotPositiveDefinite(format!(
            "matrix is not symmetric (residual {sym_residual:.3e})"
        )));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if let Some(bad) = eig.eigenvalues.iter().find(|&&v| v <= 0.0) {
        return Err(CoreError::NotPositiveDefinite(format!(
            "eigenvalue {bad:.6e} <= 0"
        )));
    }
    let powered = DVector::from_iterator(n, eig.eigenvalues.iter().map(|v| v.powf(exponent)));
    Ok(&eig.eigenvectors * RealMatrix::from_diagonal(&powered) * eig.eigenvectors.transpose())
}

/// Williamson normal form: `sigma = M_E * Sigma0 * M_E^T` with `M_E`
/// symplectic and `Sigma0 = diag(nu_1..nu_N, nu_1..nu_N)`, `nu` ascending.
///
/// Construction: with `L = sigma^{1/2}`, the antisymmetric `K = L Omega L`
/// has an orthogonal block-diagonalisation delivered by the real Schur form;
/// regrouping its 2x2 blocks into qqpp order gives an orthogonal `F` with
/// `F^T K F = [[0, W], [-W, 0]]`, and `M_E = L F Sigma0^{-1/2}` is then
/// symplectic because equal q/p scaling commutes with the form.
pub fn williamson(sigma: &RealMatrix) -> Result<(RealMatrix, RealMatrix)> {
    let dim = sigma.nrows();
    if dim == 0 || dim % 2 != 0 || sigma.ncols() != dim {
        return Err(CoreError::Dimension(format!(
            "williamson needs an even-dimensional square matrix, got {}x{}",
            dim,
            sigma.ncols()
        )));
    }
    let n = dim / 2;
    let scale = sigma.amax();
    // Diagonal covariances keep their axes: handle them exactly so that
    // already-normal-form inputs come back untouched.
    let off_diag = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .map(|(i, j)| sigma[(i, j)].abs())
        .fold(0.0f64, f64::max);
    if off_diag <= 1e-14 * (1.0 + scale) {
        return williamson_diagonal(sigma, n);
    }

    let l = sqrt_spd(sigma)?;
    let k = &l * omega_real(n) * &l;
    let schur = nalgebra::Schur::try_new(k.clone(), 1e-13, 0)
        .ok_or_else(|| CoreError::NotPositiveDefinite("Schur iteration failed".into()))?;
    let (q, t) = schur.unpack();

    // T is antisymmetric up to roundoff and quasi-upper-triangular, hence
    // block diagonal with 2x2 blocks [[0, w], [-w, 0]].
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
    let mut row = 0;
    while row < dim {
        if row + 1 >= dim || t[(row + 1, row)].abs() <= 1e-10 * (1.0 + scale) {
            return Err(CoreError::NotPositiveDefinite(format!(
                "Schur form has a 1x1 block at row {row}; sigma is too close to singular"
            )));
        }
        let c1 = q.column(row);
        let c2 = q.column(row + 1);
        // w = c1^T K c2 read off the original matrix, not the noisy T.
        let w = (c1.transpose() * &k * c2)[(0, 0)];
        if w >= 0.0 {
            pairs.push((w, row, row + 1));
        } else {
            pairs.push((-w, row + 1, row));
        }
        row += 2;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut f = RealMatrix::zeros(dim, dim);
    let mut nu = RealVector::zeros(n);
    for (j, &(w, ca, cb)) in pairs.iter().enumerate() {
        nu[j] = w;
        f.set_column(j, &q.column(ca));
        f.set_column(n + j, &q.column(cb));
    }
    let mut sigma0 = RealMatrix::zeros(dim, dim);
    let mut inv_sqrt = RealMatrix::zeros(dim, dim);
    for j in 0..n {
        for half in [0, n] {
            sigma0[(half + j, half + j)] = nu[j];
            inv_sqrt[(half + j, half + j)] = 1.0 / nu[j].sqrt();
        }
    }
    let m_e = &l * f * inv_sqrt;
    let residual = symplectic_residual(&m_e);
    if residual > SYMPLECTIC_TOL {
        return Err(CoreError::NotSymplectic { residual });
    }
    Ok((m_e, sigma0))
}

fn williamson_diagonal(sigma: &RealMatrix, n: usize) -> Result<(RealMatrix, RealMatrix)> {
    let mut modes: Vec<(f64, usize)> = Vec::with_capacity(n);
    for j in 0..n {
        let sq = sigma[(j, j)];
        let sp = sigma[(n + j, n + j)];
        if sq <= 0.0 || sp <= 0.0 {
            return Err(CoreError::NotPositiveDefinite(format!(
                "diagonal entry {:.6e} <= 0",
                sq.min(sp)
            )));
        }
        modes.push(((sq * sp).sqrt(), j));
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dim = 2 * n;
    let mut m_e = RealMatrix::zeros(dim, dim);
    let mut sigma0 = RealMatrix::zeros(dim, dim);
    for (slot, &(nu, j)) in modes.iter().enumerate() {
        let stretch = (sigma[(j, j)] / nu).sqrt();
        m_e[(j, slot)] = stretch;
        m_e[(n + j, n + slot)] = 1.0 / stretch;
        sigma0[(slot, slot)] = nu;
        sigma0[(n + slot, n + slot)] = nu;
    }
    Ok((m_e, sigma0))
}
