//! Exact Gaussian-sum Wigner simulation of finite-energy GKP states.
//!
//! A finite-energy code state is a lattice of Dirac peaks smoothed by the
//! envelope: every peak becomes a Gaussian whose weight is a signed
//! parity-sum coefficient times an envelope amplitude, whose position is
//! pulled toward the envelope centre, and whose covariance is common to all
//! peaks.  Gaussian unitaries, loss, and random rotations map Gaussians to
//! Gaussians, so states stay exactly representable for arbitrarily long
//! circuits; logical readout happens through the characteristic function.
//!
//! Because every update acts uniformly, the shared covariance is stored
//! once and peak centres sit in one matrix (a column per peak); the
//! `GaussianPeak` views are materialised on demand.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::CoreError;
use crate::envelope::Envelope;
use crate::lattice::{
    canonical_form, make_lattice, GkpLattice, PauliCoset, ReducedBasis, INT_TOL,
};
use crate::symplectic::{omega_real, AffineGaussianOp, RealMatrix, RealVector};
use crate::Result;

/// One Gaussian peak of a Wigner sum (materialised view).
#[derive(Debug, Clone)]
pub struct GaussianPeak {
    pub c: f64,
    pub sigma: RealMatrix,
    pub mu: RealVector,
}

/// Signed sum of Gaussians sharing one covariance matrix.
#[derive(Debug, Clone)]
pub struct GaussianSum {
    state_lattice: GkpLattice,
    gauge: Vec<u8>,
    sigma: RealMatrix,
    weights: Vec<f64>,
    /// Peak centres, one column per peak.
    centers: RealMatrix,
}

/// Target pure state: a unimodular (d = 1) lattice extending the code's
/// stabilizers by chosen logicals, plus a binary gauge vector.
#[derive(Debug, Clone)]
pub struct StateSpec {
    pub state_lattice: GkpLattice,
    pub gauge: Vec<u8>,
}

/// Peak truncation rules for state preparation.
#[derive(Debug, Clone)]
pub struct TruncationPolicy {
    /// Drop peaks with |weight| below this fraction of the largest.
    pub rel_floor: f64,
    /// Enumeration radius is set so the envelope amplitude at the boundary
    /// is below this.
    pub boundary: f64,
    /// Hard cap on retained peaks (strongest kept).
    pub max_peaks: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            rel_floor: 1e-10,
            boundary: 1e-12,
            max_peaks: 250_000,
        }
    }
}

impl StateSpec {
    pub fn new(state_lattice: GkpLattice, gauge: Vec<u8>) -> Result<StateSpec> {
        if state_lattice.d != 1 {
            return Err(CoreError::Config(format!(
                "state lattice must be unimodular (d = 1), got d = {}",
                state_lattice.d
            )));
        }
        let dim = state_lattice.dim();
        if gauge.len() != dim {
            return Err(CoreError::Config(format!(
                "gauge must have {dim} binary entries, got {}",
                gauge.len()
            )));
        }
        if gauge.iter().any(|&g| g > 1) {
            return Err(CoreError::Config("gauge entries must be 0 or 1".into()));
        }
        Ok(StateSpec {
            state_lattice,
            gauge,
        })
    }

    /// `|0..0>`: extend the stabilizers by every canonical Z-type logical.
    /// In the canonical basis the pairs `(u_j, v_j)` satisfy `u_j Omega
    /// v_j^T = D_j`, so `{u_j, v_j / D_j}` generates a unimodular lattice.
    pub fn logical_zero(code: &GkpLattice) -> Result<StateSpec> {
        let form = canonical_form(code)?;
        let n = code.n;
        let mut s0 = RealMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            s0.set_row(j, &form.s_d.row(j));
            s0.set_row(n + j, &(form.s_d.row(n + j) / form.d[j] as f64));
        }
        StateSpec::new(make_lattice(s0)?, vec![0; 2 * n])
    }

    /// Extend the stabilizers by explicit dual vectors.  The union must
    /// generate a unimodular lattice (a fully specified pure state).
    pub fn from_logicals(
        code: &GkpLattice,
        logicals: &[RealVector],
        gauge: Vec<u8>,
    ) -> Result<StateSpec> {
        let dim = code.dim();
        let w = omega_real(code.n);
        // Work in integer coordinates with respect to the dual basis.
        let mut rows: Vec<Vec<i64>> = Vec::new();
        for j in 0..dim {
            rows.push((0..dim).map(|k| -code.a.0[(k, j)]).collect());
        }
        for (idx, logical) in logicals.iter().enumerate() {
            let coords = -(&code.s * &w * logical);
            let mut row = Vec::with_capacity(dim);
            for v in coords.iter() {
                if (v - v.round()).abs() > INT_TOL {
                    return Err(CoreError::Config(format!(
                        "logical #{idx} is not a dual-lattice vector"
                    )));
                }
                row.push(v.round() as i64);
            }
            rows.push(row);
        }
        let basis = integer_row_basis(rows, dim)?;
        let mut b = RealMatrix::zeros(dim, dim);
        for (i, row) in basis.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                b[(i, j)] = v as f64;
            }
        }
        let mut s0 = b * &code.s_star;
        if s0.clone().determinant() < 0.0 {
            let last = dim - 1;
            let negated = -s0.row(last);
            s0.set_row(last, &negated);
        }
        let lattice = make_lattice(s0)?;
        if lattice.d != 1 {
            return Err(CoreError::Config(format!(
                "stabilizers plus logicals generate a d = {} lattice; a pure state needs d = 1",
                lattice.d
            )));
        }
        StateSpec::new(lattice, gauge)
    }
}

/// Row-style Hermite reduction: a basis of the integer row span.
fn integer_row_basis(mut rows: Vec<Vec<i64>>, dim: usize) -> Result<Vec<Vec<i64>>> {
    let mut basis: Vec<Vec<i64>> = Vec::with_capacity(dim);
    let mut col = 0;
    while col < dim && !rows.is_empty() {
        loop {
            // smallest nonzero entry in this column becomes the pivot row
            let pivot = rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r[col] != 0)
                .min_by_key(|(_, r)| r[col].abs())
                .map(|(i, _)| i);
            let Some(p) = pivot else {
                break;
            };
            let pivot_row = rows.swap_remove(p);
            let mut leftovers = false;
            for r in rows.iter_mut() {
                if r[col] != 0 {
                    let q = r[col].div_euclid(pivot_row[col]);
                    for k in 0..dim {
                        r[k] -= q * pivot_row[k];
                    }
                    leftovers |= r[col] != 0;
                }
            }
            rows.push(pivot_row);
            if !leftovers {
                let p = rows.len() - 1;
                basis.push(rows.swap_remove(p));
                break;
            }
        }
        rows.retain(|r| r.iter().any(|&v| v != 0));
        col += 1;
    }
    if basis.len() != dim {
        return Err(CoreError::Config(
            "generators do not span the full phase space".into(),
        ));
    }
    Ok(basis)
}

// ---------------------------------------------------------------------------
// preparation

/// Parity-coefficient sign at an (unshifted) half-dual grid point: the
/// Z_2 Gauss sum factorises over canonical pairs into `+-2` factors, with
/// `-` exactly when both parity bits of a pair are set.
pub(crate) fn parity_sign(s_d0: &RealMatrix, w: &RealMatrix, g: &RealVector) -> Result<f64> {
    let n = s_d0.nrows() / 2;
    let twice = 2.0 * (s_d0 * w * g);
    let mut sign = 1.0;
    for j in 0..n {
        let mut bits = [0i64; 2];
        for (slot, idx) in [j, n + j].into_iter().enumerate() {
            let v = twice[idx];
            if (v - v.round()).abs() > INT_TOL {
                return Err(CoreError::Config(format!(
                    "enumerated point is not on the half-dual grid (coefficient {v})"
                )));
            }
            bits[slot] = (v.round() as i64).rem_euclid(2);
        }
        if bits[0] == 1 && bits[1] == 1 {
            sign = -sign;
        }
    }
    Ok(sign)
}

/// Build the finite-energy Wigner sum of a pure grid state under an
/// envelope: peaks live on the half-dual grid (shifted by the gauge), carry
/// alternating parity signs damped by the envelope amplitude, move to
/// `chi_E = M_E sech(Sigma0^{-1}) M_E^{-1} (chi - mu_E) + mu_E`, and share
/// the covariance `M_E tanh(Sigma0^{-1}) M_E^T / 4pi`.
pub fn prepare_logical_state(
    spec: &StateSpec,
    env: &Envelope,
    trunc: &TruncationPolicy,
) -> Result<GaussianSum> {
    let lat = &spec.state_lattice;
    let dim = lat.dim();
    if env.sigma_e.nrows() != dim {
        return Err(CoreError::Dimension(format!(
            "envelope dimension {} does not match state dimension {dim}",
            env.sigma_e.nrows()
        )));
    }
    let n = lat.n;
    let form = canonical_form(lat)?;
    let w = omega_real(n);
    let four_pi = 4.0 * std::f64::consts::PI;

    let coth = env.sigma0_inv_map(|x| 1.0 / x.tanh());
    let tanh = env.sigma0_inv_map(|x| x.tanh());
    let sech = env.sigma0_inv_map(|x| 1.0 / x.cosh());
    let m_inv = -(&w * env.m_e.transpose() * &w);
    let sigma_env = (&env.m_e * coth * env.m_e.transpose()) / four_pi;
    let sigma_env_inv = nalgebra::Cholesky::new(sigma_env.clone())
        .ok_or_else(|| CoreError::NotPositiveDefinite("envelope amplitude covariance".into()))?
        .inverse();
    let peak_sigma = (&env.m_e * tanh * env.m_e.transpose()) / four_pi;
    let pos_map = &env.m_e * sech * m_inv;

    // Enumeration radius: beyond it the amplitude is below `boundary` in
    // every direction.
    let lambda_max = sigma_env
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    let radius = (2.0 * lambda_max * (1.0 / trunc.boundary).ln()).sqrt();

    // Peaks sit at g - shift for g on the half-dual grid, where the gauge
    // shifts the grid by half a dual vector.
    let gauge_f = RealVector::from_iterator(dim, spec.gauge.iter().map(|&g| g as f64));
    let shift = 0.5 * lat.s_star.transpose() * &gauge_f;
    let half_dual = ReducedBasis::new(0.5 * lat.s_star.transpose())?;
    let center = &env.mu_e + &shift;
    let grid_points = half_dual.points_within(&center, radius);

    let mut raw: Vec<(f64, RealVector)> = Vec::with_capacity(grid_points.len());
    for g in &grid_points {
        let chi = g - &shift;
        let diff = &chi - &env.mu_e;
        let mahal = (diff.transpose() * &sigma_env_inv * &diff)[(0, 0)];
        let amp = (-0.5 * mahal).exp();
        let sign = parity_sign(&form.s_d, &w, g)?;
        let chi_e = &pos_map * &diff + &env.mu_e;
        raw.push((sign * amp, chi_e));
    }
    let max_abs = raw.iter().map(|(c, _)| c.abs()).fold(0.0f64, f64::max);
    if max_abs <= 0.0 {
        return Err(CoreError::Config(
            "truncation produced no peaks; widen the policy".into(),
        ));
    }
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[b].0.abs().total_cmp(&raw[a].0.abs()).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| raw[i].0.abs() >= trunc.rel_floor * max_abs)
        .take(trunc.max_peaks)
        .collect();
    if kept.is_empty() {
        return Err(CoreError::Config(
            "truncation produced no peaks; widen the policy".into(),
        ));
    }
    kept.sort_unstable(); // deterministic enumeration order
    let total: f64 = kept.iter().map(|&i| raw[i].0).sum();
    let abs_total: f64 = kept.iter().map(|&i| raw[i].0.abs()).sum();
    if total.abs() < 1e-12 * abs_total {
        return Err(CoreError::Config(
            "peak weights sum to zero; inconsistent gauge".into(),
        ));
    }
    let mut weights = Vec::with_capacity(kept.len());
    let mut centers = RealMatrix::zeros(dim, kept.len());
    for (slot, &i) in kept.iter().enumerate() {
        weights.push(raw[i].0 / total);
        centers.set_column(slot, &raw[i].1);
    }
    Ok(GaussianSum {
        state_lattice: lat.clone(),
        gauge: spec.gauge.clone(),
        sigma: peak_sigma,
        weights,
        centers,
    })
}

// ---------------------------------------------------------------------------
// channels and observables

impl GaussianSum {
    /// Assemble a sum from a shared covariance and explicit peaks.
    pub fn from_uniform(
        state_lattice: GkpLattice,
        gauge: Vec<u8>,
        sigma: RealMatrix,
        peaks: Vec<(f64, RealVector)>,
    ) -> Result<GaussianSum> {
        let dim = state_lattice.dim();
        if sigma.nrows() != dim || sigma.ncols() != dim {
            return Err(CoreError::Dimension("covariance dimension mismatch".into()));
        }
        if peaks.is_empty() {
            return Err(CoreError::Config("need at least one peak".into()));
        }
        let mut weights = Vec::with_capacity(peaks.len());
        let mut centers = RealMatrix::zeros(dim, peaks.len());
        for (slot, (c, mu)) in peaks.into_iter().enumerate() {
            if mu.len() != dim {
                return Err(CoreError::Dimension("peak centre dimension mismatch".into()));
            }
            weights.push(c);
            centers.set_column(slot, &mu);
        }
        Ok(GaussianSum {
            state_lattice,
            gauge,
            sigma,
            weights,
            centers,
        })
    }

    pub fn num_peaks(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.nrows()
    }

    pub fn num_modes(&self) -> usize {
        self.dim() / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shared_sigma(&self) -> &RealMatrix {
        &self.sigma
    }

    pub fn center(&self, i: usize) -> RealVector {
        self.centers.column(i).into_owned()
    }

    pub fn state_lattice(&self) -> &GkpLattice {
        &self.state_lattice
    }

    pub fn gauge(&self) -> &[u8] {
        &self.gauge
    }

    /// Materialised peak list.
    pub fn peaks(&self) -> Vec<GaussianPeak> {
        (0..self.num_peaks())
            .map(|i| GaussianPeak {
                c: self.weights[i],
                sigma: self.sigma.clone(),
                mu: self.center(i),
            })
            .collect()
    }

    /// In-place Gaussian update: `Sigma -> M Sigma M^T`, centres `-> M mu + lambda`.
    pub fn apply_op_mut(&mut self, op: &AffineGaussianOp) -> Result<()> {
        if op.dim() != self.dim() {
            return Err(CoreError::Dimension(format!(
                "op dimension {} does not match state dimension {}",
                op.dim(),
                self.dim()
            )));
        }
        let sigma = &op.m * &self.sigma * op.m.transpose();
        self.sigma = (&sigma + sigma.transpose()) * 0.5;
        self.centers = &op.m * &self.centers;
        for mut col in self.centers.column_iter_mut() {
            col += &op.lambda;
        }
        Ok(())
    }

    /// In-place loss channel with transmissivity `gamma`.
    pub fn apply_loss_mut(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(CoreError::Config(format!(
                "loss transmissivity must be in (0, 1], got {gamma}"
            )));
        }
        let dim = self.dim();
        let vac = RealMatrix::identity(dim, dim) * ((1.0 - gamma) / (4.0 * std::f64::consts::PI));
        self.sigma = &self.sigma * gamma + vac;
        self.centers *= gamma.sqrt();
        Ok(())
    }

    /// In-place Monte Carlo dephasing: one Normal(0, gamma_phi) angle per
    /// mode, applied as a rotation.  Always draws `N` samples so random
    /// streams stay aligned across configurations.
    pub fn apply_dephasing_mut<R: Rng + ?Sized>(
        &mut self,
        gamma_phi: f64,
        rng: &mut R,
    ) -> Result<()> {
        if gamma_phi < 0.0 {
            return Err(CoreError::Config(format!(
                "dephasing variance must be >= 0, got {gamma_phi}"
            )));
        }
        let n = self.num_modes();
        let normal = Normal::new(0.0, gamma_phi.sqrt())
            .map_err(|e| CoreError::Config(format!("dephasing distribution: {e}")))?;
        let phis: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        let rot = mode_rotations(&phis);
        let op = AffineGaussianOp::new(rot, RealVector::zeros(2 * n))?;
        self.apply_op_mut(&op)
    }

    /// Characteristic function `sum_m c_m e^{2 pi i v^T Omega mu_m}
    /// e^{-2 pi^2 v^T Omega^T Sigma Omega v}`.
    pub fn characteristic(&self, v: &RealVector) -> Complex64 {
        let n = self.num_modes();
        let w = omega_real(n);
        let wv = &w * v;
        let quad = (wv.transpose() * &self.sigma * &wv)[(0, 0)];
        let damp = (-2.0 * std::f64::consts::PI * std::f64::consts::PI * quad).exp();
        // v^T Omega mu = -(Omega v) . mu
        let phases = wv.transpose() * &self.centers;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &c) in self.weights.iter().enumerate() {
            let theta = -2.0 * std::f64::consts::PI * phases[(0, i)];
            acc += Complex64::new(c * theta.cos(), c * theta.sin());
        }
        acc * damp
    }
}

/// Block rotation by one angle per mode (qqpp layout).
pub fn mode_rotations(phis: &[f64]) -> RealMatrix {
    let n = phis.len();
    let mut m = RealMatrix::zeros(2 * n, 2 * n);
    for (j, &phi) in phis.iter().enumerate() {
        m[(j, j)] = phi.cos();
        m[(j, n + j)] = phi.sin();
        m[(n + j, j)] = -phi.sin();
        m[(n + j, n + j)] = phi.cos();
    }
    m
}

/// Pure wrappers over the in-place updates.
pub fn apply_gaussian_op(state: &GaussianSum, op: &AffineGaussianOp) -> Result<GaussianSum> {
    let mut out = state.clone();
    out.apply_op_mut(op)?;
    Ok(out)
}

pub fn apply_loss(state: &GaussianSum, gamma: f64) -> Result<GaussianSum> {
    let mut out = state.clone();
    out.apply_loss_mut(gamma)?;
    Ok(out)
}

pub fn apply_dephasing_mc<R: Rng + ?Sized>(
    state: &GaussianSum,
    gamma_phi: f64,
    rng: &mut R,
) -> Result<GaussianSum> {
    let mut out = state.clone();
    out.apply_dephasing_mut(gamma_phi, rng)?;
    Ok(out)
}

pub fn characteristic(state: &GaussianSum, v: &RealVector) -> Complex64 {
    state.characteristic(v)
}

/// Logical Pauli expectation `Re chi(rep)` (trivial gauge phase).
pub fn pauli_expectation(state: &GaussianSum, coset: &PauliCoset) -> f64 {
    state.characteristic(&coset.rep).re
}

/// Survival probability `(1 + Re[nu * chi(p)]) / 2`, clamped to [0, 1].
///
/// The gauge phase `nu = exp(i pi a^T (A_lower a + mu))` (integer
/// coordinates `a` of the target in the state lattice) applies when the
/// target is a state stabilizer; other targets get the trivial phase.
pub fn survival_probability(state: &GaussianSum, target: &PauliCoset, gauge: &[u8]) -> f64 {
    let chi = state.characteristic(&target.rep);
    let lat = &state.state_lattice;
    let mut phase = 1.0;
    if gauge.iter().any(|&g| g != 0) {
        let coords = &lat.s_star * omega_real(lat.n) * &target.rep;
        if coords.iter().all(|c| (c - c.round()).abs() <= INT_TOL) {
            let a: Vec<i64> = coords.iter().map(|c| c.round() as i64).collect();
            let dim = lat.dim();
            let mut parity: i64 = 0;
            for i in 0..dim {
                for j in 0..i {
                    parity += a[i] * lat.a.0[(i, j)] * a[j];
                }
                parity += a[i] * gauge[i] as i64;
            }
            if parity.rem_euclid(2) == 1 {
                phase = -1.0;
            }
        }
    }
    (0.5 * (1.0 + phase * chi.re)).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// grid evaluation

/// Rectangular evaluation window for a 2D section of the Wigner function.
#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Quadrature indices spanning the section (default `(0, N)`: q and p
    /// of the first mode).
    pub axes: (usize, usize),
    pub min: f64,
    pub max: f64,
    pub resolution: usize,
    /// Values of the remaining quadratures (defaults to zero).
    pub section: Option<RealVector>,
}

impl GridSpec {
    pub fn plane(min: f64, max: f64, resolution: usize) -> GridSpec {
        GridSpec {
            axes: (0, 1),
            min,
            max,
            resolution,
            section: None,
        }
    }
}

/// Sampled Wigner section: `values[(i, j)] = W` at `x = xs[i]`, `y = ys[j]`.
#[derive(Debug, Clone)]
pub struct WignerField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: DMatrix<f64>,
}

pub fn numeric_wigner(state: &GaussianSum, grid: &GridSpec) -> Result<WignerField> {
    let res = grid.resolution;
    if res < 2 || res > 4096 {
        return Err(CoreError::Config(format!(
            "grid resolution must be in 2..=4096, got {res}"
        )));
    }
    if grid.max <= grid.min {
        return Err(CoreError::Config("empty grid range".into()));
    }
    let dim = state.dim();
    let (ax, ay) = grid.axes;
    if ax >= dim || ay >= dim || ax == ay {
        return Err(CoreError::Config(format!(
            "grid axes ({ax}, {ay}) out of range for dimension {dim}"
        )));
    }
    let base = match &grid.section {
        Some(v) => {
            if v.len() != dim {
                return Err(CoreError::Dimension("section vector dimension".into()));
            }
            v.clone()
        }
        None => RealVector::zeros(dim),
    };
    let chol = nalgebra::Cholesky::new(state.sigma.clone())
        .ok_or_else(|| CoreError::NotPositiveDefinite("peak covariance".into()))?;
    let sigma_inv = chol.inverse();
    let norm = 1.0
        / ((2.0 * std::f64::consts::PI).powi(dim as i32 / 2)
            * chol.determinant().sqrt());

    let step = (grid.max - grid.min) / (res - 1) as f64;
    let coords: Vec<f64> = (0..res).map(|i| grid.min + step * i as f64).collect();
    let mut values = DMatrix::zeros(res, res);
    let mut xi = base.clone();
    for (i, &x) in coords.iter().enumerate() {
        for (j, &y) in coords.iter().enumerate() {
            xi.copy_from(&base);
            xi[ax] = x;
            xi[ay] = y;
            let mut acc = 0.0;
            for (m, &c) in state.weights.iter().enumerate() {
                let d = &xi - state.centers.column(m);
                let quad = (d.transpose() * &sigma_inv * &d)[(0, 0)];
                if quad < 120.0 {
                    acc += c * (-0.5 * quad).exp();
                }
            }
            values[(i, j)] = acc * norm;
        }
    }
    Ok(WignerField {
        xs: coords.clone(),
        ys: coords,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::initial_envelope;
    use crate::lattice::pauli_cosets;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::{PI, SQRT_2};

    fn zero_state(eps: f64) -> GaussianSum {
        let code = GkpLattice::square(1).unwrap();
        let spec = StateSpec::logical_zero(&code).unwrap();
        let env = initial_envelope(&[eps]).unwrap();
        prepare_logical_state(&spec, &env, &TruncationPolicy::default()).unwrap()
    }

    fn vacuum_like() -> GaussianSum {
        let lat = make_lattice(RealMatrix::identity(2, 2)).unwrap();
        GaussianSum::from_uniform(
            lat,
            vec![0, 0],
            RealMatrix::identity(2, 2) / (4.0 * PI),
            vec![(1.0, RealVector::zeros(2))],
        )
        .unwrap()
    }

    #[test]
    fn zero_state_lattice_is_unimodular_and_self_dual() {
        let code = GkpLattice::square(1).unwrap();
        let spec = StateSpec::logical_zero(&code).unwrap();
        assert_eq!(spec.state_lattice.d, 1);
        let expect = RealMatrix::from_row_slice(2, 2, &[SQRT_2, 0.0, 0.0, 1.0 / SQRT_2]);
        assert_abs_diff_eq!(spec.state_lattice.s, expect, epsilon = 1e-12);
    }

    #[test]
    fn parity_sign_matches_explicit_gauss_sum() {
        // Brute-force the 4-term Z_2 sum for the square-code zero state and
        // compare with the factorised sign on a patch of grid points.
        let code = GkpLattice::square(1).unwrap();
        let spec = StateSpec::logical_zero(&code).unwrap();
        let form = canonical_form(&spec.state_lattice).unwrap();
        let w = omega_real(1);
        for a in -3..=3i64 {
            for b in -3..=3i64 {
                let g = RealVector::from_vec(vec![
                    a as f64 / SQRT_2,
                    b as f64 / (2.0 * SQRT_2),
                ]);
                let sign = parity_sign(&form.s_d, &w, &g).unwrap();
                // direct sum over m in {0,1}^2 of
                // exp(pi i m^T A_lower m + 2 pi i (-S_D Omega g)^T m)
                let k = -(&form.s_d * &w * &g);
                let mut acc = Complex64::new(0.0, 0.0);
                for m1 in 0..2 {
                    for m2 in 0..2 {
                        let quad = -(m2 as f64) * (m1 as f64); // A_lower entry (1,0) = -1
                        let lin = k[0] * m1 as f64 + k[1] * m2 as f64;
                        let arg = PI * quad + 2.0 * PI * lin;
                        acc += Complex64::new(arg.cos(), arg.sin());
                    }
                }
                assert!(acc.im.abs() < 1e-9);
                assert_abs_diff_eq!(acc.re, sign * 2.0, epsilon = 1e-9);
                let expect_negative = a.rem_euclid(2) == 1 && b.rem_euclid(2) == 1;
                assert_eq!(sign < 0.0, expect_negative, "site ({a}, {b})");
            }
        }
    }

    #[test]
    fn zero_state_peaks_alternate_and_normalize() {
        let state = zero_state(0.2);
        assert!((state.weights().iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(state.num_peaks() > 50);
        // negative weights exist (odd-odd sites)
        assert!(state.weights().iter().any(|&c| c < 0.0));
        // the dominant peak sits at the origin
        let (imax, _) = state
            .weights()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert!(state.center(imax).norm() < 1e-9);
    }

    #[test]
    fn infinite_energy_limit_leaves_peak_positions_on_the_grid() {
        let state = zero_state(1e-4);
        // every centre should be (numerically) a half-dual grid point
        let lat = state.state_lattice().clone();
        for i in 0..state.num_peaks().min(200) {
            let chi_e = state.center(i);
            let coords = 2.0 * (&lat.s * omega_real(1) * &chi_e);
            for c in coords.iter() {
                assert!(
                    (c - c.round()).abs() < 1e-6,
                    "peak {i} drifted off the grid: {c}"
                );
            }
        }
    }

    #[test]
    fn trivial_lattice_state_is_vacuum_like() {
        let lat = make_lattice(RealMatrix::identity(2, 2)).unwrap();
        let spec = StateSpec::new(lat, vec![0, 0]).unwrap();
        let env = initial_envelope(&[3.0]).unwrap();
        let state = prepare_logical_state(&spec, &env, &TruncationPolicy::default()).unwrap();
        let (imax, &cmax) = state
            .weights()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert!(state.center(imax).norm() < 1e-9);
        assert!(cmax > 0.0);
        // peak covariance approaches the vacuum I/4pi for strong damping
        let vac = RealMatrix::identity(2, 2) / (4.0 * PI);
        assert!((state.shared_sigma() - vac).amax() < 0.01);
    }

    #[test]
    fn identity_op_is_neutral() {
        let state = zero_state(0.2);
        let out = apply_gaussian_op(&state, &AffineGaussianOp::identity(1)).unwrap();
        assert_eq!(out.num_peaks(), state.num_peaks());
        assert_abs_diff_eq!(out.centers, state.centers, epsilon = 0.0);
    }

    #[test]
    fn quarter_rotation_swaps_logical_expectations() {
        let state = zero_state(0.1);
        let code = GkpLattice::square(1).unwrap();
        let cosets = pauli_cosets(&code).unwrap();
        let (x_bar, z_bar) = (&cosets[1], &cosets[2]);
        let before_z = pauli_expectation(&state, z_bar);
        let before_x = pauli_expectation(&state, x_bar);
        assert!(before_z > 0.9, "fresh zero state should satisfy Z, got {before_z}");
        assert!(before_x.abs() < 0.1);

        let rot = AffineGaussianOp::new(mode_rotations(&[-PI / 2.0]), RealVector::zeros(2)).unwrap();
        let rotated = apply_gaussian_op(&state, &rot).unwrap();
        let after_x = pauli_expectation(&rotated, x_bar);
        let after_z = pauli_expectation(&rotated, z_bar);
        assert_abs_diff_eq!(after_x.abs(), before_z.abs(), epsilon = 1e-9);
        assert!(after_z.abs() < 0.1);
    }

    #[test]
    fn stabilizer_translations_are_exact_logical_identities() {
        // v^T Omega s is an integer for any dual v and lattice s, so every
        // peak picks up the phase 1 exactly, at any envelope width.
        let code = GkpLattice::square(1).unwrap();
        let cosets = pauli_cosets(&code).unwrap();
        for eps in [0.2, 0.05] {
            let state = zero_state(eps);
            for k in 0..2 {
                let op = AffineGaussianOp::translation(code.s.row(k).transpose());
                let shifted = apply_gaussian_op(&state, &op).unwrap();
                for c in &cosets {
                    let dev =
                        (pauli_expectation(&shifted, c) - pauli_expectation(&state, c)).abs();
                    assert!(dev < 1e-9, "row {k}: deviation {dev}");
                }
            }
        }
        // contrast: half a q-generator is the logical X translation, which
        // flips the Z expectation instead of fixing it
        let state = zero_state(0.1);
        let op = AffineGaussianOp::translation(0.5 * code.s.row(0).transpose());
        let shifted = apply_gaussian_op(&state, &op).unwrap();
        let before = pauli_expectation(&state, &cosets[2]);
        let after = pauli_expectation(&shifted, &cosets[2]);
        assert!(before > 0.9);
        assert_abs_diff_eq!(after, -before, epsilon = 1e-9);
    }

    #[test]
    fn loss_identity_and_fixed_point() {
        let state = vacuum_like();
        for gamma in [1.0, 0.9, 0.5, 0.01] {
            let out = apply_loss(&state, gamma).unwrap();
            assert_abs_diff_eq!(out.sigma, state.sigma, epsilon = 1e-12);
        }
        assert!(apply_loss(&state, 0.0).is_err());
        assert!(apply_loss(&state, 1.1).is_err());
    }

    #[test]
    fn repeated_loss_contracts_centres_at_sqrt_gamma_rate() {
        let lat = make_lattice(RealMatrix::identity(2, 2)).unwrap();
        let mu0 = RealVector::from_vec(vec![2.0, -1.0]);
        let mut state = GaussianSum::from_uniform(
            lat,
            vec![0, 0],
            RealMatrix::identity(2, 2) * 0.3,
            vec![(1.0, mu0.clone())],
        )
        .unwrap();
        for _ in 0..100 {
            state.apply_loss_mut(0.99).unwrap();
        }
        let expect = mu0 * 0.99f64.powi(50);
        assert_abs_diff_eq!(state.center(0), expect, epsilon = 1e-10);
        // covariance follows the geometric interpolation toward the vacuum
        let g = 0.99f64.powi(100);
        let expect_sigma = RealMatrix::identity(2, 2) * (0.3 * g + (1.0 - g) / (4.0 * PI));
        assert_abs_diff_eq!(*state.shared_sigma(), expect_sigma, epsilon = 1e-12);
    }

    #[test]
    fn dephasing_zero_variance_is_identity() {
        let state = zero_state(0.2);
        let mut rng = StdRng::seed_from_u64(5);
        let out = apply_dephasing_mc(&state, 0.0, &mut rng).unwrap();
        assert_abs_diff_eq!(out.centers, state.centers, epsilon = 1e-12);
        assert!(apply_dephasing_mc(&state, -0.1, &mut rng).is_err());
    }

    #[test]
    fn dephasing_leaves_isotropic_origin_peak_invariant() {
        let state = vacuum_like();
        let mut rng = StdRng::seed_from_u64(9);
        let out = apply_dephasing_mc(&state, 0.3, &mut rng).unwrap();
        assert_abs_diff_eq!(out.sigma, state.sigma, epsilon = 1e-12);
        assert_abs_diff_eq!(out.center(0), state.center(0), epsilon = 1e-12);
    }

    #[test]
    fn dephasing_angles_have_half_normal_mean() {
        // mean |phi| for phi ~ N(0, gamma_phi) is sqrt(2 gamma_phi / pi)
        let gamma_phi = 0.04;
        let lat = make_lattice(RealMatrix::identity(2, 2)).unwrap();
        let base = GaussianSum::from_uniform(
            lat,
            vec![0, 0],
            RealMatrix::identity(2, 2) / (4.0 * PI),
            vec![(1.0, RealVector::from_vec(vec![1.0, 0.0]))],
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(41);
        let trials = 10_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let out = apply_dephasing_mc(&base, gamma_phi, &mut rng).unwrap();
            let c = out.center(0);
            total += c[1].atan2(c[0]).abs();
        }
        let mean = total / trials as f64;
        let expect = (2.0 * gamma_phi / PI).sqrt();
        assert!(
            (mean - expect).abs() < 0.02 * expect,
            "mean |phi| = {mean}, expected {expect}"
        );
    }

    #[test]
    fn characteristic_at_origin_is_one() {
        for state in [zero_state(0.2), vacuum_like()] {
            let chi = state.characteristic(&RealVector::zeros(2));
            assert_abs_diff_eq!(chi.re, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(chi.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn vacuum_characteristic_is_the_expected_gaussian() {
        // |chi(v)| = exp(-pi |v|^2 / 2) for the vacuum peak
        let state = vacuum_like();
        for v in [
            RealVector::from_vec(vec![0.5, 0.0]),
            RealVector::from_vec(vec![0.3, -0.7]),
        ] {
            let chi = state.characteristic(&v);
            let expect = (-PI * v.dot(&v) / 2.0).exp();
            assert_abs_diff_eq!(chi.norm(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn survival_of_fresh_zero_state() {
        let state = zero_state(0.1);
        let code = GkpLattice::square(1).unwrap();
        let cosets = pauli_cosets(&code).unwrap();
        let p = survival_probability(&state, &cosets[2], &[0, 0]);
        assert!(p > 0.95 && p <= 1.0, "Z survival {p}");
        // X readout of |0> is a coin flip
        let px = survival_probability(&state, &cosets[1], &[0, 0]);
        assert!((px - 0.5).abs() < 0.05, "X survival {px}");
    }

    #[test]
    fn depolarized_surrogate_survives_at_half() {
        // huge covariance kills the characteristic function at any logical
        let lat = make_lattice(RealMatrix::identity(2, 2)).unwrap();
        let state = GaussianSum::from_uniform(
            lat,
            vec![0, 0],
            RealMatrix::identity(2, 2) * 50.0,
            vec![(1.0, RealVector::zeros(2))],
        )
        .unwrap();
        let code = GkpLattice::square(1).unwrap();
        let cosets = pauli_cosets(&code).unwrap();
        for c in &cosets[1..] {
            let p = survival_probability(&state, c, &[0, 0]);
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn z_translation_fixes_zero_state_survival() {
        let state = zero_state(0.1);
        let code = GkpLattice::square(1).unwrap();
        let cosets = pauli_cosets(&code).unwrap();
        let z_op = AffineGaussianOp::translation(cosets[2].rep.clone());
        let moved = apply_gaussian_op(&state, &z_op).unwrap();
        let before = survival_probability(&state, &cosets[2], &[0, 0]);
        let after = survival_probability(&moved, &cosets[2], &[0, 0]);
        assert_abs_diff_eq!(before, after, epsilon = 1e-9);
    }

    #[test]
    fn wigner_grid_peaks_at_the_centre_and_shows_negativity() {
        let single = vacuum_like();
        let field = numeric_wigner(&single, &GridSpec::plane(-1.0, 1.0, 41)).unwrap();
        let mut max = f64::NEG_INFINITY;
        let mut argmax = (0, 0);
        for i in 0..41 {
            for j in 0..41 {
                if field.values[(i, j)] > max {
                    max = field.values[(i, j)];
                    argmax = (i, j);
                }
            }
        }
        assert_eq!(argmax, (20, 20)); // the origin

        let state = zero_state(0.1);
        let field = numeric_wigner(&state, &GridSpec::plane(-2.0, 2.0, 81)).unwrap();
        assert!(field.values.iter().any(|&v| v < -1e-3), "no negativity found");

        assert!(numeric_wigner(&single, &GridSpec::plane(-1.0, 1.0, 5000)).is_err());
    }

    #[test]
    fn weight_sum_is_preserved_by_channels() {
        let mut state = zero_state(0.2);
        let mut rng = StdRng::seed_from_u64(3);
        state
            .apply_op_mut(&AffineGaussianOp::translation(RealVector::from_vec(vec![
                0.3, 0.1,
            ])))
            .unwrap();
        state.apply_loss_mut(0.97).unwrap();
        state.apply_dephasing_mut(0.01, &mut rng).unwrap();
        assert!((state.weights().iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn from_logicals_reconstructs_the_zero_state_lattice() {
        let code = GkpLattice::square(1).unwrap();
        let cosets = pauli_cosets(&code).unwrap();
        let spec = StateSpec::from_logicals(&code, &[cosets[2].rep.clone()], vec![0, 0]).unwrap();
        assert_eq!(spec.state_lattice.d, 1);
        // same lattice as the canonical zero state (mutual containment)
        let canonical = StateSpec::logical_zero(&code).unwrap();
        for i in 0..2 {
            let row = spec.state_lattice.s.row(i).transpose();
            assert!(canonical.state_lattice.contains(&row, 1e-8));
            let row = canonical.state_lattice.s.row(i).transpose();
            assert!(spec.state_lattice.contains(&row, 1e-8));
        }
        // underspecified: stabilizers alone are d = 2
        assert!(StateSpec::from_logicals(&code, &[], vec![0, 0]).is_err());
    }

    #[test]
    fn gauge_bits_select_state_stabilizer_signs() {
        // Preparation (signed peak weights) and readout (the survival gauge
        // phase) are independent routes to the same sign convention; they
        // must agree for every gauge on every state-lattice generator.
        let code = GkpLattice::square(1).unwrap();
        let zero = StateSpec::logical_zero(&code).unwrap();
        let env = initial_envelope(&[0.1]).unwrap();
        let rows: Vec<PauliCoset> = (0..2)
            .map(|k| PauliCoset {
                rep: zero.state_lattice.s.row(k).transpose(),
                label: Default::default(),
            })
            .collect();
        for gauge in [[0u8, 0], [1, 0], [0, 1], [1, 1]] {
            let spec = StateSpec::new(zero.state_lattice.clone(), gauge.to_vec()).unwrap();
            let state = prepare_logical_state(&spec, &env, &TruncationPolicy::default()).unwrap();
            for row in &rows {
                let good = survival_probability(&state, row, &gauge);
                let bad = survival_probability(&state, row, &[0, 0]);
                // consistent sign: the matching gauge never reads out worse
                assert!(
                    good >= bad - 1e-12,
                    "gauge {gauge:?}: {good} < {bad} on {:?}",
                    row.rep.as_slice()
                );
            }
            // the second generator is the logical Z of the embedded code,
            // and its characteristic value is large at this width
            let z_good = survival_probability(&state, &rows[1], &gauge);
            assert!(z_good > 0.9, "gauge {gauge:?}: Z-row survival {z_good}");
            if gauge[1] == 1 {
                let z_plain = survival_probability(&state, &rows[1], &[0, 0]);
                assert!(z_plain < 0.1, "gauge {gauge:?}: sign not flipped ({z_plain})");
            }
        }
    }
}
