//! Finite-energy envelope tracking and implementation scoring.
//!
//! A finite-energy GKP state is an ideal code state damped by
//! `E(Sigma_E, mu_E)`; Gaussian circuits drag `(Sigma_E, mu_E)` around by
//! conjugation, and the two metrics below measure how far the dragged
//! envelope has strayed from the reference one.  Both feed the compiler's
//! cost ordering; the excitation number ties them back to a physical count.

use crate::error::CoreError;
use crate::lattice::GkpLattice;
use crate::phase_sim::GaussianSum;
use crate::symplectic::{
    spd_power, williamson, AffineGaussianOp, RealMatrix, RealVector,
};
use crate::Result;

/// Envelope parameters together with their cached Williamson factorisation.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub sigma_e: RealMatrix,
    pub mu_e: RealVector,
    /// Symplectic part of `Sigma_E = M_E Sigma0 M_E^T`.
    pub m_e: RealMatrix,
    /// Diagonal part, `diag(nu_1..nu_N, nu_1..nu_N)`.
    pub sigma0: RealMatrix,
}

impl Envelope {
    /// Build an envelope from its covariance and centre, computing the cache.
    pub fn new(sigma_e: RealMatrix, mu_e: RealVector) -> Result<Envelope> {
        if sigma_e.nrows() != mu_e.len() {
            return Err(CoreError::Dimension(format!(
                "covariance is {}x{} but centre has length {}",
                sigma_e.nrows(),
                sigma_e.ncols(),
                mu_e.len()
            )));
        }
        let (m_e, sigma0) = williamson(&sigma_e)?;
        Ok(Envelope {
            sigma_e,
            mu_e,
            m_e,
            sigma0,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.sigma_e.nrows() / 2
    }

    /// `f(Sigma0^{-1})` for an elementwise function of the diagonal.
    pub fn sigma0_inv_map(&self, f: impl Fn(f64) -> f64) -> RealMatrix {
        let dim = self.sigma0.nrows();
        RealMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                f(1.0 / self.sigma0[(i, i)])
            } else {
                0.0
            }
        })
    }
}

/// The ideal envelope the compiler tries to stay close to.
#[derive(Debug, Clone)]
pub struct ReferenceEnvelope {
    pub sigma0_ref: RealMatrix,
    pub epsilons: Vec<f64>,
    /// Cached `Sigma0_ref^{-1/2}`; the metric whitens with it on every call.
    whitener: RealMatrix,
}

impl ReferenceEnvelope {
    pub fn new(epsilons: &[f64]) -> Result<ReferenceEnvelope> {
        let sigma0_ref = envelope_covariance(epsilons)?;
        let whitener = spd_power(&sigma0_ref, -0.5)?;
        Ok(ReferenceEnvelope {
            sigma0_ref,
            epsilons: epsilons.to_vec(),
            whitener,
        })
    }

    /// Reference matching an envelope's own Williamson diagonal.
    pub fn from_envelope(env: &Envelope) -> Result<ReferenceEnvelope> {
        let n = env.num_modes();
        let eps: Vec<f64> = (0..n).map(|j| 1.0 / env.sigma0[(j, j)]).collect();
        ReferenceEnvelope::new(&eps)
    }
}

fn envelope_covariance(epsilons: &[f64]) -> Result<RealMatrix> {
    if epsilons.is_empty() {
        return Err(CoreError::Config("need at least one epsilon".into()));
    }
    if let Some(bad) = epsilons.iter().find(|&&e| !(e > 0.0)) {
        return Err(CoreError::Config(format!(
            "envelope epsilon must be positive, got {bad}"
        )));
    }
    let n = epsilons.len();
    let mut sigma = RealMatrix::zeros(2 * n, 2 * n);
    for (j, &eps) in epsilons.iter().enumerate() {
        sigma[(j, j)] = 1.0 / eps;
        sigma[(n + j, n + j)] = 1.0 / eps;
    }
    Ok(sigma)
}

/// Fresh envelope `E(Sigma0, 0)` with `Sigma_E = diag(1/eps) (+) diag(1/eps)`.
pub fn initial_envelope(epsilons: &[f64]) -> Result<Envelope> {
    let sigma_e = envelope_covariance(epsilons)?;
    let dim = sigma_e.nrows();
    // (I, Sigma_E) is already a valid Williamson factorisation of a
    // diagonal paired covariance; keep the identity frame rather than the
    // sorted one so fresh envelopes stay literal.
    Ok(Envelope {
        sigma0: sigma_e.clone(),
        sigma_e,
        mu_e: RealVector::zeros(dim),
        m_e: RealMatrix::identity(dim, dim),
    })
}

/// Conjugation action on the envelope: `Sigma -> M Sigma M^T`, `mu -> M mu + lambda`.
pub fn apply_gaussian(env: &Envelope, op: &AffineGaussianOp) -> Result<Envelope> {
    if op.dim() != env.sigma_e.nrows() {
        return Err(CoreError::Dimension(format!(
            "op dimension {} does not match envelope dimension {}",
            op.dim(),
            env.sigma_e.nrows()
        )));
    }
    let sigma = &op.m * &env.sigma_e * op.m.transpose();
    let sigma_e = (&sigma + sigma.transpose()) * 0.5;
    // Sigma0 is a symplectic invariant and the frame composes, so the
    // Williamson cache transports exactly; re-factorising instead breaks
    // down once compounded shears squeeze the covariance near the f64
    // spectrum floor.
    Ok(Envelope {
        sigma_e,
        mu_e: &op.m * &env.mu_e + &op.lambda,
        m_e: &op.m * &env.m_e,
        sigma0: env.sigma0.clone(),
    })
}

/// Displacement metric `d_mu^2 = mu_E^T mu_E`.
pub fn metric_mu(env: &Envelope) -> f64 {
    env.mu_e.dot(&env.mu_e)
}

/// Covariance metric `d_Sigma^2 = Tr[ln^2(Sigma0_ref^{-1/2} Sigma_E Sigma0_ref^{-1/2})]`.
pub fn metric_sigma(env: &Envelope, reference: &ReferenceEnvelope) -> Result<f64> {
    metric_sigma_from(&env.sigma_e, reference)
}

/// Same metric evaluated on a bare covariance; the compiler's inner loop
/// scores candidates without building full envelopes.
pub fn metric_sigma_from(sigma_e: &RealMatrix, reference: &ReferenceEnvelope) -> Result<f64> {
    let inv_sqrt = &reference.whitener;
    let whitened = inv_sqrt * sigma_e * inv_sqrt;
    let whitened = (&whitened + whitened.transpose()) * 0.5;
    let eigenvalues: Vec<f64> = if whitened.nrows() == 2 {
        // closed-form 2x2 symmetric eigenvalues
        let (a, b, c) = (whitened[(0, 0)], whitened[(0, 1)], whitened[(1, 1)]);
        let half_gap = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let mid = 0.5 * (a + c);
        vec![mid - half_gap, mid + half_gap]
    } else {
        whitened.symmetric_eigen().eigenvalues.iter().copied().collect()
    };
    let largest = eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(largest > 0.0) {
        return Err(CoreError::NotPositiveDefinite(format!(
            "whitened covariance has eigenvalue {largest:.6e}"
        )));
    }
    // Once the frame's condition number passes ~1e8, repeated congruences
    // leave the small end of the spectrum as float noise of either sign
    // (relative error grows with the square of the condition number, so no
    // fixed rejection threshold survives an exponentially squeezing walk).
    // Clamp to the resolvable ratio: the metric saturates there while the
    // largest eigenvalue still grows exactly, keeping candidate ordering.
    let floor = largest * 1e-15;
    let mut total = 0.0;
    for &lambda in &eigenvalues {
        let l = lambda.max(floor).ln();
        total += l * l;
    }
    Ok(total)
}

/// Weighted excitation count of a prepared state, evaluated in closed form
/// from its Gaussian peaks: `(2 pi)^{2N} sum_m c_m (|mu_m|^2 + Tr Sigma_m)`
/// over the strongest `cutoff` peaks, renormalised so the retained
/// coefficients integrate to one.
pub fn excitation_number(
    _lat: &GkpLattice,
    env: &Envelope,
    state: &GaussianSum,
    cutoff: usize,
) -> Result<f64> {
    let coeffs = state.weights();
    if coeffs.is_empty() {
        return Err(CoreError::Config("state has no peaks".into()));
    }
    let n = env.num_modes();
    let trace = state.shared_sigma().trace();
    let mut order: Vec<usize> = (0..coeffs.len()).collect();
    order.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()).then(a.cmp(&b)));
    order.truncate(cutoff.max(1));
    let mut weight = 0.0;
    let mut moment = 0.0;
    for &i in &order {
        let mu = state.center(i);
        weight += coeffs[i];
        moment += coeffs[i] * (mu.dot(&mu) + trace);
    }
    if weight.abs() < 1e-12 {
        return Err(CoreError::Config(
            "retained peaks have vanishing total weight".into(),
        ));
    }
    Ok((2.0 * std::f64::consts::PI).powi(2 * n as i32) * moment / weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{compose_affine, symplectic_residual};
    use approx::assert_abs_diff_eq;

    fn rotation(theta: f64) -> AffineGaussianOp {
        let m = RealMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), theta.sin(), -theta.sin(), theta.cos()],
        );
        AffineGaussianOp::new(m, RealVector::zeros(2)).unwrap()
    }

    #[test]
    fn fresh_envelope_single_mode() {
        let env = initial_envelope(&[0.1]).unwrap();
        assert_abs_diff_eq!(env.sigma_e, RealMatrix::identity(2, 2) * 10.0, epsilon = 1e-12);
        assert_eq!(env.mu_e, RealVector::zeros(2));
        assert_abs_diff_eq!(env.m_e, RealMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn fresh_envelope_two_modes_interleaves_qqpp() {
        let env = initial_envelope(&[0.1, 0.2]).unwrap();
        let expect = RealMatrix::from_diagonal(&RealVector::from_vec(vec![10.0, 5.0, 10.0, 5.0]));
        assert_abs_diff_eq!(env.sigma_e, expect, epsilon = 1e-12);
    }

    #[test]
    fn non_positive_epsilon_rejected() {
        assert!(initial_envelope(&[0.0]).is_err());
        assert!(initial_envelope(&[-0.3]).is_err());
        assert!(initial_envelope(&[]).is_err());
    }

    #[test]
    fn fresh_envelope_has_zero_sigma_metric() {
        let env = initial_envelope(&[0.15]).unwrap();
        let reference = ReferenceEnvelope::new(&[0.15]).unwrap();
        assert_abs_diff_eq!(metric_sigma(&env, &reference).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_op_keeps_envelope() {
        let env = initial_envelope(&[0.1]).unwrap();
        let out = apply_gaussian(&env, &AffineGaussianOp::identity(1)).unwrap();
        assert_abs_diff_eq!(out.sigma_e, env.sigma_e, epsilon = 1e-12);
        assert_abs_diff_eq!(out.mu_e, env.mu_e, epsilon = 1e-12);
    }

    #[test]
    fn rotation_preserves_isotropic_covariance_and_rotates_mu() {
        let mut env = initial_envelope(&[0.1]).unwrap();
        env.mu_e = RealVector::from_vec(vec![1.0, 0.0]);
        let op = rotation(std::f64::consts::FRAC_PI_2);
        let out = apply_gaussian(&env, &op).unwrap();
        assert_abs_diff_eq!(out.sigma_e, env.sigma_e, epsilon = 1e-10);
        assert_abs_diff_eq!(
            out.mu_e,
            RealVector::from_vec(vec![0.0, -1.0]),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(metric_mu(&out), metric_mu(&env), epsilon = 1e-12);
    }

    #[test]
    fn shear_transforms_covariance_explicitly() {
        let env = initial_envelope(&[0.1]).unwrap();
        let m = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let lambda = RealVector::from_vec(vec![1.0 / std::f64::consts::SQRT_2, 0.0]);
        let op = AffineGaussianOp::new(m, lambda.clone()).unwrap();
        let out = apply_gaussian(&env, &op).unwrap();
        let expect = RealMatrix::from_row_slice(2, 2, &[50.0, 20.0, 20.0, 10.0]);
        assert_abs_diff_eq!(out.sigma_e, expect, epsilon = 1e-10);
        assert_abs_diff_eq!(out.mu_e, lambda, epsilon = 1e-12);
        assert!(symplectic_residual(&out.m_e) < 1e-9);
        assert_abs_diff_eq!(
            &out.m_e * &out.sigma0 * out.m_e.transpose(),
            out.sigma_e,
            epsilon = 1e-9
        );
    }

    #[test]
    fn metric_mu_basics() {
        let mut env = initial_envelope(&[0.1]).unwrap();
        assert_eq!(metric_mu(&env), 0.0);
        env.mu_e = RealVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(metric_mu(&env), 1.0);
    }

    #[test]
    fn metric_sigma_scalar_oracle() {
        // reference eps=1 whitens to the identity, so diag(e^2, e^-2)
        // scores ln^2(e^2) + ln^2(e^-2) = 8.
        let reference = ReferenceEnvelope::new(&[1.0]).unwrap();
        let sigma = RealMatrix::from_diagonal(&RealVector::from_vec(vec![
            (2.0f64).exp(),
            (-2.0f64).exp(),
        ]));
        let env = Envelope::new(sigma, RealVector::zeros(2)).unwrap();
        assert_abs_diff_eq!(metric_sigma(&env, &reference).unwrap(), 8.0, epsilon = 1e-10);
    }

    #[test]
    fn orthogonal_ops_keep_sigma_metric_zero_squeezing_raises_it() {
        let reference = ReferenceEnvelope::new(&[0.1]).unwrap();
        let env = initial_envelope(&[0.1]).unwrap();
        let rotated = apply_gaussian(&env, &rotation(0.7)).unwrap();
        assert_abs_diff_eq!(metric_sigma(&rotated, &reference).unwrap(), 0.0, epsilon = 1e-9);

        let shear = AffineGaussianOp::new(
            RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
            RealVector::zeros(2),
        )
        .unwrap();
        let sheared = apply_gaussian(&env, &shear).unwrap();
        assert!(metric_sigma(&sheared, &reference).unwrap() > 0.1);
    }

    #[test]
    fn conjugation_is_a_group_action() {
        let env = initial_envelope(&[0.2]).unwrap();
        let g = rotation(0.4);
        let mut h = AffineGaussianOp::new(
            RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.5, 1.0]),
            RealVector::from_vec(vec![0.3, -0.2]),
        )
        .unwrap();
        h.lambda[0] = 0.25;
        let stepwise = apply_gaussian(&apply_gaussian(&env, &g).unwrap(), &h).unwrap();
        let combined = apply_gaussian(&env, &compose_affine(&h, &g).unwrap()).unwrap();
        assert_abs_diff_eq!(stepwise.sigma_e, combined.sigma_e, epsilon = 1e-10);
        assert_abs_diff_eq!(stepwise.mu_e, combined.mu_e, epsilon = 1e-10);
    }
}
