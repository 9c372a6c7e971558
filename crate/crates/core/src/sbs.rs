//! Small-Big-small stabilization circuits for finite-energy grid states.
//!
//! Each stabilizer generator gets one ancilla-assisted round built from a
//! small controlled displacement `alpha`, a big one `beta`, and z-rotation
//! corrections that re-center the round when the envelope mean is not at
//! the origin.  The cooling rate fixes the displacement normalization.

use crate::envelope::Envelope;
use crate::error::CoreError;
use crate::lattice::GkpLattice;
use crate::symplectic::{omega_real, RealMatrix, RealVector};
use crate::Result;

/// `sqrt(2 pi)`: one lattice unit expressed as a displacement length.
pub const CELL: f64 = 2.5066282746310002;

fn diagonal_map(sigma0: &RealMatrix, f: impl Fn(f64) -> f64) -> Result<RealMatrix> {
    let dim = sigma0.nrows();
    for i in 0..dim {
        if sigma0[(i, i)] <= 0.0 {
            return Err(CoreError::NotPositiveDefinite(
                "envelope diagonal must be positive".into(),
            ));
        }
        for j in 0..dim {
            if i != j && sigma0[(i, j)].abs() > 1e-12 {
                return Err(CoreError::Config(
                    "envelope diagonal part must be diagonal".into(),
                ));
            }
        }
    }
    Ok(RealMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            f(1.0 / sigma0[(i, i)])
        } else {
            0.0
        }
    }))
}

fn check_generator(s_j: &RealVector, m_e: &RealMatrix) -> Result<RealMatrix> {
    if s_j.norm() == 0.0 {
        return Err(CoreError::Config(
            "stabilizer generator must be nonzero".into(),
        ));
    }
    if m_e.nrows() != s_j.len() || !m_e.is_square() {
        return Err(CoreError::Dimension(format!(
            "envelope frame is {}x{} but the generator has length {}",
            m_e.nrows(),
            m_e.ncols(),
            s_j.len()
        )));
    }
    m_e.clone()
        .try_inverse()
        .ok_or_else(|| CoreError::Config("envelope frame is singular".into()))
}

/// Engineered cooling rate of one stabilizer direction:
/// `Gamma = (s^T M^-T tanh(Sigma0^-1) M^-1 s)^-1`.
pub fn cooling_rate(s_j: &RealVector, m_e: &RealMatrix, sigma0: &RealMatrix) -> Result<f64> {
    let m_inv = check_generator(s_j, m_e)?;
    let tanh = diagonal_map(sigma0, f64::tanh)?;
    let w = m_inv.transpose() * tanh * m_inv;
    let q = (s_j.transpose() * w * s_j)[(0, 0)];
    if q <= 0.0 {
        return Err(CoreError::NotPositiveDefinite(format!(
            "cooling quadratic form evaluated to {q}"
        )));
    }
    Ok(1.0 / q)
}

/// The small and big controlled displacements of one round:
/// `alpha = -Gamma M sinh(Sigma0^-1) M^T Omega s`,
/// `beta  = 2 Gamma M cosh(Sigma0^-1) M^-1 s`.
///
/// The two numerators mix `M^T` and `M^-1`; they coincide whenever the
/// envelope frame is orthogonal, which covers every fresh isotropic
/// envelope.
pub fn sbs_displacements(
    s_j: &RealVector,
    m_e: &RealMatrix,
    sigma0: &RealMatrix,
) -> Result<(RealVector, RealVector)> {
    let m_inv = check_generator(s_j, m_e)?;
    let gamma = cooling_rate(s_j, m_e, sigma0)?;
    let sinh = diagonal_map(sigma0, f64::sinh)?;
    let cosh = diagonal_map(sigma0, f64::cosh)?;
    let n = s_j.len() / 2;
    let w = omega_real(n);
    let alpha = -(m_e * sinh * m_e.transpose() * &w * s_j) * gamma;
    let beta = (m_e * cosh * m_inv * s_j) * (2.0 * gamma);
    Ok((alpha, beta))
}

/// One element of a stabilization round, in execution order.
#[derive(Debug, Clone, PartialEq)]
pub enum SbsElement {
    /// Ancilla-controlled displacement along the vector.
    ControlledTranslation(RealVector),
    /// Ancilla z-rotation by the angle (radians, in (-pi, pi]).
    RotationZ(f64),
    /// Ancilla x-rotation by the angle.
    RotationX(f64),
}

/// One round of the protocol, addressing a single stabilizer generator.
#[derive(Debug, Clone)]
pub struct SbsRound {
    /// Row index of the generator in the lattice basis.
    pub index: usize,
    pub alpha: RealVector,
    pub beta: RealVector,
    pub gamma: f64,
    /// z-correction paired with the alpha displacements.
    pub alpha_correction: f64,
    /// z-correction paired with the beta displacement.
    pub beta_correction: f64,
    /// Overall round phase `-l s^T Omega mu`, recorded but not applied.
    pub gauge_angle: f64,
    pub elements: Vec<SbsElement>,
}

/// Rounds cycling over every stabilizer generator, for one envelope.
#[derive(Debug, Clone)]
pub struct SbsCircuit {
    pub rounds: Vec<SbsRound>,
    pub envelope: Envelope,
}

/// Reduce an angle to (-pi, pi].
fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = x.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Synthesize the full stabilization circuit: per generator the sequence
/// `CT(a), Rz(+), Rx(-pi/2), Rz(-), CT(b), Rz(-), Rx(pi/2), Rz(+), CT(a)`
/// where the z-angles are `+l a^T Omega mu` and `-l b^T Omega mu`.
pub fn sbs_circuit(lat: &GkpLattice, env: &Envelope) -> Result<SbsCircuit> {
    let dim = lat.dim();
    if env.sigma_e.nrows() != dim {
        return Err(CoreError::Dimension(format!(
            "envelope dimension {} does not match lattice dimension {dim}",
            env.sigma_e.nrows()
        )));
    }
    let w = omega_real(lat.n);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut rounds = Vec::with_capacity(dim);
    for j in 0..dim {
        let s_j: RealVector = lat.s.row(j).transpose();
        let gamma = cooling_rate(&s_j, &env.m_e, &env.sigma0)?;
        let (alpha, beta) = sbs_displacements(&s_j, &env.m_e, &env.sigma0)?;
        let alpha_correction = wrap_angle(CELL * (alpha.transpose() * &w * &env.mu_e)[(0, 0)]);
        let beta_correction = wrap_angle(-CELL * (beta.transpose() * &w * &env.mu_e)[(0, 0)]);
        let gauge_angle = wrap_angle(-CELL * (s_j.transpose() * &w * &env.mu_e)[(0, 0)]);
        let elements = vec![
            SbsElement::ControlledTranslation(alpha.clone()),
            SbsElement::RotationZ(alpha_correction),
            SbsElement::RotationX(-half_pi),
            SbsElement::RotationZ(beta_correction),
            SbsElement::ControlledTranslation(beta.clone()),
            SbsElement::RotationZ(beta_correction),
            SbsElement::RotationX(half_pi),
            SbsElement::RotationZ(alpha_correction),
            SbsElement::ControlledTranslation(alpha.clone()),
        ];
        rounds.push(SbsRound {
            index: j,
            alpha,
            beta,
            gamma,
            alpha_correction,
            beta_correction,
            gauge_angle,
            elements,
        });
    }
    Ok(SbsCircuit {
        rounds,
        envelope: env.clone(),
    })
}

// ---------------------------------------------------------------------------
