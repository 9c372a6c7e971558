//! Compiling logical Cliffords into Gaussian implementations.
//!
//! Every logical Clifford has a continuum of Gaussian implementations
//! differing by Gaussian stabilizers.  The three strategies here pick one:
//! `Constant` always takes the fixed base representative, `RandomWalk`
//! composes it with a uniformly random short stabilizer word, and
//! `GaussianStabilizer` greedily searches the walk table for the word whose
//! dragged envelope stays closest to the reference — squeezing distance
//! first, displacement on ties.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::envelope::{
    apply_gaussian, metric_mu, metric_sigma_from, Envelope, ReferenceEnvelope,
};
use crate::error::CoreError;
use crate::lattice::{pauli_cosets, GkpLattice, PauliLabel};
use crate::phase_sim::mode_rotations;
use crate::stab_group::{enumerate_walks, CayleyWord, GroupGenerator};
use crate::symplectic::{compose_affine, AffineGaussianOp, RealMatrix, RealVector};
use crate::Result;

pub const DEFAULT_WALK_LENGTH: usize = 2;

/// One logical Clifford gate on qubit indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicalGate {
    H(usize),
    S(usize),
    X(usize),
    Z(usize),
    CX(usize, usize),
    CZ(usize, usize),
    CXX(usize, usize),
}

impl LogicalGate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            LogicalGate::H(j) | LogicalGate::S(j) | LogicalGate::X(j) | LogicalGate::Z(j) => {
                vec![j]
            }
            LogicalGate::CX(j, k) | LogicalGate::CZ(j, k) | LogicalGate::CXX(j, k) => vec![j, k],
        }
    }

    pub fn validate(&self, num_modes: usize) -> Result<()> {
        let q = self.qubits();
        if let Some(&bad) = q.iter().find(|&&j| j >= num_modes) {
            return Err(CoreError::UnsupportedGate(format!(
                "qubit index {bad} out of range for {num_modes} modes"
            )));
        }
        if q.len() == 2 && q[0] == q[1] {
            return Err(CoreError::UnsupportedGate(format!(
                "two-qubit gate needs distinct qubits, got {} twice",
                q[0]
            )));
        }
        Ok(())
    }

    pub fn from_name(name: &str, qubits: &[usize]) -> Result<LogicalGate> {
        let need = |n: usize| {
            if qubits.len() == n {
                Ok(())
            } else {
                Err(CoreError::UnsupportedGate(format!(
                    "gate {name} takes {n} qubit(s), got {}",
                    qubits.len()
                )))
            }
        };
        match name {
            "H" => need(1).map(|_| LogicalGate::H(qubits[0])),
            "S" => need(1).map(|_| LogicalGate::S(qubits[0])),
            "X" => need(1).map(|_| LogicalGate::X(qubits[0])),
            "Z" => need(1).map(|_| LogicalGate::Z(qubits[0])),
            "CX" => need(2).map(|_| LogicalGate::CX(qubits[0], qubits[1])),
            "CZ" => need(2).map(|_| LogicalGate::CZ(qubits[0], qubits[1])),
            "CXX" => need(2).map(|_| LogicalGate::CXX(qubits[0], qubits[1])),
            other => Err(CoreError::UnsupportedGate(format!("unknown gate {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LogicalGate::H(_) => "H",
            LogicalGate::S(_) => "S",
            LogicalGate::X(_) => "X",
            LogicalGate::Z(_) => "Z",
            LogicalGate::CX(..) => "CX",
            LogicalGate::CZ(..) => "CZ",
            LogicalGate::CXX(..) => "CXX",
        }
    }
}

/// Strategy choosing the stabilizer word per gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompilerKind {
    Constant,
    RandomWalk { seed: u64 },
    GaussianStabilizer { walk_length: usize },
}

/// One compiled gate: the base representative, the chosen stabilizer word,
/// their composition, and the envelope it drags forward.
#[derive(Debug, Clone)]
pub struct CompiledGate {
    pub base: AffineGaussianOp,
    pub word: CayleyWord,
    pub total: AffineGaussianOp,
    pub env_after: Envelope,
    /// `(d_sigma^2, d_mu^2)` of `env_after`.
    pub metrics_after: (f64, f64),
}

fn require_square_product(lat: &GkpLattice) -> Result<()> {
    let dim = lat.dim();
    let target = RealMatrix::identity(dim, dim) * (2.0f64).sqrt();
    if (&lat.s - target).amax() > 1e-9 {
        return Err(CoreError::UnsupportedGate(
            "base representatives are defined for products of square qubit lattices only".into(),
        ));
    }
    Ok(())
}

fn pauli_rep(lat: &GkpLattice, x: &[i64], z: &[i64]) -> Result<RealVector> {
    let want = PauliLabel {
        x: x.to_vec(),
        z: z.to_vec(),
    };
    for c in pauli_cosets(lat)? {
        if c.label == want {
            return Ok(c.rep);
        }
    }
    Err(CoreError::UnsupportedGate(format!(
        "no coset labelled {want}"
    )))
}

/// The fixed closest-to-identity Gaussian representative of a logical gate
/// on a product of square qubit lattices.
pub fn base_representative(gate: LogicalGate, lat: &GkpLattice) -> Result<AffineGaussianOp> {
    require_square_product(lat)?;
    let n = lat.n;
    gate.validate(n)?;
    let dim = lat.dim();
    let ident = RealMatrix::identity(dim, dim);
    let zero = RealVector::zeros(dim);
    match gate {
        LogicalGate::H(j) => {
            let mut phis = vec![0.0; n];
            phis[j] = -std::f64::consts::FRAC_PI_2;
            AffineGaussianOp::new(mode_rotations(&phis), zero)
        }
        LogicalGate::S(j) => {
            let mut m = ident;
            m[(n + j, j)] = -1.0;
            AffineGaussianOp::new(m, zero)
        }
        LogicalGate::X(j) => {
            let mut x = vec![0; n];
            x[j] = 1;
            Ok(AffineGaussianOp::translation(pauli_rep(lat, &x, &vec![0; n])?))
        }
        LogicalGate::Z(j) => {
            let mut z = vec![0; n];
            z[j] = 1;
            Ok(AffineGaussianOp::translation(pauli_rep(lat, &vec![0; n], &z)?))
        }
        LogicalGate::CZ(j, k) => {
            let mut m = ident;
            m[(n + j, k)] = -1.0;
            m[(n + k, j)] = -1.0;
            AffineGaussianOp::new(m, zero)
        }
        LogicalGate::CX(j, k) => {
            let mut m = ident;
            m[(k, j)] = -1.0;
            m[(n + j, n + k)] = 1.0;
            AffineGaussianOp::new(m, zero)
        }
        LogicalGate::CXX(j, k) => {
            let mut m = ident;
            m[(j, n + k)] = 1.0;
            m[(k, n + j)] = 1.0;
            AffineGaussianOp::new(m, zero)
        }
    }
}

const SIGMA_TIE_TOL: f64 = 1e-10;

/// Greedy single-gate search: among `base ∘ walk` candidates, strictly
/// smaller squeezing distance wins; within the tie tolerance, strictly
/// smaller displacement wins; the first encountered keeps remaining ties.
pub fn compile_gate(
    base: &AffineGaussianOp,
    env: &Envelope,
    walks: &[CayleyWord],
    reference: &ReferenceEnvelope,
) -> Result<CompiledGate> {
    if walks.is_empty() {
        return Err(CoreError::Config("walk list is empty".into()));
    }
    let identity_idx = walks
        .iter()
        .position(|w| w.sequence.is_empty())
        .ok_or_else(|| CoreError::Config("walk list must include the identity word".into()))?;

    let score = |word: &CayleyWord| -> Result<(AffineGaussianOp, f64, f64)> {
        let total = compose_affine(base, &word.resolved)?;
        let sigma = &total.m * &env.sigma_e * total.m.transpose();
        let mu = &total.m * &env.mu_e + &total.lambda;
        let d_sigma = metric_sigma_from(&sigma, reference)?;
        Ok((total, d_sigma, mu.dot(&mu)))
    };

    let (mut best_total, mut best_sigma, mut best_mu) = score(&walks[identity_idx])?;
    let mut best_idx = identity_idx;
    for (idx, word) in walks.iter().enumerate() {
        if idx == identity_idx {
            continue;
        }
        let (total, d_sigma, d_mu) = score(word)?;
        let wins = if d_sigma < best_sigma - SIGMA_TIE_TOL {
            true
        } else if (d_sigma - best_sigma).abs() <= SIGMA_TIE_TOL {
            d_mu < best_mu
        } else {
            false
        };
        if wins {
            best_total = total;
            best_sigma = d_sigma;
            best_mu = d_mu;
            best_idx = idx;
        }
    }

    let env_after = apply_gaussian(env, &best_total)?;
    Ok(CompiledGate {
        base: base.clone(),
        word: walks[best_idx].clone(),
        total: best_total,
        env_after,
        metrics_after: (best_sigma, best_mu),
    })
}

fn fixed_word_gate(
    base: &AffineGaussianOp,
    env: &Envelope,
    word: &CayleyWord,
    reference: &ReferenceEnvelope,
) -> Result<CompiledGate> {
    let total = compose_affine(base, &word.resolved)?;
    let env_after = apply_gaussian(env, &total)?;
    let d_sigma = metric_sigma_from(&env_after.sigma_e, reference)?;
    let d_mu = metric_mu(&env_after);
    Ok(CompiledGate {
        base: base.clone(),
        word: word.clone(),
        total,
        env_after,
        metrics_after: (d_sigma, d_mu),
    })
}

/// Compile a gate list, threading the envelope forward through each chosen
/// implementation.  The reference is the initial envelope's own Williamson
/// diagonal.
pub fn compile_circuit(
    gates: &[LogicalGate],
    env0: &Envelope,
    kind: CompilerKind,
    lat: &GkpLattice,
    gens: &[GroupGenerator],
) -> Result<Vec<CompiledGate>> {
    let reference = ReferenceEnvelope::from_envelope(env0)?;
    let walks = match kind {
        CompilerKind::Constant => Vec::new(),
        CompilerKind::RandomWalk { .. } => enumerate_walks(gens, 1)?,
        CompilerKind::GaussianStabilizer { walk_length } => enumerate_walks(gens, walk_length)?,
    };
    let identity_word = CayleyWord {
        sequence: Vec::new(),
        resolved: AffineGaussianOp::identity(lat.n),
    };
    let mut rng = match kind {
        CompilerKind::RandomWalk { seed } => Some(ChaCha12Rng::seed_from_u64(seed)),
        _ => None,
    };

    let mut out = Vec::with_capacity(gates.len());
    let mut env = env0.clone();
    for &gate in gates {
        let base = base_representative(gate, lat)?;
        let compiled = match kind {
            CompilerKind::Constant => fixed_word_gate(&base, &env, &identity_word, &reference)?,
            CompilerKind::RandomWalk { .. } => {
                let rng = rng.as_mut().expect("random-walk rng");
                let word = &walks[rng.gen_range(0..walks.len())];
                fixed_word_gate(&base, &env, word, &reference)?
            }
            CompilerKind::GaussianStabilizer { .. } => {
                compile_gate(&base, &env, &walks, &reference)?
            }
        };
        env = compiled.env_after.clone();
        out.push(compiled);
    }
    Ok(out)
}

/// Composition of the per-gate totals, first gate applied first.
pub fn circuit_total(compiled: &[CompiledGate], num_modes: usize) -> Result<AffineGaussianOp> {
    let mut acc = AffineGaussianOp::identity(num_modes);
    for gate in compiled {
        acc = compose_affine(&gate.total, &acc)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{initial_envelope, metric_sigma};
    use crate::stab_group::build_generators;
    use crate::symplectic::omega_real;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn square(n: usize) -> GkpLattice {
        GkpLattice::square(n).unwrap()
    }

    #[test]
    fn base_symplectics_square_to_known_gates() {
        let lat = square(1);
        let h = base_representative(LogicalGate::H(0), &lat).unwrap();
        let h2 = &h.m * &h.m;
        assert_abs_diff_eq!(h2, -RealMatrix::identity(2, 2), epsilon = 1e-12);
        let h4 = &h2 * &h2;
        assert_abs_diff_eq!(h4, RealMatrix::identity(2, 2), epsilon = 1e-12);

        let s = base_representative(LogicalGate::S(0), &lat).unwrap();
        let s2 = &s.m * &s.m;
        assert_abs_diff_eq!(
            s2,
            RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, -2.0, 1.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn base_translations_hit_the_coset_reps() {
        let lat = square(2);
        let x1 = base_representative(LogicalGate::X(1), &lat).unwrap();
        assert_abs_diff_eq!(x1.m, RealMatrix::identity(4, 4), epsilon = 0.0);
        assert_abs_diff_eq!(
            x1.lambda,
            RealVector::from_vec(vec![0.0, FRAC_1_SQRT_2, 0.0, 0.0]),
            epsilon = 1e-9
        );
        let z0 = base_representative(LogicalGate::Z(0), &lat).unwrap();
        assert_abs_diff_eq!(
            z0.lambda,
            RealVector::from_vec(vec![0.0, 0.0, FRAC_1_SQRT_2, 0.0]),
            epsilon = 1e-9
        );
    }

    #[test]
    fn cz_squared_is_the_strength_two_coupling() {
        let lat = square(2);
        let cz = base_representative(LogicalGate::CZ(0, 1), &lat).unwrap();
        let sq = &cz.m * &cz.m;
        let mut want = RealMatrix::identity(4, 4);
        want[(2, 1)] = -2.0;
        want[(3, 0)] = -2.0;
        assert_abs_diff_eq!(sq, want, epsilon = 1e-12);
    }

    #[test]
    fn two_qubit_bases_are_symplectic_and_act_on_paulis() {
        let lat = square(2);
        let w = omega_real(2);
        for gate in [
            LogicalGate::CX(0, 1),
            LogicalGate::CX(1, 0),
            LogicalGate::CZ(0, 1),
            LogicalGate::CXX(0, 1),
        ] {
            let op = base_representative(gate, &lat).unwrap();
            assert_abs_diff_eq!(&op.m * &w * op.m.transpose(), w, epsilon = 1e-12);
        }
        // CX(0,1): X on the control propagates to the target
        let cx = base_representative(LogicalGate::CX(0, 1), &lat).unwrap();
        let x0 = RealVector::from_vec(vec![FRAC_1_SQRT_2, 0.0, 0.0, 0.0]);
        let moved = &cx.m * &x0;
        let want = RealVector::from_vec(vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0, 0.0]);
        assert_abs_diff_eq!(moved, want, epsilon = 1e-12);
    }

    #[test]
    fn unsupported_lattice_is_rejected() {
        let s = RealMatrix::from_row_slice(2, 2, &[2.0f64.sqrt(), 0.0, 0.6, FRAC_1_SQRT_2]);
        let lat = crate::lattice::make_lattice(s).unwrap();
        match base_representative(LogicalGate::H(0), &lat) {
            Err(CoreError::UnsupportedGate(_)) => {}
            other => panic!("expected unsupported-lattice error, got {other:?}"),
        }
    }

    #[test]
    fn gate_validation() {
        assert!(LogicalGate::H(2).validate(2).is_err());
        assert!(LogicalGate::CX(1, 1).validate(2).is_err());
        assert!(LogicalGate::CZ(0, 1).validate(2).is_ok());
        assert!(LogicalGate::from_name("CX", &[0]).is_err());
        assert!(LogicalGate::from_name("Q", &[0]).is_err());
        assert_eq!(
            LogicalGate::from_name("CXX", &[1, 0]).unwrap(),
            LogicalGate::CXX(1, 0)
        );
    }

    #[test]
    fn identity_gate_on_fresh_envelope_stays_put() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let walks = enumerate_walks(&gens, 2).unwrap();
        let env = initial_envelope(&[0.1]).unwrap();
        let reference = ReferenceEnvelope::new(&[0.1]).unwrap();
        let base = AffineGaussianOp::identity(1);
        let out = compile_gate(&base, &env, &walks, &reference).unwrap();
        assert!(out.word.sequence.is_empty());
        assert!(out.metrics_after.0 < 1e-18);
        assert!(out.metrics_after.1 < 1e-18);
    }

    #[test]
    fn repeated_shears_let_the_walk_undo_the_squeeze() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let walks = enumerate_walks(&gens, 2).unwrap();
        let env = initial_envelope(&[0.1]).unwrap();
        let reference = ReferenceEnvelope::new(&[0.1]).unwrap();
        let base = base_representative(LogicalGate::S(0), &lat).unwrap();

        // On a fresh isotropic envelope the bare shear is already optimal:
        // every total congruent to it mod 2 has at least its condition
        // number, so the search ties and the displacement tie-break keeps
        // the identity word.
        let first = compile_gate(&base, &env, &walks, &reference).unwrap();
        let bare = apply_gaussian(&env, &base).unwrap();
        let bare_sigma = metric_sigma(&bare, &reference).unwrap();
        assert!(first.word.sequence.is_empty());
        assert!((first.metrics_after.0 - bare_sigma).abs() < 1e-9);
        assert!(first.metrics_after.0 > 1.0, "the shear does squeeze");
        // exhaustive re-check: nothing in the table beats the winner
        for word in &walks {
            let total = compose_affine(&base, &word.resolved).unwrap();
            let sigma = &total.m * &env.sigma_e * total.m.transpose();
            let mu = &total.m * &env.mu_e + &total.lambda;
            let d_sigma = metric_sigma_from(&sigma, &reference).unwrap();
            let better = d_sigma < first.metrics_after.0 - SIGMA_TIE_TOL
                || ((d_sigma - first.metrics_after.0).abs() <= SIGMA_TIE_TOL
                    && mu.dot(&mu) < first.metrics_after.1 - 1e-15);
            assert!(!better, "walk {:?} beats the returned word", word.sequence);
        }

        // On the dragged envelope a length-1 word cancels the accumulated
        // shear exactly, strictly beating the bare second gate.
        let second = compile_gate(&base, &first.env_after, &walks, &reference).unwrap();
        assert!(!second.word.sequence.is_empty());
        assert!(second.metrics_after.0 < 1e-16, "squeeze fully undone");
        let bare2 = apply_gaussian(&first.env_after, &base).unwrap();
        assert!(metric_sigma(&bare2, &reference).unwrap() > 1.0);
    }

    #[test]
    fn translation_gate_keeps_sigma_clean() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let walks = enumerate_walks(&gens, 2).unwrap();
        let env = initial_envelope(&[0.1]).unwrap();
        let reference = ReferenceEnvelope::new(&[0.1]).unwrap();
        let base = base_representative(LogicalGate::X(0), &lat).unwrap();
        let out = compile_gate(&base, &env, &walks, &reference).unwrap();
        assert!(out.metrics_after.0 < 1e-16);
        let bare_mu = base.lambda.dot(&base.lambda);
        assert!(out.metrics_after.1 <= bare_mu + 1e-15);
    }

    #[test]
    fn empty_circuit_compiles_to_nothing() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let env = initial_envelope(&[0.2]).unwrap();
        let out = compile_circuit(&[], &env, CompilerKind::Constant, &lat, &gens).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn constant_double_hadamard_is_the_point_reflection() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let env = initial_envelope(&[0.15]).unwrap();
        let gates = [LogicalGate::H(0), LogicalGate::H(0)];
        let out = compile_circuit(&gates, &env, CompilerKind::Constant, &lat, &gens).unwrap();
        let total = circuit_total(&out, 1).unwrap();
        assert_abs_diff_eq!(total.m, -RealMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(out[1].metrics_after.0 < 1e-16, "rotations must not squeeze");
    }

    #[test]
    fn random_walk_is_seed_deterministic() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let env = initial_envelope(&[0.1]).unwrap();
        let gates: Vec<LogicalGate> =
            (0..20).map(|i| if i % 2 == 0 { LogicalGate::H(0) } else { LogicalGate::S(0) }).collect();
        let a = compile_circuit(&gates, &env, CompilerKind::RandomWalk { seed: 7 }, &lat, &gens)
            .unwrap();
        let b = compile_circuit(&gates, &env, CompilerKind::RandomWalk { seed: 7 }, &lat, &gens)
            .unwrap();
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.word.sequence == y.word.sequence));
        let c = compile_circuit(&gates, &env, CompilerKind::RandomWalk { seed: 8 }, &lat, &gens)
            .unwrap();
        assert!(
            a.iter().zip(&c).any(|(x, y)| x.word.sequence != y.word.sequence),
            "different seeds should pick different words somewhere in 20 gates"
        );
    }

    fn random_gate(rng: &mut StdRng, n: usize) -> LogicalGate {
        let single = [
            |j| LogicalGate::H(j),
            |j| LogicalGate::S(j),
            |j| LogicalGate::X(j),
            |j| LogicalGate::Z(j),
        ];
        if n > 1 && rng.gen_bool(0.4) {
            let j = rng.gen_range(0..n);
            let mut k = rng.gen_range(0..n - 1);
            if k >= j {
                k += 1;
            }
            match rng.gen_range(0..3) {
                0 => LogicalGate::CX(j, k),
                1 => LogicalGate::CZ(j, k),
                _ => LogicalGate::CXX(j, k),
            }
        } else {
            single[rng.gen_range(0..4)](rng.gen_range(0..n))
        }
    }

    #[test]
    fn all_kinds_implement_the_same_logical_circuit() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let env = initial_envelope(&[0.1]).unwrap();
        let cosets = pauli_cosets(&lat).unwrap();
        let mut rng = StdRng::seed_from_u64(23);
        for trial in 0..3 {
            let gates: Vec<LogicalGate> = (0..20).map(|_| random_gate(&mut rng, 1)).collect();
            let constant =
                compile_circuit(&gates, &env, CompilerKind::Constant, &lat, &gens).unwrap();
            let reference = circuit_total(&constant, 1).unwrap();
            for kind in [
                CompilerKind::RandomWalk { seed: trial },
                CompilerKind::GaussianStabilizer { walk_length: 2 },
            ] {
                let compiled = compile_circuit(&gates, &env, kind, &lat, &gens).unwrap();
                let total = circuit_total(&compiled, 1).unwrap();
                let net = compose_affine(&total, &reference.inverse()).unwrap();
                for c in &cosets {
                    let diff = &net.m * &c.rep - &c.rep;
                    assert!(
                        lat.contains(&diff, 1e-7),
                        "net symplectic moves coset {} ({kind:?})",
                        c.label
                    );
                }
            }
        }
    }

    #[test]
    fn gs_never_loses_to_constant_on_matched_inputs() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let walks = enumerate_walks(&gens, 2).unwrap();
        let reference = ReferenceEnvelope::new(&[0.1]).unwrap();
        let mut rng = StdRng::seed_from_u64(77);
        let fresh = initial_envelope(&[0.1]).unwrap();
        for _ in 0..40 {
            // drag the envelope somewhere reachable
            let scramble: Vec<LogicalGate> =
                (0..rng.gen_range(0..6)).map(|_| random_gate(&mut rng, 1)).collect();
            let env = compile_circuit(&scramble, &fresh, CompilerKind::Constant, &lat, &gens)
                .unwrap()
                .last()
                .map(|g| g.env_after.clone())
                .unwrap_or_else(|| fresh.clone());
            let gate = random_gate(&mut rng, 1);
            let base = base_representative(gate, &lat).unwrap();
            let gs = compile_gate(&base, &env, &walks, &reference).unwrap();
            let bare = apply_gaussian(&env, &base).unwrap();
            let bare_sigma = metric_sigma(&bare, &reference).unwrap();
            let bare_mu = metric_mu(&bare);
            assert!(gs.metrics_after.0 <= bare_sigma + SIGMA_TIE_TOL);
            if (gs.metrics_after.0 - bare_sigma).abs() <= SIGMA_TIE_TOL {
                assert!(gs.metrics_after.1 <= bare_mu + 1e-12);
            }
        }
    }

    #[test]
    fn missing_identity_word_is_rejected() {
        let lat = square(1);
        let gens = build_generators(&lat).unwrap();
        let walks = enumerate_walks(&gens, 1).unwrap();
        let env = initial_envelope(&[0.1]).unwrap();
        let reference = ReferenceEnvelope::new(&[0.1]).unwrap();
        let base = AffineGaussianOp::identity(1);
        assert!(matches!(
            compile_gate(&base, &env, &[], &reference),
            Err(CoreError::Config(_))
        ));
        let no_identity: Vec<CayleyWord> =
            walks.into_iter().filter(|w| !w.sequence.is_empty()).collect();
        assert!(matches!(
            compile_gate(&base, &env, &no_identity, &reference),
            Err(CoreError::Config(_))
        ));
    }
}
