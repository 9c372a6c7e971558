// end-to-end drive: prepare a finite-energy logical zero, run it through
// loss + dephasing + a logical gate, and read out survival.
use gkp_core::envelope::initial_envelope;
use gkp_core::lattice::{pauli_cosets, GkpLattice};
use gkp_core::phase_sim::*;
use gkp_core::symplectic::{AffineGaussianOp, RealVector};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let code = GkpLattice::square(1).unwrap();
    let spec = StateSpec::logical_zero(&code).unwrap();
    let env = initial_envelope(&[0.1]).unwrap();
    let mut state = prepare_logical_state(&spec, &env, &TruncationPolicy::default()).unwrap();
    let cosets = pauli_cosets(&code).unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    println!("peaks = {}", state.num_peaks());
    println!("initial Z survival = {:.6}", survival_probability(&state, &cosets[2], &[0, 0]));
    for _ in 0..10 {
        state.apply_loss_mut(0.999).unwrap();
        state.apply_dephasing_mut(1e-4, &mut rng).unwrap();
    }
    println!("after noise Z survival = {:.6}", survival_probability(&state, &cosets[2], &[0, 0]));
    let x_gate = AffineGaussianOp::translation(cosets[1].rep.clone());
    state.apply_op_mut(&x_gate).unwrap();
    println!("after X gate Z survival = {:.6}", survival_probability(&state, &cosets[2], &[0, 0]));
    let w = numeric_wigner(&state, &GridSpec::plane(-2.0, 2.0, 101)).unwrap();
    let min = w.values.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("wigner min on grid = {:.4} (negativity expected)", min);
    assert!(min < -0.01);
    let _ = RealVector::zeros(2);
    println!("e2e drive OK");
}
