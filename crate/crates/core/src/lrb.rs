//! Logical randomized benchmarking over the Gaussian-sum simulator.
//!
//! Sequences of uniformly random logical Cliffords (plus the exact inverse)
//! are compiled by a chosen strategy, run through loss and dephasing, and
//! the surviving all-qubit `Z` expectation is fit to
//! `P(x) = A exp(-(a x^2 + b x)) + B`.  The crossing `a t^2 + b t = 1`
//! defines the lifetime used to compare compilers.

use std::collections::HashMap;
use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::compiler::{compile_circuit, CompilerKind, LogicalGate, DEFAULT_WALK_LENGTH};
use crate::envelope::initial_envelope;
use crate::error::CoreError;
use crate::lattice::{pauli_cosets, GkpLattice, PauliCoset};
use crate::phase_sim::{
    prepare_logical_state, survival_probability, GaussianSum, StateSpec, TruncationPolicy,
};
use crate::stab_group::GroupGenerator;
use crate::Result;

// ---------------------------------------------------------------------------
// Clifford tableaux over GF(2)

/// Conjugation tableau: rows `0..n` are the images of `X_1..X_n`, rows
/// `n..2n` the images of `Z_1..Z_n`, each a Pauli with bit masks `x`, `z`
/// and a sign.  Bit `q` of a mask is qubit `q`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CliffordTableau {
    n: usize,
    x: Vec<u16>,
    z: Vec<u16>,
    sign: Vec<bool>,
}

fn bit(mask: u16, q: usize) -> bool {
    (mask >> q) & 1 == 1
}

impl CliffordTableau {
    pub fn identity(n: usize) -> CliffordTableau {
        let mut x = vec![0u16; 2 * n];
        let mut z = vec![0u16; 2 * n];
        for j in 0..n {
            x[j] = 1 << j;
            z[n + j] = 1 << j;
        }
        CliffordTableau {
            n,
            x,
            z,
            sign: vec![false; 2 * n],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn is_identity(&self) -> bool {
        *self == CliffordTableau::identity(self.n)
    }

    /// Row `i` as `(x_mask, z_mask, sign)`.
    pub fn row(&self, i: usize) -> (u16, u16, bool) {
        (self.x[i], self.z[i], self.sign[i])
    }

    /// The symplectic part packed row-major, 2n bits per row: low `n` bits
    /// the x mask, next `n` the z mask.
    pub fn symplectic_key(&self) -> u64 {
        let mut key = 0u64;
        let w = 2 * self.n;
        for i in 0..2 * self.n {
            let row = (self.x[i] as u64) | ((self.z[i] as u64) << self.n);
            key |= row << (i * w);
        }
        key
    }

    fn full_key(&self) -> (u64, u16) {
        let mut signs = 0u16;
        for (i, &s) in self.sign.iter().enumerate() {
            if s {
                signs |= (s as u16) << i;
            }
        }
        (self.symplectic_key(), signs)
    }

    /// Conjugate every row by a gate applied after the tableau's unitary.
    pub fn apply_gate(&mut self, g: LogicalGate) {
        for i in 0..2 * self.n {
            let (x, z) = (self.x[i], self.z[i]);
            match g {
                LogicalGate::H(q) => {
                    self.sign[i] ^= bit(x, q) && bit(z, q);
                    if bit(x, q) != bit(z, q) {
                        self.x[i] ^= 1 << q;
                        self.z[i] ^= 1 << q;
                    }
                }
                LogicalGate::S(q) => {
                    self.sign[i] ^= bit(x, q) && bit(z, q);
                    self.z[i] ^= x & (1 << q);
                }
                LogicalGate::X(q) => self.sign[i] ^= bit(z, q),
                LogicalGate::Z(q) => self.sign[i] ^= bit(x, q),
                LogicalGate::CX(c, t) => {
                    self.sign[i] ^= bit(x, c) && bit(z, t) && !(bit(x, t) ^ bit(z, c));
                    self.x[i] ^= (bit(x, c) as u16) << t;
                    self.z[i] ^= (bit(z, t) as u16) << c;
                }
                LogicalGate::CZ(a, b) => {
                    self.sign[i] ^= bit(x, a) && bit(x, b) && (bit(z, a) ^ bit(z, b));
                    self.z[i] ^= (bit(x, b) as u16) << a;
                    self.z[i] ^= (bit(x, a) as u16) << b;
                }
                LogicalGate::CXX(a, b) => {
                    self.sign[i] ^= bit(z, a) && bit(z, b) && (bit(x, a) ^ bit(x, b));
                    self.x[i] ^= (bit(z, b) as u16) << a;
                    self.x[i] ^= (bit(z, a) as u16) << b;
                }
            }
        }
    }

    pub fn apply_all(&mut self, gates: &[LogicalGate]) {
        for &g in gates {
            self.apply_gate(g);
        }
    }
}

/// Exponent of `i` contributed by one qubit when multiplying canonical
/// Paulis: left operand bits `(x1, z1)`, right `(x2, z2)`.
fn pauli_phase_exp(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    let (x2, z2) = (x2 as i32, z2 as i32);
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 - x2,
        (true, false) => z2 * (2 * x2 - 1),
        (false, true) => x2 * (1 - 2 * z2),
    }
}

/// Product of signed Pauli rows, assuming they all commute pairwise (the
/// phase exponent then lands on 0 or 2 mod 4).
fn pauli_product(rows: &[(u16, u16, bool)], n: usize) -> (u16, u16, bool) {
    let mut acc: (u16, u16, bool) = (0, 0, false);
    for &(x, z, s) in rows {
        let mut exp = 2 * (acc.2 as i32) + 2 * (s as i32);
        for q in 0..n {
            exp += pauli_phase_exp(bit(x, q), bit(z, q), bit(acc.0, q), bit(acc.1, q));
        }
        let exp = exp.rem_euclid(4);
        debug_assert!(exp % 2 == 0, "product of commuting Paulis gained an i");
        acc = (acc.0 ^ x, acc.1 ^ z, exp == 2);
    }
    acc
}

// ---------------------------------------------------------------------------
// uniform sampling

/// Symplectic inner product of combined masks (low `n` bits x, high z).
fn pairing(v: u32, w: u32, n: usize) -> bool {
    let m = (1u32 << n) - 1;
    let (vx, vz) = (v & m, v >> n);
    let (wx, wz) = (w & m, w >> n);
    ((vx & wz).count_ones() + (vz & wx).count_ones()) % 2 == 1
}

/// Reduce `v` against a row-echelon basis (distinct leading bits); returns
/// the remainder, zero iff `v` lies in the span.
fn reduce_by(mut v: u32, echelon: &[u32]) -> u32 {
    for &b in echelon {
        let lead = 31 - b.leading_zeros();
        if (v >> lead) & 1 == 1 {
            v ^= b;
        }
    }
    v
}

/// Uniform element of `Sp(2n, F2)`, returned as the 2n rows of images of
/// `X_1..X_n, Z_1..Z_n` in combined-mask form.
///
/// Rows are drawn sequentially, each uniform over the vectors that satisfy
/// the pairing constraints with the rows so far and extend to an invertible
/// completion; transitivity of the symplectic group on partial bases makes
/// the joint draw uniform.
fn sample_symplectic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u32> {
    let nn = 2 * n;
    let mut rows: Vec<u32> = Vec::with_capacity(nn);
    let mut echelon: Vec<u32> = Vec::new();
    for k in 0..nn {
        let mut candidates: Vec<u32> = Vec::new();
        for w in 1u32..1 << nn {
            let ok = rows.iter().enumerate().all(|(j, &r)| {
                let want = (k as i64 - j as i64).abs() == n as i64;
                pairing(w, r, n) == want
            });
            if ok && reduce_by(w, &echelon) != 0 {
                candidates.push(w);
            }
        }
        let w = candidates[rng.gen_range(0..candidates.len())];
        rows.push(w);
        echelon.push(reduce_by(w, &echelon));
    }
    rows
}

fn sample_tableau<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CliffordTableau {
    let rows = sample_symplectic(n, rng);
    let mask = (1u32 << n) - 1;
    let mut t = CliffordTableau::identity(n);
    for (i, &r) in rows.iter().enumerate() {
        t.x[i] = (r & mask) as u16;
        t.z[i] = (r >> n) as u16;
        t.sign[i] = rng.gen::<bool>();
    }
    t
}

// ---------------------------------------------------------------------------
// synthesis

/// Gates which, applied after the tableau's unitary, reduce it to the exact
/// identity (signs included).  The emitted list therefore implements the
/// tableau's inverse.
pub fn reduction_gates(t: &CliffordTableau) -> Vec<LogicalGate> {
    let mut t = t.clone();
    let n = t.n;
    let mut out: Vec<LogicalGate> = Vec::new();
    let emit = |t: &mut CliffordTableau, out: &mut Vec<LogicalGate>, g: LogicalGate| {
        t.apply_gate(g);
        out.push(g);
    };

    for j in 0..n {
        // X_j image -> X_j.  Entries on finished pairs are forced to zero
        // by the commutation constraints, so only qubits >= j appear.
        if t.x[j] >> j == 0 {
            let c = (j..n).find(|&c| bit(t.z[j], c)).expect("row vanishes");
            emit(&mut t, &mut out, LogicalGate::H(c));
        }
        if !bit(t.x[j], j) {
            let c = (j + 1..n).find(|&c| bit(t.x[j], c)).expect("no x pivot");
            emit(&mut t, &mut out, LogicalGate::CX(c, j));
        }
        for c in j + 1..n {
            if bit(t.x[j], c) {
                emit(&mut t, &mut out, LogicalGate::CX(j, c));
            }
        }
        if t.z[j] >> (j + 1) != 0 {
            if !bit(t.z[j], j) {
                emit(&mut t, &mut out, LogicalGate::S(j));
            }
            for c in j + 1..n {
                if bit(t.z[j], c) {
                    emit(&mut t, &mut out, LogicalGate::CX(c, j));
                }
            }
        }
        if bit(t.z[j], j) {
            emit(&mut t, &mut out, LogicalGate::S(j));
        }
        debug_assert_eq!((t.x[j], t.z[j]), (1 << j, 0));

        // Z_j image -> Z_j, using only moves that fix X_j.  The shear
        // H(c) S(c) H(c) adds z_c into x_c and nothing else.
        debug_assert!(bit(t.z[n + j], j));
        if bit(t.x[n + j], j) {
            emit(&mut t, &mut out, LogicalGate::H(j));
            emit(&mut t, &mut out, LogicalGate::S(j));
            emit(&mut t, &mut out, LogicalGate::H(j));
        }
        for c in j + 1..n {
            if bit(t.x[n + j], c) {
                if !bit(t.z[n + j], c) {
                    emit(&mut t, &mut out, LogicalGate::S(c));
                }
                emit(&mut t, &mut out, LogicalGate::H(c));
                emit(&mut t, &mut out, LogicalGate::S(c));
                emit(&mut t, &mut out, LogicalGate::H(c));
            }
        }
        for c in j + 1..n {
            if bit(t.z[n + j], c) {
                emit(&mut t, &mut out, LogicalGate::CX(c, j));
            }
        }
        debug_assert_eq!((t.x[n + j], t.z[n + j]), (0, 1 << j));
    }

    // Symplectic part is the identity; clear the leftover signs with the
    // Pauli that anticommutes with exactly the flipped rows.
    for j in 0..n {
        if t.sign[j] {
            emit(&mut t, &mut out, LogicalGate::Z(j));
        }
        if t.sign[n + j] {
            emit(&mut t, &mut out, LogicalGate::X(j));
        }
    }
    debug_assert!(t.is_identity());
    out
}

/// Gate list whose tableau equals `t` exactly.  The reduction emitted in
/// reverse reproduces the symplectic part (every elementary action is an
/// involution over GF(2)); a prepended Pauli absorbs the sign mismatch.
pub fn circuit_for(t: &CliffordTableau) -> Vec<LogicalGate> {
    let n = t.n;
    let gates: Vec<LogicalGate> = reduction_gates(t).into_iter().rev().collect();
    let mut sim = CliffordTableau::identity(n);
    sim.apply_all(&gates);
    debug_assert_eq!(sim.symplectic_key(), t.symplectic_key());
    let mut out: Vec<LogicalGate> = Vec::new();
    for j in 0..n {
        if sim.sign[j] != t.sign[j] {
            out.push(LogicalGate::Z(j));
        }
        if sim.sign[n + j] != t.sign[n + j] {
            out.push(LogicalGate::X(j));
        }
    }
    out.extend(gates);
    out
}

/// Uniformly random logical Clifford, emitted over `{H, S, CX, X, Z}`.
/// Supported up to four qubits.
pub fn sample_clifford<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Vec<LogicalGate>> {
    if n_qubits == 0 || n_qubits > 4 {
        return Err(CoreError::Config(format!(
            "clifford sampling supports 1..=4 qubits, got {n_qubits}"
        )));
    }
    Ok(circuit_for(&sample_tableau(n_qubits, rng)))
}

// ---------------------------------------------------------------------------
// the restricted two-qubit gate set

/// Closure of `<CX(0,1), CX(1,0), CZ(0,1)>` under composition, one entry
/// per distinct tableau, each with a word over the generators.  Discovery
/// order is deterministic (breadth-first, generators in the listed order).
pub fn two_qubit_word_group() -> Vec<(CliffordTableau, Vec<LogicalGate>)> {
    let gens = [
        LogicalGate::CX(0, 1),
        LogicalGate::CX(1, 0),
        LogicalGate::CZ(0, 1),
    ];
    let mut seen: HashMap<(u64, u16), usize> = HashMap::new();
    let mut table: Vec<(CliffordTableau, Vec<LogicalGate>)> = Vec::new();
    let id = CliffordTableau::identity(2);
    seen.insert(id.full_key(), 0);
    table.push((id, Vec::new()));
    let mut frontier: VecDeque<usize> = VecDeque::from([0usize]);
    while let Some(idx) = frontier.pop_front() {
        for &g in &gens {
            let mut next = table[idx].0.clone();
            next.apply_gate(g);
            let key = next.full_key();
            if !seen.contains_key(&key) {
                let mut word = table[idx].1.clone();
                word.push(g);
                seen.insert(key, table.len());
                frontier.push_back(table.len());
                table.push((next, word));
            }
        }
    }
    table
}

// ---------------------------------------------------------------------------
// configuration and curves

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateSet {
    FullClifford,
    TwoQubitOnly,
}

/// One benchmarking run: sequence lengths, noise strengths, and the
/// compilation strategy under test.
#[derive(Debug, Clone)]
pub struct LrbConfig {
    pub n_qubits: usize,
    /// Loss transmissivity per compiled gate, in (0, 1].
    pub gamma: f64,
    /// Dephasing variance per compiled gate.
    pub gamma_phi: f64,
    /// Envelope parameter per mode.
    pub epsilons: Vec<f64>,
    /// Sequence lengths, strictly ascending.
    pub lengths: Vec<usize>,
    /// Random sequences per length.
    pub samples: usize,
    pub kind: CompilerKind,
    pub gate_set: GateSet,
    /// Master seed; every (length, sample) pair derives its own streams.
    pub seed: u64,
    /// Append the exact logical inverse (default).  When off, the survival
    /// observable is conjugated through the net Clifford instead.
    pub include_inverse: bool,
    pub truncation: TruncationPolicy,
}

impl LrbConfig {
    /// Workable defaults: epsilon 0.1 per mode, lengths 1..32 doubling,
    /// 100 samples, full Clifford set, inverse appended.
    pub fn standard(
        n_qubits: usize,
        gamma: f64,
        gamma_phi: f64,
        kind: CompilerKind,
        seed: u64,
    ) -> LrbConfig {
        LrbConfig {
            n_qubits,
            gamma,
            gamma_phi,
            epsilons: vec![0.1; n_qubits],
            lengths: vec![1, 2, 4, 8, 16, 32],
            samples: 100,
            kind,
            gate_set: GateSet::FullClifford,
            seed,
            include_inverse: true,
            truncation: TruncationPolicy::default(),
        }
    }

    fn validate(&self, lat: &GkpLattice) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > 4 {
            return Err(CoreError::Config(format!(
                "benchmarking supports 1..=4 qubits, got {}",
                self.n_qubits
            )));
        }
        if lat.n != self.n_qubits {
            return Err(CoreError::Config(format!(
                "lattice has {} modes but the run wants {}",
                lat.n, self.n_qubits
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CoreError::Config(format!(
                "loss transmissivity must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.gamma_phi < 0.0 {
            return Err(CoreError::Config(format!(
                "dephasing variance must be >= 0, got {}",
                self.gamma_phi
            )));
        }
        if self.epsilons.len() != self.n_qubits {
            return Err(CoreError::Config(format!(
                "need one epsilon per qubit: {} for {}",
                self.epsilons.len(),
                self.n_qubits
            )));
        }
        if self.lengths.is_empty() || self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::Config(
                "sequence lengths must be non-empty and strictly ascending".into(),
            ));
        }
        if self.samples == 0 {
            return Err(CoreError::Config("need at least one sample".into()));
        }
        if self.gate_set == GateSet::TwoQubitOnly && self.n_qubits != 2 {
            return Err(CoreError::Config(
                "the two-qubit gate set needs exactly two qubits".into(),
            ));
        }
        Ok(())
    }
}

/// Mean survival against sequence length.
#[derive(Debug, Clone)]
pub struct DecayCurve {
    pub lengths: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Per-length averages of the worst envelope metrics seen along each
/// compiled sequence.
#[derive(Debug, Clone)]
pub struct MetricTrajectory {
    pub mean_max_sigma: Vec<f64>,
    pub err_max_sigma: Vec<f64>,
    pub mean_max_mu: Vec<f64>,
    pub err_max_mu: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LrbRun {
    pub curve: DecayCurve,
    pub metrics: MetricTrajectory,
}

// ---------------------------------------------------------------------------
// substreams

/// Counter-based stream split: the master seed plus labels is hashed into a
/// fresh cipher seed, so scheduling order and worker count cannot shift any
/// stream.
fn substream_seed(master: u64, label: &str, length: usize, sample: usize) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.update((length as u64).to_le_bytes());
    h.update((sample as u64).to_le_bytes());
    h.finalize().into()
}

fn substream(master: u64, label: &str, length: usize, sample: usize) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(substream_seed(master, label, length, sample))
}

fn substream_u64(master: u64, label: &str, length: usize, sample: usize) -> u64 {
    let s = substream_seed(master, label, length, sample);
    u64::from_le_bytes(s[..8].try_into().expect("eight bytes"))
}

// ---------------------------------------------------------------------------
// the benchmark

struct RunContext<'a> {
    cfg: &'a LrbConfig,
    lat: &'a GkpLattice,
    gens: &'a [GroupGenerator],
    state0: GaussianSum,
    gauge: Vec<u8>,
    cosets: Vec<PauliCoset>,
    /// Index of the all-qubit Z coset.
    all_z: usize,
    words: Option<Vec<(CliffordTableau, Vec<LogicalGate>)>>,
    word_index: Option<HashMap<(u64, u16), usize>>,
}

fn coset_index_by_label(cosets: &[PauliCoset], x: &[i64], z: &[i64]) -> Result<usize> {
    cosets
        .iter()
        .position(|c| c.label.x == x && c.label.z == z)
        .ok_or_else(|| CoreError::Config("missing Pauli coset".into()))
}

impl<'a> RunContext<'a> {
    fn new(cfg: &'a LrbConfig, lat: &'a GkpLattice, gens: &'a [GroupGenerator]) -> Result<Self> {
        cfg.validate(lat)?;
        let spec = StateSpec::logical_zero(lat)?;
        let env0 = initial_envelope(&cfg.epsilons)?;
        let state0 = prepare_logical_state(&spec, &env0, &cfg.truncation)?;
        let cosets = pauli_cosets(lat)?;
        let n = cfg.n_qubits;
        let all_z = coset_index_by_label(&cosets, &vec![0; n], &vec![1; n])?;
        let (words, word_index) = if cfg.gate_set == GateSet::TwoQubitOnly {
            let table = two_qubit_word_group();
            let index = table
                .iter()
                .enumerate()
                .map(|(i, (t, _))| (t.full_key(), i))
                .collect();
            (Some(table), Some(index))
        } else {
            (None, None)
        };
        Ok(RunContext {
            cfg,
            lat,
            gens,
            state0,
            gauge: spec.gauge,
            cosets,
            all_z,
            words,
            word_index,
        })
    }

    /// Draw the sequence, append the inverse, compile, push the state
    /// through gate+noise, and read the survival and worst metrics.
    fn run_one(&self, length: usize, sample: usize) -> Result<(f64, f64, f64)> {
        let cfg = self.cfg;
        let n = cfg.n_qubits;
        let mut seq_rng = substream(cfg.seed, "sequence", length, sample);
        let mut gates: Vec<LogicalGate> = Vec::new();
        let mut net = CliffordTableau::identity(n);
        for _ in 0..length {
            let step = match cfg.gate_set {
                GateSet::FullClifford => sample_clifford(n, &mut seq_rng)?,
                GateSet::TwoQubitOnly => {
                    let words = self.words.as_ref().expect("word table");
                    words[seq_rng.gen_range(0..words.len())].1.clone()
                }
            };
            net.apply_all(&step);
            gates.extend(step);
        }
        if cfg.include_inverse {
            let recovery = match cfg.gate_set {
                GateSet::FullClifford => reduction_gates(&net),
                GateSet::TwoQubitOnly => {
                    // The inverse stays inside the generated group; fetch
                    // its stored word by reducing the net tableau.
                    let mut inv = CliffordTableau::identity(n);
                    inv.apply_all(&reduction_gates(&net));
                    let idx = self
                        .word_index
                        .as_ref()
                        .expect("word index")
                        .get(&inv.full_key())
                        .copied()
                        .ok_or_else(|| {
                            CoreError::Config("net tableau left the two-qubit group".into())
                        })?;
                    self.words.as_ref().expect("word table")[idx].1.clone()
                }
            };
            net.apply_all(&recovery);
            gates.extend(recovery);
        }

        let kind = match cfg.kind {
            CompilerKind::RandomWalk { .. } => CompilerKind::RandomWalk {
                seed: substream_u64(cfg.seed, "walk", length, sample),
            },
            k => k,
        };
        let env0 = initial_envelope(&cfg.epsilons)?;
        let compiled = compile_circuit(&gates, &env0, kind, self.lat, self.gens)?;

        let mut state = self.state0.clone();
        let mut noise_rng = substream(cfg.seed, "noise", length, sample);
        for cg in &compiled {
            state.apply_op_mut(&cg.total)?;
            state.apply_loss_mut(cfg.gamma)?;
            state.apply_dephasing_mut(cfg.gamma_phi, &mut noise_rng)?;
        }

        // Survival of the all-qubit Z observable, conjugated through
        // whatever logical frame the sequence leaves behind.
        let frame = pauli_product(
            &(0..n).map(|j| net.row(n + j)).collect::<Vec<_>>(),
            n,
        );
        let label_x: Vec<i64> = (0..n).map(|q| bit(frame.0, q) as i64).collect();
        let label_z: Vec<i64> = (0..n).map(|q| bit(frame.1, q) as i64).collect();
        let target = if cfg.include_inverse {
            &self.cosets[self.all_z]
        } else {
            &self.cosets[coset_index_by_label(&self.cosets, &label_x, &label_z)?]
        };
        let mut p = survival_probability(&state, target, &self.gauge);
        if !cfg.include_inverse && frame.2 {
            p = 1.0 - p;
        }

        let (mut mx_sigma, mut mx_mu) = (0.0f64, 0.0f64);
        for cg in &compiled {
            mx_sigma = mx_sigma.max(cg.metrics_after.0);
            mx_mu = mx_mu.max(cg.metrics_after.1);
        }
        Ok((p, mx_sigma, mx_mu))
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    let mean = values.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Run the benchmark for the configured compiler.  Jobs are one (length,
/// sample) pair each; every pair derives its own random streams from the
/// master seed, so results do not depend on scheduling or worker count.
pub fn run_lrb(cfg: &LrbConfig, lat: &GkpLattice, gens: &[GroupGenerator]) -> Result<LrbRun> {
    let ctx = RunContext::new(cfg, lat, gens)?;
    let jobs: Vec<(usize, usize)> = cfg
        .lengths
        .iter()
        .flat_map(|&l| (0..cfg.samples).map(move |s| (l, s)))
        .collect();

    #[cfg(feature = "parallel")]
    let results: Result<Vec<(f64, f64, f64)>> = jobs
        .par_iter()
        .map(|&(l, s)| ctx.run_one(l, s))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<(f64, f64, f64)>> =
        jobs.iter().map(|&(l, s)| ctx.run_one(l, s)).collect();
    let results = results?;

    let mut curve = DecayCurve {
        lengths: cfg.lengths.clone(),
        mean: Vec::new(),
        stderr: Vec::new(),
        counts: Vec::new(),
    };
    let mut metrics = MetricTrajectory {
        mean_max_sigma: Vec::new(),
        err_max_sigma: Vec::new(),
        mean_max_mu: Vec::new(),
        err_max_mu: Vec::new(),
    };
    for (li, _) in cfg.lengths.iter().enumerate() {
        let chunk = &results[li * cfg.samples..(li + 1) * cfg.samples];
        let (m, e) = mean_and_stderr(&chunk.iter().map(|r| r.0).collect::<Vec<_>>());
        curve.mean.push(m);
        curve.stderr.push(e);
        curve.counts.push(cfg.samples);
        let (ms, es) = mean_and_stderr(&chunk.iter().map(|r| r.1).collect::<Vec<_>>());
        let (mm, em) = mean_and_stderr(&chunk.iter().map(|r| r.2).collect::<Vec<_>>());
        metrics.mean_max_sigma.push(ms);
        metrics.err_max_sigma.push(es);
        metrics.mean_max_mu.push(mm);
        metrics.err_max_mu.push(em);
    }
    Ok(LrbRun { curve, metrics })
}

// ---------------------------------------------------------------------------
// decay fit

/// Weighted fit of `P(x) = A exp(-(a x^2 + b x)) + B` and the lifetime
/// `t > 0` solving `a t^2 + b t = 1`.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub amplitude: f64,
    pub a: f64,
    pub b: f64,
    pub baseline: f64,
    pub lifetime: f64,
    pub lifetime_std: f64,
    /// Weighted sum of squared residuals at the optimum.
    pub residual: f64,
}

fn model(theta: &[f64; 4], x: f64) -> f64 {
    theta[0] * (-(theta[1] * x * x + theta[2] * x)).exp() + theta[3]
}

fn lifetime_of(a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-14;
    if a.abs() <= TINY {
        if b > 1e-12 {
            return Ok(1.0 / b);
        }
        return Err(CoreError::Fit(
            "curve does not decay: no positive root for the lifetime".into(),
        ));
    }
    let disc = b * b + 4.0 * a;
    if disc < 0.0 {
        return Err(CoreError::Fit(
            "no real crossing of the unit decay threshold".into(),
        ));
    }
    let roots = [
        (-b + disc.sqrt()) / (2.0 * a),
        (-b - disc.sqrt()) / (2.0 * a),
    ];
    roots
        .into_iter()
        .filter(|t| *t > 0.0)
        .fold(None, |acc: Option<f64>, t| {
            Some(acc.map_or(t, |a| a.min(t)))
        })
        .ok_or_else(|| CoreError::Fit("no positive root for the lifetime".into()))
}

/// Damped least squares on the decay curve, weights `1/stderr^2` (floored),
/// Jacobian analytic.  Needs at least four points.
pub fn fit_decay(curve: &DecayCurve) -> Result<FitResult> {
    let m = curve.lengths.len();
    if m < 4 {
        return Err(CoreError::Fit(format!(
            "need at least 4 curve points, got {m}"
        )));
    }
    let xs: Vec<f64> = curve.lengths.iter().map(|&l| l as f64).collect();
    let ys = &curve.mean;
    // Sample variance collapses once the curve sits on the depolarised
    // floor; an uncapped weight there turns the fit into interpolation of
    // one saturated point.
    let ws: Vec<f64> = curve
        .stderr
        .iter()
        .map(|&s| 1.0 / s.max(1e-3).powi(2))
        .collect();

    // Initial guesses: baseline at the curve floor, amplitude from the
    // first point, decay rate from the log-slope of the tail, no quadratic
    // part.
    let b0 = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let a0 = (ys[0] - b0).max(1e-3);
    let above: Vec<usize> = (0..m)
        .filter(|&i| ys[i] - b0 > (0.01 * a0).max(1e-9))
        .collect();
    let rate0 = if above.len() >= 2 {
        let (i, j) = (above[0], above[above.len() - 1]);
        (((ys[i] - b0).ln() - (ys[j] - b0).ln()) / (xs[j] - xs[i])).max(0.0)
    } else {
        0.0
    };
    let mut theta = [a0, 0.0, rate0, b0];

    let chi2 = |theta: &[f64; 4]| -> f64 {
        (0..m)
            .map(|i| ws[i] * (model(theta, xs[i]) - ys[i]).powi(2))
            .sum()
    };
    let mut best = chi2(&theta);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        // J^T W J and J^T W r with the analytic Jacobian.
        let mut jtj = nalgebra::Matrix4::<f64>::zeros();
        let mut jtr = nalgebra::Vector4::<f64>::zeros();
        for i in 0..m {
            let x = xs[i];
            let e = (-(theta[1] * x * x + theta[2] * x)).exp();
            let r = theta[0] * e + theta[3] - ys[i];
            let grad = nalgebra::Vector4::new(e, -theta[0] * x * x * e, -theta[0] * x * e, 1.0);
            jtj += grad * grad.transpose() * ws[i];
            jtr += grad * (ws[i] * r);
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for d in 0..4 {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(inv) = damped.try_inverse() else {
                lambda *= 5.0;
                continue;
            };
            let delta = inv * (-jtr);
            let trial = [
                theta[0] + delta[0],
                theta[1] + delta[1],
                theta[2] + delta[2],
                theta[3] + delta[3],
            ];
            let c = chi2(&trial);
            if c.is_finite() && c <= best {
                let gain = best - c;
                theta = trial;
                best = c;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if gain < 1e-14 * (1.0 + best) {
                    lambda = -1.0; // converged marker
                }
                break;
            }
            lambda *= 5.0;
        }
        if !accepted || lambda < 0.0 {
            break;
        }
    }

    let [amp, a, b, base] = theta;
    if !(amp > 0.0) {
        return Err(CoreError::Fit(format!(
            "fitted amplitude is not positive ({amp:.3e})"
        )));
    }
    let lifetime = lifetime_of(a, b)?;

    // Parameter covariance from the final normal matrix; the lifetime
    // variance follows by a numeric gradient in (a, b).
    let mut jtj = nalgebra::Matrix4::<f64>::zeros();
    for i in 0..m {
        let x = xs[i];
        let e = (-(a * x * x + b * x)).exp();
        let grad = nalgebra::Vector4::new(e, -amp * x * x * e, -amp * x * e, 1.0);
        jtj += grad * grad.transpose() * ws[i];
    }
    let dof = (m as f64 - 4.0).max(1.0);
    let scale = if m > 4 { best / dof } else { 1.0 };
    let lifetime_std = jtj
        .try_inverse()
        .map(|cov| {
            let h_a = 1e-7 * (1.0 + a.abs());
            let h_b = 1e-7 * (1.0 + b.abs());
            let ga = (lifetime_of(a + h_a, b).unwrap_or(lifetime)
                - lifetime_of(a - h_a, b).unwrap_or(lifetime))
                / (2.0 * h_a);
            let gb = (lifetime_of(a, b + h_b).unwrap_or(lifetime)
                - lifetime_of(a, b - h_b).unwrap_or(lifetime))
                / (2.0 * h_b);
            let var = scale
                * (ga * ga * cov[(1, 1)] + 2.0 * ga * gb * cov[(1, 2)] + gb * gb * cov[(2, 2)]);
            var.max(0.0).sqrt()
        })
        .unwrap_or(f64::NAN);

    Ok(FitResult {
        amplitude: amp,
        a,
        b,
        baseline: base,
        lifetime,
        lifetime_std,
        residual: best,
    })
}

// ---------------------------------------------------------------------------
// compiler comparison

/// Lifetimes of the stabilizer-walk compiler against the random walk at one
/// loss strength.  `None` marks the noiseless point, excluded from ratios.
#[derive(Debug, Clone)]
pub struct AmeliorationPoint {
    pub gamma: f64,
    pub skipped_noiseless: bool,
    pub t_walk: Option<f64>,
    pub t_random: Option<f64>,
    pub ratio: Option<f64>,
}

/// Sweep the loss strength and compare compilers on identical sequences
/// (both runs share the master seed, hence the sampled Cliffords).
pub fn amelioration_sweep(
    base: &LrbConfig,
    gammas: &[f64],
    lat: &GkpLattice,
    gens: &[GroupGenerator],
) -> Result<Vec<AmeliorationPoint>> {
    if gammas.len() < 2 {
        return Err(CoreError::Config(
            "the sweep needs at least two loss strengths".into(),
        ));
    }
    let walk_length = match base.kind {
        CompilerKind::GaussianStabilizer { walk_length } => walk_length,
        _ => DEFAULT_WALK_LENGTH,
    };
    let mut out = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        if gamma >= 1.0 {
            out.push(AmeliorationPoint {
                gamma,
                skipped_noiseless: true,
                t_walk: None,
                t_random: None,
                ratio: None,
            });
            continue;
        }
        let mut cfg = base.clone();
        cfg.gamma = gamma;
        cfg.kind = CompilerKind::GaussianStabilizer { walk_length };
        let walk = fit_decay(&run_lrb(&cfg, lat, gens)?.curve)?;
        cfg.kind = CompilerKind::RandomWalk { seed: 0 };
        let random = fit_decay(&run_lrb(&cfg, lat, gens)?.curve)?;
        out.push(AmeliorationPoint {
            gamma,
            skipped_noiseless: false,
            t_walk: Some(walk.lifetime),
            t_random: Some(random.lifetime),
            ratio: Some(walk.lifetime / random.lifetime),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
