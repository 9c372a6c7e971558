//! The Gaussian stabilizer group of a GKP lattice code.
//!
//! Beyond the 2N translation stabilizers, a lattice code admits Gaussian
//! unitaries that act as the logical identity.  Their symplectic matrices
//! have the form `M = S^T (X A + I) S^{-T}` where the integer matrix `X`
//! solves the quadratic constraint `X A X^T - (X - X^T) = 0`.  This module
//! classifies the seed solutions in the canonical basis, transports them to
//! a given lattice, lifts each to an affine operation with the Pauli
//! correction built in, and enumerates walks on the resulting Cayley graph.
//!
//! Identifying the Pauli a generator implements works on peak-sign
//! patterns: a coset-preserving `M` maps the half-dual grid of any pure
//! state lattice to itself and permutes the signed peak pattern; comparing
//! the transported pattern against displaced fiducial patterns on both the
//! all-Z and all-X state lattices pins the Pauli uniquely.

use std::collections::HashSet;

use crate::error::CoreError;
use crate::intmat::IntMatrix;
use crate::lattice::{
    canonical_form, canonical_gram, make_lattice, pauli_cosets, shortest_in_coset, CanonicalForm,
    GkpLattice, ReducedBasis, INT_TOL,
};
use crate::phase_sim::{parity_sign, StateSpec};
use crate::symplectic::{compose_affine, omega_real, AffineGaussianOp, RealMatrix, RealVector};
use crate::Result;

/// Which seed family a solution came from (indices are 0-based canonical
/// rows; products and the trivial solution get their own tags).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolutionKind {
    SymmetricF(usize, usize),
    SkewG(usize),
    Order4(usize),
    Zero,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionBasis {
    Canonical,
    Native,
}

/// Integer solution of `X A X^T = X - X^T`.
#[derive(Debug, Clone)]
pub struct XaSolution {
    pub x: IntMatrix,
    pub kind: SolutionKind,
    pub basis: SolutionBasis,
}

/// Exact integer check of the defining constraint.
pub fn verify_xa(x: &IntMatrix, a: &IntMatrix) -> bool {
    if x.nrows() != a.nrows() || x.0.ncols() != a.0.ncols() || x.nrows() != x.0.ncols() {
        return false;
    }
    let lhs = &x.0 * &a.0 * x.0.transpose();
    let rhs = &x.0 - x.0.transpose();
    lhs == rhs
}

/// Group product `X ∘ Y = X + Y + X A Y`.
pub fn solution_product(x: &XaSolution, y: &XaSolution, a: &IntMatrix) -> Result<XaSolution> {
    for (label, s) in [("left", x), ("right", y)] {
        if !verify_xa(&s.x, a) {
            return Err(CoreError::NotSolution(format!(
                "{label} operand fails the group constraint"
            )));
        }
    }
    let prod = &x.x.0 + &y.x.0 + &x.x.0 * &a.0 * &y.x.0;
    let out = XaSolution {
        x: IntMatrix(prod),
        kind: SolutionKind::Product,
        basis: x.basis,
    };
    debug_assert!(verify_xa(&out.x, a));
    Ok(out)
}

/// Seed solutions in the canonical basis `A_D = Omega_2 ⊗ diag(D)`.
///
/// Symmetric seeds `F_{j,k}` exist for every index pair except the
/// canonically paired `(j, N+j)`; the skew seed `beta G_j` needs
/// `beta D_j = 2`, so it exists for `D_j ∈ {1, 2}`; `D_j = 1` adds an
/// order-four solution on top of its involution.
pub fn solve_canonical_generators(d: &[i64]) -> Vec<XaSolution> {
    let n = d.len();
    let dim = 2 * n;
    let mut out = Vec::new();
    for j in 0..dim {
        for k in j..dim {
            if k == j + n {
                continue;
            }
            let mut x = IntMatrix::zeros(dim, dim);
            x.0[(j, k)] = 1;
            if j != k {
                x.0[(k, j)] = 1;
            }
            out.push(XaSolution {
                x,
                kind: SolutionKind::SymmetricF(j, k),
                basis: SolutionBasis::Canonical,
            });
        }
    }
    for (j, &dj) in d.iter().enumerate() {
        if dj == 1 || dj == 2 {
            let beta = 2 / dj;
            let mut x = IntMatrix::zeros(dim, dim);
            x.0[(j, n + j)] = beta;
            x.0[(n + j, j)] = -beta;
            out.push(XaSolution {
                x,
                kind: SolutionKind::SkewG(j),
                basis: SolutionBasis::Canonical,
            });
        }
        if dj == 1 {
            let mut x = IntMatrix::zeros(dim, dim);
            x.0[(j, n + j)] = 1;
            x.0[(n + j, j)] = -1;
            x.0[(j, j)] = 1;
            x.0[(n + j, n + j)] = 1;
            out.push(XaSolution {
                x,
                kind: SolutionKind::Order4(j),
                basis: SolutionBasis::Canonical,
            });
        }
    }
    debug_assert!({
        let a = canonical_gram(d);
        out.iter().all(|s| verify_xa(&s.x, &a))
    });
    out
}

/// One generator of the Gaussian stabilizer group, lifted to an affine
/// operation whose translation part cancels the Pauli the symplectic
/// implements.
#[derive(Debug, Clone)]
pub struct GroupGenerator {
    pub x: XaSolution,
    pub op: AffineGaussianOp,
    pub name: String,
    /// Index into `pauli_cosets(lat)` of the Pauli the bare symplectic
    /// implements (0 = identity).
    pub coset_image: usize,
}

/// A pure state lattice used as a sign-pattern fiducial.
struct Fiducial {
    lat: GkpLattice,
    form: CanonicalForm,
}

impl Fiducial {
    fn new(lat: GkpLattice) -> Result<Fiducial> {
        let form = canonical_form(&lat)?;
        Ok(Fiducial { lat, form })
    }

    /// Peak-sign pattern over the 4^N residues of the half grid, with the
    /// unphysical global sign normalised away.  `map` sends each residue
    /// representative to the point whose parity sign is recorded.
    fn pattern<F: Fn(&RealVector) -> RealVector>(&self, map: F) -> Result<Vec<i8>> {
        let dim = self.lat.dim();
        if dim > 20 {
            return Err(CoreError::Overflow(format!(
                "sign-pattern enumeration over 2^{dim} residues"
            )));
        }
        let w = omega_real(self.lat.n);
        let st = self.lat.s.transpose();
        let mut out = Vec::with_capacity(1usize << dim);
        for bits in 0..(1u32 << dim) {
            let beta =
                RealVector::from_iterator(dim, (0..dim).map(|i| ((bits >> i) & 1) as f64));
            let g = 0.5 * &st * beta;
            let s = parity_sign(&self.form.s_d, &w, &map(&g))?;
            out.push(if s > 0.0 { 1 } else { -1 });
        }
        if out[0] < 0 {
            for s in out.iter_mut() {
                *s = -*s;
            }
        }
        Ok(out)
    }

    /// A representative of `t`'s code coset that lies on this fiducial's
    /// half grid, where displacement patterns are defined.
    fn rep_on_half_grid(&self, code: &GkpLattice, t: &RealVector) -> Option<RealVector> {
        let w = omega_real(self.lat.n);
        let on_grid = |v: &RealVector| {
            let coords = &self.lat.s_star * &w * (2.0 * v);
            coords.iter().all(|c| (c - c.round()).abs() <= INT_TOL)
        };
        if on_grid(t) {
            return Some(t.clone());
        }
        // shift by small code-lattice vectors until a representative lands
        // on the grid (only reachable for qudit dimensions above two)
        let dim = code.dim();
        let st = code.s.transpose();
        for radius in 1..=2i64 {
            let mut k = vec![-radius; dim];
            'shell: loop {
                if k.iter().any(|&v| v.abs() == radius) {
                    let shift = RealVector::from_iterator(dim, k.iter().map(|&v| v as f64));
                    let cand = t + &st * shift;
                    if on_grid(&cand) {
                        return Some(cand);
                    }
                }
                let mut i = 0;
                loop {
                    if i == dim {
                        break 'shell;
                    }
                    k[i] += 1;
                    if k[i] <= radius {
                        break;
                    }
                    k[i] = -radius;
                    i += 1;
                }
            }
        }
        None
    }
}

/// All generators of the Gaussian stabilizer group: the 2N translations
/// first, then one lifted generator per canonical seed solution.
pub fn build_generators(lat: &GkpLattice) -> Result<Vec<GroupGenerator>> {
    let dim = lat.dim();
    let form = canonical_form(lat)?;
    let cosets = pauli_cosets(lat)?;
    let code_basis = ReducedBasis::new(lat.s.transpose())?;
    let r_real = form.r.to_real();

    // fiducials: the all-Z state lattice is blind to Z-type Paulis (they
    // stabilize it), so an all-X lattice resolves the other axis.
    let zero = StateSpec::logical_zero(lat)?;
    let fid_z = Fiducial::new(zero.state_lattice)?;
    let n = lat.n;
    let mut s_plus = RealMatrix::zeros(dim, dim);
    for j in 0..n {
        s_plus.set_row(j, &(form.s_d.row(j) / form.d[j] as f64));
        s_plus.set_row(n + j, &form.s_d.row(n + j));
    }
    let fid_x = Fiducial::new(make_lattice(s_plus)?)?;

    // displacement patterns for every candidate Pauli, on both fiducials
    let mut displaced: Vec<[Vec<i8>; 2]> = Vec::with_capacity(cosets.len());
    for c in &cosets {
        let mut pair = [Vec::new(), Vec::new()];
        for (slot, fid) in [&fid_z, &fid_x].into_iter().enumerate() {
            let t = fid.rep_on_half_grid(lat, &c.rep).ok_or_else(|| {
                CoreError::NotSolution(format!(
                    "no half-grid representative for coset {}",
                    c.label
                ))
            })?;
            pair[slot] = fid.pattern(|g| g - &t)?;
        }
        displaced.push(pair);
    }

    let mut out = Vec::new();
    for j in 0..dim {
        out.push(GroupGenerator {
            x: XaSolution {
                x: IntMatrix::zeros(dim, dim),
                kind: SolutionKind::Zero,
                basis: SolutionBasis::Native,
            },
            op: AffineGaussianOp::translation(lat.s.row(j).transpose()),
            name: format!("T[{}]", j + 1),
            coset_image: 0,
        });
    }

    let s_t = lat.s.transpose();
    let s_t_inv = s_t.clone().try_inverse().ok_or_else(|| {
        CoreError::InvalidGenerator("generator matrix is singular".into())
    })?;
    let omega = omega_real(n);
    for sol in solve_canonical_generators(&form.d) {
        let x_native = IntMatrix::from_real(&(r_real.transpose() * sol.x.to_real() * &r_real), INT_TOL)?;
        if !verify_xa(&x_native, &lat.a) {
            return Err(CoreError::NotSolution(
                "transported seed fails the group constraint".into(),
            ));
        }
        let xa_plus_i = IntMatrix(&x_native.0 * &lat.a.0 + IntMatrix::identity(dim).0);
        if xa_plus_i.det() != 1 {
            return Err(CoreError::NotSolution(
                "lifted generator does not have unit determinant".into(),
            ));
        }
        let m = &s_t * xa_plus_i.to_real() * &s_t_inv;

        // the bare symplectic must fix every Pauli coset
        for c in &cosets {
            let diff = &m * &c.rep - &c.rep;
            if !lat.contains(&diff, 1e-8) {
                return Err(CoreError::NotSolution(format!(
                    "generator moves the {} coset",
                    c.label
                )));
            }
        }

        let m_inv = -(&omega * m.transpose() * &omega);
        let p_z = fid_z.pattern(|g| &m_inv * g)?;
        let p_x = fid_x.pattern(|g| &m_inv * g)?;
        let mut image = None;
        for (ci, pair) in displaced.iter().enumerate() {
            if pair[0] == p_z && pair[1] == p_x {
                if image.is_some() {
                    return Err(CoreError::NotSolution(
                        "ambiguous Pauli image for generator".into(),
                    ));
                }
                image = Some(ci);
            }
        }
        let image = image.ok_or_else(|| {
            CoreError::NotSolution("no Pauli image matches the generator".into())
        })?;
        let lambda = shortest_in_coset(&code_basis, &(-&cosets[image].rep));

        let name = match sol.kind {
            SolutionKind::SymmetricF(j, k) => format!("F[{},{}]", j + 1, k + 1),
            SolutionKind::SkewG(j) => format!("G[{}]", j + 1),
            SolutionKind::Order4(j) => format!("O4[{}]", j + 1),
            _ => unreachable!("seed solutions only"),
        };
        out.push(GroupGenerator {
            x: XaSolution {
                x: x_native,
                kind: sol.kind,
                basis: SolutionBasis::Native,
            },
            op: AffineGaussianOp::new(m, lambda)?,
            name,
            coset_image: image,
        });
    }
    Ok(out)
}

/// One walk on the Cayley graph: generator indices with exponents, in
/// application order, plus the composed operation.
#[derive(Debug, Clone)]
pub struct CayleyWord {
    pub sequence: Vec<(usize, i8)>,
    pub resolved: AffineGaussianOp,
}

fn op_key(op: &AffineGaussianOp) -> Vec<i64> {
    op.m
        .iter()
        .chain(op.lambda.iter())
        .map(|v| (v * 1e8).round() as i64)
        .collect()
}

pub fn enumerate_walks(gens: &[GroupGenerator], n: usize) -> Result<Vec<CayleyWord>> {
    enumerate_walks_capped(gens, n, 1_000_000)
}

/// All distinct walks of length at most `n`, deduplicated by the physical
/// `(M, lambda)` they resolve to; breadth-first, so the first occurrence of
/// every operation is its shortest, lexicographically first word.
pub fn enumerate_walks_capped(
    gens: &[GroupGenerator],
    n: usize,
    cap: usize,
) -> Result<Vec<CayleyWord>> {
    let Some(first) = gens.first() else {
        return Err(CoreError::Config("no generators to walk over".into()));
    };
    let steps: Vec<AffineGaussianOp> = gens
        .iter()
        .flat_map(|g| [g.op.clone(), g.op.inverse()])
        .collect();
    let identity = AffineGaussianOp::identity(first.op.num_modes());
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    seen.insert(op_key(&identity));
    let mut out = vec![CayleyWord {
        sequence: Vec::new(),
        resolved: identity,
    }];
    let mut frontier: Vec<usize> = vec![0];
    let mut generated = 1usize;
    for _ in 1..=n {
        let mut next = Vec::new();
        for &wi in &frontier {
            for (si, step) in steps.iter().enumerate() {
                generated += 1;
                if generated > cap {
                    return Err(CoreError::Overflow(format!(
                        "walk enumeration exceeded {cap} words"
                    )));
                }
                let resolved = compose_affine(step, &out[wi].resolved)?;
                if seen.insert(op_key(&resolved)) {
                    let mut sequence = out[wi].sequence.clone();
                    sequence.push((si / 2, if si % 2 == 0 { 1 } else { -1 }));
                    next.push(out.len());
                    out.push(CayleyWord { sequence, resolved });
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(out)
}
