//! GKP code definition: generator matrix, symplectic Gram matrix, dual
//! lattice, canonical form, and Pauli cosets.
//!
//! A code on `N` modes is a full-rank lattice `Lambda = {S^T a : a integer}`
//! (rows of `S` generate) whose Gram matrix `A = S Omega S^T` is integral.
//! `det A = d^2` fixes the logical dimension `d`, and the `d^2` cosets of
//! `Lambda^*/Lambda` are the logical Pauli displacements.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::CoreError;
use crate::intmat::IntMatrix;
use crate::symplectic::{omega_real, RealMatrix, RealVector};
use crate::Result;

/// Tolerance for "is an integer" checks on quantities that are exact in
/// theory but computed through irrational generator entries.
pub const INT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct GkpLattice {
    /// Stabilizer generator matrix; row `j` is the displacement `s_j` in
    /// units of `l = sqrt(2*pi)`.
    pub s: RealMatrix,
    /// Symplectic Gram matrix `S Omega S^T`, exactly integral.
    pub a: IntMatrix,
    /// Dual generator matrix `A^{-1} S`; rows generate `Lambda^*`.
    pub s_star: RealMatrix,
    /// Mode count.
    pub n: usize,
    /// Logical dimension, `det A = d^2`.
    pub d: u64,
}

/// Basis change `R` bringing the Gram matrix to `Omega_2 (x) diag(D)`.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub r: IntMatrix,
    pub d: Vec<i64>,
    /// Generator matrix in the canonical basis, `R * S`.
    pub s_d: RealMatrix,
}

/// Logical Pauli exponents, one `(x, z)` pair per canonical pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PauliLabel {
    pub x: Vec<i64>,
    pub z: Vec<i64>,
}

impl PauliLabel {
    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&v| v == 0) && self.z.iter().all(|&v| v == 0)
    }
}

impl std::fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for j in 0..self.x.len() {
            let (x, z) = (self.x[j], self.z[j]);
            if x == 0 && z == 0 {
                continue;
            }
            if !first {
                write!(f, ".")?;
            }
            first = false;
            match (x, z) {
                (1, 0) => write!(f, "X{j}")?,
                (0, 1) => write!(f, "Z{j}")?,
                (1, 1) => write!(f, "Y{j}")?,
                (x, 0) => write!(f, "X{j}^{x}")?,
                (0, z) => write!(f, "Z{j}^{z}")?,
                (x, z) => write!(f, "X{j}^{x}Z{j}^{z}")?,
            }
        }
        Ok(())
    }
}

/// One coset of `Lambda^*/Lambda`: a shortest representative plus its
/// logical exponents.
#[derive(Debug, Clone)]
pub struct PauliCoset {
    pub rep: RealVector,
    pub label: PauliLabel,
}

/// Build and validate a lattice from its generator matrix.
pub fn make_lattice(s: RealMatrix) -> Result<GkpLattice> {
    let dim = s.nrows();
    if dim == 0 || dim % 2 != 0 || s.ncols() != dim {
        return Err(CoreError::InvalidGenerator(format!(
            "generator must be square and even-dimensional, got {}x{}",
            dim,
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::InvalidGenerator("non-finite entry".into()));
    }
    let n = dim / 2;
    let det_s = s.clone().determinant();
    if det_s.abs() < 1e-9 {
        return Err(CoreError::InvalidGenerator(
            "rows are linearly dependent".into(),
        ));
    }
    if det_s < 0.0 {
        // det R = sign(det S) is forced by the Pfaffian of the canonical
        // form, so negative orientation can never reach det R = +1.
        // Negating any single row fixes it without changing the lattice.
        return Err(CoreError::Orientation);
    }
    let gram = &s * omega_real(n) * s.transpose();
    // Antisymmetrise before rounding so A = -A^T holds exactly.
    let gram = (&gram - gram.transpose()) * 0.5;
    let a = IntMatrix::from_real(&gram, INT_TOL)
        .map_err(|_| CoreError::NotIntegral("Gram matrix SΩSᵀ has non-integer entries".into()))?;
    let det_a = a.det();
    if det_a <= 0 {
        return Err(CoreError::InvalidGenerator(format!(
            "Gram determinant {det_a} is not positive"
        )));
    }
    let d = (det_a as f64).sqrt().round() as u64;
    if (d as i128) * (d as i128) != det_a {
        return Err(CoreError::InvalidGenerator(format!(
            "non-integer logical dimension: det A = {det_a} is not a perfect square"
        )));
    }
    // S* = A^{-1} S through the exact adjugate.
    let s_star = a.adjugate().to_real() * &s / (det_a as f64);
    Ok(GkpLattice {
        s,
        a,
        s_star,
        n,
        d,
    })
}

impl GkpLattice {
    /// Square code: each mode carries `S = sqrt(2) I_2`, so `A = 2 Omega`.
    pub fn square(num_modes: usize) -> Result<GkpLattice> {
        if num_modes == 0 {
            return Err(CoreError::InvalidGenerator("need at least one mode".into()));
        }
        let dim = 2 * num_modes;
        make_lattice(RealMatrix::identity(dim, dim) * std::f64::consts::SQRT_2)
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// Is `v` a lattice vector?  Tests `S^* Omega v` for integrality.
    pub fn contains(&self, v: &RealVector, tol: f64) -> bool {
        let coeff = &self.s_star * omega_real(self.n) * v;
        coeff.iter().all(|c| (c - c.round()).abs() <= tol)
    }

    /// Is `v` a dual-lattice vector?  Tests `S Omega v` for integrality.
    pub fn dual_contains(&self, v: &RealVector, tol: f64) -> bool {
        let coeff = &self.s * omega_real(self.n) * v;
        coeff.iter().all(|c| (c - c.round()).abs() <= tol)
    }
}

/// Named lattice input: either a built-in name or an explicit generator.
#[derive(Debug, Clone, Deserialize)]
pub struct LatticeInput {
    #[serde(rename = "S", default)]
    pub s: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub name: Option<String>,
    /// Mode count for built-in names (default 1).
    #[serde(default)]
    pub modes: Option<usize>,
}

/// Parse a lattice from its JSON description.
pub fn lattice_from_json(text: &str) -> Result<GkpLattice> {
    let input: LatticeInput = serde_json::from_str(text)?;
    lattice_from_input(&input)
}

pub fn lattice_from_input(input: &LatticeInput) -> Result<GkpLattice> {
    if let Some(rows) = &input.s {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(CoreError::InvalidGenerator(
                "generator rows have unequal lengths".into(),
            ));
        }
        let s = RealMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        return make_lattice(s);
    }
    match input.name.as_deref() {
        Some("square") => GkpLattice::square(input.modes.unwrap_or(1)),
        Some(other) => Err(CoreError::Config(format!("unknown lattice name {other:?}"))),
        None => Err(CoreError::Config(
            "lattice input needs either \"S\" or \"name\"".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// canonical form

/// Integer skew normal form of the Gram matrix: find `R` with det `+1` and
/// `R A R^T = Omega_2 (x) diag(D)`, `D` a divisibility chain.
pub fn canonical_form(lat: &GkpLattice) -> Result<CanonicalForm> {
    let (r, d) = skew_normal_form(&lat.a)?;
    let s_d = r.to_real() * &lat.s;
    Ok(CanonicalForm { r, d, s_d })
}

/// Round-to-nearest division with balanced remainder `|r| <= |b|/2`.
fn balanced_div(a: i64, b: i64) -> i64 {
    debug_assert!(b != 0);
    let q = a.div_euclid(b);
    let r = a - q * b;
    // r in [0, |b|); shift to balanced
    if 2 * r.abs() > b.abs() {
        q + b.signum()
    } else {
        q
    }
}

fn skew_normal_form(a: &IntMatrix) -> Result<(IntMatrix, Vec<i64>)> {
    let dim = a.nrows();
    let n = dim / 2;
    if a.0 != -a.transpose().0 {
        return Err(CoreError::NotIntegral("Gram matrix is not antisymmetric".into()));
    }
    let mut b = a.0.clone();
    let mut r = DMatrix::<i64>::identity(dim, dim);

    // Symmetric congruence ops: every row op on B is mirrored on columns.
    let swap = |b: &mut DMatrix<i64>, r: &mut DMatrix<i64>, i: usize, j: usize| {
        if i == j {
            return;
        }
        b.swap_rows(i, j);
        b.swap_columns(i, j);
        r.swap_rows(i, j);
    };
    let addmul = |b: &mut DMatrix<i64>, r: &mut DMatrix<i64>, i: usize, j: usize, q: i64| {
        if q == 0 {
            return;
        }
        for c in 0..dim {
            let v = b[(j, c)];
            b[(i, c)] += q * v;
        }
        for c in 0..dim {
            let v = b[(c, j)];
            b[(c, i)] += q * v;
        }
        for c in 0..dim {
            let v = r[(j, c)];
            r[(i, c)] += q * v;
        }
    };

    let mut start = 0;
    while start < dim {
        // Smallest nonzero |entry| in the active block becomes the pivot.
        let mut pivot: Option<(usize, usize)> = None;
        let mut best = i64::MAX;
        for i in start..dim {
            for j in (i + 1)..dim {
                let v = b[(i, j)].abs();
                if v != 0 && v < best {
                    best = v;
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else {
            return Err(CoreError::NotIntegral(
                "Gram matrix is singular; generators are dependent".into(),
            ));
        };
        swap(&mut b, &mut r, start, pi);
        let pj = if pj == start { pi } else { pj };
        swap(&mut b, &mut r, start + 1, pj);
        if b[(start, start + 1)] < 0 {
            swap(&mut b, &mut r, start, start + 1);
        }
        let p = b[(start, start + 1)];

        // Clear columns `start` and `start+1` below the pivot pair.
        for row in (start + 2)..dim {
            let q = balanced_div(b[(row, start + 1)], p);
            addmul(&mut b, &mut r, row, start, -q);
            let q = balanced_div(b[(row, start)], -p);
            addmul(&mut b, &mut r, row, start + 1, -q);
        }
        let clean = ((start + 2)..dim).all(|row| b[(row, start)] == 0 && b[(row, start + 1)] == 0);
        if !clean {
            continue; // smaller entries appeared; re-pick pivot
        }
        // The pivot must divide the remaining block for the divisibility
        // chain; if not, drag an offending row into the pivot row.
        let offending = ((start + 2)..dim)
            .flat_map(|i| ((i + 1)..dim).map(move |j| (i, j)))
            .find(|&(i, j)| b[(i, j)] % p != 0);
        if let Some((i, _)) = offending {
            addmul(&mut b, &mut r, start, i, 1);
            continue;
        }
        start += 2;
    }

    // Interleaved pairs -> qqpp: new row t = old 2t, new row N+t = old 2t+1.
    let mut perm = DMatrix::<i64>::zeros(dim, dim);
    for t in 0..n {
        perm[(t, 2 * t)] = 1;
        perm[(n + t, 2 * t + 1)] = 1;
    }
    let r_final = IntMatrix(&perm * r);
    let d: Vec<i64> = (0..n).map(|t| b[(2 * t, 2 * t + 1)]).collect();

    let det_r = r_final.det();
    if det_r != 1 {
        // Unreachable once make_lattice enforces det S > 0.
        return Err(CoreError::Orientation);
    }
    debug_assert!(d.windows(2).all(|w| w[1] % w[0] == 0));
    Ok((r_final, d))
}

/// `Omega_2 (x) diag(D)` as an integer matrix (qqpp block layout).
pub fn canonical_gram(d: &[i64]) -> IntMatrix {
    let n = d.len();
    let mut m = DMatrix::<i64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        m[(j, n + j)] = d[j];
        m[(n + j, j)] = -d[j];
    }
    IntMatrix(m)
}

// ---------------------------------------------------------------------------
// Pauli cosets

impl GkpLattice {
    /// Logical exponents of a dual vector `w`, read through the canonical
    /// basis: `b = -S_D Omega w`, then `z_j = b_j`, `x_j = b_{N+j}` mod `D_j`.
    pub fn coset_label_of(&self, form: &CanonicalForm, w: &RealVector) -> Result<PauliLabel> {
        let b = -(&form.s_d * omega_real(self.n) * w);
        let mut x = vec![0; self.n];
        let mut z = vec![0; self.n];
        for j in 0..self.n {
            let (bz, bx) = (b[j], b[self.n + j]);
            for v in [bz, bx] {
                if (v - v.round()).abs() > INT_TOL {
                    return Err(CoreError::Dimension(format!(
                        "vector is not in the dual lattice (coefficient {v})"
                    )));
                }
            }
            z[j] = (bz.round() as i64).rem_euclid(form.d[j]);
            x[j] = (bx.round() as i64).rem_euclid(form.d[j]);
        }
        Ok(PauliLabel { x, z })
    }
}

/// Enumerate the `d^2` Pauli cosets with shortest representatives.
///
/// Ordering is mixed-radix counting over `(x_1..x_N, z_1..z_N)` with the
/// X-part fastest, so the trivial coset comes first.
pub fn pauli_cosets(lat: &GkpLattice) -> Result<Vec<PauliCoset>> {
    pauli_cosets_capped(lat, 4096)
}

pub fn pauli_cosets_capped(lat: &GkpLattice, cap: u64) -> Result<Vec<PauliCoset>> {
    let count = lat.d * lat.d;
    if count > cap {
        return Err(CoreError::Config(format!(
            "{count} cosets exceed the cap of {cap}"
        )));
    }
    let form = canonical_form(lat)?;
    let n = lat.n;
    // Dual generators in the canonical basis: S_D^* = (Omega_2 (x) D)^{-1} S_D
    // with the closed-form inverse [[0, -D^{-1}], [D^{-1}, 0]].
    let mut inv = RealMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        inv[(j, n + j)] = -1.0 / form.d[j] as f64;
        inv[(n + j, j)] = 1.0 / form.d[j] as f64;
    }
    let s_d_star = inv * &form.s_d;
    let basis = ReducedBasis::new(lat.s.transpose())?;

    let mut out = Vec::with_capacity(count as usize);
    let radii: Vec<i64> = form.d.iter().chain(form.d.iter()).copied().collect();
    let mut digits = vec![0i64; 2 * n];
    loop {
        // digits = (x_1..x_N, z_1..z_N); b = (z-part, x-part)
        let mut b = RealVector::zeros(2 * n);
        for j in 0..n {
            b[j] = digits[n + j] as f64;
            b[n + j] = digits[j] as f64;
        }
        let w = s_d_star.transpose() * &b;
        let rep = shortest_in_coset(&basis, &w);
        let label = PauliLabel {
            x: digits[..n].to_vec(),
            z: digits[n..].to_vec(),
        };
        out.push(PauliCoset { rep, label });

        // increment mixed-radix counter
        let mut k = 0;
        loop {
            if k == 2 * n {
                return Ok(out);
            }
            digits[k] += 1;
            if digits[k] < radii[k] {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Shortest vector in the coset `w + Lambda`, lexicographically largest
/// among length ties.
pub fn shortest_in_coset(basis: &ReducedBasis, w: &RealVector) -> RealVector {
    let closest = basis.closest(&(-w));
    let mut best: Option<RealVector> = None;
    for v in closest {
        let cand = w + v;
        best = Some(match best.take() {
            None => cand,
            Some(cur) => {
                if lex_less(&cur, &cand) {
                    cand
                } else {
                    cur
                }
            }
        });
    }
    best.expect("closest-point search returned no candidates")
}

fn lex_less(a: &RealVector, b: &RealVector) -> bool {
    for i in 0..a.len() {
        if (a[i] - b[i]).abs() <= INT_TOL {
            continue;
        }
        return a[i] < b[i];
    }
    false
}

// ---------------------------------------------------------------------------
// bounded lattice enumeration (shared by cosets, walks, and the simulator)

/// LLL-reduced lattice basis with a QR factorisation for bounded
/// enumeration.  Columns of `basis` generate the lattice.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    basis: RealMatrix,
    q_t: RealMatrix,
    r: RealMatrix,
}

impl ReducedBasis {
    pub fn new(columns: RealMatrix) -> Result<Self> {
        let dim = columns.nrows();
        if columns.ncols() != dim || dim == 0 {
            return Err(CoreError::Dimension(
                "enumeration basis must be square".into(),
            ));
        }
        let basis = lll_reduce(columns);
        let qr = basis.clone().qr();
        let mut q = qr.q();
        let mut r = qr.r();
        // Normalise the factorisation so diag(R) > 0.
        for i in 0..dim {
            if r[(i, i)] < 0.0 {
                for j in 0..dim {
                    r[(i, j)] = -r[(i, j)];
                    q[(j, i)] = -q[(j, i)];
                }
            }
            if r[(i, i)].abs() < 1e-12 {
                return Err(CoreError::Dimension(
                    "enumeration basis is singular".into(),
                ));
            }
        }
        Ok(ReducedBasis {
            basis,
            q_t: q.transpose(),
            r,
        })
    }

    /// All lattice points at minimal distance from `target` (ties within a
    /// relative 1e-9 window).
    pub fn closest(&self, target: &RealVector) -> Vec<RealVector> {
        let c = &self.q_t * target;
        let dim = self.r.nrows();
        // Babai nearest-plane gives the initial search radius.
        let mut z = vec![0i64; dim];
        for i in (0..dim).rev() {
            let mut resid = c[i];
            for k in (i + 1)..dim {
                resid -= self.r[(i, k)] * z[k] as f64;
            }
            z[i] = (resid / self.r[(i, i)]).round() as i64;
        }
        let babai_dist2: f64 = (0..dim)
            .map(|i| {
                let mut resid = c[i];
                for k in i..dim {
                    resid -= self.r[(i, k)] * z[k] as f64;
                }
                resid * resid
            })
            .sum();

        let mut hits: Vec<(f64, Vec<i64>)> = Vec::new();
        self.enumerate(&c, babai_dist2 * (1.0 + 1e-9) + 1e-12, &mut |z, d2| {
            hits.push((d2, z.to_vec()))
        });
        let min = hits
            .iter()
            .map(|(d2, _)| *d2)
            .fold(f64::INFINITY, f64::min);
        let window = 1e-9 * (1.0 + min);
        hits.retain(|(d2, _)| *d2 <= min + window);
        hits.iter()
            .map(|(_, z)| {
                let zf = RealVector::from_iterator(dim, z.iter().map(|&v| v as f64));
                &self.basis * zf
            })
            .collect()
    }

    /// All lattice points within `radius` of `center`.
    pub fn points_within(&self, center: &RealVector, radius: f64) -> Vec<RealVector> {
        let c = &self.q_t * center;
        let dim = self.r.nrows();
        let mut out = Vec::new();
        self.enumerate(&c, radius * radius, &mut |z, _| {
            let zf = RealVector::from_iterator(dim, z.iter().map(|&v| v as f64));
            out.push(&self.basis * zf);
        });
        out
    }

    /// Depth-first search over coefficient vectors with `||Rz - c||^2 <=
    /// radius2`, calling `visit(z, dist2)` for each solution.
    fn enumerate(&self, c: &RealVector, radius2: f64, visit: &mut dyn FnMut(&[i64], f64)) {
        let dim = self.r.nrows();
        let mut z = vec![0i64; dim];
        self.descend(c, radius2, dim, 0.0, &mut z, visit);
    }

    fn descend(
        &self,
        c: &RealVector,
        radius2: f64,
        level: usize,
        partial: f64,
        z: &mut Vec<i64>,
        visit: &mut dyn FnMut(&[i64], f64),
    ) {
        if level == 0 {
            visit(z, partial);
            return;
        }
        let i = level - 1;
        let mut resid = c[i];
        for k in level..self.r.nrows() {
            resid -= self.r[(i, k)] * z[k] as f64;
        }
        let rii = self.r[(i, i)];
        let budget = (radius2 - partial).max(0.0).sqrt();
        let lo = ((resid - budget) / rii).ceil() as i64;
        let hi = ((resid + budget) / rii).floor() as i64;
        for zi in lo..=hi {
            let diff = rii * zi as f64 - resid;
            let next = partial + diff * diff;
            if next <= radius2 + 1e-15 {
                z[i] = zi;
                self.descend(c, radius2, i, next, z, visit);
            }
        }
        z[i] = 0;
    }
}

/// Lenstra–Lenstra–Lovász reduction (delta = 0.75) on basis columns.
fn lll_reduce(columns: RealMatrix) -> RealMatrix {
    let dim = columns.ncols();
    let mut b: Vec<RealVector> = (0..dim).map(|j| columns.column(j).into_owned()).collect();

    let gram_schmidt = |b: &[RealVector]| -> (Vec<RealVector>, Vec<Vec<f64>>) {
        let mut star: Vec<RealVector> = Vec::with_capacity(dim);
        let mut mu = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            let mut v = b[i].clone();
            for j in 0..i {
                mu[i][j] = b[i].dot(&star[j]) / star[j].dot(&star[j]);
                v -= &star[j] * mu[i][j];
            }
            star.push(v);
        }
        (star, mu)
    };

    let (mut star, mut mu) = gram_schmidt(&b);
    let mut k = 1;
    let mut guard = 0;
    while k < dim {
        guard += 1;
        if guard > 10_000 {
            break; // basis is already workable; reduction is best-effort
        }
        for j in (0..k).rev() {
            let q = mu[k][j].round();
            if q != 0.0 {
                let bj = b[j].clone();
                b[k] -= bj * q;
                (star, mu) = gram_schmidt(&b);
            }
        }
        let lovasz = star[k].dot(&star[k])
            >= (0.75 - mu[k][k - 1] * mu[k][k - 1]) * star[k - 1].dot(&star[k - 1]);
        if lovasz {
            k += 1;
        } else {
            b.swap(k, k - 1);
            (star, mu) = gram_schmidt(&b);
            k = k.max(2) - 1;
            if k == 0 {
                k = 1;
            }
        }
    }
    RealMatrix::from_columns(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    #[test]
    fn square_qubit_gram_and_dual() {
        let lat = GkpLattice::square(1).unwrap();
        assert_eq!(lat.d, 2);
        assert_eq!(lat.n, 1);
        assert_eq!(
            lat.a,
            IntMatrix::from_rows(&[vec![0, 2], vec![-2, 0]])
        );
        // S* = (2 Omega)^{-1} sqrt(2) I = [[0, -1/sqrt2], [1/sqrt2, 0]]
        let expect = RealMatrix::from_row_slice(2, 2, &[0.0, -1.0 / SQRT_2, 1.0 / SQRT_2, 0.0]);
        assert_abs_diff_eq!(lat.s_star, expect, epsilon = 1e-12);
    }

    #[test]
    fn two_square_qubits() {
        let lat = GkpLattice::square(2).unwrap();
        assert_eq!(lat.d, 4);
        let two_omega = IntMatrix(IntMatrix::omega(2).0 * 2);
        assert_eq!(lat.a, two_omega);
    }

    #[test]
    fn trivial_lattice_has_dimension_one() {
        let lat = make_lattice(RealMatrix::identity(2, 2)).unwrap();
        assert_eq!(lat.d, 1);
        assert_eq!(lat.a, IntMatrix::omega(1));
    }

    #[test]
    fn non_integral_gram_rejected() {
        let s = RealMatrix::identity(2, 2) * 1.3;
        match make_lattice(s) {
            Err(CoreError::NotIntegral(_)) => {}
            other => panic!("expected integrality failure, got {other:?}"),
        }
    }

    #[test]
    fn negative_orientation_rejected() {
        let s = RealMatrix::from_diagonal(&RealVector::from_vec(vec![SQRT_2, -SQRT_2]));
        match make_lattice(s) {
            Err(CoreError::Orientation) => {}
            other => panic!("expected orientation failure, got {other:?}"),
        }
    }

    #[test]
    fn lattice_is_contained_in_its_dual() {
        for lat in [GkpLattice::square(1).unwrap(), GkpLattice::square(2).unwrap()] {
            for i in 0..lat.dim() {
                let row = lat.s.row(i).transpose();
                assert!(lat.dual_contains(&row, INT_TOL));
                assert!(lat.contains(&row, INT_TOL));
            }
            for i in 0..lat.dim() {
                let dual_row = lat.s_star.row(i).transpose();
                assert!(lat.dual_contains(&dual_row, INT_TOL));
            }
        }
    }

    #[test]
    fn canonical_form_of_square_codes() {
        let lat = GkpLattice::square(1).unwrap();
        let form = canonical_form(&lat).unwrap();
        assert_eq!(form.r, IntMatrix::identity(2));
        assert_eq!(form.d, vec![2]);

        let lat = GkpLattice::square(2).unwrap();
        let form = canonical_form(&lat).unwrap();
        assert_eq!(form.d, vec![2, 2]);
        let rebuilt = form.r.mul(&lat.a).mul(&form.r.transpose());
        assert_eq!(rebuilt, canonical_gram(&form.d));
        assert_eq!(form.r.det(), 1);
    }

    #[test]
    fn canonical_form_recovers_invariants_after_scramble() {
        let lat = GkpLattice::square(1).unwrap();
        // unimodular scramble of the generators: S' = U S with U in SL2(Z)
        let u = RealMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let u2 = RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]);
        let scrambled = make_lattice(&u2 * &u * &lat.s).unwrap();
        assert_eq!(scrambled.d, 2);
        let form = canonical_form(&scrambled).unwrap();
        assert_eq!(form.d, vec![2]);
        let rebuilt = form.r.mul(&scrambled.a).mul(&form.r.transpose());
        assert_eq!(rebuilt, canonical_gram(&form.d));
        assert_eq!(form.r.det(), 1);
    }

    #[test]
    fn canonical_d_product_equals_logical_dimension() {
        for lat in [GkpLattice::square(1).unwrap(), GkpLattice::square(3).unwrap()] {
            let form = canonical_form(&lat).unwrap();
            let prod: i64 = form.d.iter().product();
            assert_eq!(prod as u64, lat.d);
        }
    }

    #[test]
    fn square_qubit_cosets() {
        let lat = GkpLattice::square(1).unwrap();
        let cosets = pauli_cosets(&lat).unwrap();
        assert_eq!(cosets.len(), 4);
        // order: I, X, Z, Y (X-part fastest)
        assert!(cosets[0].label.is_identity());
        assert_abs_diff_eq!(cosets[0].rep, RealVector::zeros(2), epsilon = 1e-12);
        assert_eq!(cosets[1].label, PauliLabel { x: vec![1], z: vec![0] });
        assert_abs_diff_eq!(
            cosets[1].rep,
            RealVector::from_vec(vec![1.0 / SQRT_2, 0.0]),
            epsilon = 1e-12
        );
        assert_eq!(cosets[2].label, PauliLabel { x: vec![0], z: vec![1] });
        assert_abs_diff_eq!(
            cosets[2].rep,
            RealVector::from_vec(vec![0.0, 1.0 / SQRT_2]),
            epsilon = 1e-12
        );
        assert_eq!(cosets[3].label, PauliLabel { x: vec![1], z: vec![1] });
        for c in &cosets[1..] {
            assert!(c.rep.norm() <= 1.0 / SQRT_2 * SQRT_2 + 1e-12);
            assert!(c.rep.norm() > 0.1);
        }
    }

    #[test]
    fn adding_x_and_z_reps_lands_in_y() {
        let lat = GkpLattice::square(1).unwrap();
        let form = canonical_form(&lat).unwrap();
        let cosets = pauli_cosets(&lat).unwrap();
        let sum = &cosets[1].rep + &cosets[2].rep;
        let label = lat.coset_label_of(&form, &sum).unwrap();
        assert_eq!(label, PauliLabel { x: vec![1], z: vec![1] });
    }

    #[test]
    fn trivial_lattice_has_single_coset() {
        let lat = make_lattice(RealMatrix::identity(2, 2)).unwrap();
        let cosets = pauli_cosets(&lat).unwrap();
        assert_eq!(cosets.len(), 1);
        assert!(cosets[0].label.is_identity());
    }

    #[test]
    fn two_qubit_cosets_close_under_addition() {
        let lat = GkpLattice::square(2).unwrap();
        let form = canonical_form(&lat).unwrap();
        let cosets = pauli_cosets(&lat).unwrap();
        assert_eq!(cosets.len(), 16);
        for a in &cosets {
            for b in &cosets {
                let sum = &a.rep + &b.rep;
                let label = lat.coset_label_of(&form, &sum).unwrap();
                let expect_x: Vec<i64> = (0..2)
                    .map(|j| (a.label.x[j] + b.label.x[j]).rem_euclid(form.d[j]))
                    .collect();
                let expect_z: Vec<i64> = (0..2)
                    .map(|j| (a.label.z[j] + b.label.z[j]).rem_euclid(form.d[j]))
                    .collect();
                assert_eq!(label.x, expect_x);
                assert_eq!(label.z, expect_z);
            }
        }
    }

    #[test]
    fn coset_cap_enforced() {
        let lat = GkpLattice::square(2).unwrap();
        assert!(pauli_cosets_capped(&lat, 8).is_err());
    }

    #[test]
    fn closest_point_breaks_ties_toward_lex_largest() {
        let lat = GkpLattice::square(1).unwrap();
        let basis = ReducedBasis::new(lat.s.transpose()).unwrap();
        // Both (1/sqrt2, 0) and (-1/sqrt2, 0) are shortest in the X coset.
        let w = RealVector::from_vec(vec![-1.0 / SQRT_2, 0.0]);
        let rep = shortest_in_coset(&basis, &w);
        assert_abs_diff_eq!(
            rep,
            RealVector::from_vec(vec![1.0 / SQRT_2, 0.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ball_enumeration_counts_match_brute_force() {
        let lat = GkpLattice::square(1).unwrap();
        let basis = ReducedBasis::new(lat.s.transpose()).unwrap();
        let center = RealVector::from_vec(vec![0.3, -0.4]);
        let radius = 3.7;
        let pts = basis.points_within(&center, radius);
        // brute force over a generous coefficient box
        let mut count = 0;
        for a in -10..=10i64 {
            for b in -10..=10i64 {
                let v = RealVector::from_vec(vec![SQRT_2 * a as f64, SQRT_2 * b as f64]);
                if (v - &center).norm() <= radius {
                    count += 1;
                }
            }
        }
        assert_eq!(pts.len(), count);
        for p in &pts {
            assert!(lat.contains(p, 1e-9));
            assert!((p - &center).norm() <= radius + 1e-12);
        }
    }
}
