//! Qudit Weyl–Heisenberg algebra for odd prime local dimension.
//!
//! Conventions used throughout the crate:
//!
//! * Computational basis `|0>, ..., |q-1>`; multi-site states are ordered with
//!   site 0 as the most significant digit (the usual Kronecker ordering).
//! * A phase-space point on `n` sites is a list of pairs `(a, a')` in `Z_q`.
//!   Its flat index is row-major over sites, site 0 most significant, with the
//!   per-site digit `a * q + a'`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub mod stabilizer;

pub type C64 = Complex64;

/// Square complex matrix acting on `(C^q)^{⊗n}`.
pub type DenseOperator = DMatrix<C64>;

/// Amplitude vector in `(C^q)^{⊗n}`.
pub type DenseState = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

fn is_prime(q: usize) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// An odd prime local dimension together with the inverse of 2 mod q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct PrimeDim {
    q: usize,
    inv2: usize,
}

impl PrimeDim {
    pub const QUTRIT: PrimeDim = PrimeDim { q: 3, inv2: 2 };

    pub fn new(q: usize) -> Result<Self> {
        if q % 2 == 0 || !is_prime(q) {
            return Err(Error::NotOddPrime(q));
        }
        let inv2 = (q + 1) / 2;
        debug_assert_eq!((2 * inv2) % q, 1);
        Ok(PrimeDim { q, inv2 })
    }

    #[inline]
    pub fn get(self) -> usize {
        self.q
    }

    /// Multiplicative inverse of 2 modulo q, `(q + 1) / 2`.
    #[inline]
    pub fn inv2(self) -> usize {
        self.inv2
    }

    /// `ω^k` with `ω = exp(2πi/q)`; `k` is reduced mod q first.
    pub fn omega_pow(self, k: i64) -> C64 {
        let r = k.rem_euclid(self.q as i64) as f64;
        C64::from_polar(1.0, 2.0 * std::f64::consts::PI * r / self.q as f64)
    }

    pub fn omega(self) -> C64 {
        self.omega_pow(1)
    }

    /// `q^n`, the Hilbert-space dimension of `n` sites.
    pub fn hilbert_dim(self, n: usize) -> usize {
        self.q.pow(n as u32)
    }

    /// `q^{2n}`, the number of phase-space points on `n` sites.
    pub fn num_phase_points(self, n: usize) -> usize {
        self.q.pow(2 * n as u32)
    }

    /// Number of sites `n` with `q^n == dim`, if any.
    pub fn sites_for_dim(self, dim: usize) -> Option<usize> {
        let mut n = 0;
        let mut d = 1;
        while d < dim {
            d *= self.q;
            n += 1;
        }
        (d == dim).then_some(n)
    }
}

impl TryFrom<usize> for PrimeDim {
    type Error = Error;
    fn try_from(q: usize) -> Result<Self> {
        PrimeDim::new(q)
    }
}

impl From<PrimeDim> for usize {
    fn from(q: PrimeDim) -> usize {
        q.q
    }
}

/// A point `u = ((a_1, a_1'), ..., (a_n, a_n'))` of the discrete phase space `Z_q^{2n}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PhasePoint {
    pairs: Vec<(usize, usize)>,
}

impl PhasePoint {
    /// Entries must already be reduced mod q.
    pub fn new(q: PrimeDim, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= q.get() || b >= q.get()) {
            return invalid(format!("phase-point entry ({a}, {b}) not reduced mod {}", q.get()));
        }
        Ok(PhasePoint { pairs })
    }

    pub fn zero(n: usize) -> Self {
        PhasePoint { pairs: vec![(0, 0); n] }
    }

    pub fn from_index(q: PrimeDim, n: usize, mut index: usize) -> Self {
        let q = q.get();
        let mut pairs = vec![(0, 0); n];
        for slot in pairs.iter_mut().rev() {
            let digit = index % (q * q);
            index /= q * q;
            *slot = (digit / q, digit % q);
        }
        PhasePoint { pairs }
    }

    pub fn index(&self, q: PrimeDim) -> usize {
        let q = q.get();
        self.pairs.iter().fold(0, |acc, &(a, b)| acc * q * q + a * q + b)
    }

    pub fn n_sites(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Clock operator `Z = Σ ω^n |n><n|`.
pub fn clock(q: PrimeDim) -> DenseOperator {
    DMatrix::from_fn(q.get(), q.get(), |i, j| if i == j { q.omega_pow(i as i64) } else { ZERO })
}

/// Shift operator `X = Σ |n+1 mod q><n|`.
pub fn shift(q: PrimeDim) -> DenseOperator {
    let d = q.get();
    DMatrix::from_fn(d, d, |i, j| if i == (j + 1) % d { ONE } else { ZERO })
}

/// Generalized Pauli `T_{aa'} = ω^{-2⁻¹ a a'} Z^a X^{a'}`.
///
/// Exponents are not reduced; values outside `0..q` are rejected.
pub fn pauli(q: PrimeDim, a: usize, a_prime: usize) -> Result<DenseOperator> {
    let d = q.get();
    if a >= d || a_prime >= d {
        return invalid(format!("Pauli exponents ({a}, {a_prime}) out of range for q = {d}"));
    }
    Ok(pauli_unchecked(q, a, a_prime))
}

fn pauli_unchecked(q: PrimeDim, a: usize, a_prime: usize) -> DenseOperator {
    let d = q.get();
    let mut m = DMatrix::from_element(d, d, ZERO);
    let base = -((q.inv2() * a * a_prime) as i64);
    // Z^a X^{a'} |n> = ω^{a (n + a')} |n + a'>
    for n in 0..d {
        let row = (n + a_prime) % d;
        m[(row, n)] = q.omega_pow(base + (a * row) as i64);
    }
    m
}

/// Tensor product of single-site Paulis `T_{u_1} ⊗ ... ⊗ T_{u_n}`.
pub fn pauli_string(q: PrimeDim, u: &PhasePoint) -> DenseOperator {
    u.pairs()
        .iter()
        .fold(DMatrix::from_element(1, 1, ONE), |acc, &(a, b)| acc.kronecker(&pauli_unchecked(q, a, b)))
}

/// Single-site phase-space point operators `A_{(a,a')}`, indexed by `a * q + a'`.
///
/// The `n`-site operators factorize as Kronecker products of these.
#[derive(Clone, Debug)]
pub struct PhaseSpace {
    q: PrimeDim,
    ops: Vec<DenseOperator>,
}

impl PhaseSpace {
    pub fn new(q: PrimeDim) -> Self {
        let d = q.get();
        let mut sum = DMatrix::from_element(d, d, ZERO);
        for a in 0..d {
            for b in 0..d {
                sum += pauli_unchecked(q, a, b);
            }
        }
        let scale = C64::new(1.0 / d as f64, 0.0);
        let ops = (0..d * d)
            .map(|idx| {
                let t = pauli_unchecked(q, idx / d, idx % d);
                (&t * &sum * t.adjoint()) * scale
            })
            .collect();
        PhaseSpace { q, ops }
    }

    pub fn qutrit() -> Self {
        Self::new(PrimeDim::QUTRIT)
    }

    pub fn dim(&self) -> PrimeDim {
        self.q
    }

    /// Single-site operator for the flat per-site digit `a * q + a'`.
    pub fn site_op(&self, digit: usize) -> &DenseOperator {
        &self.ops[digit]
    }

    pub fn site_ops(&self) -> &[DenseOperator] {
        &self.ops
    }

    /// `A_b` on `b.n_sites()` sites, built as `⊗_j A_{b_j}`.
    pub fn point_operator(&self, b: &PhasePoint) -> DenseOperator {
        let d = self.q.get();
        b.pairs()
            .iter()
            .fold(DMatrix::from_element(1, 1, ONE), |acc, &(a, a2)| acc.kronecker(&self.ops[a * d + a2]))
    }
}

/// Phase-space point operator `A_b = q^{-n} T_b (Σ_a T_a) T_b^†` via site factorization.
pub fn phase_point_operator(q: PrimeDim, b: &PhasePoint) -> DenseOperator {
    PhaseSpace::new(q).point_operator(b)
}

/// Embed a `k`-site operator acting on `sites` (in the given order) into `n` sites.
pub fn embed(q: PrimeDim, n: usize, op: &DenseOperator, sites: &[usize]) -> Result<DenseOperator> {
    let d = q.get();
    let k = sites.len();
    if op.nrows() != q.hilbert_dim(k) || !op.is_square() {
        return Err(Error::Dimension(format!("operator is {}x{}, expected {} sites", op.nrows(), op.ncols(), k)));
    }
    if sites.iter().any(|&s| s >= n) {
        return invalid("embed: site index out of range");
    }
    for (i, s) in sites.iter().enumerate() {
        if sites[..i].contains(s) {
            return invalid("embed: repeated site");
        }
    }
    let dim = q.hilbert_dim(n);
    let digit = |idx: usize, site: usize| (idx / d.pow((n - 1 - site) as u32)) % d;
    let local = |idx: usize| sites.iter().fold(0, |acc, &s| acc * d + digit(idx, s));
    let rest_mask = |idx: usize| {
        let mut r = idx;
        for &s in sites {
            r -= digit(idx, s) * d.pow((n - 1 - s) as u32);
        }
        r
    };
    let mut out = DMatrix::from_element(dim, dim, ZERO);
    for col in 0..dim {
        let rc = rest_mask(col);
        let lc = local(col);
        for lr in 0..op.nrows() {
            let v = op[(lr, lc)];
            if v == ZERO {
                continue;
            }
            let mut row = rc;
            let mut rem = lr;
            for &s in sites.iter().rev() {
                row += (rem % d) * d.pow((n - 1 - s) as u32);
                rem /= d;
            }
            out[(row, col)] += v;
        }
    }
    Ok(out)
}

/// Maximum entrywise deviation of `U U^†` from the identity.
pub fn unitarity_defect(u: &DenseOperator) -> f64 {
    let prod = u * u.adjoint();
    let mut worst: f64 = 0.0;
    for i in 0..prod.nrows() {
        for j in 0..prod.ncols() {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

/// Maximum entrywise deviation of `M` from `M^†`.
pub fn hermiticity_defect(m: &DenseOperator) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Decompose `V` as `phase * T_b` if it is a Pauli string up to a unit phase.
pub fn as_pauli_up_to_phase(q: PrimeDim, n: usize, v: &DenseOperator, tol: f64) -> Option<(PhasePoint, C64)> {
    let dim = q.hilbert_dim(n) as f64;
    for idx in 0..q.num_phase_points(n) {
        let b = PhasePoint::from_index(q, n, idx);
        let t = pauli_string(q, &b);
        let coeff = t.zip_fold(v, ZERO, |acc, ti, vi| acc + ti.conj() * vi) / dim;
        if (coeff.norm() - 1.0).abs() < 1e-6 {
            let residual = (v - t * coeff).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            return (residual < tol).then_some((b, coeff));
        }
    }
    None
}

/// True iff `U` maps each generator Pauli (`Z_j`, `X_j` on every site) to a Pauli string up to phase.
pub fn is_clifford(u: &DenseOperator, q: PrimeDim, n: usize) -> Result<bool> {
    if u.nrows() != q.hilbert_dim(n) || !u.is_square() {
        return Err(Error::Dimension(format!("operator is {}x{}, expected dimension {}", u.nrows(), u.ncols(), q.hilbert_dim(n))));
    }
    let defect = unitarity_defect(u);
    if defect > 1e-10 {
        return Err(Error::NotUnitary(defect));
    }
    let z = clock(q);
    let x = shift(q);
    for site in 0..n {
        for g in [&z, &x] {
            let p = embed(q, n, g, &[site])?;
            let image = u * p * u.adjoint();
            if as_pauli_up_to_phase(q, n, &image, 1e-10).is_none() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Computational basis state `|s_0 s_1 ...>`.
pub fn basis_state(q: PrimeDim, digits: &[usize]) -> DenseState {
    let d = q.get();
    let idx = digits.iter().fold(0, |acc, &s| acc * d + s);
    let mut v = DVector::from_element(q.hilbert_dim(digits.len()), ZERO);
    v[idx] = ONE;
    v
}

/// Outer product `|ψ><ψ|`.
pub fn projector(psi: &DenseState) -> DenseOperator {
    psi * psi.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_diff(a: &DenseOperator, b: &DenseOperator) -> f64 {
        (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    #[test]
    fn prime_dim_validation() {
        assert!(PrimeDim::new(2).is_err());
        assert!(PrimeDim::new(9).is_err());
        assert!(PrimeDim::new(1).is_err());
        for q in [3usize, 5, 7, 11, 37] {
            let p = PrimeDim::new(q).unwrap();
            assert_eq!((2 * p.inv2()) % q, 1);
        }
        assert_eq!(PrimeDim::QUTRIT, PrimeDim::new(3).unwrap());
    }

    #[test]
    fn clock_and_shift_qutrit() {
        let q = PrimeDim::QUTRIT;
        let z = clock(q);
        let w = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        assert_abs_diff_eq!((z[(1, 1)] - w).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((z[(2, 2)] - w * w).norm(), 0.0, epsilon = 1e-14);
        let x = shift(q);
        let v = &x * basis_state(q, &[2]);
        assert_eq!(v, basis_state(q, &[0]));
        // ZX = ω XZ
        assert!(max_diff(&(&z * &x), &((&x * &z) * w)) < 1e-12);
        let id = DMatrix::identity(3, 3);
        assert!(max_diff(&z.pow(3), &id) < 1e-12);
        assert!(max_diff(&x.pow(3), &id) < 1e-12);
    }

    #[test]
    fn pauli_special_cases() {
        let q = PrimeDim::QUTRIT;
        assert!(max_diff(&pauli(q, 1, 0).unwrap(), &clock(q)) < 1e-14);
        assert!(max_diff(&pauli(q, 0, 1).unwrap(), &shift(q)) < 1e-14);
        assert!(max_diff(&pauli(q, 0, 0).unwrap(), &DMatrix::identity(3, 3)) < 1e-14);
        // T_11 = ω^{-2} Z X = ω Z X, checked entrywise against explicit products.
        let zx = clock(q) * shift(q);
        let expected = zx * q.omega();
        assert!(max_diff(&pauli(q, 1, 1).unwrap(), &expected) < 1e-12);
        assert!(pauli(q, 3, 0).is_err());
    }

    #[test]
    fn pauli_strings_are_orthogonal() {
        let q = PrimeDim::QUTRIT;
        let strings: Vec<_> = (0..81).map(|i| pauli_string(q, &PhasePoint::from_index(q, 2, i))).collect();
        assert!(max_diff(&strings[0], &DMatrix::identity(9, 9)) < 1e-14);
        for (i, ti) in strings.iter().enumerate() {
            for (j, tj) in strings.iter().enumerate() {
                let tr = (ti.adjoint() * tj).trace();
                let expect = if i == j { 9.0 } else { 0.0 };
                assert!((tr - C64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
        let zx = pauli_string(q, &PhasePoint::new(q, vec![(1, 0), (0, 1)]).unwrap());
        assert!(max_diff(&zx, &clock(q).kronecker(&shift(q))) < 1e-14);
    }

    #[test]
    fn weyl_commutation_phase_is_power_of_omega() {
        let q = PrimeDim::QUTRIT;
        for i in 0..9 {
            for j in 0..9 {
                let (a, ap) = (i / 3, i % 3);
                let (b, bp) = (j / 3, j % 3);
                let ta = pauli(q, a, ap).unwrap();
                let tb = pauli(q, b, bp).unwrap();
                // symplectic form decides the phase
                let k = (ap * b) as i64 - (a * bp) as i64;
                let lhs = &ta * &tb;
                let rhs = (&tb * &ta) * q.omega_pow(-k);
                assert!(max_diff(&lhs, &rhs) < 1e-12, "({a}{ap}),({b}{bp})");
            }
        }
    }

    #[test]
    fn phase_point_single_site_properties() {
        let ps = PhaseSpace::qutrit();
        for a in ps.site_ops() {
            assert!(hermiticity_defect(a) < 1e-13);
            assert!((a.trace() - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_point_factorization_matches_definition() {
        let q = PrimeDim::QUTRIT;
        let ps = PhaseSpace::new(q);
        let mut sum = DMatrix::from_element(9, 9, ZERO);
        for i in 0..81 {
            sum += pauli_string(q, &PhasePoint::from_index(q, 2, i));
        }
        for idx in [0usize, 5, 17, 40, 80] {
            let b = PhasePoint::from_index(q, 2, idx);
            let t = pauli_string(q, &b);
            let direct = (&t * &sum * t.adjoint()) / C64::new(9.0, 0.0);
            assert!(max_diff(&direct, &ps.point_operator(&b)) < 1e-12);
        }
    }

    #[test]
    fn phase_point_index_round_trip() {
        let q = PrimeDim::QUTRIT;
        for idx in 0..729 {
            assert_eq!(PhasePoint::from_index(q, 3, idx).index(q), idx);
        }
        assert!(PhasePoint::new(q, vec![(3, 0)]).is_err());
    }

    #[test]
    fn embed_matches_kronecker() {
        let q = PrimeDim::QUTRIT;
        let z = clock(q);
        let x = shift(q);
        let id = DMatrix::<C64>::identity(3, 3);
        let e = embed(q, 3, &z, &[1]).unwrap();
        assert!(max_diff(&e, &id.kronecker(&z).kronecker(&id)) < 1e-14);
        let zx = z.kronecker(&x);
        let e = embed(q, 3, &zx, &[2, 0]).unwrap();
        assert!(max_diff(&e, &x.kronecker(&id).kronecker(&z)) < 1e-14);
    }
}
