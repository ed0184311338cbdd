//! Qutrit Clifford generators, the T gate, and pure stabilizer-state enumeration.

use std::collections::{HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};

use super::{basis_state, embed, DenseOperator, DenseState, PrimeDim, C64, ONE, ZERO};
use crate::error::{invalid, Error, Result};

/// The qutrit Clifford generators: phase gate `K`, Hadamard `H`, and sum gate `S`.
#[derive(Clone, Debug)]
pub struct CliffordGenerators {
    pub k: DenseOperator,
    pub h: DenseOperator,
    /// `S |i, j> = |i, i + j>`, control on the first site.
    pub s: DenseOperator,
}

fn require_qutrit(q: PrimeDim) -> Result<()> {
    if q.get() != 3 {
        return invalid(format!("qutrit gates requested for q = {}", q.get()));
    }
    Ok(())
}

pub fn clifford_generators(q: PrimeDim) -> Result<CliffordGenerators> {
    require_qutrit(q)?;
    let w = q.omega();
    let k = DMatrix::from_diagonal(&DVector::from_vec(vec![ONE, ONE, w]));
    let norm = C64::new(1.0 / 3f64.sqrt(), 0.0);
    let h = DMatrix::from_fn(3, 3, |i, j| q.omega_pow((i * j) as i64) * norm);
    Ok(CliffordGenerators { k, h, s: sum_gate(q, false) })
}

/// Sum gate on two qudits; `control_second` puts the control on the second site.
pub fn sum_gate(q: PrimeDim, control_second: bool) -> DenseOperator {
    let d = q.get();
    let mut s = DMatrix::from_element(d * d, d * d, ZERO);
    for i in 0..d {
        for j in 0..d {
            let (row, col) = if control_second { (((i + j) % d) * d + j, i * d + j) } else { (i * d + (i + j) % d, i * d + j) };
            s[(row, col)] = ONE;
        }
    }
    s
}

/// Two-site swap.
pub fn swap_gate(q: PrimeDim) -> DenseOperator {
    let d = q.get();
    let mut s = DMatrix::from_element(d * d, d * d, ZERO);
    for i in 0..d {
        for j in 0..d {
            s[(j * d + i, i * d + j)] = ONE;
        }
    }
    s
}

/// `T = diag(ξ⁻¹, 1, ξ)` with `ξ = exp(2πi/9)`.
pub fn t_gate(q: PrimeDim) -> Result<DenseOperator> {
    require_qutrit(q)?;
    let xi = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 9.0);
    Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![xi.conj(), ONE, xi])))
}

/// The single-qutrit magic state `T H |0>`.
pub fn t_state(q: PrimeDim) -> Result<DenseState> {
    let g = clifford_generators(q)?;
    Ok(t_gate(q)? * (&g.h * basis_state(q, &[0])))
}

/// All gates used to close the stabilizer orbit on `n` sites.
pub fn clifford_gate_set(q: PrimeDim, n: usize) -> Result<Vec<DenseOperator>> {
    let g = clifford_generators(q)?;
    let mut gates = Vec::new();
    for site in 0..n {
        gates.push(embed(q, n, &g.k, &[site])?);
        gates.push(embed(q, n, &g.h, &[site])?);
    }
    let swap = swap_gate(q);
    for a in 0..n {
        for b in 0..n {
            if a != b {
                gates.push(embed(q, n, &g.s, &[a, b])?);
                if a < b {
                    gates.push(embed(q, n, &swap, &[a, b])?);
                }
            }
        }
    }
    Ok(gates)
}

/// Rotate the first non-negligible amplitude to the positive real axis.
pub fn canonical_phase(psi: &DenseState) -> DenseState {
    let norm = psi.norm();
    let mut out = psi / C64::new(norm, 0.0);
    if let Some(first) = out.iter().find(|z| z.norm() > 1e-6).copied() {
        let phase = first.conj() / first.norm();
        out *= phase;
    }
    out
}

fn hash_key(psi: &DenseState) -> Vec<i64> {
    psi.iter()
        .flat_map(|z| [(z.re * 1e9).round() as i64, (z.im * 1e9).round() as i64])
        .collect()
}

/// Pure stabilizer states of `n ≤ 2` qutrits, one representative per global phase class.
pub fn stabilizer_states(q: PrimeDim, n: usize) -> Result<Vec<DenseState>> {
    require_qutrit(q)?;
    if n == 0 || n > 2 {
        return invalid(format!("stabilizer enumeration supports n in 1..=2, got {n}"));
    }
    let gates = clifford_gate_set(q, n)?;
    let start = canonical_phase(&basis_state(q, &vec![0; n]));
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    seen.insert(hash_key(&start));
    queue.push_back(start.clone());
    out.push(start);
    while let Some(psi) = queue.pop_front() {
        for g in &gates {
            let next = canonical_phase(&(g * &psi));
            if seen.insert(hash_key(&next)) {
                queue.push_back(next.clone());
                out.push(next);
            }
        }
    }
    Ok(out)
}

/// Number of Pauli strings (up to phase) that have `psi` as an eigenvector.
pub fn stabilizer_group_order(q: PrimeDim, psi: &DenseState) -> Result<usize> {
    let n = q
        .sites_for_dim(psi.len())
        .ok_or_else(|| Error::Dimension(format!("state length {} is not a power of {}", psi.len(), q.get())))?;
    let mut count = 0;
    for idx in 0..q.num_phase_points(n) {
        let p = super::pauli_string(q, &super::PhasePoint::from_index(q, n, idx));
        let overlap = psi.dotc(&(&p * psi));
        if (overlap.norm() - 1.0).abs() < 1e-9 {
            count += 1;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{as_pauli_up_to_phase, clock, is_clifford, shift, unitarity_defect};

    #[test]
    fn generators_are_unitary() {
        let q = PrimeDim::QUTRIT;
        let g = clifford_generators(q).unwrap();
        for u in [&g.k, &g.h, &g.s, &t_gate(q).unwrap(), &swap_gate(q), &sum_gate(q, true)] {
            assert!(unitarity_defect(u) < 1e-12);
        }
    }

    #[test]
    fn non_qutrit_rejected() {
        let q5 = PrimeDim::new(5).unwrap();
        assert!(clifford_generators(q5).is_err());
        assert!(t_gate(q5).is_err());
        assert!(stabilizer_states(q5, 1).is_err());
    }

    #[test]
    fn hadamard_maps_clock_to_shift_type() {
        let q = PrimeDim::QUTRIT;
        let g = clifford_generators(q).unwrap();
        let conj = &g.h * clock(q) * g.h.adjoint();
        let (b, _) = as_pauli_up_to_phase(q, 1, &conj, 1e-10).unwrap();
        assert_eq!(b.pairs()[0].0, 0);
        assert_ne!(b.pairs()[0].1, 0);
    }

    #[test]
    fn clifford_detection() {
        let q = PrimeDim::QUTRIT;
        let g = clifford_generators(q).unwrap();
        assert!(is_clifford(&g.k, q, 1).unwrap());
        assert!(is_clifford(&g.h, q, 1).unwrap());
        assert!(is_clifford(&g.s, q, 2).unwrap());
        let t = t_gate(q).unwrap();
        assert!(!is_clifford(&t, q, 1).unwrap());
        let tx = &t * shift(q) * t.adjoint();
        assert!(as_pauli_up_to_phase(q, 1, &tx, 1e-10).is_none());
        let bad = DMatrix::from_element(3, 3, ONE);
        assert!(is_clifford(&bad, q, 1).is_err());
    }

    #[test]
    fn stabilizer_counts() {
        let q = PrimeDim::QUTRIT;
        let one = stabilizer_states(q, 1).unwrap();
        assert_eq!(one.len(), 3 * (3 + 1));
        let two = stabilizer_states(q, 2).unwrap();
        assert_eq!(two.len(), 9 * (3 + 1) * (9 + 1));
        assert!(stabilizer_states(q, 3).is_err());
    }

    #[test]
    fn stabilizer_states_have_full_stabilizer_group() {
        let q = PrimeDim::QUTRIT;
        for psi in stabilizer_states(q, 1).unwrap() {
            assert_eq!(stabilizer_group_order(q, &psi).unwrap(), 3);
        }
        for psi in stabilizer_states(q, 2).unwrap().iter().step_by(7) {
            assert_eq!(stabilizer_group_order(q, psi).unwrap(), 9);
        }
        let t = t_state(q).unwrap();
        assert_eq!(stabilizer_group_order(q, &t).unwrap(), 1);
    }
}
