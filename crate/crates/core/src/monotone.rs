//! Randomized checks that mana behaves as a magic monotone: invariant under
//! Clifford circuits and non-increasing under Pauli measurements.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::qudit::stabilizer::clifford_gate_set;
use crate::qudit::{pauli_string, DenseOperator, PhasePoint, PrimeDim, C64};
use crate::wigner::{mana_of, DensityMatrix};

/// Largest register for the randomized suite.
pub const MONOTONE_MAX_SITES: usize = 3;

/// Product of `depth` gates drawn uniformly from the Clifford generating set.
pub fn random_clifford_circuit(rng: &mut impl Rng, q: PrimeDim, n: usize, depth: usize) -> Result<DenseOperator> {
    let gates = clifford_gate_set(q, n)?;
    let dim = q.hilbert_dim(n);
    let mut u = DenseOperator::identity(dim, dim);
    for _ in 0..depth {
        let g = gates.choose(rng).expect("non-empty gate set");
        u = g * u;
    }
    Ok(u)
}

/// A uniformly random non-identity Pauli string on `n` sites.
pub fn random_pauli(rng: &mut impl Rng, q: PrimeDim, n: usize) -> PhasePoint {
    let total = q.num_phase_points(n);
    let idx = rng.random_range(1..total);
    PhasePoint::from_index(q, n, idx)
}

/// Non-selective measurement of the Pauli string `u`:
/// `ρ ↦ Σ_k P_k ρ P_k = q⁻¹ Σ_m T_u^m ρ T_u^{−m}`.
pub fn pauli_measurement(rho: &DensityMatrix, u: &PhasePoint) -> Result<DensityMatrix> {
    let q = rho.q();
    if u.n_sites() != rho.n_sites() {
        return invalid("Pauli string and state act on different registers");
    }
    let t = pauli_string(q, u);
    let dim = rho.matrix().nrows();
    let mut acc = DenseOperator::zeros(dim, dim);
    let mut power = DenseOperator::identity(dim, dim);
    for _ in 0..q.get() {
        acc += &power * rho.matrix() * power.adjoint();
        power = &t * power;
    }
    acc /= C64::new(q.get() as f64, 0.0);
    DensityMatrix::from_unnormalized(q, acc)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MonotoneReport {
    pub clifford_trials: usize,
    pub measurement_trials: usize,
    pub base_mana: f64,
    /// Largest `|M(UρU†) − M(ρ)|` seen.
    pub clifford_max_deviation: f64,
    /// Largest `M(D[ρ]) − M(ρ)` seen (positive values are violations beyond tolerance).
    pub measurement_max_increase: f64,
    pub failures: Vec<String>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const CLIFFORD_TOL: f64 = 1e-10;
pub const MEASUREMENT_TOL: f64 = 1e-9;

/// Run `trials` random Clifford circuits and `trials` random Pauli measurements on `rho`.
/// Violations are collected in the report rather than returned as errors.
pub fn monotonicity_suite(rng: &mut impl Rng, rho: &DensityMatrix, trials: usize) -> Result<MonotoneReport> {
    let n = rho.n_sites();
    if n > MONOTONE_MAX_SITES {
        return invalid(format!("monotonicity suite supports up to {MONOTONE_MAX_SITES} sites"));
    }
    let q = rho.q();
    let base = mana_of(rho)?.mana;
    let mut report = MonotoneReport { clifford_trials: trials, measurement_trials: trials, base_mana: base, ..Default::default() };
    report.measurement_max_increase = f64::NEG_INFINITY;
    for t in 0..trials {
        let depth = rng.random_range(1..=4 * n + 8);
        let u = random_clifford_circuit(rng, q, n, depth)?;
        let m = mana_of(&rho.conjugate(&u)?)?.mana;
        let dev = (m - base).abs();
        report.clifford_max_deviation = report.clifford_max_deviation.max(dev);
        if dev > CLIFFORD_TOL {
            report.failures.push(format!("clifford trial {t}: depth {depth}, mana changed by {dev:e}"));
        }
    }
    for t in 0..trials {
        let u = random_pauli(rng, q, n);
        let m = mana_of(&pauli_measurement(rho, &u)?)?.mana;
        let inc = m - base;
        report.measurement_max_increase = report.measurement_max_increase.max(inc);
        if inc > MEASUREMENT_TOL {
            report.failures.push(format!("measurement trial {t}: Pauli {:?}, mana grew by {inc:e}", u.pairs()));
        }
    }
    if trials == 0 {
        report.measurement_max_increase = 0.0;
    }
    Ok(report)
}
