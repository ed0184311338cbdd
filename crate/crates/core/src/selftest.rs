//! Fast invariant suite with an itemized, seed-deterministic report.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::meanfield::{ansatz_state, expectations};
use crate::mera::{domain_counts, mera_graph_oracle};
use crate::qudit::stabilizer::stabilizer_states;
use crate::qudit::{clock, hermiticity_defect, shift, DenseOperator, PhaseSpace, PrimeDim, C64};
use crate::random::{random_density, random_state, rng};
use crate::wigner::{mana_of, wigner_of, DensityMatrix};
use crate::Result;

pub const SELFTEST_SEED: u64 = 20_240_901;
pub const SELFTEST_MERA_MAX_K: usize = 8;

/// Deliberate corruption of the single-site phase-point table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fault {
    /// Add `eps` to the (0, 0) entry of site operator `digit`.
    PerturbPhasePoint { digit: usize, eps: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct SelfTestOptions {
    pub seed: u64,
    pub random_states: usize,
    pub fault: Option<Fault>,
}

impl Default for SelfTestOptions {
    fn default() -> Self {
        SelfTestOptions { seed: SELFTEST_SEED, random_states: 200, fault: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed deviation (or count of violations where noted).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SelfTestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for SelfTestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "selftest seed {}", self.seed)?;
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "  [{tag}] {:<34} worst {:.3e} (tol {:.1e}) {}", c.name, c.worst, c.tolerance, c.detail)?;
        }
        let n_fail = self.failures().count();
        write!(f, "{} of {} checks passed", self.checks.len() - n_fail, self.checks.len())
    }
}

fn max_abs(m: &DenseOperator) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn check(name: &str, worst: f64, tolerance: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult { name: name.into(), passed: worst.is_finite() && worst <= tolerance, worst, tolerance, detail: detail.into() }
}

fn site_table(q: PrimeDim, fault: Option<Fault>) -> Vec<DenseOperator> {
    let mut ops = PhaseSpace::new(q).site_ops().to_vec();
    if let Some(Fault::PerturbPhasePoint { digit, eps }) = fault {
        let d = digit % ops.len();
        ops[d][(0, 0)] += C64::new(eps, 0.0);
    }
    ops
}

/// All `n`-site products of the single-site table.
fn product_table(ops: &[DenseOperator], n: usize) -> Vec<DenseOperator> {
    let mut out = vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))];
    for _ in 0..n {
        out = out.iter().flat_map(|a| ops.iter().map(move |b| a.kronecker(b))).collect();
    }
    out
}

/// `max |Tr(A_b A_c) − q^n δ_bc|` and `‖q^{-n} Σ A_b − I‖_max`.
pub fn phase_point_defects(ops: &[DenseOperator], q: usize, n: usize) -> (f64, f64) {
    let table = product_table(ops, n);
    let dim = q.pow(n as u32) as f64;
    let mut orth: f64 = 0.0;
    for (i, a) in table.iter().enumerate() {
        for (j, b) in table.iter().enumerate().skip(i) {
            let tr = a.component_mul(&b.transpose()).sum();
            let want = if i == j { dim } else { 0.0 };
            orth = orth.max((tr - C64::new(want, 0.0)).norm());
        }
    }
    let size = table[0].nrows();
    let sum = table.iter().fold(DenseOperator::zeros(size, size), |acc, a| acc + a) / C64::new(dim, 0.0);
    let complete = max_abs(&(sum - DenseOperator::identity(size, size)));
    (orth, complete)
}

fn algebra_checks(q: PrimeDim, fault: Option<Fault>, out: &mut Vec<CheckResult>) {
    let ops = site_table(q, fault);
    for n in 1..=2 {
        let (orth, complete) = phase_point_defects(&ops, q.get(), n);
        out.push(check(&format!("phase-point orthogonality n={n}"), orth, 1e-10, ""));
        out.push(check(&format!("phase-point completeness n={n}"), complete, 1e-10, ""));
    }
    let herm = ops.iter().map(hermiticity_defect).fold(0.0, f64::max);
    out.push(check("phase-point hermiticity", herm, 1e-12, ""));
    let (z, x) = (clock(q), shift(q));
    let comm = max_abs(&(&z * &x - &x * &z * q.omega()));
    out.push(check("clock-shift commutation", comm, 1e-12, "ZX = ωXZ"));
}

fn hudson_checks(q: PrimeDim, opts: &SelfTestOptions, out: &mut Vec<CheckResult>) -> Result<()> {
    for n in 1..=2 {
        let states = stabilizer_states(q, n)?;
        let (mut worst_neg, mut worst_mana) = (0.0f64, 0.0f64);
        for s in &states {
            let rep = mana_of(&DensityMatrix::from_pure(q, s)?)?;
            worst_neg = worst_neg.max(-rep.min_w);
            worst_mana = worst_mana.max(rep.mana);
        }
        out.push(check(&format!("stabilizer W ≥ 0 n={n}"), worst_neg, 1e-12, format!("{} states", states.len())));
        out.push(check(&format!("stabilizer mana = 0 n={n}"), worst_mana, 1e-10, ""));
    }
    let mut r = rng(opts.seed);
    let mut positive = 0usize;
    for _ in 0..opts.random_states {
        let psi = random_state(&mut r, q.get());
        if wigner_of(&DensityMatrix::from_pure(q, &psi)?)?.min() >= 0.0 {
            positive += 1;
        }
    }
    out.push(check("random pure states negative", positive as f64, 0.0, format!("{} states, count of W ≥ 0", opts.random_states)));
    Ok(())
}

fn additivity_check(q: PrimeDim, opts: &SelfTestOptions, out: &mut Vec<CheckResult>) -> Result<()> {
    let mut r = rng(opts.seed.wrapping_add(1));
    let mut worst: f64 = 0.0;
    let pairs = (opts.random_states / 4).max(1);
    for _ in 0..pairs {
        let (ra, rb) = (1 + r.random_range(0..3), 1 + r.random_range(0..3));
        let a = DensityMatrix::new(q, random_density(&mut r, q.get(), ra))?;
        let b = DensityMatrix::new(q, random_density(&mut r, q.get(), rb))?;
        let joint = mana_of(&a.tensor(&b)?)?.mana;
        worst = worst.max((joint - mana_of(&a)?.mana - mana_of(&b)?.mana).abs());
    }
    out.push(check("mana additivity", worst, 1e-10, format!("{pairs} pairs")));
    Ok(())
}

fn mera_check(out: &mut Vec<CheckResult>) -> Result<()> {
    let mut mismatched = 0usize;
    for k in 1..=SELFTEST_MERA_MAX_K {
        if mera_graph_oracle(k)? != domain_counts(k) {
            mismatched += 1;
        }
    }
    out.push(check("MERA closed forms vs oracle", mismatched as f64, 0.0, format!("k = 1..{SELFTEST_MERA_MAX_K}")));
    Ok(())
}

fn meanfield_check(out: &mut Vec<CheckResult>) -> Result<()> {
    let mut worst: f64 = 0.0;
    for q in [2usize, 3, 5, 7, 11] {
        for i in 0..=50 {
            let alpha = i as f64 / 50.0;
            let phi = ansatz_state(alpha, q)?;
            let z: f64 = (0..q).map(|j| phi[j].norm_sqr() * (2.0 * std::f64::consts::PI * j as f64 / q as f64).cos()).sum();
            let x: f64 = (0..q).map(|j| (phi[(j + 1) % q].conj() * phi[j]).re).sum();
            let (za, xa) = expectations(alpha, q);
            worst = worst.max((z - za).abs()).max((x - xa).abs());
        }
    }
    out.push(check("mean-field formulas vs ansatz", worst, 1e-12, "q = 2,3,5,7,11"));
    Ok(())
}

pub fn run_selftest(opts: &SelfTestOptions) -> Result<SelfTestReport> {
    let q = PrimeDim::QUTRIT;
    let mut checks = Vec::new();
    algebra_checks(q, opts.fault, &mut checks);
    hudson_checks(q, opts, &mut checks)?;
    additivity_check(q, opts, &mut checks)?;
    mera_check(&mut checks)?;
    meanfield_check(&mut checks)?;
    Ok(SelfTestReport { seed: opts.seed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let rep = run_selftest(&SelfTestOptions::default()).unwrap();
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn corrupted_table_fails_orthogonality() {
        let opts = SelfTestOptions { fault: Some(Fault::PerturbPhasePoint { digit: 4, eps: 1e-6 }), ..Default::default() };
        let rep = run_selftest(&opts).unwrap();
        assert!(!rep.passed());
        let names: Vec<_> = rep.failures().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"phase-point orthogonality n=1"), "{names:?}");
        assert!(rep.to_string().contains("[FAIL] phase-point orthogonality n=1"));
    }

    #[test]
    fn report_is_deterministic() {
        let opts = SelfTestOptions { random_states: 40, ..Default::default() };
        let a = run_selftest(&opts).unwrap();
        let b = run_selftest(&opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), b.to_string());
    }
}
