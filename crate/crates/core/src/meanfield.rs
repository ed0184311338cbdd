//! Product-state mean-field theory of the `q`-state Potts model on a
//! degree-`k` regular graph, with one variational parameter `α`.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qudit::{DenseState, PhaseSpace, PrimeDim, C64};
use crate::wigner::{mana, wigner_with, DensityMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFieldConfig {
    pub q: usize,
    pub k: usize,
    pub thetas: Vec<f64>,
    /// Spacing of the initial α grid.
    pub alpha_resolution: f64,
    /// Width at which golden-section refinement stops.
    pub refine_tol: f64,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        MeanFieldConfig {
            q: 3,
            k: 2,
            thetas: (0..=100).map(|i| i as f64 * FRAC_PI_2 / 100.0).collect(),
            alpha_resolution: 1e-4,
            refine_tol: 1e-10,
        }
    }
}

impl MeanFieldConfig {
    pub fn validate(&self) -> Result<()> {
        check_qk(self.q, self.k)?;
        if self.thetas.is_empty() || self.thetas.iter().any(|t| !(0.0..=FRAC_PI_2 + 1e-12).contains(t)) {
            return invalid("theta grid must be non-empty and inside [0, π/2]");
        }
        if !(self.alpha_resolution > 0.0 && self.alpha_resolution <= 0.1) || !(self.refine_tol > 0.0) {
            return invalid("alpha resolution must be in (0, 0.1] and refine_tol positive");
        }
        Ok(())
    }
}

fn check_qk(q: usize, k: usize) -> Result<()> {
    if q < 2 || k < 1 {
        return invalid(format!("need q ≥ 2 and k ≥ 1, got q = {q}, k = {k}"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return invalid(format!("alpha = {alpha} outside [0, 1]"));
    }
    Ok(())
}

/// `|φ> = α|Z=1> + √(1−α²)|⊥>` with `|⊥> = (√q|X=1> − |Z=1>)/√(q−1)`.
pub fn ansatz_state(alpha: f64, q: usize) -> Result<DenseState> {
    check_alpha(alpha)?;
    check_qk(q, 1)?;
    let beta = (1.0 - alpha * alpha).max(0.0).sqrt();
    let rest = beta / ((q - 1) as f64).sqrt();
    Ok(DenseState::from_fn(q, |i, _| C64::new(if i == 0 { alpha } else { rest }, 0.0)))
}

/// `(⟨Z⟩, ⟨X⟩)` on the ansatz: `⟨Z⟩ = (qα² − 1)/(q − 1)` is the real part of the
/// clock expectation and `⟨X⟩ = 2α√(1−α²)/√(q−1) + (1−α²)(q−2)/(q−1)`.
pub fn expectations(alpha: f64, q: usize) -> (f64, f64) {
    let qf = q as f64;
    let a2 = alpha * alpha;
    let z = (qf * a2 - 1.0) / (qf - 1.0);
    let x = 2.0 * alpha * (1.0 - a2).max(0.0).sqrt() / (qf - 1.0).sqrt() + (1.0 - a2) * (qf - 2.0) / (qf - 1.0);
    (z, x)
}

/// `−k sin θ ⟨Z⟩² − 2 cos θ ⟨X⟩`.
pub fn energy_per_vertex(alpha: f64, theta: f64, q: usize, k: usize) -> f64 {
    let (z, x) = expectations(alpha, q);
    -(k as f64) * theta.sin() * z * z - 2.0 * theta.cos() * x
}

/// Paramagnetic optimum `α = q^{−1/2}`.
pub fn paramagnetic_alpha(q: usize) -> f64 {
    1.0 / (q as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFieldPoint {
    pub theta: f64,
    pub alpha_star: f64,
    pub z_expect: f64,
    pub x_expect: f64,
    pub energy_per_vertex: f64,
    /// Present when `q` is an odd prime.
    pub mana_per_vertex: Option<f64>,
    /// Another grid basin reached the same energy; the larger α was kept.
    pub tie: bool,
}

const ENERGY_TIE: f64 = 1e-12;

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        // ties move right, favouring larger α
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Global minimizer of the energy over `α ∈ [0, 1]`: grid, then golden
/// section around the best grid point. The analytic stationary points
/// `q^{−1/2}` and `1` are adopted when they are the same basin and no worse.
pub fn optimize_alpha(theta: f64, q: usize, k: usize, resolution: f64, tol: f64) -> Result<(f64, bool)> {
    check_qk(q, k)?;
    let e = |a: f64| energy_per_vertex(a, theta, q, k);
    let steps = (1.0 / resolution).ceil() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * resolution).min(1.0)).collect();
    let energies: Vec<f64> = grid.iter().map(|&a| e(a)).collect();
    let mut best = 0;
    for (i, &en) in energies.iter().enumerate() {
        if en <= energies[best] {
            best = i;
        }
    }
    let tie = energies
        .iter()
        .enumerate()
        .any(|(i, &en)| i + 1 < best && (en - energies[best]).abs() <= ENERGY_TIE && is_local_min(&energies, i));
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(steps)];
    let mut alpha = golden_section(e, lo, hi, tol);
    if e(grid[best]) < e(alpha) {
        alpha = grid[best];
    }
    for anchor in [paramagnetic_alpha(q), 1.0] {
        if (anchor - alpha).abs() <= 2.0 * resolution && e(anchor) <= e(alpha) + ENERGY_TIE {
            alpha = anchor;
        }
    }
    Ok((alpha, tie))
}

fn is_local_min(e: &[f64], i: usize) -> bool {
    let left = i == 0 || e[i] <= e[i - 1];
    let right = i + 1 == e.len() || e[i] <= e[i + 1];
    left && right
}

/// Mana of the single-site state `|φ(α)>` (per vertex by additivity).
pub fn meanfield_mana(alpha: f64, ps: &PhaseSpace) -> Result<f64> {
    let q = ps.dim();
    let phi = ansatz_state(alpha, q.get())?;
    let rho = DensityMatrix::from_pure(q, &phi)?;
    Ok(mana(&wigner_with(ps, &rho)?).mana)
}

pub fn meanfield_point(theta: f64, cfg: &MeanFieldConfig, ps: Option<&PhaseSpace>) -> Result<MeanFieldPoint> {
    let (alpha, tie) = optimize_alpha(theta, cfg.q, cfg.k, cfg.alpha_resolution, cfg.refine_tol)?;
    let (z, x) = expectations(alpha, cfg.q);
    let mana_per_vertex = ps.map(|ps| meanfield_mana(alpha, ps)).transpose()?;
    Ok(MeanFieldPoint {
        theta,
        alpha_star: alpha,
        z_expect: z,
        x_expect: x,
        energy_per_vertex: energy_per_vertex(alpha, theta, cfg.q, cfg.k),
        mana_per_vertex,
        tie,
    })
}

/// The phase-point operators for `q`, or `None` when `q` is not an odd prime.
pub fn phase_space_for(q: usize) -> Option<PhaseSpace> {
    PrimeDim::new(q).ok().map(PhaseSpace::new)
}

pub fn meanfield_scan(cfg: &MeanFieldConfig) -> Result<Vec<MeanFieldPoint>> {
    cfg.validate()?;
    let ps = phase_space_for(cfg.q);
    cfg.thetas.par_iter().map(|&t| meanfield_point(t, cfg, ps.as_ref())).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionOrder {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transition {
    pub q: usize,
    pub k: usize,
    pub theta_c: f64,
    pub order: TransitionOrder,
    /// `⟨Z⟩` just above minus just below the refined `θ_c`.
    pub jump: f64,
}

/// Order parameter above which a point counts as ferromagnetic.
const ONSET: f64 = 1e-6;
/// Jump in `⟨Z⟩` separating first from second order.
pub const FIRST_ORDER_JUMP: f64 = 1e-3;

/// Onset of `⟨Z⟩ > 0`: scan `θ` at `step`, then bisect the bracketing interval.
pub fn transition_theta(q: usize, k: usize, step: f64) -> Result<Transition> {
    check_qk(q, k)?;
    let cfg = MeanFieldConfig { q, k, thetas: vec![], ..MeanFieldConfig::default() };
    let z_at = |t: f64| -> Result<f64> {
        let (a, _) = optimize_alpha(t, q, k, cfg.alpha_resolution, cfg.refine_tol)?;
        // q = 2 has a degenerate ±Z pair, so track the magnitude
        Ok(expectations(a, q).0.abs())
    };
    let n = (FRAC_PI_2 / step).floor() as usize;
    let thetas: Vec<f64> = (1..n).map(|i| i as f64 * step).collect();
    let zs: Vec<f64> = thetas.par_iter().map(|&t| z_at(t)).collect::<Result<_>>()?;
    let first = zs
        .iter()
        .position(|&z| z > ONSET)
        .ok_or_else(|| Error::Numerical(format!("no mean-field transition found for q = {q}, k = {k}")))?;
    if first == 0 {
        return Err(Error::Numerical("order parameter already nonzero at the first grid point".into()));
    }
    let (mut lo, mut hi) = (thetas[first - 1], thetas[first]);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if z_at(mid)? > ONSET {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let jump = z_at(hi)? - z_at(lo)?;
    let order = if jump > FIRST_ORDER_JUMP { TransitionOrder::First } else { TransitionOrder::Second };
    Ok(Transition { q, k, theta_c: 0.5 * (lo + hi), order, jump })
}

/// `arccot(k/2)`, the `q → ∞` limit of the transition.
pub fn large_q_theta_c(k: usize) -> f64 {
    (2.0 / k as f64).atan()
}

pub fn write_meanfield_csv(points: &[MeanFieldPoint], mut out: impl Write) -> Result<()> {
    writeln!(out, "theta,alpha_star,z_expect,x_expect,energy,mana_per_vertex")?;
    for p in points {
        let m = p.mana_per_vertex.map_or(String::new(), |m| m.to_string());
        writeln!(out, "{},{},{},{},{},{}", p.theta, p.alpha_star, p.z_expect, p.x_expect, p.energy_per_vertex, m)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{clock, shift};

    fn direct(alpha: f64, q: usize) -> (f64, f64) {
        let phi = ansatz_state(alpha, q).unwrap();
        let zc = clock_any(q);
        let x = shift_any(q);
        let z = (phi.adjoint() * &zc * &phi)[(0, 0)].re;
        let xv = (phi.adjoint() * &x * &phi)[(0, 0)].re;
        (z, xv)
    }

    fn clock_any(q: usize) -> crate::qudit::DenseOperator {
        match PrimeDim::new(q) {
            Ok(p) => clock(p),
            Err(_) => crate::qudit::DenseOperator::from_fn(q, q, |i, j| {
                if i == j {
                    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / q as f64)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }

    fn shift_any(q: usize) -> crate::qudit::DenseOperator {
        match PrimeDim::new(q) {
            Ok(p) => shift(p),
            Err(_) => crate::qudit::DenseOperator::from_fn(q, q, |i, j| C64::new(if i == (j + 1) % q { 1.0 } else { 0.0 }, 0.0)),
        }
    }

    #[test]
    fn formulas_match_direct_evaluation() {
        for q in [2, 3, 4, 5, 7, 11] {
            for i in 0..=20 {
                let a = i as f64 / 20.0;
                let (z, x) = expectations(a, q);
                let (zd, xd) = direct(a, q);
                assert!((z - zd).abs() < 1e-12 && (x - xd).abs() < 1e-12, "q={q} a={a}");
                let n = ansatz_state(a, q).unwrap().norm();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn special_points() {
        for q in [3, 5, 7] {
            let ap = paramagnetic_alpha(q);
            let phi = ansatz_state(ap, q).unwrap();
            let uniform = 1.0 / (q as f64).sqrt();
            assert!(phi.iter().all(|z| (z.re - uniform).abs() < 1e-12));
            assert!(expectations(ap, q).0.abs() < 1e-12);
            assert_eq!(expectations(1.0, q), (1.0, 0.0));
            let th = 0.4;
            assert!((energy_per_vertex(ap, th, q, 2) + 2.0 * th.cos()).abs() < 1e-12);
            assert!((energy_per_vertex(1.0, th, q, 2) + 2.0 * th.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_zero_is_paramagnetic_with_zero_mana() {
        let cfg = MeanFieldConfig { q: 3, k: 2, thetas: vec![0.0, 0.1], ..MeanFieldConfig::default() };
        for p in meanfield_scan(&cfg).unwrap() {
            assert_eq!(p.alpha_star, paramagnetic_alpha(3));
            assert!(p.mana_per_vertex.unwrap() < 1e-12);
        }
    }

    #[test]
    fn deep_ferromagnet_large_q() {
        let (q, k, th) = (37, 2, 1.4f64);
        let (a, _) = optimize_alpha(th, q, k, 1e-4, 1e-12).unwrap();
        let approx = 1.0 - (1.0 / th.tan()).powi(2) / (2.0 * q as f64 * (k * k) as f64);
        assert!((a - approx).abs() < 1.0 / (q * q) as f64, "{a} vs {approx}");
    }

    #[test]
    fn transition_orders() {
        let t2 = transition_theta(2, 2, 1e-3).unwrap();
        assert_eq!(t2.order, TransitionOrder::Second);
        assert!((t2.theta_c - 0.5f64.atan()).abs() < 1e-6);
        let t5 = transition_theta(5, 2, 1e-3).unwrap();
        assert_eq!(t5.order, TransitionOrder::First);
        assert!(t5.jump > 0.3);
    }

    /// `θ_c` at `k = 2` from an independent grid + Brent solve of the
    /// ferromagnetic/paramagnetic energy crossing.
    const THETA_C_K2: [(usize, f64); 5] = [
        (3, 0.588_002_603_547_567_1),
        (5, 0.674_740_942_223_552_5),
        (7, 0.708_626_272_127_670_3),
        (11, 0.737_815_060_120_464_3),
        (37, 0.771_700_390_024_582_7),
    ];

    #[test]
    fn transition_points_match_reference() {
        for (q, tc) in THETA_C_K2 {
            let t = transition_theta(q, 2, 1e-3).unwrap();
            assert_eq!(t.order, TransitionOrder::First, "q = {q}");
            assert!((t.theta_c - tc).abs() < 1e-7, "q = {q}: {} vs {tc}", t.theta_c);
        }
    }

    #[test]
    fn non_prime_q_has_no_mana() {
        let cfg = MeanFieldConfig { q: 4, k: 2, thetas: vec![1.0], ..MeanFieldConfig::default() };
        assert!(meanfield_scan(&cfg).unwrap()[0].mana_per_vertex.is_none());
    }
}
