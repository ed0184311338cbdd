//! Experiment drivers: subsystem mana scans, two-point connected mana, the
//! two-site toy model with its sudden death of magic, and small exact sweeps.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mps::{
    rdm, sliding_pair_rdms, symmetrize_rdm, wigner_of_mps_rdm, CacheKey, DmrgConfig, GroundStateCache, MpsState,
    SubsystemSpec,
};
use crate::potts::{cos_diag, dmrg_ground_state, exact_ground_state, PottsParams, Q};
use crate::qudit::{DenseOperator, DenseState, PrimeDim, C64};
use crate::wigner::{mana, mana_of, wigner_of, DensityMatrix};

/// Mana below this is treated as exactly zero (sudden death detection).
pub const ZERO_MANA_TOL: f64 = 1e-12;

/// How the symmetric ground state is formed from the symmetry-broken one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrization {
    /// Coherent superposition of the three shifted copies.
    #[default]
    Cat,
    /// Equal-weight mixture, applied to each reduced density matrix.
    Mixture,
}

/// Where ground states come from: the on-disk cache, DMRG, or both.
#[derive(Clone, Debug)]
pub struct GroundStateSource {
    pub dmrg: DmrgConfig,
    pub cache: Option<GroundStateCache>,
    pub allow_compute: bool,
}

impl GroundStateSource {
    pub fn compute_only(dmrg: DmrgConfig) -> Self {
        GroundStateSource { dmrg, cache: None, allow_compute: true }
    }

    pub fn key(&self, p: &PottsParams) -> CacheKey {
        CacheKey { n: p.n, theta: p.theta, lambda: p.lambda, cutoff: self.dmrg.svd_cutoff }
    }

    /// Symmetry-broken ground state and its energy; the flag reports a cache hit.
    pub fn symmetry_broken(&self, p: &PottsParams) -> Result<(f64, MpsState, bool)> {
        let compute = || -> Result<(f64, MpsState)> {
            if !self.allow_compute {
                return Err(Error::MissingGroundState(format!(
                    "potts-magic groundstate --n {} --theta {} --lambda {} --svd-cutoff {:e}",
                    p.n, p.theta, p.lambda, self.dmrg.svd_cutoff
                )));
            }
            let r = dmrg_ground_state(p, &self.dmrg)?;
            Ok((r.energy, r.state))
        };
        match &self.cache {
            Some(c) => {
                let (e, hit) = c.get_or_compute(&self.key(p), compute)?;
                Ok((e.energy, e.state, hit))
            }
            None => {
                let (e, s) = compute()?;
                Ok((e, s, false))
            }
        }
    }

    pub fn cat(&self, p: &PottsParams) -> Result<MpsState> {
        let (_, s, _) = self.symmetry_broken(p)?;
        s.cat_state()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub n: usize,
    pub thetas: Vec<f64>,
    #[serde(default)]
    pub ells: Vec<usize>,
    #[serde(default)]
    pub dxs: Vec<usize>,
    /// First site of block A in two-point scans (0-based); `n / 4` when absent.
    #[serde(default)]
    pub base_site: Option<usize>,
    /// Block size for two-point scans (1 or 2).
    #[serde(default = "one")]
    pub block: usize,
    #[serde(default)]
    pub symmetrization: Symmetrization,
}

fn one() -> usize {
    1
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return invalid("theta grid is empty");
        }
        for &t in &self.thetas {
            PottsParams::new(self.n, t, 0.0)?;
        }
        if self.ells.iter().any(|&l| l == 0 || l > self.n || l > 8) {
            return invalid("subsystem sizes must lie in 1..=min(N, 8)");
        }
        if !(1..=2).contains(&self.block) {
            return invalid("two-point block size must be 1 or 2");
        }
        Ok(())
    }

    pub fn two_point_base(&self) -> usize {
        self.base_site.unwrap_or(self.n / 4)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsystemRow {
    pub theta: f64,
    pub ell: usize,
    pub mana: f64,
    pub mana_density: f64,
}

/// Start of an `ell`-site block centered on the chain.
pub fn centered_start(n: usize, ell: usize) -> usize {
    (n - ell) / 2
}

fn region_mana(mps: &mut MpsState, spec: &SubsystemSpec, mode: Symmetrization, broken: &mut MpsState) -> Result<f64> {
    match mode {
        Symmetrization::Cat => Ok(mana(&wigner_of_mps_rdm(mps, spec)?).mana),
        Symmetrization::Mixture => {
            if spec.n_sites() > 6 {
                return Err(Error::RegionTooLarge("mixture symmetrization is limited to 6 sites".into()));
            }
            Ok(mana_of(&symmetrize_rdm(&rdm(broken, spec)?)?)?.mana)
        }
    }
}

fn states_for(source: &GroundStateSource, p: &PottsParams) -> Result<(MpsState, MpsState)> {
    let (_, broken, _) = source.symmetry_broken(p)?;
    let cat = broken.cat_state()?;
    Ok((cat, broken))
}

/// Mana of centered contiguous blocks for every `(θ, ℓ)` cell.
pub fn subsystem_scan(spec: &ScanSpec, source: &GroundStateSource) -> Result<Vec<SubsystemRow>> {
    spec.validate()?;
    if spec.ells.is_empty() {
        return invalid("subsystem scan needs at least one ell");
    }
    let per_theta: Vec<Vec<SubsystemRow>> = spec
        .thetas
        .par_iter()
        .map(|&theta| {
            let p = PottsParams::new(spec.n, theta, 0.0)?;
            let (mut cat, mut broken) = states_for(source, &p)?;
            spec.ells
                .iter()
                .map(|&ell| {
                    let region = SubsystemSpec::contiguous(centered_start(spec.n, ell), ell)?;
                    let m = region_mana(&mut cat, &region, spec.symmetrization, &mut broken)?;
                    Ok(SubsystemRow { theta, ell, mana: m, mana_density: m / ell as f64 })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_theta.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoPointRow {
    pub theta: f64,
    pub dx: usize,
    pub mcc: f64,
    pub dead: bool,
}

/// Connected mana `m_cc(δx)` of two equal blocks, `A` fixed at the base site
/// and `B` starting `δx` sites to the right.
pub fn twopoint_scan(spec: &ScanSpec, source: &GroundStateSource) -> Result<Vec<TwoPointRow>> {
    spec.validate()?;
    let l = spec.block;
    let a = spec.two_point_base();
    if spec.dxs.is_empty() {
        return invalid("two-point scan needs at least one dx");
    }
    let dx_min = *spec.dxs.iter().min().expect("non-empty");
    let dx_max = *spec.dxs.iter().max().expect("non-empty");
    if dx_min < l {
        return invalid("dx must be at least the block size");
    }
    if a + dx_max + l > spec.n {
        return invalid("block B runs past the chain end");
    }
    let per_theta: Vec<Vec<TwoPointRow>> = spec
        .thetas
        .par_iter()
        .map(|&theta| {
            let p = PottsParams::new(spec.n, theta, 0.0)?;
            let (mut cat, mut broken) = states_for(source, &p)?;
            twopoint_rows(&mut cat, &mut broken, theta, a, l, &spec.dxs, spec.symmetrization)
        })
        .collect::<Result<_>>()?;
    Ok(per_theta.into_iter().flatten().collect())
}

/// Connected mana rows for one state; `dxs` need not be contiguous.
pub fn twopoint_rows(
    cat: &mut MpsState,
    broken: &mut MpsState,
    theta: f64,
    a: usize,
    l: usize,
    dxs: &[usize],
    mode: Symmetrization,
) -> Result<Vec<TwoPointRow>> {
    let dx_min = *dxs.iter().min().expect("non-empty");
    let dx_max = *dxs.iter().max().expect("non-empty");
    let (state, symmetrize): (&mut MpsState, bool) = match mode {
        Symmetrization::Cat => (cat, false),
        Symmetrization::Mixture => (broken, true),
    };
    let fix = |rho: DensityMatrix| if symmetrize { symmetrize_rdm(&rho) } else { Ok(rho) };
    let block_density = |st: &mut MpsState, start: usize| -> Result<f64> {
        let rho = fix(rdm(st, &SubsystemSpec::contiguous(start, l)?)?)?;
        Ok(mana_of(&rho)?.mana_density)
    };
    let m_a = block_density(state, a)?;
    let pairs = sliding_pair_rdms(state, a, l, l, dx_min, dx_max)?;
    let mut rows = Vec::with_capacity(dxs.len());
    for (dx, rho_ab) in pairs {
        if !dxs.contains(&dx) {
            continue;
        }
        let m_ab = mana_of(&fix(rho_ab)?)?.mana_density;
        let m_b = block_density(state, a + dx)?;
        let mcc = m_ab - 0.5 * (m_a + m_b);
        rows.push(TwoPointRow { theta, dx, mcc, dead: mcc.abs() < ZERO_MANA_TOL });
    }
    Ok(rows)
}

/// First separation at which `m_cc` is numerically zero, per `θ`.
pub fn sudden_death_distance(rows: &[TwoPointRow], theta: f64) -> Option<usize> {
    rows.iter().filter(|r| r.theta == theta && r.dead).map(|r| r.dx).min()
}

/// Mana density of a full exact ground state for each `θ` (the symmetric
/// sector is used, so ordered-phase states are cat states).
pub fn exact_mana_sweep(n: usize, thetas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if n > 6 {
        return invalid("exact mana sweep is limited to 6 sites");
    }
    thetas
        .par_iter()
        .map(|&theta| {
            let g = exact_ground_state(&PottsParams::new(n, theta, 0.0)?, true)?;
            let rho = DensityMatrix::from_pure(PrimeDim::QUTRIT, &g.state)?;
            Ok((theta, mana(&wigner_of(&rho)?).mana_density))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldRow {
    pub lambda: f64,
    pub energy: f64,
    pub mid_entropy: f64,
    /// Chain average of `<Z + Z†>`.
    pub z_field: f64,
}

/// Ground-state response to a small longitudinal field.
pub fn field_sweep(n: usize, theta: f64, lambdas: &[f64], cfg: &DmrgConfig) -> Result<Vec<FieldRow>> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let p = PottsParams::new(n, theta, lambda)?;
            let r = dmrg_ground_state(&p, cfg)?;
            let mut st = r.state;
            let mid_entropy = st.bond_entropy(n / 2 - 1)?;
            let c2: Vec<f64> = cos_diag().iter().map(|c| 2.0 * c).collect();
            let mut z = 0.0;
            for i in 0..n {
                z += st.expect_diag(i, &c2)?;
            }
            Ok(FieldRow { lambda, energy: r.energy, mid_entropy, z_field: z / n as f64 })
        })
        .collect()
}

/// The two-site magic state `(2|00> − |11> − |22>)/√6`.
pub fn n2_state() -> DenseState {
    let mut v = DenseState::zeros(Q * Q);
    let s = 6f64.sqrt();
    v[0] = C64::new(2.0 / s, 0.0);
    v[4] = C64::new(-1.0 / s, 0.0);
    v[8] = C64::new(-1.0 / s, 0.0);
    v
}

#[derive(Clone, Debug)]
pub struct ToyModel {
    pub alpha: f64,
    pub rho1: DensityMatrix,
}

/// `(1 − α) ρ₁ ⊗ ρ₁ + α |N₂><N₂|`.
pub fn toy_density(t: &ToyModel) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&t.alpha) {
        return invalid(format!("alpha = {} outside [0, 1]", t.alpha));
    }
    if t.rho1.n_sites() != 1 || t.rho1.q().get() != Q {
        return invalid("toy model needs a one-qutrit rho1");
    }
    let prod = t.rho1.tensor(&t.rho1)?;
    let n2 = n2_state();
    let pure: DenseOperator = &n2 * n2.adjoint();
    let mat = prod.matrix() * C64::new(1.0 - t.alpha, 0.0) + pure * C64::new(t.alpha, 0.0);
    DensityMatrix::new(PrimeDim::QUTRIT, mat)
}

pub fn toy_mana(alpha: f64, rho1: &DensityMatrix) -> Result<f64> {
    Ok(mana_of(&toy_density(&ToyModel { alpha, rho1: rho1.clone() })?)?.mana)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuddenDeath {
    /// Boundary of the zero-mana window.
    pub alpha0: f64,
    pub bracket: (f64, f64),
}

/// Bisection for the edge of `{α : mana(ρ_toy(α)) = 0}`.
pub fn sudden_death_alpha(rho1: &DensityMatrix, width: f64) -> Result<SuddenDeath> {
    let magical = |a: f64| -> Result<bool> { Ok(toy_mana(a, rho1)? > ZERO_MANA_TOL) };
    if magical(0.0)? {
        return Ok(SuddenDeath { alpha0: 0.0, bracket: (0.0, 0.0) });
    }
    if !magical(1.0)? {
        return Err(Error::Numerical("toy model has no magic even at alpha = 1".into()));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if magical(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SuddenDeath { alpha0: 0.5 * (lo + hi), bracket: (lo, hi) })
}

/// Phenomenological profiles of the toy-model weight `α(δx)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaFit {
    pub b: f64,
    pub c: f64,
    pub xi: f64,
    pub two_delta: f64,
}

impl Default for AlphaFit {
    fn default() -> Self {
        AlphaFit { b: 0.0, c: 1.0, xi: 1.0, two_delta: 4.0 / 15.0 }
    }
}

/// `b + c e^{−δx/ξ}` above the critical point, `δx^{−2Δ}` at it, `e^{−δx/ξ}` below.
pub fn alpha_profile(theta: f64, dx: f64, fit: &AlphaFit) -> f64 {
    const EDGE: f64 = 1e-12;
    if (theta - FRAC_PI_4).abs() <= EDGE {
        dx.powf(-fit.two_delta)
    } else if theta > FRAC_PI_4 {
        fit.b + fit.c * (-dx / fit.xi).exp()
    } else {
        (-dx / fit.xi).exp()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("slope fit needs at least two matching points");
    }
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return invalid("log-log fit needs positive data");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    Ok(linear_fit(&lx, &ly).0)
}

/// `(slope, intercept)` of an ordinary least-squares line.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Central charge from open-chain midpoint entropies, `S = a + (c/6) ln N`.
pub fn fit_central_charge(ns: &[usize], entropies: &[f64]) -> Result<f64> {
    if ns.len() != entropies.len() || ns.len() < 2 {
        return invalid("central-charge fit needs at least two chain lengths");
    }
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    Ok(6.0 * linear_fit(&lx, entropies).0)
}

pub fn write_subsystem_csv(rows: &[SubsystemRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "theta,ell,mana,mana_density")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.theta, r.ell, r.mana, r.mana_density)?;
    }
    Ok(())
}

pub fn write_twopoint_csv(rows: &[TwoPointRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "theta,dx,mcc,dead")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.theta, r.dx, r.mcc, r.dead)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const N2_MANA: f64 = 0.510_825_623_765_991_5;
    const ALPHA0_MAXIMALLY_MIXED: f64 = 0.181_818_181_818_181_66;

    fn mixed1() -> DensityMatrix {
        DensityMatrix::maximally_mixed(PrimeDim::QUTRIT, 1)
    }

    #[test]
    fn toy_endpoints() {
        let rho1 = mixed1();
        let t0 = toy_density(&ToyModel { alpha: 0.0, rho1: rho1.clone() }).unwrap();
        assert!(mana_of(&t0).unwrap().mana.abs() < 1e-12);
        assert!((toy_mana(1.0, &rho1).unwrap() - N2_MANA).abs() < 1e-10);
        for a in [0.0, 0.3, 0.7, 1.0] {
            let t = toy_density(&ToyModel { alpha: a, rho1: rho1.clone() }).unwrap();
            assert!((t.matrix().trace().re - 1.0).abs() < 1e-12);
        }
        assert!(toy_density(&ToyModel { alpha: 1.5, rho1 }).is_err());
    }

    #[test]
    fn sudden_death_matches_oracle() {
        let rho1 = mixed1();
        let sd = sudden_death_alpha(&rho1, 1e-7).unwrap();
        assert!(sd.bracket.1 - sd.bracket.0 < 1e-6);
        assert!((sd.alpha0 - ALPHA0_MAXIMALLY_MIXED).abs() < 1e-6);
        let mut prev = 0.0;
        for i in 0..=40 {
            let a = i as f64 / 40.0;
            let m = toy_mana(a, &rho1).unwrap();
            if a < sd.bracket.0 {
                assert!(m < ZERO_MANA_TOL);
            }
            assert!(m >= prev - 1e-12);
            prev = m;
        }
    }

    #[test]
    fn magical_rho1_has_no_death_window() {
        let q = PrimeDim::QUTRIT;
        let t = crate::qudit::stabilizer::t_state(q).unwrap();
        let rho1 = DensityMatrix::from_pure(q, &t).unwrap();
        assert_eq!(sudden_death_alpha(&rho1, 1e-6).unwrap().alpha0, 0.0);
    }

    #[test]
    fn alpha_profile_regimes() {
        let fit = AlphaFit { b: 0.2, c: 0.5, xi: 3.0, two_delta: 4.0 / 15.0 };
        assert_eq!(alpha_profile(FRAC_PI_4, 1.0, &fit), 1.0);
        assert!(alpha_profile(0.5, 400.0, &fit) < 1e-50);
        assert!((alpha_profile(1.0, 400.0, &fit) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn exact_sweep_endpoints_vanish() {
        let rows = exact_mana_sweep(4, &[0.0, 0.3 * PI, FRAC_PI_2]).unwrap();
        assert!(rows[0].1.abs() < 1e-10);
        assert!(rows[1].1 > 0.1);
        assert!(rows[2].1.abs() < 1e-10);
    }

    #[test]
    fn fits_recover_exact_parameters() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.4)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 0.4).abs() < 1e-12);
        let ns = [16, 32, 64];
        let s: Vec<f64> = ns.iter().map(|&n| 0.3 + 0.8 / 6.0 * (n as f64).ln()).collect();
        assert!((fit_central_charge(&ns, &s).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn small_scans_run() {
        let cfg = DmrgConfig { max_bond: 32, ..DmrgConfig::default() };
        let source = GroundStateSource::compute_only(cfg);
        let spec = ScanSpec {
            n: 8,
            thetas: vec![0.0, 0.3 * PI],
            ells: vec![1, 2],
            dxs: vec![1, 2, 3],
            base_site: Some(1),
            block: 1,
            symmetrization: Symmetrization::Cat,
        };
        let rows = subsystem_scan(&spec, &source).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().filter(|r| r.ell == 1).all(|r| r.mana.abs() < 1e-8));
        let tp = twopoint_scan(&spec, &source).unwrap();
        assert_eq!(tp.len(), 6);
        assert!(tp.iter().filter(|r| r.theta == 0.0).all(|r| r.dead));
        let mut buf = Vec::new();
        write_twopoint_csv(&tp, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("theta,dx,mcc,dead\n"));
    }

    #[test]
    fn missing_cache_names_the_command() {
        let dir = tempfile::tempdir().unwrap();
        let source = GroundStateSource {
            dmrg: DmrgConfig::default(),
            cache: Some(GroundStateCache::new(dir.path())),
            allow_compute: false,
        };
        let err = source.cat(&PottsParams::new(6, 0.2, 0.0).unwrap()).unwrap_err();
        assert!(err.to_string().contains("potts-magic groundstate --n 6"));
    }
}
