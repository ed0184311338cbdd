//! Binary MERA accounting: tensor counts in past domains of dependence, the
//! resulting mana-density predictions, and descending superoperators.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qudit::{DenseOperator, PhasePoint, PhaseSpace, PrimeDim, C64};
use crate::wigner::{density_from_wigner, mana_of, phase_space_coefficients, DensityMatrix, WignerTable};

/// Largest layer-pair index for the explicit graph construction.
pub const ORACLE_MAX_K: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeraCount {
    pub k: usize,
    /// Isometries in layer `2k − 1` (zero for `k = 0`).
    pub n_tri: u64,
    /// Disentanglers in layer `2k`.
    pub n_sq: u64,
    pub ell: u64,
}

/// Closed-form counts after `k` isometry/disentangler layer pairs.
pub fn domain_counts(k: usize) -> MeraCount {
    let p = 1u64 << (k + 1);
    MeraCount { k, n_tri: p - 2, n_sq: p - 1, ell: 2 * (p - 1) }
}

/// Region size printed in the construction figure's caption, `2^{2k+2} − 2`.
/// It agrees with the recursion only at `k = 0`.
pub fn caption_ell(k: usize) -> u64 {
    (1u64 << (2 * k + 2)) - 2
}

/// Totals over all layers up to `2k`: `(disentanglers, isometries)`.
pub fn cumulative_counts(k: usize) -> (u64, u64) {
    (0..=k).fold((0, 0), |(s, t), j| {
        let c = domain_counts(j);
        (s + c.n_sq, t + c.n_tri)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Disentangler,
    Isometry,
}

/// Explicit top-down MERA circuit: each tensor lists the tensors consuming its output wires.
struct MeraGraph {
    kinds: Vec<Kind>,
    children: Vec<Vec<usize>>,
    /// Output wires of the final disentangler layer, keyed by (tensor, leg).
    top: usize,
}

/// Build `levels + 1` disentangler layers separated by isometry layers on a
/// periodic line that is wide enough never to wrap around the expanding region.
///
/// At each scale, disentanglers act on wire pairs `(2i + 1, 2i + 2)`; an
/// isometry takes wire `i` of one scale to wires `(2i, 2i + 1)` of the next.
fn build_graph(levels: usize) -> MeraGraph {
    let mut kinds = Vec::new();
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut width = 8usize;
    // producer[i] = tensor whose output feeds wire i at the current stage (None for free inputs)
    let mut producer: Vec<Option<usize>> = vec![None; width];
    let new_tensor = |kinds: &mut Vec<Kind>, children: &mut Vec<Vec<usize>>, kind: Kind| {
        kinds.push(kind);
        children.push(Vec::new());
        kinds.len() - 1
    };
    let mut top = usize::MAX;
    for level in 0..=levels {
        // disentangler layer
        let mut next = vec![None; width];
        for i in 0..width / 2 {
            let (a, b) = ((2 * i + 1) % width, (2 * i + 2) % width);
            let t = new_tensor(&mut kinds, &mut children, Kind::Disentangler);
            if level == 0 && i == 0 {
                top = t;
            }
            for w in [a, b] {
                if let Some(p) = producer[w] {
                    children[p].push(t);
                }
                next[w] = Some(t);
            }
        }
        producer = next;
        if level == levels {
            break;
        }
        // isometry layer doubling the width
        let mut next = vec![None; 2 * width];
        for (i, prod) in producer.iter().enumerate() {
            let t = new_tensor(&mut kinds, &mut children, Kind::Isometry);
            if let Some(p) = prod {
                children[*p].push(t);
            }
            next[2 * i] = Some(t);
            next[2 * i + 1] = Some(t);
        }
        producer = next;
        width *= 2;
    }
    MeraGraph { kinds, children, top }
}

/// Counts by breadth-first expansion from one top disentangler through the
/// explicit circuit graph, layer by layer.
pub fn mera_graph_oracle(k: usize) -> Result<MeraCount> {
    if k > ORACLE_MAX_K {
        return invalid(format!("graph oracle supports k ≤ {ORACLE_MAX_K}"));
    }
    let g = build_graph(k);
    let mut frontier: BTreeSet<usize> = [g.top].into();
    let mut n_tri = 0u64;
    for _ in 0..k {
        let tri: BTreeSet<usize> = frontier.iter().flat_map(|&t| g.children[t].iter().copied()).collect();
        if tri.iter().any(|&t| g.kinds[t] != Kind::Isometry) {
            return Err(Error::Numerical("MERA layers out of order".into()));
        }
        n_tri = tri.len() as u64;
        frontier = tri.iter().flat_map(|&t| g.children[t].iter().copied()).collect();
        if frontier.iter().any(|&t| g.kinds[t] != Kind::Disentangler) {
            return Err(Error::Numerical("MERA layers out of order".into()));
        }
    }
    // each final disentangler emits two distinct wires
    let ell = 2 * frontier.len() as u64;
    Ok(MeraCount { k, n_tri, n_sq: frontier.len() as u64, ell })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeraManaParams {
    pub m_sq: f64,
    pub m_tri: f64,
    /// Saturation density for the quasi-MERA picture.
    #[serde(default = "default_m_max")]
    pub m_max: f64,
    /// Correlation-length exponent; deliberately has no default.
    #[serde(default)]
    pub nu: Option<f64>,
}

fn default_m_max() -> f64 {
    0.5 * 3f64.ln()
}

impl MeraManaParams {
    pub fn new(m_sq: f64, m_tri: f64) -> Self {
        MeraManaParams { m_sq, m_tri, m_max: default_m_max(), nu: None }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.m_sq, self.m_tri, self.m_max].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("MERA mana parameters must be non-negative");
        }
        if self.m_max > 0.5 * 3f64.ln() + 1e-9 {
            return invalid("m_max exceeds the single-qutrit bound ½ ln 3");
        }
        if let Some(nu) = self.nu {
            if !(nu.is_finite() && nu > 0.0) {
                return invalid("nu must be positive");
            }
        }
        Ok(())
    }
}

/// `m(ℓ) = m_□ + m_△ − ℓ⁻¹ (m_□ + 2 m_△) [log₂((ℓ + 2)/4) + 1]`, clamped at zero.
/// An infinite `ell` returns the asymptote `m_□ + m_△`.
pub fn finite_mana_prediction(ell: f64, p: &MeraManaParams) -> Result<f64> {
    if ell.is_nan() || ell < 2.0 {
        return invalid(format!("ell = {ell} must be at least 2"));
    }
    let asym = p.m_sq + p.m_tri;
    if ell.is_infinite() {
        return Ok(asym);
    }
    let layers = ((ell + 2.0) / 4.0).log2() + 1.0;
    Ok((asym - (p.m_sq + 2.0 * p.m_tri) * layers / ell).max(0.0))
}

/// Mana density from explicit tensor totals at `ℓ^{(2k)}`.
pub fn counted_mana_density(k: usize, p: &MeraManaParams) -> f64 {
    let (sq, tri) = cumulative_counts(k);
    (p.m_sq * sq as f64 + p.m_tri * tri as f64) / domain_counts(k).ell as f64
}

/// `min(m_max, (m_△ + m_□)(1 − |θ − θ_c|^ν))`, clamped at zero, with `θ_c = π/4`.
pub fn quasi_mera_prediction(theta: f64, p: &MeraManaParams) -> Result<f64> {
    if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&theta) {
        return invalid(format!("theta = {theta} outside [0, π/2]"));
    }
    let nu = p.nu.ok_or_else(|| Error::InvalidArgument("quasi-MERA prediction needs an explicit nu".into()))?;
    let raw = (p.m_tri + p.m_sq) * (1.0 - (theta - FRAC_PI_4).abs().powf(nu));
    Ok(raw.min(p.m_max).max(0.0))
}

/// `|1 − θ/θ_c|` at which `ξ ∼ |θ − θ_c|^{−ν}` equals `ell`.
pub fn rounding_scale(ell: f64, nu: f64) -> f64 {
    ell.powf(-1.0 / nu) / FRAC_PI_4
}

/// Least-squares `(m_□, m_△)` for measured densities (ignores the clamp).
pub fn fit_mana_params(ells: &[f64], densities: &[f64]) -> Result<(f64, f64)> {
    if ells.len() != densities.len() || ells.len() < 2 {
        return invalid("fit needs at least two (ell, m) points");
    }
    let a = DMatrix::from_fn(ells.len(), 2, |i, j| {
        let g = ((ells[i] + 2.0) / 4.0).log2() + 1.0;
        if j == 0 {
            1.0 - g / ells[i]
        } else {
            1.0 - 2.0 * g / ells[i]
        }
    });
    let b = DVector::from_column_slice(densities);
    let x = a.svd(true, true).solve(&b, 1e-12).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok((x[0], x[1]))
}

/// A linear map on `n`-qudit operators as a column-stacking superoperator
/// `vec(D[X]) = S vec(X)`, with an optional expected fixed point.
#[derive(Clone, Debug)]
pub struct ChannelSpec {
    pub q: PrimeDim,
    pub n: usize,
    pub superop: DMatrix<C64>,
    pub fixed_point: Option<DensityMatrix>,
}

fn vec_index(dim: usize, i: usize, j: usize) -> usize {
    i + dim * j
}

impl ChannelSpec {
    pub fn from_map(q: PrimeDim, n: usize, f: impl Fn(&DenseOperator) -> DenseOperator) -> Self {
        let dim = q.hilbert_dim(n);
        let mut s = DMatrix::zeros(dim * dim, dim * dim);
        for k in 0..dim {
            for l in 0..dim {
                let mut e = DenseOperator::zeros(dim, dim);
                e[(k, l)] = C64::new(1.0, 0.0);
                let out = f(&e);
                for i in 0..dim {
                    for j in 0..dim {
                        s[(vec_index(dim, i, j), vec_index(dim, k, l))] = out[(i, j)];
                    }
                }
            }
        }
        ChannelSpec { q, n, superop: s, fixed_point: None }
    }

    pub fn from_kraus(q: PrimeDim, n: usize, kraus: &[DenseOperator]) -> Self {
        Self::from_map(q, n, |x| kraus.iter().map(|k| k * x * k.adjoint()).fold(x * C64::new(0.0, 0.0), |a, b| a + b))
    }

    pub fn identity(q: PrimeDim, n: usize) -> Self {
        let d2 = q.hilbert_dim(n).pow(2);
        ChannelSpec { q, n, superop: DMatrix::identity(d2, d2), fixed_point: None }
    }

    /// Global depolarizing toward `ρ₁ ⊗ ρ₁`: `D[X] = (1 − p) X + p Tr(X) ρ₁ ⊗ ρ₁`.
    /// Its subleading eigenvalue is exactly `1 − p`. Illustrative only.
    pub fn depolarizing_to_product(rho1: &DensityMatrix, p: f64) -> Result<Self> {
        check_rate(p)?;
        let sigma = rho1.tensor(rho1)?;
        let sm = sigma.matrix().clone();
        let mut c = Self::from_map(rho1.q(), 2, move |x| x * C64::new(1.0 - p, 0.0) + &sm * (x.trace() * p));
        c.fixed_point = Some(sigma);
        Ok(c)
    }

    /// Product `D_L ⊗ D_R` of one-site depolarizing maps toward `ρ₁`.
    pub fn local_depolarizing(rho1: &DensityMatrix, p: f64) -> Result<Self> {
        check_rate(p)?;
        let q = rho1.q();
        let d = q.get();
        let r = rho1.matrix().clone();
        let one = |x: &DenseOperator| x * C64::new(1.0 - p, 0.0) + &r * (x.trace() * p);
        let mut c = Self::from_map(q, 2, |x| {
            // apply the one-site map on each tensor factor via the operator basis
            let mut out = DenseOperator::zeros(d * d, d * d);
            for a in 0..d {
                for b in 0..d {
                    for cc in 0..d {
                        for e in 0..d {
                            let coeff = x[(a * d + cc, b * d + e)];
                            if coeff == C64::new(0.0, 0.0) {
                                continue;
                            }
                            let mut ea = DenseOperator::zeros(d, d);
                            ea[(a, b)] = C64::new(1.0, 0.0);
                            let mut ec = DenseOperator::zeros(d, d);
                            ec[(cc, e)] = C64::new(1.0, 0.0);
                            out += one(&ea).kronecker(&one(&ec)) * coeff;
                        }
                    }
                }
            }
            out
        });
        c.fixed_point = Some(rho1.tensor(rho1)?);
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.q.hilbert_dim(self.n)
    }

    pub fn apply(&self, x: &DenseOperator) -> DenseOperator {
        let dim = self.dim();
        let v = DVector::from_column_slice(x.as_slice());
        let out = &self.superop * v;
        DenseOperator::from_column_slice(dim, dim, out.as_slice())
    }

    /// Largest `|Σ_i S[(i,i),(k,l)] − δ_kl|`.
    pub fn trace_defect(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for k in 0..dim {
            for l in 0..dim {
                let t: C64 = (0..dim).map(|i| self.superop[(vec_index(dim, i, i), vec_index(dim, k, l))]).sum();
                let target = if k == l { 1.0 } else { 0.0 };
                worst = worst.max((t - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Choi matrix `Σ_{kl} |k><l| ⊗ D(|k><l|)`.
    pub fn choi(&self) -> DenseOperator {
        let dim = self.dim();
        DMatrix::from_fn(dim * dim, dim * dim, |r, c| {
            let (k, i) = (r / dim, r % dim);
            let (l, j) = (c / dim, c % dim);
            self.superop[(vec_index(dim, i, j), vec_index(dim, k, l))]
        })
    }

    pub fn validate(&self) -> Result<()> {
        let td = self.trace_defect();
        if td > 1e-10 {
            return invalid(format!("channel is not trace preserving (defect {td:e})"));
        }
        let choi = self.choi();
        let herm = (&choi - choi.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if herm > 1e-10 {
            return invalid(format!("Choi matrix is not Hermitian (defect {herm:e})"));
        }
        let min = choi.symmetric_eigenvalues().min();
        if min < -1e-9 {
            return invalid(format!("channel is not completely positive (Choi eigenvalue {min:e})"));
        }
        Ok(())
    }

    /// The map in the phase-point basis, `M[u][v] = q^{−n} Tr(A_u D[A_v])`, a real matrix.
    pub fn wigner_matrix(&self) -> Result<DMatrix<f64>> {
        let ps = PhaseSpace::new(self.q);
        let npts = self.q.num_phase_points(self.n);
        let scale = 1.0 / self.dim() as f64;
        let mut m = DMatrix::zeros(npts, npts);
        for v in 0..npts {
            let av = ps.point_operator(&PhasePoint::from_index(self.q, self.n, v));
            let coeffs = phase_space_coefficients(self.q, &self.apply(&av))?;
            for (u, c) in coeffs.iter().enumerate() {
                if c.im.abs() > 1e-9 {
                    return Err(Error::Numerical("channel does not preserve Hermiticity".into()));
                }
                m[(u, v)] = c.re * scale;
            }
        }
        Ok(m)
    }
}

fn check_rate(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("rate p = {p} outside [0, 1]"));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ChannelSpectrum {
    /// `(re, im)` pairs sorted by decreasing modulus.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Largest modulus strictly below one (`1` itself when degenerate).
    pub lambda1: f64,
    pub gap: f64,
    /// `−log₂ λ₁`; infinite when `λ₁ = 0`.
    pub two_delta: f64,
    /// More than one eigenvalue on the unit circle.
    pub degenerate: bool,
    /// `‖ρ* − hint‖_F` when a fixed-point hint was supplied.
    pub fixed_point_error: Option<f64>,
    #[serde(skip)]
    pub fixed_point: Option<DensityMatrix>,
}

const UNIT_TOL: f64 = 1e-8;

pub fn channel_spectrum(c: &ChannelSpec) -> Result<ChannelSpectrum> {
    c.validate()?;
    let m = c.wigner_matrix()?;
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 100_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition of the channel did not converge".into()))?;
    let mut ev: Vec<(f64, f64)> = schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    ev.sort_by(|a, b| b.0.hypot(b.1).total_cmp(&a.0.hypot(a.1)));
    let leading = ev[0].0.hypot(ev[0].1);
    if (leading - 1.0).abs() > UNIT_TOL {
        return Err(Error::Numerical(format!("leading eigenvalue modulus {leading} is not 1")));
    }
    let on_circle = ev.iter().filter(|z| (z.0.hypot(z.1) - 1.0).abs() <= UNIT_TOL).count();
    let degenerate = on_circle > 1;
    let lambda1 = if degenerate { 1.0 } else { ev.get(1).map_or(0.0, |z| z.0.hypot(z.1)) };

    // fixed point: null vector of M − I, normalized to unit trace
    let npts = m.nrows();
    let shifted = &m - DMatrix::<f64>::identity(npts, npts);
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let (imin, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let mut w: Vec<f64> = vt.row(imin).iter().copied().collect();
    let total: f64 = w.iter().sum();
    let fixed_point = if total.abs() > 1e-12 && !degenerate {
        w.iter_mut().for_each(|x| *x /= total);
        let table = WignerTable::from_values(c.q, c.n, w)?;
        Some(DensityMatrix::from_unnormalized(c.q, density_from_wigner(&table))?)
    } else {
        None
    };
    let fixed_point_error = match (&fixed_point, &c.fixed_point) {
        (Some(fp), Some(hint)) => Some((fp.matrix() - hint.matrix()).norm()),
        _ => None,
    };
    if let Some(err) = fixed_point_error {
        if err > 1e-8 {
            return Err(Error::Numerical(format!("fixed point differs from the hint by {err:e}")));
        }
    }
    Ok(ChannelSpectrum {
        eigenvalues: ev,
        lambda1,
        gap: 1.0 - lambda1,
        two_delta: -lambda1.log2(),
        degenerate,
        fixed_point_error,
        fixed_point,
    })
}

/// `D^k[ρ]`, validating the state after every application.
pub fn iterate_channel(c: &ChannelSpec, rho: &DensityMatrix, k: usize) -> Result<DensityMatrix> {
    if rho.q() != c.q || rho.n_sites() != c.n {
        return invalid("state and channel registers differ");
    }
    let mut cur = rho.clone();
    for _ in 0..k {
        cur = DensityMatrix::new(c.q, c.apply(cur.matrix()))?;
    }
    Ok(cur)
}

/// `(k, ‖D^k[ρ] − ρ*‖_F, mana(D^k[ρ]))` for `k = 0..=k_max`.
pub fn channel_trajectory(c: &ChannelSpec, rho: &DensityMatrix, target: &DensityMatrix, k_max: usize) -> Result<Vec<(usize, f64, f64)>> {
    let mut out = Vec::with_capacity(k_max + 1);
    let mut cur = rho.clone();
    for k in 0..=k_max {
        let dist = (cur.matrix() - target.matrix()).norm();
        out.push((k, dist, mana_of(&cur)?.mana));
        if k < k_max {
            cur = DensityMatrix::new(c.q, c.apply(cur.matrix()))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::n2_state;
    use crate::random::{random_density, rng};

    #[test]
    fn closed_form_small_cases() {
        assert_eq!(domain_counts(0), MeraCount { k: 0, n_tri: 0, n_sq: 1, ell: 2 });
        assert_eq!(domain_counts(1), MeraCount { k: 1, n_tri: 2, n_sq: 3, ell: 6 });
        assert_eq!(domain_counts(2).n_sq, 7);
        assert_eq!(domain_counts(2).ell, 14);
        assert_eq!(domain_counts(3).ell, 30);
    }

    #[test]
    fn recursion_holds() {
        for k in 0..20 {
            let a = domain_counts(k);
            let b = domain_counts(k + 1);
            assert_eq!(b.n_tri, 2 * a.n_sq);
            assert_eq!(b.n_sq, b.n_tri + 1);
        }
    }

    #[test]
    fn oracle_matches_closed_form() {
        for k in 0..=ORACLE_MAX_K {
            assert_eq!(mera_graph_oracle(k).unwrap(), domain_counts(k), "k = {k}");
        }
        assert!(mera_graph_oracle(ORACLE_MAX_K + 1).is_err());
    }

    #[test]
    fn caption_disagrees_beyond_first_layer() {
        assert_eq!(caption_ell(0), domain_counts(0).ell);
        for k in 1..8 {
            assert_ne!(caption_ell(k), mera_graph_oracle(k).unwrap().ell);
        }
    }

    #[test]
    fn prediction_values() {
        let p = MeraManaParams::new(0.4, 0.3);
        assert_eq!(finite_mana_prediction(f64::INFINITY, &p).unwrap(), 0.7);
        assert!((finite_mana_prediction(2.0, &p).unwrap() - 0.2).abs() < 1e-15);
        let z = MeraManaParams::new(0.0, 0.0);
        assert_eq!(finite_mana_prediction(50.0, &z).unwrap(), 0.0);
        for k in 0..10 {
            let ell = domain_counts(k).ell as f64;
            assert!((finite_mana_prediction(ell, &p).unwrap() - counted_mana_density(k, &p)).abs() < 1e-12);
        }
        let mut prev = 0.0;
        for ell in 2..2000 {
            let m = finite_mana_prediction(ell as f64, &p).unwrap();
            assert!(m >= prev - 1e-15);
            prev = m;
        }
        assert!((0.7 - prev) < 0.02);
    }

    #[test]
    fn quasi_mera_behaviour() {
        let mut p = MeraManaParams::new(0.4, 0.3);
        assert!(quasi_mera_prediction(0.5, &p).is_err());
        p.nu = Some(5.0 / 6.0);
        let at_c = quasi_mera_prediction(FRAC_PI_4, &p).unwrap();
        assert_eq!(at_c, p.m_max.min(0.7));
        for t in [0.0, 0.2, 0.5, 0.7] {
            let a = quasi_mera_prediction(t, &p).unwrap();
            let b = quasi_mera_prediction(std::f64::consts::FRAC_PI_2 - t, &p).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        // |θ − θ_c| < 1 on [0, π/2], so the zero clamp is only approached as ν → 0
        p.nu = Some(1e-3);
        assert!(quasi_mera_prediction(0.0, &p).unwrap() < 1e-3);
    }

    #[test]
    fn fit_recovers_parameters() {
        let p = MeraManaParams::new(0.4, 0.3);
        let ells: Vec<f64> = (2..=7).map(|l| l as f64).collect();
        let ms: Vec<f64> = ells.iter().map(|&l| finite_mana_prediction(l, &p).unwrap()).collect();
        let (a, b) = fit_mana_params(&ells, &ms).unwrap();
        assert!((a - 0.4).abs() < 1e-10 && (b - 0.3).abs() < 1e-10);
    }

    #[test]
    fn depolarizing_spectrum_is_analytic() {
        let q = PrimeDim::QUTRIT;
        let rho1 = DensityMatrix::new(q, random_density(&mut rng(4), 3, 3)).unwrap();
        for p in [0.1, 0.35] {
            let c = ChannelSpec::depolarizing_to_product(&rho1, p).unwrap();
            let s = channel_spectrum(&c).unwrap();
            assert!((s.lambda1 - (1.0 - p)).abs() < 1e-10);
            assert!((s.two_delta + (1.0 - p).log2()).abs() < 1e-9);
            assert!(s.fixed_point_error.unwrap() < 1e-8);
        }
        let local = ChannelSpec::local_depolarizing(&rho1, 0.2).unwrap();
        let s = channel_spectrum(&local).unwrap();
        assert!((s.lambda1 - 0.8).abs() < 1e-10);
        assert!(s.fixed_point_error.unwrap() < 1e-8);
    }

    #[test]
    fn identity_channel_is_flagged_degenerate() {
        let s = channel_spectrum(&ChannelSpec::identity(PrimeDim::QUTRIT, 2)).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.lambda1, 1.0);
        assert!(s.eigenvalues.iter().all(|z| (z.0 - 1.0).abs() < 1e-10));
    }

    #[test]
    fn non_cptp_maps_rejected() {
        let q = PrimeDim::QUTRIT;
        let transpose = ChannelSpec::from_map(q, 1, |x| x.transpose());
        assert!(transpose.trace_defect() < 1e-15);
        assert!(transpose.validate().is_err());
        let scaled = ChannelSpec::from_map(q, 1, |x| x * C64::new(0.5, 0.0));
        assert!(scaled.validate().is_err());
    }

    #[test]
    fn iteration_reaches_zero_mana() {
        let q = PrimeDim::QUTRIT;
        let rho1 = DensityMatrix::maximally_mixed(q, 1);
        let c = ChannelSpec::depolarizing_to_product(&rho1, 0.25).unwrap();
        let n2 = n2_state();
        let rho = DensityMatrix::from_pure(q, &n2).unwrap();
        assert_eq!(iterate_channel(&c, &rho, 0).unwrap().matrix(), rho.matrix());
        let traj = channel_trajectory(&c, &rho, &rho1.tensor(&rho1).unwrap(), 12).unwrap();
        assert!(traj[0].2 > 0.5);
        let first_zero = traj.iter().find(|t| t.2 < 1e-12).map(|t| t.0).unwrap();
        assert!(first_zero > 0 && first_zero < 12);
        assert!(traj[first_zero..].iter().all(|t| t.2 < 1e-12));
    }
}
