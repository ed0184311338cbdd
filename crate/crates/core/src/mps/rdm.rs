use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::state::{MpsState, SiteTensor};
use crate::error::{invalid, Error, Result};
use crate::qudit::{PrimeDim, C64};
use crate::wigner::DensityMatrix;

/// Largest subsystem whose density matrix is formed densely.
pub const RDM_MAX_SITES: usize = 8;

/// Half-open site interval `[start, end)`, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

/// Disjoint, sorted site intervals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemSpec {
    intervals: Vec<Interval>,
}

impl SubsystemSpec {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return invalid("subsystem needs at least one interval");
        }
        for iv in &intervals {
            if iv.end <= iv.start {
                return invalid(format!("empty interval [{}, {})", iv.start, iv.end));
            }
        }
        for w in intervals.windows(2) {
            if w[1].start < w[0].end {
                return invalid("intervals must be sorted and non-overlapping");
            }
        }
        Ok(SubsystemSpec { intervals })
    }

    pub fn contiguous(start: usize, len: usize) -> Result<Self> {
        SubsystemSpec::new(vec![Interval { start, end: start + len }])
    }

    /// Union of two disjoint specs.
    pub fn union(&self, other: &SubsystemSpec) -> Result<Self> {
        let mut all: Vec<Interval> = self.intervals.iter().chain(&other.intervals).copied().collect();
        all.sort_by_key(|iv| iv.start);
        SubsystemSpec::new(all)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn sites(&self) -> Vec<usize> {
        self.intervals.iter().flat_map(|iv| iv.start..iv.end).collect()
    }

    pub fn n_sites(&self) -> usize {
        self.intervals.iter().map(|iv| iv.end - iv.start).sum()
    }

    pub fn is_contiguous(&self) -> bool {
        self.intervals.len() == 1
    }

    pub fn first(&self) -> usize {
        self.intervals[0].start
    }

    pub fn last(&self) -> usize {
        self.intervals[self.intervals.len() - 1].end - 1
    }

    pub fn check_within(&self, n: usize) -> Result<()> {
        if self.last() >= n {
            return invalid(format!("subsystem reaches site {} in a chain of {n}", self.last()));
        }
        Ok(())
    }
}

/// Permutation taking a little-endian digit index to big-endian order.
pub(crate) fn little_to_big(d: usize, k: usize) -> Vec<usize> {
    (0..d.pow(k as u32))
        .map(|mut le| {
            let mut be = 0;
            for _ in 0..k {
                be = be * d + le % d;
                le /= d;
            }
            be
        })
        .collect()
}

fn to_density(real: DMatrix<f64>, d: usize, k: usize) -> Result<DensityMatrix> {
    let perm = little_to_big(d, k);
    let dim = real.nrows();
    let mut out = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for i in 0..dim {
        for j in 0..dim {
            out[(perm[i], perm[j])] = C64::new(real[(i, j)], 0.0);
        }
    }
    let q = PrimeDim::new(d)?;
    DensityMatrix::from_unnormalized(q, out)
}

/// Amplitude block of a contiguous region with the center at its first site:
/// rows `a + l * S` (`S` little-endian over the region), columns the right bond.
pub(crate) fn region_block(mps: &MpsState, start: usize, len: usize) -> DMatrix<f64> {
    let mut acc = mps.tensor(start).left_matrix();
    for k in 1..len {
        let t = mps.tensor(start + k);
        let prod = acc * t.right_matrix();
        acc = DMatrix::from_column_slice(prod.nrows() * t.phys, t.right, prod.as_slice());
    }
    acc
}

fn contiguous_rdm(mps: &mut MpsState, start: usize, len: usize) -> Result<DMatrix<f64>> {
    mps.move_center(start)?;
    let d = mps.phys();
    let l = mps.tensor(start).left;
    let psi = region_block(mps, start, len);
    let r = psi.ncols();
    let ds = d.pow(len as u32);
    let p = DMatrix::from_fn(ds, l * r, |s, ab| psi[(ab % l + l * s, ab / l)]);
    Ok(&p * p.transpose())
}

/// Operator-basis environments `E[S, S']` carried across a block of sites.
///
/// The pair index is `S + D * S'` with `D = d^k` and `S` little-endian.
pub(crate) struct PairEnv {
    pub k: usize,
    pub mats: Vec<DMatrix<f64>>,
}

impl PairEnv {
    pub fn identity(bond: usize) -> Self {
        PairEnv { k: 0, mats: vec![DMatrix::identity(bond, bond)] }
    }

    pub fn absorb(&self, t: &SiteTensor) -> PairEnv {
        let d = t.phys;
        let dk = d.pow(self.k as u32);
        let slices = t.slices();
        let slices_t: Vec<DMatrix<f64>> = slices.iter().map(|m| m.transpose()).collect();
        let nd = dk * d;
        let mut mats = vec![DMatrix::zeros(0, 0); nd * nd];
        for (p, e) in self.mats.iter().enumerate() {
            let (s_old, sp_old) = (p % dk, p / dk);
            let left: Vec<DMatrix<f64>> = slices_t.iter().map(|mt| mt * e).collect();
            for (s, ls) in left.iter().enumerate() {
                for (sp, msp) in slices.iter().enumerate() {
                    let idx = (s_old + dk * s) + nd * (sp_old + dk * sp);
                    mats[idx] = ls * msp;
                }
            }
        }
        PairEnv { k: self.k + 1, mats }
    }

    pub fn trace_site(&mut self, t: &SiteTensor) {
        let slices = t.slices();
        for e in self.mats.iter_mut() {
            let mut acc = DMatrix::zeros(t.right, t.right);
            for m in &slices {
                acc += m.transpose() * &*e * m;
            }
            *e = acc;
        }
    }

    /// Close with a final region site whose right environment is the identity.
    pub fn close(&self, t: &SiteTensor) -> DMatrix<f64> {
        let d = t.phys;
        let dk = d.pow(self.k as u32);
        let slices = t.slices();
        let nd = dk * d;
        let mut pm = vec![DMatrix::zeros(0, 0); d * d];
        for s in 0..d {
            for sp in 0..d {
                pm[s + d * sp] = &slices[s] * slices[sp].transpose();
            }
        }
        let mut rho = DMatrix::zeros(nd, nd);
        for (p, e) in self.mats.iter().enumerate() {
            let (s_old, sp_old) = (p % dk, p / dk);
            for s in 0..d {
                for sp in 0..d {
                    rho[(s_old + dk * s, sp_old + dk * sp)] = e.dot(&pm[s + d * sp]);
                }
            }
        }
        rho
    }
}

fn general_rdm(mps: &mut MpsState, spec: &SubsystemSpec) -> Result<DMatrix<f64>> {
    let first = spec.first();
    let last = spec.last();
    mps.move_center(first)?;
    let sites = spec.sites();
    let mut env = PairEnv::identity(mps.tensor(first).left);
    for j in first..last {
        if sites.contains(&j) {
            env = env.absorb(mps.tensor(j));
        } else {
            env.trace_site(mps.tensor(j));
        }
    }
    Ok(env.close(mps.tensor(last)))
}

/// Reduced density matrix of `spec`, site order as in the chain.
pub fn rdm(mps: &mut MpsState, spec: &SubsystemSpec) -> Result<DensityMatrix> {
    spec.check_within(mps.len())?;
    let k = spec.n_sites();
    if k > RDM_MAX_SITES {
        return Err(Error::RegionTooLarge(format!("{k} sites exceeds the dense limit {RDM_MAX_SITES}")));
    }
    let real = if spec.is_contiguous() {
        contiguous_rdm(mps, spec.first(), k)?
    } else {
        if k > 6 {
            return Err(Error::RegionTooLarge("multi-interval regions are limited to 6 sites".into()));
        }
        general_rdm(mps, spec)?
    };
    to_density(real, mps.phys(), k)
}

/// `(1/d) Σ_k X^k ρ X^{-k}` with `X` the global shift on the region: the
/// reduced state of the equal-weight mixture of shifted copies.
pub fn symmetrize_rdm(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let q = rho.q();
    let d = q.get();
    let n = rho.n_sites();
    let dim = rho.matrix().nrows();
    let shift_idx = |idx: usize, k: usize| {
        let mut out = 0;
        let mut rem = idx;
        let mut place = 1;
        for _ in 0..n {
            out += ((rem % d + k) % d) * place;
            rem /= d;
            place *= d;
        }
        out
    };
    let mut acc = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for k in 0..d {
        for i in 0..dim {
            for j in 0..dim {
                acc[(shift_idx(i, k), shift_idx(j, k))] += rho.matrix()[(i, j)];
            }
        }
    }
    DensityMatrix::from_unnormalized(q, acc)
}

/// Reduced states of `A ∪ B` as `B` slides right: block `A = [a, a + la)`,
/// `B = [a + dx, a + dx + lb)` for `dx` in `dx_min..=dx_max`.
pub fn sliding_pair_rdms(
    mps: &mut MpsState,
    a: usize,
    la: usize,
    lb: usize,
    dx_min: usize,
    dx_max: usize,
) -> Result<Vec<(usize, DensityMatrix)>> {
    if la == 0 || lb == 0 || la + lb > 4 {
        return invalid("pair blocks must be non-empty with at most 4 sites in total");
    }
    if dx_min < la {
        return invalid("blocks overlap: dx must be at least the size of A");
    }
    if a + dx_max + lb > mps.len() {
        return invalid("block B runs past the chain end");
    }
    mps.move_center(a)?;
    let d = mps.phys();
    let mut env = PairEnv::identity(mps.tensor(a).left);
    for j in a..a + la {
        env = env.absorb(mps.tensor(j));
    }
    // trace the gap up to the first B position
    for j in a + la..a + dx_min {
        env.trace_site(mps.tensor(j));
    }
    let mut out = Vec::new();
    for dx in dx_min..=dx_max {
        let b = a + dx;
        let mut local = PairEnv { k: env.k, mats: env.mats.clone() };
        for j in b..b + lb - 1 {
            local = local.absorb(mps.tensor(j));
        }
        let real = local.close(mps.tensor(b + lb - 1));
        out.push((dx, to_density(real, d, la + lb)?));
        if dx < dx_max {
            env.trace_site(mps.tensor(b));
        }
    }
    Ok(out)
}
