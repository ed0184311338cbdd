use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use serde::{Deserialize, Serialize};

use super::mpo::{Mpo, MpoTensor};
use super::state::{svd_truncate, MpsState, SiteTensor};
use crate::error::{invalid, Error, Result};
use crate::lanczos::{lowest_eigenpair, LanczosConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DmrgConfig {
    /// Discarded-weight threshold per SVD.
    pub svd_cutoff: f64,
    /// Stop when the energy changes by less than this over a full sweep.
    pub energy_tol: f64,
    pub max_sweeps: usize,
    pub min_sweeps: usize,
    pub max_bond: usize,
    /// Z eigenvalue label of the product state used to seed ordered-phase runs.
    pub init_bias: usize,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        DmrgConfig { svd_cutoff: 1e-7, energy_tol: 1e-7, max_sweeps: 40, min_sweeps: 2, max_bond: 256, init_bias: 0 }
    }
}

impl DmrgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.svd_cutoff > 0.0 && self.energy_tol > 0.0) {
            return invalid("DMRG cutoffs must be positive");
        }
        if self.max_sweeps == 0 || self.max_bond == 0 {
            return invalid("max_sweeps and max_bond must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult {
    pub state: MpsState,
    pub energy: f64,
    /// Energy after each full (left and right) sweep.
    pub sweep_energies: Vec<f64>,
    pub max_discarded: f64,
}

type Env = Vec<DMatrix<f64>>;

fn boundary_env(w: usize, which: usize) -> Env {
    (0..w).map(|k| DMatrix::from_element(1, 1, if k == which { 1.0 } else { 0.0 })).collect()
}

fn is_zero(m: &DMatrix<f64>) -> bool {
    m.iter().all(|&x| x == 0.0)
}

/// Contract `out(a', s', b) += Σ_s x(a', s, b) op(s', s)` over every `b` block.
fn apply_phys(out: &mut [f64], x: &[f64], l: usize, d: usize, r: usize, op_t: &DMatrix<f64>) {
    for b in 0..r {
        let off = b * l * d;
        let xv = DMatrixView::from_slice(&x[off..off + l * d], l, d);
        let mut ov = DMatrixViewMut::from_slice(&mut out[off..off + l * d], l, d);
        ov.gemm(1.0, &xv, op_t, 1.0);
    }
}

pub(crate) fn update_left(env: &Env, a: &SiteTensor, w: &MpoTensor) -> Env {
    let (l, d, r) = (a.left, a.phys, a.right);
    let a_right = a.right_matrix();
    let a_left = a.left_matrix();
    let mut z: Vec<Vec<f64>> = vec![vec![0.0; l * d * r]; w.wr];
    for (alpha, la) in env.iter().enumerate() {
        if is_zero(la) {
            continue;
        }
        let t = la * &a_right;
        for (beta, zb) in z.iter_mut().enumerate() {
            if let Some(op) = w.get(alpha, beta) {
                apply_phys(zb, t.as_slice(), l, d, r, &op.transpose());
            }
        }
    }
    z.into_iter()
        .map(|zb| a_left.transpose() * DMatrixView::from_slice(&zb, l * d, r))
        .collect()
}

pub(crate) fn update_right(env: &Env, a: &SiteTensor, w: &MpoTensor) -> Env {
    let (l, d, r) = (a.left, a.phys, a.right);
    let a_right = a.right_matrix();
    let a_left = a.left_matrix();
    let mut z: Vec<Vec<f64>> = vec![vec![0.0; l * d * r]; w.wl];
    for (beta, rb) in env.iter().enumerate() {
        if is_zero(rb) {
            continue;
        }
        let t = &a_left * rb.transpose();
        for (alpha, za) in z.iter_mut().enumerate() {
            if let Some(op) = w.get(alpha, beta) {
                apply_phys(za, t.as_slice(), l, d, r, &op.transpose());
            }
        }
    }
    z.into_iter()
        .map(|za| &a_right * DMatrixView::from_slice(&za, l, d * r).transpose())
        .collect()
}

/// Two-site effective Hamiltonian for sites `(i, i + 1)`.
struct TwoSiteOp<'a> {
    left: &'a Env,
    right: &'a Env,
    /// `O[α][γ]` transposed, on the combined index `s1 + d * s2`.
    ops_t: Vec<Vec<Option<DMatrix<f64>>>>,
    l: usize,
    d: usize,
    r: usize,
}

impl<'a> TwoSiteOp<'a> {
    fn new(left: &'a Env, right: &'a Env, w1: &MpoTensor, w2: &MpoTensor, l: usize, r: usize) -> Self {
        let d = w1.phys;
        let mut ops_t = vec![vec![None; w2.wr]; w1.wl];
        for (alpha, row) in ops_t.iter_mut().enumerate() {
            for (gamma, slot) in row.iter_mut().enumerate() {
                let mut acc: Option<DMatrix<f64>> = None;
                for beta in 0..w1.wr {
                    if let (Some(a), Some(b)) = (w1.get(alpha, beta), w2.get(beta, gamma)) {
                        let k = b.kronecker(a);
                        acc = Some(match acc {
                            Some(x) => x + k,
                            None => k,
                        });
                    }
                }
                *slot = acc.filter(|m| !is_zero(m)).map(|m| m.transpose());
            }
        }
        TwoSiteOp { left, right, ops_t, l, d, r }
    }

    fn dim(&self) -> usize {
        self.l * self.d * self.d * self.r
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (l, dd, r) = (self.l, self.d * self.d, self.r);
        let theta = DMatrixView::from_slice(x, l, dd * r);
        let xs: Vec<Option<DMatrix<f64>>> =
            self.left.iter().map(|la| if is_zero(la) { None } else { Some(la * theta) }).collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut y = vec![0.0; l * dd * r];
        for (gamma, rg) in self.right.iter().enumerate() {
            if is_zero(rg) {
                continue;
            }
            y.iter_mut().for_each(|v| *v = 0.0);
            let mut any = false;
            for (alpha, xa) in xs.iter().enumerate() {
                if let (Some(xa), Some(op_t)) = (xa, &self.ops_t[alpha][gamma]) {
                    apply_phys(&mut y, xa.as_slice(), l, dd, r, op_t);
                    any = true;
                }
            }
            if !any {
                continue;
            }
            let yv = DMatrixView::from_slice(&y, l * dd, r);
            let mut ov = DMatrixViewMut::from_slice(out, l * dd, r);
            ov.gemm(1.0, &yv, &rg.transpose(), 1.0);
        }
    }
}

/// `<ψ|H|ψ>` for a normalized MPS.
pub fn mpo_expectation(mpo: &Mpo, mps: &MpsState) -> Result<f64> {
    if mpo.len() != mps.len() {
        return Err(Error::Dimension("MPO and MPS lengths differ".into()));
    }
    let mut env = boundary_env(mpo.tensors[0].wl, mpo.left);
    for (a, w) in mps.tensors().iter().zip(&mpo.tensors) {
        env = update_left(&env, a, w);
    }
    Ok(env[mpo.right][(0, 0)])
}

fn lanczos_cfg() -> LanczosConfig {
    LanczosConfig { krylov_dim: 24, max_restarts: 6, tol: 1e-10 }
}

/// Two-site DMRG starting from `init`.
pub fn dmrg(mpo: &Mpo, init: MpsState, cfg: &DmrgConfig) -> Result<DmrgResult> {
    cfg.validate()?;
    let n = mpo.len();
    if init.len() != n {
        return Err(Error::Dimension("initial MPS length differs from MPO".into()));
    }
    let mut mps = init;
    mps.set_cutoff(cfg.svd_cutoff);
    mps.move_center(0)?;
    mps.normalize();
    if n == 1 {
        let energy = mpo_expectation(mpo, &mps)?;
        return Ok(DmrgResult { state: mps, energy, sweep_energies: vec![energy], max_discarded: 0.0 });
    }
    let wl0 = mpo.tensors[0].wl;
    let wrn = mpo.tensors[n - 1].wr;
    let mut lenv: Vec<Env> = vec![Vec::new(); n];
    let mut renv: Vec<Env> = vec![Vec::new(); n];
    lenv[0] = boundary_env(wl0, mpo.left);
    renv[n - 1] = boundary_env(wrn, mpo.right);
    for i in (0..n - 1).rev() {
        renv[i] = update_right(&renv[i + 1], mps.tensor(i + 1), &mpo.tensors[i + 1]);
    }

    let mut sweep_energies = Vec::new();
    let mut max_discarded: f64 = 0.0;
    let mut last = f64::INFINITY;
    let mut energy = f64::INFINITY;
    for sweep in 0..cfg.max_sweeps {
        let mut sweep_discarded: f64 = 0.0;
        for forward in [true, false] {
            let order: Vec<usize> = if forward { (0..n - 1).collect() } else { (0..n - 1).rev().collect() };
            for i in order {
                let (a, b) = (mps.tensor(i), mps.tensor(i + 1));
                let d = a.phys;
                let (l, r) = (a.left, b.right);
                let theta = a.left_matrix() * b.right_matrix();
                let op = TwoSiteOp::new(&lenv[i], &renv[i + 1], &mpo.tensors[i], &mpo.tensors[i + 1], l, r);
                let pair = lowest_eigenpair(op.dim(), |x, y| op.apply(x, y), Some(theta.as_slice()), &lanczos_cfg())?;
                energy = pair.value;
                let m = DMatrix::from_column_slice(l * d, d * r, &pair.vector);
                let t = svd_truncate(m, cfg.svd_cutoff, cfg.max_bond)?;
                sweep_discarded = sweep_discarded.max(t.discarded);
                let snorm = t.s.iter().map(|x| x * x).sum::<f64>().sqrt();
                let k = t.s.len();
                if forward {
                    *mps.tensor_mut(i) = SiteTensor::from_left_matrix(t.u, d);
                    let sv = DMatrix::from_fn(k, d * r, |p, c| t.s[p] / snorm * t.vt[(p, c)]);
                    *mps.tensor_mut(i + 1) = SiteTensor::from_right_matrix(sv, d);
                    mps.set_center_unchecked(i + 1);
                    lenv[i + 1] = update_left(&lenv[i], mps.tensor(i), &mpo.tensors[i]);
                } else {
                    let us = DMatrix::from_fn(l * d, k, |p, c| t.u[(p, c)] * t.s[c] / snorm);
                    *mps.tensor_mut(i) = SiteTensor::from_left_matrix(us, d);
                    *mps.tensor_mut(i + 1) = SiteTensor::from_right_matrix(t.vt, d);
                    mps.set_center_unchecked(i);
                    renv[i] = update_right(&renv[i + 1], mps.tensor(i + 1), &mpo.tensors[i + 1]);
                }
            }
        }
        max_discarded = max_discarded.max(sweep_discarded);
        sweep_energies.push(energy);
        if sweep + 1 >= cfg.min_sweeps && (last - energy).abs() < cfg.energy_tol {
            return Ok(DmrgResult { state: mps, energy, sweep_energies, max_discarded });
        }
        last = energy;
    }
    Err(Error::NotConverged { sweeps: cfg.max_sweeps, delta: (last - energy).abs() })
}
