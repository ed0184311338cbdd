use nalgebra::DMatrix;

use super::rdm::{rdm, SubsystemSpec, RDM_MAX_SITES};
use super::state::{MpsState, SiteTensor};
use crate::error::{invalid, Error, Result};
use crate::qudit::{PhaseSpace, PrimeDim};
use crate::wigner::{mana, wigner_with, WignerTable};

/// Largest region for which the Wigner function goes through a dense density matrix.
pub const DENSE_WIGNER_MAX_SITES: usize = 6;

/// Complex `χ x χ` matrix split into real and imaginary parts.
#[derive(Clone)]
struct CMat {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

/// Per-site coefficients `c_u[s, s'] = A_u[s', s] / d` as `(re, im)` tables.
fn site_coefficients(ps: &PhaseSpace) -> Vec<Vec<(f64, f64)>> {
    let d = ps.dim().get();
    (0..d * d)
        .map(|u| {
            let a = ps.site_op(u);
            let mut c = vec![(0.0, 0.0); d * d];
            for s in 0..d {
                for sp in 0..d {
                    let z = a[(sp, s)] / d as f64;
                    c[s + d * sp] = (z.re, z.im);
                }
            }
            c
        })
        .collect()
}

/// One tensor-train step: for every current matrix and every phase digit,
/// `Σ_{s,s'} c_u[s,s'] G_{s,s'}` with `G` supplied by `pair`.
fn expand(
    current: &[CMat],
    coeffs: &[Vec<(f64, f64)>],
    d: usize,
    digit_major: bool,
    pair: impl Fn(&DMatrix<f64>, usize, usize) -> DMatrix<f64>,
) -> Vec<CMat> {
    let nu = coeffs.len();
    let count = current.len();
    let mut out: Vec<Option<CMat>> = vec![None; count * nu];
    for (p, e) in current.iter().enumerate() {
        let mut g_re = Vec::with_capacity(d * d);
        let mut g_im = Vec::with_capacity(d * d);
        for sp in 0..d {
            for s in 0..d {
                g_re.push(pair(&e.re, s, sp));
                g_im.push(pair(&e.im, s, sp));
            }
        }
        for (u, c) in coeffs.iter().enumerate() {
            let shape = g_re[0].shape();
            let mut re = DMatrix::zeros(shape.0, shape.1);
            let mut im = DMatrix::zeros(shape.0, shape.1);
            for (k, &(cr, ci)) in c.iter().enumerate() {
                if cr != 0.0 {
                    re += &g_re[k] * cr;
                    im += &g_im[k] * cr;
                }
                if ci != 0.0 {
                    re -= &g_im[k] * ci;
                    im += &g_re[k] * ci;
                }
            }
            let idx = if digit_major { u * count + p } else { p * nu + u };
            out[idx] = Some(CMat { re, im });
        }
    }
    out.into_iter().map(|m| m.expect("filled")).collect()
}

fn grow_left(current: &[CMat], t: &SiteTensor, coeffs: &[Vec<(f64, f64)>]) -> Vec<CMat> {
    let slices = t.slices();
    let slices_t: Vec<DMatrix<f64>> = slices.iter().map(|m| m.transpose()).collect();
    expand(current, coeffs, t.phys, false, |e, s, sp| &slices_t[s] * e * &slices[sp])
}

fn grow_right(current: &[CMat], t: &SiteTensor, coeffs: &[Vec<(f64, f64)>]) -> Vec<CMat> {
    let slices = t.slices();
    let slices_t: Vec<DMatrix<f64>> = slices.iter().map(|m| m.transpose()).collect();
    expand(current, coeffs, t.phys, true, |f, s, sp| &slices[s] * f * &slices_t[sp])
}

fn rows(mats: &[CMat], negate_im: bool) -> DMatrix<f64> {
    let k = mats[0].re.len();
    let mut m = DMatrix::zeros(mats.len(), 2 * k);
    let sign = if negate_im { -1.0 } else { 1.0 };
    for (r, c) in mats.iter().enumerate() {
        for (j, v) in c.re.iter().enumerate() {
            m[(r, j)] = *v;
        }
        for (j, v) in c.im.iter().enumerate() {
            m[(r, k + j)] = sign * v;
        }
    }
    m
}

/// Wigner function of a contiguous region directly from the MPS, never forming
/// the `d^ℓ x d^ℓ` density matrix.
fn tensor_train_wigner(mps: &mut MpsState, start: usize, len: usize, ps: &PhaseSpace) -> Result<Vec<f64>> {
    mps.move_center(start)?;
    let coeffs = site_coefficients(ps);
    let nu = coeffs.len();
    let m = len / 2;
    let ident = |b: usize| CMat { re: DMatrix::identity(b, b), im: DMatrix::zeros(b, b) };

    let mut left = vec![ident(mps.tensor(start).left)];
    for j in start..start + m {
        left = grow_left(&left, mps.tensor(j), &coeffs);
    }
    let lmat = rows(&left, true);
    drop(left);

    let end = start + len;
    let mut right = vec![ident(mps.tensor(end - 1).right)];
    for j in (start + m + 1..end).rev() {
        right = grow_right(&right, mps.tensor(j), &coeffs);
    }
    let inner = mps.tensor(start + m).clone();
    let slices = inner.slices();
    let slices_t: Vec<DMatrix<f64>> = slices.iter().map(|x| x.transpose()).collect();
    let n_right_rest = right.len();
    let n_right = n_right_rest * nu;
    let mut values = vec![0.0; lmat.nrows() * n_right];
    // one chunk per phase digit of the innermost right site keeps memory bounded
    for (u, c) in coeffs.iter().enumerate() {
        let single = vec![c.clone()];
        let chunk = expand(&right, &single, inner.phys, true, |f, s, sp| &slices[s] * f * &slices_t[sp]);
        let rmat = rows(&chunk, false);
        let w = &lmat * rmat.transpose();
        for i in 0..w.nrows() {
            for (k, col) in (u * n_right_rest..(u + 1) * n_right_rest).enumerate() {
                values[i * n_right + col] = w[(i, k)];
            }
        }
    }
    Ok(values)
}

/// Wigner function of the reduced state on `spec`.
///
/// Regions of up to six sites go through the dense reduced density matrix;
/// contiguous regions of seven or eight sites use a tensor-train contraction.
pub fn wigner_of_mps_rdm(mps: &mut MpsState, spec: &SubsystemSpec) -> Result<WignerTable> {
    let q = PrimeDim::new(mps.phys())?;
    let ps = PhaseSpace::new(q);
    wigner_of_mps_rdm_with(mps, spec, &ps)
}

pub fn wigner_of_mps_rdm_with(mps: &mut MpsState, spec: &SubsystemSpec, ps: &PhaseSpace) -> Result<WignerTable> {
    spec.check_within(mps.len())?;
    mps.check_canonical(1e-8)?;
    let k = spec.n_sites();
    if k > RDM_MAX_SITES {
        return Err(Error::RegionTooLarge(format!("{k} sites")));
    }
    if k <= DENSE_WIGNER_MAX_SITES {
        let rho = rdm(mps, spec)?;
        return wigner_with(ps, &rho);
    }
    if !spec.is_contiguous() {
        return Err(Error::RegionTooLarge("multi-interval regions are limited to 6 sites".into()));
    }
    let values = tensor_train_wigner(mps, spec.first(), k, ps)?;
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Numerical(format!("MPS Wigner function sums to {total}")));
    }
    let values = values.into_iter().map(|w| w / total).collect();
    WignerTable::from_values(ps.dim(), k, values)
}

/// Tensor-train path forced for any contiguous region; used to cross-check the dense path.
pub fn wigner_tensor_train(mps: &mut MpsState, start: usize, len: usize) -> Result<WignerTable> {
    if len == 0 || start + len > mps.len() {
        return invalid("region out of range");
    }
    let q = PrimeDim::new(mps.phys())?;
    let ps = PhaseSpace::new(q);
    let values = tensor_train_wigner(mps, start, len, &ps)?;
    WignerTable::from_values(q, len, values)
}

/// `m(ρ_{A∪B}) − ½ [m(ρ_A) + m(ρ_B)]` with mana densities.
pub fn connected_mana(mps: &mut MpsState, a: &SubsystemSpec, b: &SubsystemSpec) -> Result<f64> {
    let sa: Vec<usize> = a.sites();
    if b.sites().iter().any(|s| sa.contains(s)) {
        return invalid("connected mana needs disjoint regions");
    }
    if a.n_sites() != b.n_sites() || a.n_sites() + b.n_sites() > 4 {
        return invalid("connected mana needs |A| = |B| and |A| + |B| ≤ 4");
    }
    let ab = a.union(b)?;
    let m_ab = mana(&wigner_of_mps_rdm(mps, &ab)?).mana_density;
    let m_a = mana(&wigner_of_mps_rdm(mps, a)?).mana_density;
    let m_b = mana(&wigner_of_mps_rdm(mps, b)?).mana_density;
    Ok(m_ab - 0.5 * (m_a + m_b))
}
