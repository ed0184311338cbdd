//! Density matrices, discrete Wigner functions, and mana.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qudit::{hermiticity_defect, DenseOperator, DenseState, PhasePoint, PhaseSpace, PrimeDim, C64, ZERO};

/// Tolerance on Hermiticity and trace for accepted density matrices.
pub const DENSITY_TOL: f64 = 1e-10;
/// Eigenvalues down to this are clipped to zero; below it the matrix is rejected.
pub const NEGATIVE_EIG_TOL: f64 = 1e-9;
/// Largest dimension for which negative eigenvalues are clipped by a full eigendecomposition.
pub const SPECTRAL_CLIP_MAX_DIM: usize = 243;
/// Largest dimension for which positivity is checked at all (by shifted Cholesky above the clip limit).
pub const SPECTRAL_CHECK_MAX_DIM: usize = 729;

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    q: PrimeDim,
    n: usize,
    mat: DenseOperator,
}

impl DensityMatrix {
    pub fn new(q: PrimeDim, mat: DenseOperator) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension(format!("density matrix is {}x{}", mat.nrows(), mat.ncols())));
        }
        let n = q
            .sites_for_dim(mat.nrows())
            .ok_or_else(|| Error::Dimension(format!("dimension {} is not a power of {}", mat.nrows(), q.get())))?;
        let herm = hermiticity_defect(&mat);
        if herm > DENSITY_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let mat = (&mat + mat.adjoint()) * C64::new(0.5, 0.0);
        let mat = if mat.nrows() <= SPECTRAL_CLIP_MAX_DIM {
            clip_spectrum(mat)?
        } else if mat.nrows() <= SPECTRAL_CHECK_MAX_DIM {
            check_psd_shifted(mat)?
        } else {
            mat
        };
        Ok(DensityMatrix { q, n, mat })
    }

    /// Rescale to unit trace and symmetrize before validating; for numerically derived RDMs.
    pub fn from_unnormalized(q: PrimeDim, mat: DenseOperator) -> Result<Self> {
        let tr = mat.trace().re;
        if tr <= 0.0 || !tr.is_finite() {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let herm = (&mat + mat.adjoint()) * C64::new(0.5 / tr, 0.0);
        Self::new(q, herm)
    }

    pub fn from_pure(q: PrimeDim, psi: &DenseState) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidDensity(format!("state norm {norm}")));
        }
        let psi = psi / C64::new(norm, 0.0);
        Self::new(q, &psi * psi.adjoint())
    }

    pub fn maximally_mixed(q: PrimeDim, n: usize) -> Self {
        let d = q.hilbert_dim(n);
        let mat = DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
        DensityMatrix { q, n, mat }
    }

    pub fn q(&self) -> PrimeDim {
        self.q
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DenseOperator {
        &self.mat
    }

    pub fn into_matrix(self) -> DenseOperator {
        self.mat
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        if self.q != other.q {
            return invalid("tensor: local dimensions differ");
        }
        Ok(DensityMatrix { q: self.q, n: self.n + other.n, mat: self.mat.kronecker(&other.mat) })
    }

    /// Conjugate by a unitary on all sites.
    pub fn conjugate(&self, u: &DenseOperator) -> Result<DensityMatrix> {
        if u.nrows() != self.mat.nrows() {
            return Err(Error::Dimension("conjugate: unitary size mismatch".into()));
        }
        DensityMatrix::from_unnormalized(self.q, u * &self.mat * u.adjoint())
    }

    /// Reduced state on `keep` (site order preserved as given, must be increasing).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&s| s >= self.n) {
            return invalid("partial_trace: keep must be increasing site indices in range");
        }
        let d = self.q.get();
        let n = self.n;
        let traced: Vec<usize> = (0..n).filter(|s| !keep.contains(s)).collect();
        let dk = d.pow(keep.len() as u32);
        let dt = d.pow(traced.len() as u32);
        let place = |sites: &[usize], mut local: usize| {
            let mut idx = 0;
            for &s in sites.iter().rev() {
                idx += (local % d) * d.pow((n - 1 - s) as u32);
                local /= d;
            }
            idx
        };
        let keep_off: Vec<usize> = (0..dk).map(|l| place(keep, l)).collect();
        let trace_off: Vec<usize> = (0..dt).map(|l| place(&traced, l)).collect();
        let mut out = DMatrix::from_element(dk, dk, ZERO);
        for a in 0..dk {
            for b in 0..dk {
                let mut acc = ZERO;
                for &t in &trace_off {
                    acc += self.mat[(keep_off[a] + t, keep_off[b] + t)];
                }
                out[(a, b)] = acc;
            }
        }
        DensityMatrix::from_unnormalized(self.q, out)
    }

    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat.clone().symmetric_eigenvalues().iter().copied().collect()
    }
}

fn clip_spectrum(mat: DenseOperator) -> Result<DenseOperator> {
    let eig = mat.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVE_EIG_TOL {
        return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
    }
    if min >= 0.0 {
        return Ok(mat);
    }
    let clipped = eig.eigenvalues.map(|e| e.max(0.0));
    let total: f64 = clipped.iter().sum();
    let v = &eig.eigenvectors;
    let diag = DMatrix::from_diagonal(&clipped.map(|e| C64::new(e / total, 0.0)));
    let rebuilt = v * diag * v.adjoint();
    Ok((&rebuilt + rebuilt.adjoint()) * C64::new(0.5, 0.0))
}

fn check_psd_shifted(mat: DenseOperator) -> Result<DenseOperator> {
    let dim = mat.nrows();
    let shifted = &mat + DMatrix::<C64>::identity(dim, dim) * C64::new(NEGATIVE_EIG_TOL, 0.0);
    if shifted.cholesky().is_none() {
        return Err(Error::InvalidDensity(format!("eigenvalue below -{NEGATIVE_EIG_TOL:e}")));
    }
    Ok(mat)
}

/// Second Rényi entropy `-ln Tr ρ²`.
pub fn renyi2(rho: &DensityMatrix) -> f64 {
    -rho.purity().ln()
}

/// Von Neumann entropy in nats.
pub fn entanglement_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub(crate) fn entropy_of_spectrum(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Discrete Wigner function `W(u) = q^{-n} Tr(ρ A_u)`, indexed like [`PhasePoint::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct WignerTable {
    q: PrimeDim,
    n: usize,
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManaReport {
    pub mana: f64,
    pub neg_sum: f64,
    pub n_sites: usize,
    pub mana_density: f64,
    pub min_w: f64,
}

impl WignerTable {
    pub fn from_values(q: PrimeDim, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != q.num_phase_points(n) {
            return Err(Error::Dimension(format!("{} Wigner values for {} phase points", values.len(), q.num_phase_points(n))));
        }
        Ok(WignerTable { q, n, values })
    }

    pub fn q(&self) -> PrimeDim {
        self.q
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: &PhasePoint) -> f64 {
        self.values[u.index(self.q)]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn neg_sum(&self) -> f64 {
        self.values.iter().map(|w| w.abs()).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sum of the negative entries' magnitudes; zero iff the table is non-negative.
    pub fn negativity(&self) -> f64 {
        self.values.iter().filter(|&&w| w < 0.0).map(|w| -w).sum()
    }

    /// Wigner function of the tensor product state.
    pub fn product(&self, other: &WignerTable) -> WignerTable {
        let mut values = Vec::with_capacity(self.values.len() * other.values.len());
        for a in &self.values {
            values.extend(other.values.iter().map(|b| a * b));
        }
        WignerTable { q: self.q, n: self.n + other.n, values }
    }

    /// `q^n Σ_u W_1(u) W_2(u)`, equal to `Tr(ρ_1 ρ_2)`.
    pub fn overlap(&self, other: &WignerTable) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.q.hilbert_dim(self.n) as f64
    }

    pub fn max_abs_diff(&self, other: &WignerTable) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<String> = Vec::new();
        for j in 1..=self.n {
            header.push(format!("u{j}a"));
            header.push(format!("u{j}a'"));
        }
        header.push("W".into());
        writeln!(out, "{}", header.join(","))?;
        for (idx, w) in self.values.iter().enumerate() {
            let u = PhasePoint::from_index(self.q, self.n, idx);
            let mut row: Vec<String> = u.pairs().iter().flat_map(|&(a, b)| [a.to_string(), b.to_string()]).collect();
            row.push(format!("{w:.17e}"));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let r = mana(self);
        serde_json::json!({
            "n": self.n,
            "q": self.q.get(),
            "mana": r.mana,
            "neg_sum": r.neg_sum,
            "min_W": r.min_w,
        })
    }
}

/// `ln Σ_u |W(u)|`, clamped at zero against rounding.
pub fn mana(w: &WignerTable) -> ManaReport {
    let neg_sum = w.neg_sum();
    let m = neg_sum.ln().max(0.0);
    ManaReport {
        mana: m,
        neg_sum,
        n_sites: w.n,
        mana_density: if w.n > 0 { m / w.n as f64 } else { 0.0 },
        min_w: w.min(),
    }
}

/// Upper bound `½ (n ln q − S₂)` on the mana of `rho`.
pub fn jensen_bound(rho: &DensityMatrix) -> f64 {
    0.5 * (rho.n as f64 * (rho.q.get() as f64).ln() - renyi2(rho))
}

/// Per-site maps taking the `(i, j)` entry of a density matrix to the `u` coefficient.
fn forward_site_maps(ps: &PhaseSpace) -> DMatrix<C64> {
    let d = ps.dim().get();
    let d2 = d * d;
    let inv = C64::new(1.0 / d as f64, 0.0);
    DMatrix::from_fn(d2, d2, |u, ij| {
        let (i, j) = (ij / d, ij % d);
        ps.site_op(u)[(j, i)] * inv
    })
}

fn inverse_site_maps(ps: &PhaseSpace) -> DMatrix<C64> {
    let d = ps.dim().get();
    let d2 = d * d;
    DMatrix::from_fn(d2, d2, |ij, u| ps.site_op(u)[(ij / d, ij % d)])
}

/// Apply `m` (size `q² x q²`) along every mode of a tensor with `n` modes of size `q²`.
fn apply_all_modes(buf: &mut [C64], n: usize, d2: usize, m: &DMatrix<C64>) {
    let m: Vec<C64> = (0..d2 * d2).map(|k| m[(k / d2, k % d2)]).collect();
    for k in 0..n {
        let stride = d2.pow((n - 1 - k) as u32);
        let block = stride * d2;
        buf.par_chunks_mut(block).for_each(|chunk| {
            let mut gather = vec![ZERO; d2];
            for inner in 0..stride {
                for (a, g) in gather.iter_mut().enumerate() {
                    *g = chunk[inner + a * stride];
                }
                for r in 0..d2 {
                    let row = &m[r * d2..(r + 1) * d2];
                    let mut acc = ZERO;
                    for (x, y) in row.iter().zip(&gather) {
                        acc += x * y;
                    }
                    chunk[inner + r * stride] = acc;
                }
            }
        });
    }
}

/// Offsets placing digit strings of a `q^n` index into the interleaved `(q²)^n` layout.
fn interleave_offsets(d: usize, n: usize, scale: usize) -> Vec<usize> {
    let d2 = d * d;
    let dim = d.pow(n as u32);
    (0..dim)
        .map(|mut idx| {
            let mut off = 0;
            let mut place = 1;
            for _ in 0..n {
                off += (idx % d) * scale * place;
                idx /= d;
                place *= d2;
            }
            off
        })
        .collect()
}

pub fn wigner_of(rho: &DensityMatrix) -> Result<WignerTable> {
    let ps = PhaseSpace::new(rho.q);
    wigner_with(&ps, rho)
}

/// Like [`wigner_of`] with caller-supplied single-site phase-point operators.
pub fn wigner_with(ps: &PhaseSpace, rho: &DensityMatrix) -> Result<WignerTable> {
    let q = rho.q;
    if ps.dim() != q {
        return invalid("phase space and density matrix disagree on q");
    }
    let d = q.get();
    let n = rho.n;
    let row_off = interleave_offsets(d, n, d);
    let col_off = interleave_offsets(d, n, 1);
    let mut buf = vec![ZERO; q.num_phase_points(n)];
    for (i, ro) in row_off.iter().enumerate() {
        for (j, co) in col_off.iter().enumerate() {
            buf[ro + co] = rho.mat[(i, j)];
        }
    }
    apply_all_modes(&mut buf, n, d * d, &forward_site_maps(ps));
    let max_im = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if max_im > 1e-8 {
        return Err(Error::Numerical(format!("Wigner function has imaginary part {max_im:e}")));
    }
    Ok(WignerTable { q, n, values: buf.into_iter().map(|z| z.re).collect() })
}

/// Reconstruct `ρ = Σ_u W(u) A_u`.
pub fn density_from_wigner(w: &WignerTable) -> DenseOperator {
    let q = w.q;
    let d = q.get();
    let n = w.n;
    let mut buf: Vec<C64> = w.values.iter().map(|&x| C64::new(x, 0.0)).collect();
    apply_all_modes(&mut buf, n, d * d, &inverse_site_maps(&PhaseSpace::new(q)));
    let row_off = interleave_offsets(d, n, d);
    let col_off = interleave_offsets(d, n, 1);
    let dim = q.hilbert_dim(n);
    DMatrix::from_fn(dim, dim, |i, j| buf[row_off[i] + col_off[j]])
}

/// Coefficients `Tr(A_u M)` of an arbitrary operator on the phase-point basis.
pub fn phase_space_coefficients(q: PrimeDim, m: &DenseOperator) -> Result<Vec<C64>> {
    let n = q
        .sites_for_dim(m.nrows())
        .ok_or_else(|| Error::Dimension(format!("dimension {} is not a power of {}", m.nrows(), q.get())))?;
    let d = q.get();
    let row_off = interleave_offsets(d, n, d);
    let col_off = interleave_offsets(d, n, 1);
    let mut buf = vec![ZERO; q.num_phase_points(n)];
    for (i, ro) in row_off.iter().enumerate() {
        for (j, co) in col_off.iter().enumerate() {
            buf[ro + co] = m[(i, j)];
        }
    }
    let ps = PhaseSpace::new(q);
    let scaled = forward_site_maps(&ps) * C64::new(d as f64, 0.0);
    apply_all_modes(&mut buf, n, d * d, &scaled);
    Ok(buf)
}

/// Mana of a density matrix in nats.
pub fn mana_of(rho: &DensityMatrix) -> Result<ManaReport> {
    Ok(mana(&wigner_of(rho)?))
}

/// `m(ρ_AB) − ½[m(ρ_A) + m(ρ_B)]` from mana densities.
pub fn connected_mana_dense(rho_ab: &DensityMatrix, rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> Result<f64> {
    let ab = mana_of(rho_ab)?.mana_density;
    let a = mana_of(rho_a)?.mana_density;
    let b = mana_of(rho_b)?.mana_density;
    Ok(ab - 0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{basis_state, phase_point_operator, stabilizer::t_state};
    use crate::random::{random_density, random_hermitian, rng};

    fn q3() -> PrimeDim {
        PrimeDim::QUTRIT
    }

    fn brute_force(rho: &DensityMatrix) -> Vec<f64> {
        let q = rho.q;
        let scale = 1.0 / q.hilbert_dim(rho.n) as f64;
        (0..q.num_phase_points(rho.n))
            .map(|idx| {
                let a = phase_point_operator(q, &PhasePoint::from_index(q, rho.n, idx));
                (rho.matrix() * a).trace().re * scale
            })
            .collect()
    }

    #[test]
    fn stabilizer_zero_state_is_positive() {
        let rho = DensityMatrix::from_pure(q3(), &basis_state(q3(), &[0])).unwrap();
        let w = wigner_of(&rho).unwrap();
        assert!(w.min() >= -1e-15);
        let r = mana(&w);
        assert!((r.neg_sum - 1.0).abs() < 1e-12);
        assert!(r.mana < 1e-12);
    }

    #[test]
    fn maximally_mixed_is_flat() {
        let w = wigner_of(&DensityMatrix::maximally_mixed(q3(), 1)).unwrap();
        for v in w.values() {
            assert!((v - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn t_state_mana_regression() {
        let psi = t_state(q3()).unwrap();
        let rho = DensityMatrix::from_pure(q3(), &psi).unwrap();
        let w = wigner_of(&rho).unwrap();
        let bf = brute_force(&rho);
        let direct: f64 = bf.iter().map(|x| x.abs()).sum::<f64>().ln();
        assert!(w.min() < 0.0);
        assert!((mana(&w).mana - direct).abs() < 1e-12);
        // frozen from the brute-force nine-point sum
        assert!((mana(&w).mana - T_STATE_MANA).abs() < 1e-12, "{}", mana(&w).mana);
    }

    const T_STATE_MANA: f64 = 0.461_377_044_348_967_04;

    #[test]
    fn factorized_sweep_matches_brute_force() {
        let mut r = rng(11);
        for n in 1..=3 {
            let d = q3().hilbert_dim(n);
            let rho = DensityMatrix::new(q3(), random_density(&mut r, d, 2)).unwrap();
            let w = wigner_of(&rho).unwrap();
            let bf = brute_force(&rho);
            let diff = w.values().iter().zip(&bf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-13, "n={n} diff={diff}");
            assert!((w.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_round_trip() {
        let mut r = rng(3);
        let h = random_hermitian(&mut r, 9);
        let tr = h.trace();
        let coeffs = phase_space_coefficients(q3(), &h).unwrap();
        let mut rebuilt = DMatrix::from_element(9, 9, ZERO);
        for (idx, c) in coeffs.iter().enumerate() {
            rebuilt += phase_point_operator(q3(), &PhasePoint::from_index(q3(), 2, idx)) * (c / C64::new(9.0, 0.0));
        }
        assert!((&rebuilt - &h).iter().fold(0.0f64, |m, z| m.max(z.norm())) < 1e-10);
        let total: C64 = coeffs.iter().sum();
        assert!((total - tr * 9.0).norm() < 1e-10);
        let rho = DensityMatrix::new(q3(), random_density(&mut r, 9, 9)).unwrap();
        let back = density_from_wigner(&wigner_of(&rho).unwrap());
        assert!((&back - rho.matrix()).iter().fold(0.0f64, |m, z| m.max(z.norm())) < 1e-12);
    }

    #[test]
    fn entropies() {
        let pure = DensityMatrix::from_pure(q3(), &basis_state(q3(), &[1])).unwrap();
        assert!(renyi2(&pure).abs() < 1e-14);
        assert!(entanglement_entropy(&pure).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(q3(), 1);
        assert!((renyi2(&mixed) - 3f64.ln()).abs() < 1e-14);
        assert!((entanglement_entropy(&mixed) - 3f64.ln()).abs() < 1e-12);
        let half = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.5, 0.0),
            C64::new(0.5, 0.0),
            ZERO,
        ]));
        let half = DensityMatrix::new(q3(), half).unwrap();
        assert!((renyi2(&half) - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn density_validation() {
        let bad = DMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        assert!(DensityMatrix::new(q3(), bad).is_err());
        let mut m = DMatrix::from_element(3, 3, ZERO);
        m[(0, 0)] = C64::new(1.2, 0.0);
        m[(1, 1)] = C64::new(-0.2, 0.0);
        assert!(matches!(DensityMatrix::new(q3(), m), Err(Error::InvalidDensity(_))));
        let mut m = DMatrix::from_element(3, 3, ZERO);
        m[(0, 1)] = C64::new(0.0, 0.1);
        m[(0, 0)] = ONE_C;
        assert!(matches!(DensityMatrix::new(q3(), m), Err(Error::NotHermitian(_))));
        let mut m = DMatrix::from_element(3, 3, ZERO);
        m[(0, 0)] = C64::new(1.0 + 5e-10, 0.0);
        m[(1, 1)] = C64::new(-5e-10, 0.0);
        let clipped = DensityMatrix::new(q3(), m).unwrap();
        assert!(clipped.eigenvalues().iter().all(|&e| e >= -1e-15));
    }

    const ONE_C: C64 = C64::new(1.0, 0.0);

    #[test]
    fn partial_trace_of_product() {
        let mut r = rng(5);
        let a = DensityMatrix::new(q3(), random_density(&mut r, 3, 3)).unwrap();
        let b = DensityMatrix::new(q3(), random_density(&mut r, 9, 2)).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ra = ab.partial_trace(&[0]).unwrap();
        let rb = ab.partial_trace(&[1, 2]).unwrap();
        let diff = |x: &DensityMatrix, y: &DensityMatrix| (x.matrix() - y.matrix()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        assert!(diff(&ra, &a) < 1e-14);
        assert!(diff(&rb, &b) < 1e-14);
        let r02 = ab.partial_trace(&[0, 2]).unwrap();
        let expect = a.tensor(&b.partial_trace(&[1]).unwrap()).unwrap();
        assert!(diff(&r02, &expect) < 1e-14);
    }

    #[test]
    fn csv_and_summary() {
        let rho = DensityMatrix::maximally_mixed(q3(), 1);
        let w = wigner_of(&rho).unwrap();
        let mut out = Vec::new();
        w.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "u1a,u1a',W");
        assert_eq!(text.lines().count(), 10);
        let s = w.summary_json();
        assert_eq!(s["n"], 1);
        assert_eq!(s["q"], 3);
    }
}
