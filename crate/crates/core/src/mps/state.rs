use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// Real three-index tensor `A[a, s, b]` stored column-major (`a` fastest).
///
/// The same buffer is the `(left * phys) x right` and `left x (phys * right)`
/// matrix in column-major order, so both reshapes are free.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<f64>,
}

impl SiteTensor {
    pub fn zeros(left: usize, phys: usize, right: usize) -> Self {
        SiteTensor { left, phys, right, data: vec![0.0; left * phys * right] }
    }

    #[inline]
    pub fn idx(&self, a: usize, s: usize, b: usize) -> usize {
        a + self.left * (s + self.phys * b)
    }

    #[inline]
    pub fn get(&self, a: usize, s: usize, b: usize) -> f64 {
        self.data[self.idx(a, s, b)]
    }

    pub fn left_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left * self.phys, self.right, &self.data)
    }

    pub fn right_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.left, self.phys * self.right, &self.data)
    }

    pub fn from_left_matrix(m: DMatrix<f64>, phys: usize) -> Self {
        let left = m.nrows() / phys;
        SiteTensor { left, phys, right: m.ncols(), data: m.as_slice().to_vec() }
    }

    pub fn from_right_matrix(m: DMatrix<f64>, phys: usize) -> Self {
        let right = m.ncols() / phys;
        SiteTensor { left: m.nrows(), phys, right, data: m.as_slice().to_vec() }
    }

    /// The `left x right` matrix for physical index `s`.
    pub fn slice(&self, s: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.left, self.right, |a, b| self.get(a, s, b))
    }

    pub fn slices(&self) -> Vec<DMatrix<f64>> {
        (0..self.phys).map(|s| self.slice(s)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    /// Relabel the physical index `s -> (s + k) mod phys`.
    pub fn shifted(&self, k: usize) -> Self {
        let mut out = SiteTensor::zeros(self.left, self.phys, self.right);
        for b in 0..self.right {
            for s in 0..self.phys {
                let t = (s + k) % self.phys;
                for a in 0..self.left {
                    let v = self.get(a, s, b);
                    let i = out.idx(a, t, b);
                    out.data[i] = v;
                }
            }
        }
        out
    }
}

/// Singular value decomposition truncated by discarded weight and bond cap.
pub struct Truncated {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub vt: DMatrix<f64>,
    /// Discarded weight relative to the total `Σ s²`.
    pub discarded: f64,
}

pub fn svd_truncate(m: DMatrix<f64>, cutoff: f64, max_bond: usize) -> Result<Truncated> {
    let (rows, cols) = m.shape();
    let svd = m.try_svd(true, true, 1e-15, 500).ok_or_else(|| Error::Numerical(format!("SVD failed on {rows}x{cols} matrix")))?;
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD returned no U".into()))?;
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("SVD returned no V^T".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let total: f64 = sv.iter().map(|x| x * x).sum();
    let mut keep = sv.len().min(max_bond.max(1));
    if total > 0.0 {
        let mut tail = sv[keep..].iter().map(|x| x * x).sum::<f64>();
        while keep > 1 {
            let w = sv[keep - 1] * sv[keep - 1];
            if (tail + w) / total > cutoff {
                break;
            }
            tail += w;
            keep -= 1;
        }
    } else {
        keep = 1;
    }
    let discarded = if total > 0.0 { sv[keep..].iter().map(|x| x * x).sum::<f64>() / total } else { 0.0 };
    let u = DMatrix::from_fn(rows, keep, |i, j| u[(i, order[j])]);
    let vt = DMatrix::from_fn(keep, cols, |i, j| vt[(order[i], j)]);
    Ok(Truncated { u, s: sv[..keep].to_vec(), vt, discarded })
}

/// Open-boundary matrix product state with real tensors and a tracked orthogonality center.
///
/// Sites left of `center` are left-isometric, sites right of it right-isometric.
#[derive(Clone, Debug)]
pub struct MpsState {
    tensors: Vec<SiteTensor>,
    center: usize,
    cutoff: f64,
}

impl MpsState {
    pub fn from_tensors(tensors: Vec<SiteTensor>, center: usize, cutoff: f64) -> Result<Self> {
        if tensors.is_empty() {
            return invalid("MPS needs at least one site");
        }
        if tensors[0].left != 1 || tensors.last().map(|t| t.right) != Some(1) {
            return Err(Error::Dimension("MPS boundary bonds must be 1".into()));
        }
        for w in tensors.windows(2) {
            if w[0].right != w[1].left {
                return Err(Error::Dimension(format!("bond mismatch {} vs {}", w[0].right, w[1].left)));
            }
        }
        if center >= tensors.len() {
            return invalid("center out of range");
        }
        Ok(MpsState { tensors, center, cutoff })
    }

    /// Product state from per-site (unnormalized) local vectors.
    pub fn product_state(locals: &[Vec<f64>]) -> Result<Self> {
        let tensors = locals
            .iter()
            .map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n == 0.0 {
                    return invalid("zero local vector");
                }
                Ok(SiteTensor { left: 1, phys: v.len(), right: 1, data: v.iter().map(|x| x / n).collect() })
            })
            .collect::<Result<Vec<_>>>()?;
        MpsState::from_tensors(tensors, 0, 0.0)
    }

    /// Random normalized MPS with bond dimension at most `chi`.
    pub fn random(rng: &mut impl Rng, n: usize, phys: usize, chi: usize) -> Result<Self> {
        let mut bonds = vec![1usize; n + 1];
        for (k, b) in bonds.iter_mut().enumerate().take(n).skip(1) {
            let from_left = phys.saturating_pow(k as u32);
            let from_right = phys.saturating_pow((n - k) as u32);
            *b = chi.min(from_left).min(from_right);
        }
        let tensors = (0..n)
            .map(|i| {
                let mut t = SiteTensor::zeros(bonds[i], phys, bonds[i + 1]);
                t.data.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                t
            })
            .collect();
        let mut mps = MpsState::from_tensors(tensors, n - 1, 0.0)?;
        mps.move_center(0)?;
        mps.normalize();
        Ok(mps)
    }

    /// Exact MPS of a real state vector (site 0 most significant), left-canonical.
    pub fn from_dense(psi: &[f64], n: usize, phys: usize) -> Result<Self> {
        if psi.len() != phys.pow(n as u32) {
            return Err(Error::Dimension("from_dense: length is not phys^n".into()));
        }
        let mut tensors = Vec::with_capacity(n);
        // rest(a, s_k ... s_{n-1}) with the remaining digits in big-endian order
        let mut left = 1;
        let mut rest = psi.to_vec();
        for k in 0..n {
            let tail = phys.pow((n - k - 1) as u32);
            // rows (a, s_k) with a fastest, cols = remaining digits
            let m = DMatrix::from_fn(left * phys, tail, |r, c| {
                let (a, s) = (r % left, r / left);
                rest[a * phys * tail + s * tail + c]
            });
            if k + 1 == n {
                tensors.push(SiteTensor::from_left_matrix(m, phys));
                break;
            }
            let t = svd_truncate(m, 0.0, usize::MAX)?;
            let keep = t.s.iter().take_while(|&&x| x > 1e-14 * t.s[0]).count().max(1);
            let u = t.u.columns(0, keep).into_owned();
            tensors.push(SiteTensor::from_left_matrix(u, phys));
            let sv = DMatrix::from_fn(keep, tail, |i, j| t.s[i] * t.vt[(i, j)]);
            rest = (0..keep * tail).map(|idx| sv[(idx / tail, idx % tail)]).collect();
            left = keep;
        }
        MpsState::from_tensors(tensors, n - 1, 0.0)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn phys(&self) -> usize {
        self.tensors[0].phys
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn set_cutoff(&mut self, cutoff: f64) {
        self.cutoff = cutoff;
    }

    pub fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &SiteTensor {
        &self.tensors[i]
    }

    /// Replace a tensor without touching the recorded center; callers restore canonical form.
    pub(crate) fn tensor_mut(&mut self, i: usize) -> &mut SiteTensor {
        &mut self.tensors[i]
    }

    pub(crate) fn set_center_unchecked(&mut self, c: usize) {
        self.center = c;
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().take(self.len() - 1).map(|t| t.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn shift_right(&mut self, i: usize) {
        let phys = self.tensors[i].phys;
        let qr = self.tensors[i].left_matrix().qr();
        let (q, r) = (qr.q(), qr.r());
        self.tensors[i] = SiteTensor::from_left_matrix(q, phys);
        let next = &self.tensors[i + 1];
        let m = r * next.right_matrix();
        self.tensors[i + 1] = SiteTensor::from_right_matrix(m, next.phys);
    }

    fn shift_left(&mut self, i: usize) {
        let phys = self.tensors[i].phys;
        let qr = self.tensors[i].right_matrix().transpose().qr();
        let (q, r) = (qr.q(), qr.r());
        self.tensors[i] = SiteTensor::from_right_matrix(q.transpose(), phys);
        let prev = &self.tensors[i - 1];
        let m = prev.left_matrix() * r.transpose();
        self.tensors[i - 1] = SiteTensor::from_left_matrix(m, prev.phys);
    }

    /// Move the orthogonality center by QR sweeps (no truncation).
    pub fn move_center(&mut self, target: usize) -> Result<()> {
        if target >= self.len() {
            return invalid("center target out of range");
        }
        while self.center < target {
            self.shift_right(self.center);
            self.center += 1;
        }
        while self.center > target {
            self.shift_left(self.center);
            self.center -= 1;
        }
        Ok(())
    }

    /// Norm, valid when the canonical form holds.
    pub fn norm(&self) -> f64 {
        self.tensors[self.center].norm()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.tensors[self.center].scale(1.0 / n);
        }
    }

    /// Largest deviation of any site from its required isometry condition.
    pub fn canonical_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, t) in self.tensors.iter().enumerate() {
            let g = if i < self.center {
                let m = t.left_matrix();
                m.transpose() * m
            } else if i > self.center {
                let m = t.right_matrix();
                &m * m.transpose()
            } else {
                continue;
            };
            for r in 0..g.nrows() {
                for c in 0..g.ncols() {
                    let target = if r == c { 1.0 } else { 0.0 };
                    worst = worst.max((g[(r, c)] - target).abs());
                }
            }
        }
        worst
    }

    pub fn check_canonical(&self, tol: f64) -> Result<()> {
        let r = self.canonical_residual();
        if r > tol {
            return Err(Error::NotCanonical(r));
        }
        Ok(())
    }

    /// `<self|other>` by transfer-matrix contraction.
    pub fn overlap(&self, other: &MpsState) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Dimension("overlap: lengths differ".into()));
        }
        let mut e = DMatrix::from_element(1, 1, 1.0);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            let mut next = DMatrix::zeros(a.right, b.right);
            for s in 0..a.phys {
                next += a.slice(s).transpose() * &e * b.slice(s);
            }
            e = next;
        }
        Ok(e[(0, 0)])
    }

    /// Dense amplitudes, site 0 most significant.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let d = self.phys();
        let n = self.len();
        if d.pow(n as u32) > 1 << 24 {
            return Err(Error::RegionTooLarge(format!("{n} sites")));
        }
        // rows: big-endian prefix index, cols: right bond
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        for t in &self.tensors {
            let slices = t.slices();
            let mut next = DMatrix::zeros(acc.nrows() * d, t.right);
            for p in 0..acc.nrows() {
                let row = acc.row(p);
                for (s, sl) in slices.iter().enumerate() {
                    next.row_mut(p * d + s).copy_from(&(row * sl));
                }
            }
            acc = next;
        }
        Ok(acc.column(0).iter().copied().collect())
    }

    /// Apply `(∏_j X_j)^k`, i.e. relabel every physical index by `+k`.
    pub fn global_shift(&self, k: usize) -> MpsState {
        MpsState { tensors: self.tensors.iter().map(|t| t.shifted(k)).collect(), center: self.center, cutoff: self.cutoff }
    }

    /// Bring the MPS to canonical form with center at `target`, truncating with SVDs.
    pub fn compress(&mut self, cutoff: f64, max_bond: usize) -> Result<f64> {
        let n = self.len();
        self.move_center(n - 1)?;
        let mut worst: f64 = 0.0;
        for i in (1..n).rev() {
            let t = &self.tensors[i];
            let phys = t.phys;
            let tr = svd_truncate(t.right_matrix(), cutoff, max_bond)?;
            worst = worst.max(tr.discarded);
            self.tensors[i] = SiteTensor::from_right_matrix(tr.vt, phys);
            let us = DMatrix::from_fn(tr.u.nrows(), tr.s.len(), |r, c| tr.u[(r, c)] * tr.s[c]);
            let prev = &self.tensors[i - 1];
            self.tensors[i - 1] = SiteTensor::from_left_matrix(prev.left_matrix() * us, prev.phys);
        }
        self.center = 0;
        self.normalize();
        Ok(worst)
    }

    /// Symmetric sum `Σ_k (∏X)^k |self>`, normalized and recompressed.
    pub fn cat_state(&self) -> Result<MpsState> {
        let n = self.len();
        let d = self.phys();
        let copies: Vec<MpsState> = (0..d).map(|k| self.global_shift(k)).collect();
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            let parts: Vec<&SiteTensor> = copies.iter().map(|c| &c.tensors[i]).collect();
            let left: usize = if i == 0 { 1 } else { parts.iter().map(|t| t.left).sum() };
            let right: usize = if i == n - 1 { 1 } else { parts.iter().map(|t| t.right).sum() };
            let mut t = SiteTensor::zeros(left, d, right);
            let (mut lo, mut ro) = (0, 0);
            for p in &parts {
                for b in 0..p.right {
                    for s in 0..d {
                        for a in 0..p.left {
                            let (aa, bb) = (if i == 0 { a } else { a + lo }, if i == n - 1 { b } else { b + ro });
                            let idx = t.idx(aa, s, bb);
                            t.data[idx] = p.get(a, s, b);
                        }
                    }
                }
                if i != 0 {
                    lo += p.left;
                }
                if i != n - 1 {
                    ro += p.right;
                }
            }
            tensors.push(t);
        }
        let mut cat = MpsState { tensors, center: 0, cutoff: self.cutoff };
        // The block sum is not canonical; a left QR sweep restores it before truncating.
        cat.center = 0;
        for i in 0..n - 1 {
            cat.shift_right(i);
        }
        cat.center = n - 1;
        let norm = cat.norm();
        if norm < 1e-12 {
            return Err(Error::Numerical("cat superposition vanishes".into()));
        }
        cat.compress(1e-14, usize::MAX)?;
        Ok(cat)
    }

    /// Singular values across bond `b` (between sites `b` and `b + 1`).
    pub fn schmidt_values(&mut self, bond: usize) -> Result<Vec<f64>> {
        if bond + 1 >= self.len() {
            return invalid("bond index out of range");
        }
        self.move_center(bond)?;
        let t = svd_truncate(self.tensors[bond].left_matrix(), 0.0, usize::MAX)?;
        Ok(t.s)
    }

    /// Von Neumann entanglement entropy across `bond`.
    pub fn bond_entropy(&mut self, bond: usize) -> Result<f64> {
        let s = self.schmidt_values(bond)?;
        let total: f64 = s.iter().map(|x| x * x).sum();
        Ok(crate::wigner::entropy_of_spectrum(&s.iter().map(|x| x * x / total).collect::<Vec<_>>()))
    }

    /// `<O_i>` for a real diagonal single-site operator.
    pub fn expect_diag(&mut self, i: usize, diag: &[f64]) -> Result<f64> {
        self.move_center(i)?;
        let t = &self.tensors[i];
        let mut acc = 0.0;
        for b in 0..t.right {
            for (s, &w) in diag.iter().enumerate() {
                for a in 0..t.left {
                    acc += w * t.get(a, s, b).powi(2);
                }
            }
        }
        Ok(acc)
    }

    /// `<O_i>` for a general real single-site operator.
    pub fn expect_local(&mut self, i: usize, op: &DMatrix<f64>) -> Result<f64> {
        self.move_center(i)?;
        let t = &self.tensors[i];
        let sl = t.slices();
        let mut acc = 0.0;
        for (s, ms) in sl.iter().enumerate() {
            for (sp, msp) in sl.iter().enumerate() {
                let o = op[(s, sp)];
                if o != 0.0 {
                    acc += o * ms.dot(msp);
                }
            }
        }
        Ok(acc)
    }

    /// `<D_i E_j>` for all `j > i` with real diagonal `D`, `E`.
    pub fn diag_correlator_row(&mut self, i: usize, d_op: &[f64], e_op: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        self.move_center(i)?;
        let t = &self.tensors[i];
        let mut env = DMatrix::zeros(t.right, t.right);
        for (s, &w) in d_op.iter().enumerate() {
            let sl = t.slice(s);
            env += sl.transpose() * &sl * w;
        }
        let mut out = Vec::with_capacity(n - i - 1);
        for j in i + 1..n {
            let t = &self.tensors[j];
            let slices = t.slices();
            let mut val = 0.0;
            let mut next = DMatrix::zeros(t.right, t.right);
            for (s, sl) in slices.iter().enumerate() {
                let m = sl.transpose() * &env * sl;
                val += e_op[s] * m.trace();
                next += m;
            }
            out.push(val);
            env = next;
        }
        Ok(out)
    }
}
