use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// One MPO site: a `wl x wr` grid of optional `phys x phys` operators.
#[derive(Clone, Debug)]
pub struct MpoTensor {
    pub wl: usize,
    pub wr: usize,
    pub phys: usize,
    ops: Vec<Option<DMatrix<f64>>>,
}

impl MpoTensor {
    pub fn new(wl: usize, wr: usize, phys: usize) -> Self {
        MpoTensor { wl, wr, phys, ops: vec![None; wl * wr] }
    }

    pub fn set(&mut self, alpha: usize, beta: usize, op: DMatrix<f64>) {
        assert_eq!(op.shape(), (self.phys, self.phys));
        self.ops[alpha * self.wr + beta] = Some(op);
    }

    pub fn get(&self, alpha: usize, beta: usize) -> Option<&DMatrix<f64>> {
        self.ops[alpha * self.wr + beta].as_ref()
    }
}

/// Matrix product operator with boundary vectors selecting one row on the left
/// and one column on the right.
#[derive(Clone, Debug)]
pub struct Mpo {
    pub tensors: Vec<MpoTensor>,
    pub left: usize,
    pub right: usize,
}

impl Mpo {
    pub fn new(tensors: Vec<MpoTensor>, left: usize, right: usize) -> Result<Self> {
        if tensors.is_empty() {
            return invalid("empty MPO");
        }
        for w in tensors.windows(2) {
            if w[0].wr != w[1].wl {
                return Err(Error::Dimension("MPO bond mismatch".into()));
            }
        }
        if left >= tensors[0].wl || right >= tensors[tensors.len() - 1].wr {
            return invalid("MPO boundary index out of range");
        }
        Ok(Mpo { tensors, left, right })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn bond_dim(&self) -> usize {
        self.tensors.iter().map(|t| t.wr.max(t.wl)).max().unwrap_or(1)
    }

    /// Dense matrix (site 0 most significant); for small chains only.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let d = self.tensors[0].phys;
        let n = self.len();
        if d.pow(n as u32) > 6561 {
            return Err(Error::RegionTooLarge(format!("dense MPO of {n} sites")));
        }
        // acc[beta] is the operator accumulated with open right index beta
        let w0 = &self.tensors[0];
        let mut acc: Vec<DMatrix<f64>> = (0..w0.wr)
            .map(|b| w0.get(self.left, b).cloned().unwrap_or_else(|| DMatrix::zeros(d, d)))
            .collect();
        for w in &self.tensors[1..] {
            let dim = acc[0].nrows() * d;
            let mut next = vec![DMatrix::zeros(dim, dim); w.wr];
            for (alpha, a) in acc.iter().enumerate() {
                for (beta, nb) in next.iter_mut().enumerate() {
                    if let Some(op) = w.get(alpha, beta) {
                        *nb += a.kronecker(op);
                    }
                }
            }
            acc = next;
        }
        Ok(acc.swap_remove(self.right))
    }
}
