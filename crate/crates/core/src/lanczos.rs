//! Lowest eigenpair of a real symmetric operator by restarted Lanczos.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LanczosConfig {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Convergence threshold on the residual norm `‖Hv − Ev‖`.
    pub tol: f64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig { krylov_dim: 40, max_restarts: 200, tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Deterministic pseudo-random start vector, used when no guess is supplied.
pub fn default_start(dim: usize) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    (0..dim)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Lowest eigenpair of the operator `apply(x, y): y = H x` on `R^dim`.
///
/// Returns the best Ritz pair after the restart budget; callers inspect `residual`.
pub fn lowest_eigenpair<F>(dim: usize, apply: F, start: Option<&[f64]>, cfg: &LanczosConfig) -> Result<Eigenpair>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Err(Error::InvalidArgument("Lanczos on an empty space".into()));
    }
    let mut v0: Vec<f64> = match start {
        Some(s) if s.len() == dim && norm(s) > 1e-300 => s.to_vec(),
        _ => default_start(dim),
    };
    let n0 = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= n0);

    if dim == 1 {
        let mut y = vec![0.0];
        apply(&v0, &mut y);
        return Ok(Eigenpair { value: y[0], vector: vec![1.0], residual: 0.0 });
    }

    let m = cfg.krylov_dim.min(dim).max(2);
    let mut best = Eigenpair { value: f64::INFINITY, vector: v0.clone(), residual: f64::INFINITY };
    for _ in 0..=cfg.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut w = vec![0.0; dim];
        for j in 0..m {
            apply(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    axpy(-c, b, &mut w);
                }
            }
            let bnorm = norm(&w);
            if j + 1 == m || bnorm < 1e-13 {
                if bnorm < 1e-13 {
                    beta.push(0.0);
                }
                break;
            }
            beta.push(bnorm);
            let next: Vec<f64> = w.iter().map(|x| x / bnorm).collect();
            basis.push(next);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::Numerical("empty Krylov space".into()))?;
        let coeffs: DVector<f64> = eig.eigenvectors.column(imin).into_owned();
        let mut x = vec![0.0; dim];
        for (c, b) in coeffs.iter().zip(&basis) {
            axpy(*c, b, &mut x);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mut hx = vec![0.0; dim];
        apply(&x, &mut hx);
        let e = dot(&x, &hx);
        axpy(-e, &x, &mut hx);
        let res = norm(&hx);
        best = Eigenpair { value: e, vector: x.clone(), residual: res };
        if res < cfg.tol || k < m {
            return Ok(best);
        }
        v0 = x;
    }
    Ok(best)
}

/// Lowest eigenpair of a dense real symmetric matrix.
pub fn dense_lowest(h: &DMatrix<f64>) -> Eigenpair {
    let eig = h.clone().symmetric_eigen();
    let (imin, &value) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    Eigenpair { value, vector: eig.eigenvectors.column(imin).iter().copied().collect(), residual: 0.0 }
}
