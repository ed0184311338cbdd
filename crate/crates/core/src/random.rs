//! Seeded random states, unitaries, and density matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qudit::{DenseOperator, DenseState, C64};

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseOperator {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random pure state.
pub fn random_state(rng: &mut impl Rng, dim: usize) -> DenseState {
    let v = DVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase correction.
pub fn haar_unitary(rng: &mut impl Rng, dim: usize) -> DenseOperator {
    let qr = ginibre(rng, dim, dim).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random mixed state `G G^† / Tr(G G^†)` with `G` a `dim x rank` Ginibre matrix.
pub fn random_density(rng: &mut impl Rng, dim: usize, rank: usize) -> DenseOperator {
    let g = ginibre(rng, dim, rank.max(1));
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    let rho = rho / tr;
    // symmetrize away rounding so Hermiticity checks are exact
    (&rho + rho.adjoint()) * C64::new(0.5, 0.0)
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> DenseOperator {
    let g = ginibre(rng, dim, dim);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{hermiticity_defect, unitarity_defect};

    #[test]
    fn haar_unitary_is_unitary() {
        let mut r = rng(1);
        for d in [3, 9, 27] {
            assert!(unitarity_defect(&haar_unitary(&mut r, d)) < 1e-12);
        }
    }

    #[test]
    fn random_density_valid() {
        let mut r = rng(2);
        let rho = random_density(&mut r, 9, 3);
        assert!(hermiticity_defect(&rho) < 1e-15);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let eig = rho.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > -1e-12));
        assert_eq!(eig.iter().filter(|&&e| e > 1e-10).count(), 3);
    }

    #[test]
    fn seeded_is_deterministic() {
        let a = random_state(&mut rng(7), 9);
        let b = random_state(&mut rng(7), 9);
        assert_eq!(a, b);
    }
}
