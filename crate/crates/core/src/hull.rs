//! Frobenius distance from a density matrix to the stabilizer polytope
//! (convex hull of pure stabilizer states), by away-step Frank–Wolfe.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::qudit::stabilizer::stabilizer_states;
use crate::qudit::{projector, DenseOperator, PrimeDim};
use crate::wigner::DensityMatrix;

#[derive(Clone, Copy, Debug)]
pub struct HullConfig {
    /// Stop once the Frank–Wolfe gap of `‖ρ − σ‖²_F` falls below this.
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for HullConfig {
    fn default() -> Self {
        HullConfig { gap_tol: 1e-6, max_iter: 200_000 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HullDistance {
    pub distance: f64,
    /// Final duality gap; `distance² − gap` lower-bounds the true squared distance.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Mixture weights over the enumerated stabilizer states.
    pub weights: Vec<f64>,
}

/// Precomputed vertex data for one register size.
pub struct StabilizerPolytope {
    q: PrimeDim,
    n: usize,
    vertices: Vec<DenseOperator>,
    gram: DMatrix<f64>,
}

fn frob(a: &DenseOperator, b: &DenseOperator) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

impl StabilizerPolytope {
    pub fn new(q: PrimeDim, n: usize) -> Result<Self> {
        let vertices: Vec<DenseOperator> = stabilizer_states(q, n)?.iter().map(projector).collect();
        let m = vertices.len();
        let gram = DMatrix::from_fn(m, m, |i, j| frob(&vertices[i], &vertices[j]));
        Ok(StabilizerPolytope { q, n, vertices, gram })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, i: usize) -> &DenseOperator {
        &self.vertices[i]
    }

    /// The mixture `Σ w_i |s_i><s_i|`.
    pub fn mixture(&self, weights: &[f64]) -> DenseOperator {
        let d = self.vertices[0].nrows();
        let mut out = DenseOperator::zeros(d, d);
        for (w, v) in weights.iter().zip(&self.vertices) {
            if *w != 0.0 {
                out += v * crate::qudit::C64::new(*w, 0.0);
            }
        }
        out
    }

    /// Minimize `f(w) = ‖ρ − Σ w_i V_i‖²_F` over the simplex.
    pub fn distance(&self, rho: &DensityMatrix, cfg: &HullConfig) -> Result<HullDistance> {
        if rho.q() != self.q || rho.n_sites() != self.n {
            return invalid("state and polytope registers differ");
        }
        let m = self.n_vertices();
        let b = DVector::from_iterator(m, self.vertices.iter().map(|v| frob(v, rho.matrix())));
        let rr = frob(rho.matrix(), rho.matrix());

        // start at the vertex closest to rho
        let start = (0..m)
            .min_by(|&i, &j| (self.gram[(i, i)] - 2.0 * b[i]).total_cmp(&(self.gram[(j, j)] - 2.0 * b[j])))
            .expect("non-empty polytope");
        let mut w = DVector::zeros(m);
        w[start] = 1.0;
        let mut gw = self.gram.column(start).into_owned();
        let mut gap = f64::INFINITY;
        let mut iters = 0;
        while iters < cfg.max_iter {
            iters += 1;
            // gradient / 2 in weight space
            let grad = &gw - &b;
            let wg = w.dot(&grad);
            let (fw, fw_score) = argmin(grad.iter().copied());
            let (away, away_score) = argmax(grad.iter().enumerate().filter(|(i, _)| w[*i] > 0.0).map(|(i, g)| (i, *g)));
            gap = 2.0 * (wg - fw_score);
            if gap < cfg.gap_tol {
                break;
            }
            let away_gap = away_score - wg;
            // direction d in weight space and the Gram products needed for the line search
            let (dir_dot_grad, dir_norm2, gamma_max, toward) = if wg - fw_score >= away_gap {
                let d_norm2 = self.gram[(fw, fw)] - 2.0 * gw[fw] + w.dot(&gw);
                (fw_score - wg, d_norm2, 1.0, true)
            } else {
                let wa = w[away];
                let d_norm2 = w.dot(&gw) - 2.0 * gw[away] + self.gram[(away, away)];
                (wg - away_score, d_norm2, wa / (1.0 - wa), false)
            };
            if dir_norm2 <= 0.0 {
                break;
            }
            let gamma = (-dir_dot_grad / dir_norm2).clamp(0.0, gamma_max);
            if toward {
                w *= 1.0 - gamma;
                w[fw] += gamma;
                gw = &gw * (1.0 - gamma) + self.gram.column(fw) * gamma;
            } else {
                w *= 1.0 + gamma;
                w[away] -= gamma;
                if gamma == gamma_max {
                    w[away] = 0.0;
                }
                gw = &gw * (1.0 + gamma) - self.gram.column(away) * gamma;
            }
            if iters % 1000 == 0 {
                gw = &self.gram * &w;
            }
        }
        let f = (w.dot(&(&self.gram * &w)) - 2.0 * w.dot(&b) + rr).max(0.0);
        Ok(HullDistance { distance: f.sqrt(), gap, iterations: iters, converged: gap < cfg.gap_tol, weights: w.iter().copied().collect() })
    }
}

fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
}

fn argmax(it: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    it.fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
}

/// Distance to the stabilizer hull for one or two qutrits.
pub fn stab_hull_distance(rho: &DensityMatrix) -> Result<HullDistance> {
    let n = rho.n_sites();
    if n == 0 || n > 2 {
        return invalid(format!("hull distance supports 1 or 2 sites, got {n}"));
    }
    StabilizerPolytope::new(rho.q(), n)?.distance(rho, &HullConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::stabilizer::t_state;
    use crate::random::{random_density, rng};
    use rand::Rng;

    /// Frobenius distance of the T state to the 12-vertex polytope, from an
    /// independent quadratic-program solve.
    const T_STATE_HULL_DISTANCE: f64 = 0.361_640_051_920_944_6;

    #[test]
    fn stabilizer_states_have_zero_distance() {
        let q = PrimeDim::QUTRIT;
        let poly = StabilizerPolytope::new(q, 1).unwrap();
        for i in [0, 5, 11] {
            let rho = DensityMatrix::new(q, poly.vertex(i).clone()).unwrap();
            assert!(poly.distance(&rho, &HullConfig::default()).unwrap().distance < 1e-6);
        }
        let mixed = DensityMatrix::maximally_mixed(q, 1);
        assert!(poly.distance(&mixed, &HullConfig::default()).unwrap().distance < 1e-3);
    }

    #[test]
    fn t_state_distance_is_frozen() {
        let q = PrimeDim::QUTRIT;
        let rho = DensityMatrix::from_pure(q, &t_state(q).unwrap()).unwrap();
        let d = stab_hull_distance(&rho).unwrap();
        assert!(d.converged);
        assert!((d.distance - T_STATE_HULL_DISTANCE).abs() < 1e-5, "{}", d.distance);
    }

    #[test]
    fn random_mixtures_never_beat_the_optimum() {
        let q = PrimeDim::QUTRIT;
        let poly = StabilizerPolytope::new(q, 1).unwrap();
        let rho = DensityMatrix::from_pure(q, &t_state(q).unwrap()).unwrap();
        let best = poly.distance(&rho, &HullConfig::default()).unwrap().distance;
        let mut r = rng(9);
        for _ in 0..2000 {
            let mut w: Vec<f64> = (0..12).map(|_| -r.random::<f64>().ln()).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let d = (rho.matrix() - poly.mixture(&w)).norm();
            assert!(d >= best - 1e-6);
        }
    }

    #[test]
    fn distance_is_convex_along_segments() {
        let q = PrimeDim::QUTRIT;
        let poly = StabilizerPolytope::new(q, 1).unwrap();
        let mut r = rng(10);
        let cfg = HullConfig { gap_tol: 1e-10, ..HullConfig::default() };
        for _ in 0..5 {
            let a = random_density(&mut r, 3, 1);
            let b = random_density(&mut r, 3, 1);
            let da = poly.distance(&DensityMatrix::new(q, a.clone()).unwrap(), &cfg).unwrap().distance;
            let db = poly.distance(&DensityMatrix::new(q, b.clone()).unwrap(), &cfg).unwrap().distance;
            let mid = (a + b) * crate::qudit::C64::new(0.5, 0.0);
            let dm = poly.distance(&DensityMatrix::new(q, mid).unwrap(), &cfg).unwrap().distance;
            assert!(dm <= 0.5 * (da + db) + 1e-5);
        }
    }
}
