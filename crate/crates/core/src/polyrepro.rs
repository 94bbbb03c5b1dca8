//! Stable local polynomial reproductions: weight vectors `a(·, z)` supported
//! on the centers inside `B(z, K·h)` that reproduce all polynomials up to a
//! given degree exactly at `z`.
//!
//! Weights are the minimum-ℓ2-norm solution of the local reproduction
//! constraints, computed from a column-pivoted QR of the local Vandermonde
//! matrix in a basis shifted to `z` and scaled by the stencil radius. The
//! weight rule is deterministic per `z`; points exactly on the stencil
//! boundary are included (closed ball).

use crate::geometry::PointSet;
use crate::linalg::{householder_qr, LinalgError};
use crate::poly::{basis_dimension, PolynomialBasis};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReproError {
    #[error(
        "stencil at z={z:?} has {found} points but degree {degree} needs {needed} \
         unisolvent points; consider a larger locality factor K"
    )]
    StencilTooSmall { z: Vec<f64>, found: usize, needed: usize, degree: i64 },
    #[error(
        "stencil at z={z:?} is not unisolvent for degree {degree} (rank {rank} < {needed}); \
         consider a larger locality factor K"
    )]
    NotUnisolvent { z: Vec<f64>, rank: usize, needed: usize, degree: i64 },
    #[error("reproduction residual {residual:.3e} exceeds tolerance {tol:.1e} at z={z:?}")]
    Conditioning { z: Vec<f64>, residual: f64, tol: f64 },
    #[error("no locality candidate from {candidates:?} gives unisolvent stencils with condition below {cond_max:.1e}")]
    NoWorkableLocality { candidates: Vec<f64>, cond_max: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Configuration of a local polynomial reproduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproConfig {
    /// Reproduction degree L (exactness on all polynomials of degree <= L).
    pub degree: i64,
    /// Locality factor K: stencils are the centers within K·h of z.
    pub locality: f64,
    /// Fill distance h of the center set.
    pub fill: f64,
    /// Relative rank floor for the local Vandermonde factorization.
    pub rank_floor: f64,
}

impl ReproConfig {
    pub fn new(degree: i64, locality: f64, fill: f64) -> Self {
        ReproConfig { degree, locality, fill, rank_floor: 1e-12 }
    }

    pub fn radius(&self) -> f64 {
        self.locality * self.fill
    }
}

/// Reproduction residual tolerance enforced at construction.
pub const REPRODUCTION_TOL: f64 = 1e-9;

/// Sparse local weight vector at an evaluation point `z`.
#[derive(Debug, Clone)]
pub struct LocalReproduction {
    pub z: Vec<f64>,
    /// Indices into the center set; all within `radius` of `z`.
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub radius: f64,
    /// Diagonal condition proxy of the local Vandermonde factor.
    pub vandermonde_condition: f64,
}

impl LocalReproduction {
    /// ℓ1 norm of the weights (the per-point stability constant).
    pub fn sum_abs(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

fn local_basis(z: &[f64], radius: f64, degree: i64) -> PolynomialBasis {
    PolynomialBasis::new(z.to_vec(), vec![radius.max(1e-300); z.len()], degree)
}

/// Build the minimum-norm local reproduction weights at `z`.
pub fn build_local_weights(
    ps: &PointSet,
    cfg: &ReproConfig,
    z: &[f64],
) -> Result<LocalReproduction, ReproError> {
    let d = ps.dim();
    debug_assert_eq!(z.len(), d);
    let radius = cfg.radius();
    let indices = ps.within_radius(z, radius);
    let needed = basis_dimension(d, cfg.degree);
    if indices.len() < needed {
        return Err(ReproError::StencilTooSmall {
            z: z.to_vec(),
            found: indices.len(),
            needed,
            degree: cfg.degree,
        });
    }

    let basis = local_basis(z, radius, cfg.degree);
    let nloc = indices.len();
    let mut v = DMatrix::<f64>::zeros(nloc, needed);
    let mut row = vec![0.0; needed];
    for (i, &pi) in indices.iter().enumerate() {
        basis.eval_into(ps.point(pi), &mut row);
        for (j, val) in row.iter().enumerate() {
            v[(i, j)] = *val;
        }
    }

    let qr = householder_qr(&v, true);
    let rank = qr.rank(cfg.rank_floor);
    if rank < needed {
        return Err(ReproError::NotUnisolvent {
            z: z.to_vec(),
            rank,
            needed,
            degree: cfg.degree,
        });
    }

    let rhs = basis.eval(z);
    let weights = qr.min_norm_transpose_solve(&rhs)?;

    // verify exact reproduction in the local basis
    let mut residual = 0.0f64;
    for j in 0..needed {
        let mut s = -rhs[j];
        for i in 0..nloc {
            s += weights[i] * v[(i, j)];
        }
        residual = residual.max(s.abs());
    }
    if residual > REPRODUCTION_TOL {
        return Err(ReproError::Conditioning {
            z: z.to_vec(),
            residual,
            tol: REPRODUCTION_TOL,
        });
    }

    Ok(LocalReproduction {
        z: z.to_vec(),
        indices,
        weights,
        radius,
        vandermonde_condition: qr.diag_condition(),
    })
}

/// Max residual of the reproduction conditions over the shifted/scaled
/// monomial basis of degree `degree`.
pub fn check_reproduction(rep: &LocalReproduction, ps: &PointSet, degree: i64) -> f64 {
    let basis = local_basis(&rep.z, rep.radius, degree);
    let target = basis.eval(&rep.z);
    let mut vals = vec![0.0; basis.len()];
    let mut acc = vec![0.0; basis.len()];
    for (&pi, &w) in rep.indices.iter().zip(&rep.weights) {
        basis.eval_into(ps.point(pi), &mut vals);
        for (a, v) in acc.iter_mut().zip(&vals) {
            *a += w * v;
        }
    }
    acc.iter()
        .zip(&target)
        .map(|(a, t)| (a - t).abs())
        .fold(0.0, f64::max)
}

/// Empirical stability constant: max of `Σ|a(ξ, z)|` over the probe points.
pub fn stability_constant(
    ps: &PointSet,
    cfg: &ReproConfig,
    probes: &[Vec<f64>],
) -> Result<f64, ReproError> {
    let mut gamma = 0.0f64;
    for z in probes {
        let rep = build_local_weights(ps, cfg, z)?;
        gamma = gamma.max(rep.sum_abs());
    }
    Ok(gamma)
}

/// Smallest locality factor from `candidates` whose stencils are unisolvent
/// at every probe with Vandermonde condition below `cond_max`.
pub fn select_locality(
    ps: &PointSet,
    degree: i64,
    fill: f64,
    probes: &[Vec<f64>],
    candidates: &[f64],
    cond_max: f64,
) -> Result<f64, ReproError> {
    'cand: for &k in candidates {
        let cfg = ReproConfig::new(degree, k, fill);
        for z in probes {
            match build_local_weights(ps, &cfg, z) {
                Ok(rep) if rep.vandermonde_condition < cond_max => {}
                _ => continue 'cand,
            }
        }
        return Ok(k);
    }
    Err(ReproError::NoWorkableLocality { candidates: candidates.to_vec(), cond_max })
}

/// Default locality candidates.
pub const LOCALITY_CANDIDATES: [f64; 4] = [2.0, 3.0, 4.0, 6.0];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    fn uniform_1d(n: usize) -> PointSet {
        let coords: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        PointSet::from_coords(Domain::unit_cube(1), coords, 10).unwrap()
    }

    #[test]
    fn two_point_linear_weights() {
        let ps = PointSet::from_coords(Domain::unit_cube(1), vec![0.0, 1.0], 8).unwrap();
        let cfg = ReproConfig::new(1, 2.0, 0.5);
        let rep = build_local_weights(&ps, &cfg, &[0.5]).unwrap();
        assert_eq!(rep.indices, vec![0, 1]);
        assert!((rep.weights[0] - 0.5).abs() < 1e-12);
        assert!((rep.weights[1] - 0.5).abs() < 1e-12);

        let rep = build_local_weights(&ps, &cfg, &[0.0]).unwrap();
        assert!((rep.weights[0] - 1.0).abs() < 1e-12);
        assert!(rep.weights[1].abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one() {
        let ps = uniform_1d(33);
        let cfg = ReproConfig::new(2, 3.0, 1.0 / 32.0);
        for i in 0..=50 {
            let z = [i as f64 / 50.0];
            let rep = build_local_weights(&ps, &cfg, &z).unwrap();
            let sum: f64 = rep.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-10, "z={z:?} sum={sum}");
        }
    }

    #[test]
    fn reproduction_residual_is_tiny_and_detects_corruption() {
        let ps = uniform_1d(17);
        let cfg = ReproConfig::new(2, 3.0, 1.0 / 16.0);
        let mut rep = build_local_weights(&ps, &cfg, &[0.43]).unwrap();
        assert!(check_reproduction(&rep, &ps, 2) <= 1e-9);
        rep.weights[0] += 1e-3;
        assert!(check_reproduction(&rep, &ps, 2) >= 1e-4);
    }

    #[test]
    fn locality_is_structural() {
        let ps = uniform_1d(33);
        let cfg = ReproConfig::new(1, 2.0, 1.0 / 32.0);
        let z = [0.47];
        let rep = build_local_weights(&ps, &cfg, &z).unwrap();
        for &i in &rep.indices {
            let dist = (ps.point(i)[0] - z[0]).abs();
            assert!(dist <= rep.radius + 1e-15);
        }
    }

    #[test]
    fn uniform_grid_degree_one_is_convex() {
        // h = spacing/2, so K = 2 gives two-point stencils between nodes and
        // the weights are barycentric: Γ = 1
        let ps = uniform_1d(17);
        let cfg = ReproConfig::new(1, 2.0, 0.5 / 16.0);
        let probes: Vec<Vec<f64>> = (0..=100).map(|i| vec![i as f64 / 100.0]).collect();
        let gamma = stability_constant(&ps, &cfg, &probes).unwrap();
        assert!(gamma <= 1.0 + 1e-9, "gamma = {gamma}");
    }

    #[test]
    fn jittered_grid_degree_two_gamma_bounded() {
        let ps = crate::geometry::PointSet::generate(&Domain::unit_cube(1), 6, 0.3, 3, 10_000, 10)
            .unwrap();
        let h = ps.fill_distance();
        let probes: Vec<Vec<f64>> = (0..500).map(|i| vec![i as f64 / 499.0]).collect();
        let k = select_locality(&ps, 2, h, &probes, &LOCALITY_CANDIDATES, 1e8).unwrap();
        let cfg = ReproConfig::new(2, k, h);
        let gamma = stability_constant(&ps, &cfg, &probes).unwrap();
        assert!(gamma <= 5.0, "gamma = {gamma} with K = {k}");
    }

    #[test]
    fn translation_and_scaling_covariance() {
        let pts = [0.0, 0.13, 0.29, 0.41, 0.55, 0.68, 0.79, 0.9, 1.0];
        let ps = PointSet::from_coords(Domain::unit_cube(1), pts.to_vec(), 10).unwrap();
        let h = ps.fill_distance();
        let cfg = ReproConfig::new(2, 3.0, h);
        let z = [0.37];
        let rep = build_local_weights(&ps, &cfg, &z).unwrap();

        // translate everything by 10
        let shifted: Vec<f64> = pts.iter().map(|v| v + 10.0).collect();
        let dom = Domain::new(vec![10.0], vec![11.0]).unwrap();
        let ps_t = PointSet::from_coords(dom, shifted, 10).unwrap();
        let rep_t = build_local_weights(&ps_t, &cfg, &[10.37]).unwrap();
        assert_eq!(rep.indices, rep_t.indices);
        for (a, b) in rep.weights.iter().zip(&rep_t.weights) {
            assert!((a - b).abs() < 1e-12);
        }

        // scale everything by 4 (h scales accordingly)
        let scaled: Vec<f64> = pts.iter().map(|v| v * 4.0).collect();
        let dom = Domain::new(vec![0.0], vec![4.0]).unwrap();
        let ps_s = PointSet::from_coords(dom, scaled, 10).unwrap();
        let cfg_s = ReproConfig::new(2, 3.0, 4.0 * h);
        let rep_s = build_local_weights(&ps_s, &cfg_s, &[4.0 * 0.37]).unwrap();
        assert_eq!(rep.indices, rep_s.indices);
        for (a, b) in rep.weights.iter().zip(&rep_s.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stencil_failures_are_reported() {
        let ps = uniform_1d(5);
        // radius too small to capture enough points for degree 3
        let cfg = ReproConfig::new(3, 2.0, 0.05);
        let err = build_local_weights(&ps, &cfg, &[0.5]).unwrap_err();
        assert!(matches!(err, ReproError::StencilTooSmall { .. }));
    }

    #[test]
    fn degenerate_stencil_is_not_unisolvent() {
        // 2-d points on a line cannot reproduce degree-1 in both variables
        let coords = vec![0.1, 0.5, 0.3, 0.5, 0.5, 0.5, 0.7, 0.5, 0.9, 0.5];
        let ps = PointSet::from_coords(Domain::unit_cube(2), coords, 6).unwrap();
        let cfg = ReproConfig::new(1, 10.0, 0.2);
        let err = build_local_weights(&ps, &cfg, &[0.5, 0.5]).unwrap_err();
        assert!(matches!(err, ReproError::NotUnisolvent { .. }));
    }

    #[test]
    fn weight_continuity_within_fixed_stencil() {
        let ps = uniform_1d(33);
        let cfg = ReproConfig::new(2, 3.0, 1.0 / 32.0);
        // walk a short segment that keeps the stencil fixed
        let mut prev: Option<LocalReproduction> = None;
        for i in 0..=20 {
            let z = [0.4001 + 0.0008 * i as f64];
            let rep = build_local_weights(&ps, &cfg, &z).unwrap();
            if let Some(p) = &prev {
                if p.indices == rep.indices {
                    for (a, b) in p.weights.iter().zip(&rep.weights) {
                        assert!((a - b).abs() < 0.05, "weights jumped within fixed stencil");
                    }
                }
            }
            prev = Some(rep);
        }
    }
}
