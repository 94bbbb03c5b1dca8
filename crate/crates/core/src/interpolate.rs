//! Kernel interpolation with conditionally positive definite kernels: the
//! symmetric saddle-point system
//!
//! ```text
//! [ Φ  P ] [a]   [ f|_Ξ ]
//! [ Pᵀ 0 ] [b] = [  0   ]
//! ```
//!
//! with `Φ_{ξζ} = φ(ξ-ζ)` and `P` the evaluation matrix of the polynomial
//! basis of degree below the kernel's CPD order. Includes power functions,
//! the constrained minimum eigenvalue of `Φ`, discrete native seminorms, and
//! the native-seminorm error of convolution-type targets.

use crate::geometry::{GeometryError, PointSet};
use crate::kernels::{KernelError, KernelSpec};
use crate::linalg::{
    comp_sum, householder_qr, ldlt_bunch_kaufman, one_norm, LdltFactor, LinalgError,
};
use crate::poly::{Polynomial, PolynomialBasis};
use crate::quad::QuadratureRule;
use crate::quasiinterp::{native_energy, QuasiError, TargetFunction};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InterpolateError {
    #[error("center set is not unisolvent for polynomials of degree {degree} (rank {rank} < {needed})")]
    Unisolvency { degree: i64, rank: usize, needed: usize },
    #[error("system solve failed the residual check: residual {residual:.3e} > {tol:.1e} (1-norm condition estimate {cond:.3e})")]
    Conditioning { residual: f64, tol: f64, cond: f64 },
    #[error("quadratic form is negative beyond round-off: {value:.3e}")]
    NotPositive { value: f64 },
    #[error("no constrained directions: n = {n} <= polynomial dimension {basis}")]
    NoConstrainedDirections { n: usize, basis: usize },
    #[error("native-seminorm quadrature cannot resolve the error: squared difference {value:.3e} below -{floor:.3e}")]
    QuadratureResolution { value: f64, floor: f64 },
    #[error("rhs has {got} values, system has {expected} centers")]
    RhsSize { got: usize, expected: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Quasi(#[from] QuasiError),
}

/// Relative residual tolerance of the saddle solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

/// Assembled (unfactored) saddle-point system.
#[derive(Debug)]
pub struct SaddleSystem {
    spec: KernelSpec,
    points: PointSet,
    basis: PolynomialBasis,
    phi: DMatrix<f64>,
    p: DMatrix<f64>,
}

/// Assemble the collocation system for a kernel and center set. Fails if the
/// centers are not unisolvent for the kernel's polynomial degree.
pub fn assemble_system(spec: &KernelSpec, ps: &PointSet) -> Result<SaddleSystem, InterpolateError> {
    let n = ps.n();
    if n >= 2 {
        // distinctness; PointSet construction already rejects duplicates
        ps.separation_radius()?;
    }
    let props = spec.properties();
    let degree = props.cpd_order as i64 - 1;
    let basis = PolynomialBasis::for_domain(ps.domain(), degree);
    let nb = basis.len();

    let mut phi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let pi = ps.point(i);
        phi[(i, i)] = spec.eval(0.0);
        for j in 0..i {
            let pj = ps.point(j);
            let r = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let v = spec.eval(r);
            phi[(i, j)] = v;
            phi[(j, i)] = v;
        }
    }

    let mut p = DMatrix::<f64>::zeros(n, nb);
    if nb > 0 {
        let mut row = vec![0.0; nb];
        for i in 0..n {
            basis.eval_into(ps.point(i), &mut row);
            for (j, v) in row.iter().enumerate() {
                p[(i, j)] = *v;
            }
        }
        if n < nb {
            return Err(InterpolateError::Unisolvency { degree, rank: n.min(nb), needed: nb });
        }
        let qr = householder_qr(&p, true);
        let rank = qr.rank(1e-10);
        if rank < nb {
            return Err(InterpolateError::Unisolvency { degree, rank, needed: nb });
        }
    }

    Ok(SaddleSystem { spec: *spec, points: ps.clone(), basis, phi, p })
}

impl SaddleSystem {
    pub fn n(&self) -> usize {
        self.points.n()
    }

    pub fn basis_size(&self) -> usize {
        self.basis.len()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn poly_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    /// The full symmetric matrix `[[Φ, P], [Pᵀ, 0]]`.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let nb = self.basis_size();
        let mut a = DMatrix::<f64>::zeros(n + nb, n + nb);
        a.view_mut((0, 0), (n, n)).copy_from(&self.phi);
        if nb > 0 {
            a.view_mut((0, n), (n, nb)).copy_from(&self.p);
            a.view_mut((n, 0), (nb, n)).copy_from(&self.p.transpose());
        }
        a
    }

    /// Smallest eigenvalue of `Φ` restricted to the side-condition subspace
    /// `{a : Pᵀa = 0, |a|₂ = 1}` (plain minimum eigenvalue for positive
    /// definite kernels).
    pub fn constrained_min_eigenvalue(&self) -> Result<f64, InterpolateError> {
        let n = self.n();
        let nb = self.basis_size();
        if nb == 0 {
            let eig = nalgebra::SymmetricEigen::new(self.phi.clone());
            return Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));
        }
        if n <= nb {
            return Err(InterpolateError::NoConstrainedDirections { n, basis: nb });
        }
        let qr = householder_qr(&self.p, false);
        let z = qr.null_space_basis();
        let reduced = z.transpose() * &self.phi * &z;
        let eig = nalgebra::SymmetricEigen::new(reduced);
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// Factor the full system (Bunch–Kaufman LDLᵀ) and attach a 1-norm
    /// condition estimate.
    pub fn factorize(self) -> Result<FactoredSystem, InterpolateError> {
        let full = self.full_matrix();
        let factor = ldlt_bunch_kaufman(&full)?;
        let cond = one_norm(&full) * factor.inv_one_norm_estimate();
        Ok(FactoredSystem { sys: self, full, factor, cond })
    }
}

/// Factored saddle-point system ready for solves.
pub struct FactoredSystem {
    sys: SaddleSystem,
    full: DMatrix<f64>,
    factor: LdltFactor,
    cond: f64,
}

impl FactoredSystem {
    pub fn system(&self) -> &SaddleSystem {
        &self.sys
    }

    pub fn condition_estimate(&self) -> f64 {
        self.cond
    }

    /// Solve against an arbitrary right-hand side `(top, bottom)`; one step of
    /// iterative refinement, then the scaled max-norm residual check.
    fn solve_raw(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, InterpolateError> {
        let mut x = self.factor.solve(rhs);
        let rhs_scale = rhs.amax().max(1e-300);
        for _ in 0..2 {
            let r = rhs - &self.full * &x;
            if r.amax() <= 1e-14 * rhs_scale {
                break;
            }
            let dx = self.factor.solve(&r);
            x += dx;
        }
        let res = (rhs - &self.full * &x).amax();
        if res > SOLVE_RESIDUAL_TOL * rhs_scale {
            return Err(InterpolateError::Conditioning {
                residual: res / rhs_scale,
                tol: SOLVE_RESIDUAL_TOL,
                cond: self.cond,
            });
        }
        Ok(x)
    }

    /// Interpolate the data values given on the centers.
    pub fn solve_interpolant(&self, values: &[f64]) -> Result<Interpolant, InterpolateError> {
        let n = self.sys.n();
        let nb = self.sys.basis_size();
        if values.len() != n {
            return Err(InterpolateError::RhsSize { got: values.len(), expected: n });
        }
        let mut rhs = DVector::<f64>::zeros(n + nb);
        rhs.rows_mut(0, n).copy_from_slice(values);
        let sol = self.solve_raw(&rhs)?;
        let residual = (&rhs - &self.full * &sol).amax() / rhs.amax().max(1e-300);
        let kernel_weights = sol.as_slice()[0..n].to_vec();
        let poly = Polynomial::new(self.sys.basis.clone(), sol.as_slice()[n..n + nb].to_vec());
        Ok(Interpolant {
            spec: self.sys.spec,
            dim: self.sys.points.dim(),
            centers: self.sys.points.coords().to_vec(),
            kernel_weights,
            poly,
            solver_residual: residual,
            condition_estimate: self.cond,
        })
    }

    /// Power function at `x`: the worst-case pointwise error over unit
    /// native-norm functions, through the constrained quadratic form.
    pub fn power_function(&self, x: &[f64]) -> Result<f64, InterpolateError> {
        let n = self.sys.n();
        let nb = self.sys.basis_size();
        let mut rhs = DVector::<f64>::zeros(n + nb);
        let d = self.sys.points.dim();
        for i in 0..n {
            let p = self.sys.points.point(i);
            let r = (0..d).map(|j| (x[j] - p[j]) * (x[j] - p[j])).sum::<f64>().sqrt();
            rhs[i] = self.sys.spec.eval(r);
        }
        if nb > 0 {
            let pv = self.sys.basis.eval(x);
            for (j, v) in pv.iter().enumerate() {
                rhs[n + j] = *v;
            }
        }
        let sol = self.solve_raw(&rhs)?;
        // P(x)² = φ(0) − uᵀb − vᵀp(x)
        let dot = comp_sum((0..n + nb).map(|i| sol[i] * rhs[i]));
        let p2 = self.sys.spec.eval(0.0) - dot;
        Ok(p2.max(0.0).sqrt())
    }
}

/// Solved interpolant: kernel weights, polynomial part, and solver metadata.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub spec: KernelSpec,
    dim: usize,
    centers: Vec<f64>,
    pub kernel_weights: Vec<f64>,
    pub poly: Polynomial,
    pub solver_residual: f64,
    pub condition_estimate: f64,
}

impl Interpolant {
    pub fn n_centers(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    /// Evaluate `s(x) = Σ a_ξ φ(x-ξ) + p(x)` with compensated summation.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let kernel_part = comp_sum((0..self.n_centers()).map(|i| {
            let c = self.center(i);
            let r = (0..d).map(|j| (x[j] - c[j]) * (x[j] - c[j])).sum::<f64>().sqrt();
            self.kernel_weights[i] * self.spec.eval(r)
        }));
        kernel_part + self.poly.eval(x)
    }

    pub fn evaluate_many(&self, points: &[Vec<f64>]) -> Vec<f64> {
        points.iter().map(|x| self.evaluate(x)).collect()
    }

    /// Max residual of the side conditions `Σ a_ξ p(ξ) = 0` in the system's
    /// polynomial basis.
    pub fn side_condition_residual(&self) -> f64 {
        if self.poly.basis.is_empty() {
            return 0.0;
        }
        let nb = self.poly.basis.len();
        let mut vals = vec![0.0; nb];
        let mut sums = vec![0.0; nb];
        for i in 0..self.n_centers() {
            self.poly.basis.eval_into(self.center(i), &mut vals);
            for (s, v) in sums.iter_mut().zip(&vals) {
                *s += self.kernel_weights[i] * v;
            }
        }
        sums.iter().map(|s| s.abs()).fold(0.0, f64::max)
    }

    /// Discrete native seminorm `√(aᵀ Φ a)`. Values within round-off below
    /// zero are clamped; anything worse is an error.
    pub fn native_seminorm_discrete(&self) -> Result<f64, InterpolateError> {
        let q = self.kernel_quadratic_form();
        if q < -1e-10 {
            return Err(InterpolateError::NotPositive { value: q });
        }
        Ok(q.max(0.0).sqrt())
    }

    /// `aᵀ Φ a`, recomputed from kernel values (compensated).
    pub fn kernel_quadratic_form(&self) -> f64 {
        let n = self.n_centers();
        let d = self.dim;
        let phi0 = self.spec.eval(0.0);
        comp_sum((0..n).flat_map(|i| {
            let ci = self.center(i);
            let ai = self.kernel_weights[i];
            (0..=i).map(move |j| {
                if i == j {
                    return ai * ai * phi0;
                }
                let cj = self.center(j);
                let r = (0..d).map(|k| (ci[k] - cj[k]) * (ci[k] - cj[k])).sum::<f64>().sqrt();
                2.0 * ai * self.kernel_weights[j] * self.spec.eval(r)
            })
        }))
    }

    /// Structured-text serialization.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("kernel: {}\n", self.spec));
        out.push_str(&format!(
            "solver_residual: {:.6e}\ncondition_estimate: {:.6e}\n",
            self.solver_residual, self.condition_estimate
        ));
        out.push_str(&format!("centers: {}\n", self.n_centers()));
        for i in 0..self.n_centers() {
            let fields: Vec<String> = self.center(i).iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out.push_str("kernel_weights:\n");
        for a in &self.kernel_weights {
            out.push_str(&format!("{a:.16e}\n"));
        }
        out.push_str("poly_weights:\n");
        for b in &self.poly.coeffs {
            out.push_str(&format!("{b:.16e}\n"));
        }
        out
    }
}

/// `|f - I f|` in the native seminorm via orthogonality:
/// `|f|² − |I f|²` with `|f|²` computed by the pair quadrature of the source
/// density and `|I f|² = aᵀΦa` from the solved interpolant.
pub fn target_error_native_seminorm(
    target: &TargetFunction,
    interp: &Interpolant,
    rule: QuadratureRule,
    panels: usize,
    depth: u32,
) -> Result<f64, InterpolateError> {
    let f_sq = native_energy(&target.spec, &target.density, rule, panels, depth);
    native_error_from_energy(f_sq, interp)
}

/// Same as [`target_error_native_seminorm`] with the squared target energy
/// already computed (it is level-independent across a refinement ladder).
pub fn native_error_from_energy(
    energy_sq: f64,
    interp: &Interpolant,
) -> Result<f64, InterpolateError> {
    let i_sq = interp.kernel_quadratic_form();
    let diff = energy_sq - i_sq;
    let floor = 1e-6 * energy_sq.abs();
    if diff < -floor {
        return Err(InterpolateError::QuadratureResolution { value: diff, floor });
    }
    Ok(diff.max(0.0).sqrt())
}

/// The ratio `E = ‖f - I f‖_{L2} / |f - I f|_native`. `None` when the
/// denominator sits below the indeterminacy floor (missing datum, not an
/// error).
pub fn e_ratio(l2_error: f64, native_error: f64) -> Option<f64> {
    if native_error < 1e-12 {
        None
    } else {
        Some(l2_error / native_error)
    }
}
