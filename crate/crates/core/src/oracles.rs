//! Independent reference implementations used to freeze expected values.
//!
//! Everything here is deliberately computed by a different route than the
//! library code it cross-checks: beta integrals via log-gamma, modified
//! Bessel functions via direct quadrature of their integral representation,
//! cubic interpolation via the tridiagonal natural-spline system, and a few
//! closed-form single-center formulas.

use crate::quad::integrate_interval;
use crate::special::ln_gamma;

/// Euler beta integral `B(a, b) = ∫₀¹ t^{a-1} (1-t)^{b-1} dt`.
pub fn beta_integral(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Modified Bessel function of the second kind by quadrature of
/// `K_ν(r) = ∫₀^∞ e^{-r cosh t} cosh(ν t) dt`.
///
/// Intended for `r >= 0.01` and moderate ν, where truncating at t = 14 leaves
/// an error far below 1e-12 relative.
pub fn bessel_k_quadrature(nu: f64, r: f64) -> f64 {
    assert!(r > 0.0);
    integrate_interval(|t| (-r * t.cosh()).exp() * (nu * t).cosh(), 0.0, 14.0, 30, 28)
}

/// Natural cubic spline through `(xs, ys)` (strictly increasing knots):
/// second derivatives vanish at both ends. Solved by the tridiagonal system
/// for interior second derivatives.
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 2, "need at least two knots");
        assert_eq!(ys.len(), n);
        for w in xs.windows(2) {
            assert!(w[1] > w[0], "knots must be strictly increasing");
        }
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior tridiagonal system.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut sub = vec![0.0; m];
            let mut sup = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                sub[i] = h0;
                diag[i] = 2.0 * (h0 + h1);
                sup[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..m {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - sup[i] * second[i + 2]) / diag[i];
            }
        }
        NaturalCubicSpline { xs: xs.to_vec(), ys: ys.to_vec(), second }
    }

    /// Evaluate at `x`; extrapolates linearly outside the knot range, matching
    /// the natural boundary conditions.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h
                / 6.0
    }
}

/// `‖sin(2πx)‖²` Sobolev norms on [0, 1]: returns the squared norms of order
/// 0, 1 and 2 (analytic integrals: each derivative multiplies the squared
/// L2 norm 1/2 by (2π)²).
pub fn sin_norms_squared() -> (f64, f64, f64) {
    let w = 2.0 * std::f64::consts::PI;
    let l2 = 0.5;
    let n1 = l2 + w * w * 0.5;
    let n2 = n1 + w.powi(4) * 0.5;
    (l2, n1, n2)
}

/// Power function of a single-center positive definite kernel by explicit
/// 1×1 elimination: `P(x)² = φ(0) − φ(|x−ξ|)²/φ(0)`.
pub fn single_center_power(phi0: f64, phir: f64) -> f64 {
    (phi0 - phir * phir / phi0).max(0.0).sqrt()
}

/// Eigenvalues of the 2×2 collocation matrix `[[φ(0), φ(r)], [φ(r), φ(0)]]`.
pub fn two_center_eigenvalues(phi0: f64, phir: f64) -> (f64, f64) {
    (phi0 - phir.abs(), phi0 + phir.abs())
}
