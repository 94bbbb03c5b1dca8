//! Evaluation of the Matérn radial profile `r^ν K_ν(r)`.
//!
//! Half-integer orders use the terminating closed forms (exponential times a
//! polynomial). Other orders combine the ascending power series for small
//! radii with the optimally truncated large-argument asymptotic expansion;
//! the crossover sits where the two branches have comparable accuracy.

use crate::special::{digamma_int, factorial, gamma};
use std::f64::consts::PI;

/// Radius at which the series branch hands over to the asymptotic branch.
/// Below it the series loses at most ~8 digits to cancellation; above it the
/// optimally truncated asymptotic tail is ~e^{-2r} and at least as accurate.
const SERIES_ASYMPTOTIC_CROSSOVER: f64 = 9.0;

const ORDER_SNAP: f64 = 1e-9;

/// `r^ν K_ν(r)` for `ν > 0`, `r >= 0`, continued by the analytic limit
/// `2^{ν-1} Γ(ν)` at `r = 0`.
pub fn matern_radial(nu: f64, r: f64) -> f64 {
    debug_assert!(nu > 0.0);
    debug_assert!(r >= 0.0);
    if r == 0.0 {
        return 2f64.powf(nu - 1.0) * gamma(nu);
    }
    let half = nu - 0.5;
    if (half - half.round()).abs() < ORDER_SNAP && half.round() >= 0.0 {
        return half_integer(half.round() as u32, r);
    }
    if r <= SERIES_ASYMPTOTIC_CROSSOVER {
        if (nu - nu.round()).abs() < ORDER_SNAP {
            series_integer(nu.round() as u32, r)
        } else {
            series_fractional(nu, r)
        }
    } else {
        asymptotic(nu, r)
    }
}

/// ν = n + 1/2: r^ν K_ν(r) = √(π/2) e^{-r} Σ_{k=0}^{n} (n+k)!/(k!(n-k)!) 2^{-k} r^{n-k}.
fn half_integer(n: u32, r: f64) -> f64 {
    let mut s = 0.0;
    for k in 0..=n {
        let c = factorial(n + k) / (factorial(k) * factorial(n - k));
        s += c * 2f64.powi(-(k as i32)) * r.powi((n - k) as i32);
    }
    (PI / 2.0).sqrt() * (-r).exp() * s
}

/// Non-integer ν via the reflection formula,
/// r^ν K_ν(r) = π/(2 sin νπ) [ Σ_j 2^ν (r²/4)^j / (j! Γ(j+1-ν))
///                            - Σ_j 2^{-ν} r^{2ν} (r²/4)^j / (j! Γ(j+1+ν)) ].
fn series_fractional(nu: f64, r: f64) -> f64 {
    let x2 = r * r / 4.0;
    // 1/Γ(1-ν) = Γ(ν) sin(πν) / π
    let mut inv_ga = gamma(nu) * (PI * nu).sin() / PI;
    let mut inv_gb = 1.0 / gamma(1.0 + nu);
    let mut pow = 1.0; // (r²/4)^j / j!
    let scale_a = 2f64.powf(nu);
    let scale_b = 2f64.powf(-nu) * r.powf(2.0 * nu);
    let mut sum = 0.0;
    for j in 0..150u32 {
        let term = pow * (scale_a * inv_ga - scale_b * inv_gb);
        sum += term;
        if j > 4 && term.abs() < 1e-17 * sum.abs().max(1.0) {
            break;
        }
        let jf = j as f64 + 1.0;
        pow *= x2 / jf;
        inv_ga /= jf - nu;
        inv_gb /= jf + nu;
    }
    PI / (2.0 * (nu * PI).sin()) * sum
}

/// Integer n >= 0: the log-series of the modified Bessel function,
/// multiplied by r^n.
fn series_integer(n: u32, r: f64) -> f64 {
    let x2 = r * r / 4.0;
    let half_pow_n = (r / 2.0).powi(n as i32);
    let ln_half = (r / 2.0).ln();

    // finite sum
    let mut finite = 0.0;
    let mut pow = 1.0;
    for k in 0..n {
        finite += factorial(n - k - 1) / factorial(k) * pow;
        pow *= -x2;
    }
    finite *= 0.5 / half_pow_n;

    // I_n(r) and the digamma series, accumulated together
    let mut bessel_i = 0.0;
    let mut psi_series = 0.0;
    let mut c = 1.0 / factorial(n); // (r²/4)^k / (k! (n+k)!)
    for k in 0..150u32 {
        bessel_i += c;
        psi_series += c * (digamma_int(k + 1) + digamma_int(n + k + 1));
        if k > 4 && c < 1e-18 * bessel_i {
            break;
        }
        c *= x2 / ((k as f64 + 1.0) * (n + k + 1) as f64);
    }
    let bessel_i = bessel_i * half_pow_n;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let k_n = finite - sign * ln_half * bessel_i + sign * 0.5 * half_pow_n * psi_series;
    r.powi(n as i32) * k_n
}

/// Optimally truncated asymptotic expansion,
/// K_ν(r) ~ √(π/(2r)) e^{-r} Σ_k a_k(ν) r^{-k}.
fn asymptotic(nu: f64, r: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60u32 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0) * (2.0 * kf - 1.0)) / (8.0 * kf * r);
        if term.abs() >= prev {
            break; // divergence point reached; stop at the smallest term
        }
        sum += term;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (PI / (2.0 * r)).sqrt() * (-r).exp() * sum * r.powf(nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::bessel_k_quadrature;

    #[test]
    fn half_integer_closed_forms() {
        // ν = 1/2: √(π/2) e^{-r}
        let v = matern_radial(0.5, 1.0);
        let expect = (PI / 2.0).sqrt() * (-1.0f64).exp();
        assert!((v - expect).abs() < 1e-15, "{v} vs {expect}");
        // ν = 3/2: √(π/2) e^{-r} (1 + r)
        let v = matern_radial(1.5, 2.0);
        let expect = (PI / 2.0).sqrt() * (-2.0f64).exp() * 3.0;
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn value_at_zero_is_analytic_limit() {
        for nu in [0.5, 1.0, 1.5, 2.3] {
            let expect = 2f64.powf(nu - 1.0) * gamma(nu);
            assert!((matern_radial(nu, 0.0) - expect).abs() < 1e-14);
            // continuity from the right
            let near = matern_radial(nu, 1e-8);
            assert!((near - expect).abs() / expect < 1e-6, "nu={nu}");
        }
    }

    #[test]
    fn series_branches_match_closed_forms_at_half_integers() {
        for n in [0u32, 1, 2, 3] {
            let nu = n as f64 + 0.5;
            for r in [0.01, 0.3, 1.0, 2.0, 5.0, 8.9] {
                let series = series_fractional(nu, r);
                let closed = half_integer(n, r);
                // the series loses ~2r/ln(10) digits to cancellation
                let tol = (1e-15 * (2.0 * r).exp()).max(1e-10);
                assert!(
                    (series - closed).abs() / closed.abs() < tol,
                    "nu={nu} r={r}: {series} vs {closed}"
                );
            }
            let nu_r = 9.5f64;
            let asym = asymptotic(nu, nu_r);
            let closed = half_integer(n, nu_r);
            assert!((asym - closed).abs() / closed.abs() < 1e-12);
        }
    }

    #[test]
    fn general_order_matches_bessel_quadrature() {
        for nu in [0.75, 1.0, 1.25, 2.0, 2.2, 3.0] {
            for r in [0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 9.5, 10.0] {
                let v = matern_radial(nu, r);
                let k = bessel_k_quadrature(nu, r);
                let expect = r.powf(nu) * k;
                let rel = (v - expect).abs() / expect.abs();
                assert!(rel < 1e-7, "nu={nu} r={r}: rel err {rel:.3e}");
            }
        }
    }
}
