//! Generalized Wendland functions: iterated radial integrals
//! `I^k ψ_ℓ(r) = 2^{1-k}/Γ(k) ∫_r^1 t (1-t)^ℓ (t²-r²)^{k-1} dt` of the
//! truncated power `ψ_ℓ(t) = (1-t)_+^ℓ`.
//!
//! The integrand is polynomial in `t`, so the integral is antidifferentiated
//! exactly in rational arithmetic; the resulting monomial coefficients in `r`
//! are cached per `(k, ℓ)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

fn big_binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..k.min(n - k) {
        num *= n - i;
        den *= i + 1;
    }
    num / den
}

/// Exact monomial coefficients of `I^k ψ_ℓ` as a polynomial in `r` on [0, 1];
/// entry `j` multiplies `r^j`.
pub fn coefficients_rational(k: u32, ell: u32) -> Vec<BigRational> {
    assert!(k >= 1, "generalized Wendland functions require k >= 1");
    let deg = (2 * k + ell) as usize;
    let mut coeffs = vec![BigRational::zero(); deg + 1];

    // t (1-t)^ℓ (t² - r²)^{k-1}
    //   = Σ_{i,j} (-1)^i C(ℓ,i) (-1)^{k-1-j} C(k-1,j) r^{2(k-1-j)} t^{1+i+2j};
    // ∫_r^1 t^{1+i+2j} dt = (1 - r^{2+i+2j}) / (2+i+2j).
    for i in 0..=ell {
        for j in 0..k {
            let mut c = BigRational::from_integer(big_binomial(ell, i) * big_binomial(k - 1, j));
            if (i + (k - 1 - j)) % 2 == 1 {
                c = -c;
            }
            let denom = BigRational::from_integer(BigInt::from(2 + i + 2 * j));
            let c = c / denom;
            let even_pow = (2 * (k - 1 - j)) as usize;
            coeffs[even_pow] += &c;
            let high_pow = (2 * k + i) as usize;
            coeffs[high_pow] -= &c;
        }
    }

    // prefactor 2^{1-k} / Γ(k) = 2^{1-k} / (k-1)!
    let mut fact = BigInt::one();
    for i in 1..k {
        fact *= i;
    }
    let pref = if k >= 1 {
        let two_pow = BigInt::from(2).pow(k - 1);
        BigRational::new(BigInt::one(), two_pow * fact)
    } else {
        BigRational::one()
    };
    for c in &mut coeffs {
        *c *= &pref;
    }
    coeffs
}

type CoeffCache = Mutex<HashMap<(u32, u32), Vec<f64>>>;
static CACHE: OnceLock<CoeffCache> = OnceLock::new();

/// Cached f64 monomial coefficients of `I^k ψ_ℓ`.
pub fn coefficients(k: u32, ell: u32) -> Vec<f64> {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((k, ell))
        .or_insert_with(|| {
            coefficients_rational(k, ell)
                .into_iter()
                .map(|c| {
                    let num = c.numer().to_f64().unwrap();
                    let den = c.denom().to_f64().unwrap();
                    num / den
                })
                .collect()
        })
        .clone()
}

/// `I^k ψ_ℓ(r)`; zero for `r >= 1`.
pub fn value(k: u32, ell: u32, r: f64) -> f64 {
    debug_assert!(r >= 0.0);
    if r >= 1.0 {
        return 0.0;
    }
    let coeffs = coefficients(k, ell);
    let mut acc = 0.0;
    for c in coeffs.iter().rev() {
        acc = acc * r + c;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::beta_integral;

    #[test]
    fn value_at_zero_matches_beta_oracle() {
        // I ψ_3 (0) = ∫₀¹ t (1-t)³ dt = B(2, 4) = 1/20
        let v = value(1, 3, 0.0);
        assert!((v - beta_integral(2.0, 4.0)).abs() < 1e-15);
        assert!((v - 0.05).abs() < 1e-15);
        // I² ψ_4 (0) = (1/2) B(4, 5) = 1/560
        let v = value(2, 4, 0.0);
        assert!((v - 0.5 * beta_integral(4.0, 5.0)).abs() < 1e-15);
        assert!((v - 1.0 / 560.0).abs() < 1e-15);
    }

    #[test]
    fn vanishes_at_support_boundary() {
        assert_eq!(value(1, 5, 1.0), 0.0);
        assert!(value(1, 3, 1.0 - 1e-12).abs() < 1e-14);
        assert_eq!(value(2, 6, 1.7), 0.0);
    }

    #[test]
    fn matches_direct_quadrature() {
        use crate::quad::integrate_interval;
        for (k, ell) in [(1u32, 3u32), (2, 4), (3, 8), (1, 8)] {
            for r in [0.0, 0.2, 0.5, 0.9] {
                let direct = integrate_interval(
                    |t| t * (1.0 - t).powi(ell as i32) * (t * t - r * r).powi(k as i32 - 1),
                    r,
                    1.0,
                    20,
                    8,
                );
                let pref = 2f64.powi(1 - k as i32) / crate::special::factorial(k - 1);
                let expect = pref * direct;
                let v = value(k, ell, r);
                assert!((v - expect).abs() < 1e-13, "k={k} ell={ell} r={r}");
            }
        }
    }

    #[test]
    fn first_k_odd_coefficients_vanish_exactly() {
        use num_traits::Zero;
        for k in 1..=3u32 {
            for ell in (k + 1)..=8 {
                let coeffs = coefficients_rational(k, ell);
                for j in 0..k {
                    let idx = (2 * j + 1) as usize;
                    assert!(
                        coeffs[idx].is_zero(),
                        "k={k} ell={ell}: coefficient of r^{idx} = {}",
                        coeffs[idx]
                    );
                }
                // first odd power that may survive is r^{2k+1}
                let idx = (2 * k + 1) as usize;
                assert!(!coeffs[idx].is_zero(), "k={k} ell={ell}: r^{idx} vanished");
            }
        }
    }
}
