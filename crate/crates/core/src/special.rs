//! Small special-function helpers: gamma, log-gamma, integer digamma,
//! binomial coefficients.

use std::f64::consts::PI;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments (poles at non-positive integers).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection; returns inf at the poles.
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS_COEF[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires positive argument");
    if x < 0.5 {
        return PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let xm = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = xm + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (xm + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (xm + 0.5) * t.ln() - t + a.ln()
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Digamma at positive integers: ψ(m) = −γ + Σ_{j<m} 1/j.
pub fn digamma_int(m: u32) -> f64 {
    assert!(m >= 1);
    let mut s = -EULER_GAMMA;
    for j in 1..m {
        s += 1.0 / j as f64;
    }
    s
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num = 1.0f64;
    let mut den = 1.0f64;
    for i in 0..k {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}
