//! Kernel families and their analytic constants.
//!
//! Three families are supported:
//!
//! * **Surface splines** `φ_m = ± h_{2m-d}`, the fundamental solutions of the
//!   m-fold Laplacian, conditionally positive definite of order `m`.
//! * **Matérn kernels** `φ_τ(x) = |x|^{τ-d/2} K_{τ-d/2}(|x|)`, positive
//!   definite with native space `H^τ`.
//! * **Generalized Wendland kernels** `I^k ψ_ℓ`, compactly supported and
//!   positive definite, with native space `H^{k+(d+1)/2}`.
//!
//! The surface-spline normalization keeps the collocation quadratic form
//! positive on the constrained coefficient subspace; multiplicative constants
//! are dropped since interpolants do not depend on them.

mod matern;
mod wendland;

pub use matern::matern_radial;
pub use wendland::{coefficients as wendland_coefficients, value as generalized_wendland_value_raw};

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel parameters: {0}")]
    InvalidParameters(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cannot parse kernel spec '{0}': {1}")]
    Parse(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// Surface spline of order `m` (integer, `m > d/2`).
    SurfaceSpline { m: u32 },
    /// Matérn kernel with native smoothness `tau > d/2`.
    Matern { tau: f64 },
    /// Generalized Wendland kernel `I^k ψ_ℓ` with `k >= 1`, `ℓ >= k + d`.
    GeneralizedWendland { k: u32, ell: u32 },
}

/// A kernel family member in a fixed space dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub d: usize,
    pub family: KernelFamily,
}

/// Derived analytic constants of a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelProps {
    /// Order of conditional positive definiteness (0 = positive definite).
    pub cpd_order: usize,
    /// Sobolev exponent τ of the native space.
    pub native_exponent: f64,
    /// Homogeneity order s = 2τ - d of the radial singularity.
    pub homogeneity: f64,
    /// Support radius (∞ for globally supported kernels).
    pub support_radius: f64,
    /// Radius beyond which the Fourier decay envelope holds.
    pub fourier_r0: f64,
}

/// Generalized Fourier symbol value; compactly supported kernels only admit a
/// two-sided decay envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FourierSymbol {
    Exact(f64),
    Envelope { lower: f64, upper: f64 },
}

impl KernelSpec {
    pub fn surface_spline(d: usize, m: u32) -> Result<Self, KernelError> {
        if d == 0 {
            return Err(KernelError::InvalidParameters("dimension must be positive".into()));
        }
        if 2 * m as usize <= d {
            return Err(KernelError::InvalidParameters(format!(
                "surface spline requires integer m > d/2; got m={m}, d={d}"
            )));
        }
        Ok(KernelSpec { d, family: KernelFamily::SurfaceSpline { m } })
    }

    pub fn matern(d: usize, tau: f64) -> Result<Self, KernelError> {
        if d == 0 {
            return Err(KernelError::InvalidParameters("dimension must be positive".into()));
        }
        if !(tau > d as f64 / 2.0) || !tau.is_finite() {
            return Err(KernelError::InvalidParameters(format!(
                "Matérn requires tau > d/2; got tau={tau}, d={d}"
            )));
        }
        Ok(KernelSpec { d, family: KernelFamily::Matern { tau } })
    }

    pub fn generalized_wendland(d: usize, k: u32, ell: u32) -> Result<Self, KernelError> {
        if d == 0 {
            return Err(KernelError::InvalidParameters("dimension must be positive".into()));
        }
        if k < 1 {
            return Err(KernelError::InvalidParameters("generalized Wendland requires k >= 1".into()));
        }
        if (ell as usize) < k as usize + d {
            return Err(KernelError::InvalidParameters(format!(
                "generalized Wendland requires ell >= k + d; got k={k}, ell={ell}, d={d}"
            )));
        }
        Ok(KernelSpec { d, family: KernelFamily::GeneralizedWendland { k, ell } })
    }

    /// Sign making the constrained collocation form positive definite:
    /// `(-1)^{⌊m - d/2⌋ + 1}` for the surface spline `h_{2m-d}`.
    fn surface_spline_sign(&self, m: u32) -> f64 {
        let beta = 2 * m as i64 - self.d as i64;
        if (beta / 2 + 1) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn properties(&self) -> KernelProps {
        let d = self.d as f64;
        match self.family {
            KernelFamily::SurfaceSpline { m } => KernelProps {
                cpd_order: m as usize,
                native_exponent: m as f64,
                homogeneity: 2.0 * m as f64 - d,
                support_radius: f64::INFINITY,
                fourier_r0: 0.0,
            },
            KernelFamily::Matern { tau } => KernelProps {
                cpd_order: 0,
                native_exponent: tau,
                homogeneity: 2.0 * tau - d,
                support_radius: f64::INFINITY,
                fourier_r0: 1.0,
            },
            KernelFamily::GeneralizedWendland { k, .. } => KernelProps {
                cpd_order: 0,
                native_exponent: k as f64 + (d + 1.0) / 2.0,
                homogeneity: 2.0 * k as f64 + 1.0,
                support_radius: 1.0,
                fourier_r0: 1.0,
            },
        }
    }

    /// Kernel value at radius `r >= 0` (checked).
    pub fn kernel_value(&self, r: f64) -> Result<f64, KernelError> {
        if !(r >= 0.0) {
            return Err(KernelError::Domain(format!("radius must be nonnegative, got {r}")));
        }
        Ok(self.eval(r))
    }

    /// Kernel value at radius `r`; assumes `r >= 0`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::SurfaceSpline { m } => {
                let beta = 2 * m as i64 - self.d as i64;
                let sign = self.surface_spline_sign(m);
                if r == 0.0 {
                    return 0.0;
                }
                if beta % 2 == 0 {
                    sign * r.powi(beta as i32) * r.ln()
                } else {
                    sign * r.powi(beta as i32)
                }
            }
            KernelFamily::Matern { tau } => matern_radial(tau - self.d as f64 / 2.0, r),
            KernelFamily::GeneralizedWendland { k, ell } => wendland::value(k, ell, r),
        }
    }

    /// Kernel value at a point difference.
    #[inline]
    pub fn eval_vec(&self, diff: &[f64]) -> f64 {
        let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.eval(r)
    }

    /// Generalized Fourier symbol at frequency magnitude `omega_norm > 0`.
    ///
    /// Surface splines: `|ω|^{-2m}`. Matérn: `(1+|ω|²)^{-τ}` (unit-constant
    /// convention). Generalized Wendland kernels only admit the decay envelope
    /// `(1+|ω|)^{-(d+2k+1)}`, reported with nominal constants (1/2, 2); it is
    /// meant for decay sanity checks, not pointwise values.
    pub fn fourier_symbol(&self, omega_norm: f64) -> Result<FourierSymbol, KernelError> {
        match self.family {
            KernelFamily::SurfaceSpline { m } => {
                if !(omega_norm > 0.0) {
                    return Err(KernelError::Domain(
                        "surface-spline symbol needs omega_norm > 0".into(),
                    ));
                }
                Ok(FourierSymbol::Exact(omega_norm.powi(-2 * m as i32)))
            }
            KernelFamily::Matern { tau } => {
                if !(omega_norm >= 0.0) {
                    return Err(KernelError::Domain("omega_norm must be nonnegative".into()));
                }
                Ok(FourierSymbol::Exact((1.0 + omega_norm * omega_norm).powf(-tau)))
            }
            KernelFamily::GeneralizedWendland { k, .. } => {
                if !(omega_norm >= 0.0) {
                    return Err(KernelError::Domain("omega_norm must be nonnegative".into()));
                }
                let shape = (1.0 + omega_norm).powi(-(self.d as i32 + 2 * k as i32 + 1));
                Ok(FourierSymbol::Envelope { lower: 0.5 * shape, upper: 2.0 * shape })
            }
        }
    }
}

/// The radial profile `h_s`: `r^s` for `s` not an even integer, `r^s log r`
/// otherwise. Defined for `r > 0`.
pub fn hs_value(s: f64, r: f64) -> Result<f64, KernelError> {
    if !(s > 0.0) {
        return Err(KernelError::InvalidParameters(format!("h_s requires s > 0, got {s}")));
    }
    if !(r > 0.0) {
        return Err(KernelError::Domain(format!("h_s requires r > 0, got {r}")));
    }
    let even = s.fract() == 0.0 && (s as i64) % 2 == 0;
    if even {
        Ok(r.powf(s) * r.ln())
    } else {
        Ok(r.powf(s))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::SurfaceSpline { m } => write!(f, "surface-spline d={} m={}", self.d, m),
            KernelFamily::Matern { tau } => write!(f, "matern d={} tau={}", self.d, tau),
            KernelFamily::GeneralizedWendland { k, ell } => {
                write!(f, "generalized-wendland d={} k={} ell={}", self.d, k, ell)
            }
        }
    }
}

impl FromStr for KernelSpec {
    type Err = KernelError;

    /// Parse the serialized fragment, e.g. `matern d=1 tau=2` or
    /// `generalized-wendland d=2 k=1 ell=3`.
    fn from_str(s: &str) -> Result<Self, KernelError> {
        let err = |msg: &str| KernelError::Parse(s.to_string(), msg.to_string());
        let mut parts = s.split_whitespace();
        let family = parts.next().ok_or_else(|| err("empty spec"))?;
        let mut kv = std::collections::BTreeMap::new();
        for p in parts {
            let (key, value) = p.split_once('=').ok_or_else(|| err("expected key=value"))?;
            kv.insert(key.to_string(), value.to_string());
        }
        let get = |key: &str| -> Result<f64, KernelError> {
            kv.get(key)
                .ok_or_else(|| err(&format!("missing parameter '{key}'")))?
                .parse::<f64>()
                .map_err(|_| err(&format!("parameter '{key}' is not a number")))
        };
        let d = get("d")? as usize;
        match family {
            "surface-spline" => {
                let m = get("m")?;
                if m.fract() != 0.0 {
                    return Err(err("surface-spline order m must be an integer"));
                }
                KernelSpec::surface_spline(d, m as u32)
            }
            "matern" => KernelSpec::matern(d, get("tau")?),
            "generalized-wendland" => {
                KernelSpec::generalized_wendland(d, get("k")? as u32, get("ell")? as u32)
            }
            other => Err(err(&format!("unknown family '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn surface_spline_values() {
        // d=1, m=2: sign +1, value r^3
        let k = KernelSpec::surface_spline(1, 2).unwrap();
        assert_eq!(k.kernel_value(2.0).unwrap(), 8.0);
        assert_eq!(k.kernel_value(0.0).unwrap(), 0.0);
        // d=1, m=1: sign -1, value -r
        let k = KernelSpec::surface_spline(1, 1).unwrap();
        assert_eq!(k.kernel_value(1.0).unwrap(), -1.0);
        // d=2, m=2: thin plate spline +r² log r
        let k = KernelSpec::surface_spline(2, 2).unwrap();
        let r = 2.5f64;
        assert!((k.kernel_value(r).unwrap() - r * r * r.ln()).abs() < 1e-14);
    }

    #[test]
    fn matern_closed_form_value() {
        // d=1, tau=1: phi(r) = sqrt(pi/2) e^{-r}; phi(1) ≈ 0.46107
        let k = KernelSpec::matern(1, 1.0).unwrap();
        let v = k.kernel_value(1.0).unwrap();
        let expect = (PI / 2.0).sqrt() * (-1.0f64).exp();
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.46107).abs() < 5e-6);
    }

    #[test]
    fn wendland_support_boundary() {
        let k = KernelSpec::generalized_wendland(2, 1, 3).unwrap();
        assert_eq!(k.kernel_value(1.0).unwrap(), 0.0);
        assert_eq!(k.kernel_value(2.3).unwrap(), 0.0);
        assert!(k.kernel_value(0.0).unwrap() > 0.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(KernelSpec::surface_spline(2, 1).is_err()); // m <= d/2
        assert!(KernelSpec::matern(2, 1.0).is_err()); // tau <= d/2
        assert!(KernelSpec::generalized_wendland(2, 1, 2).is_err()); // ell < k+d
        assert!(KernelSpec::matern(1, 1.0).unwrap().kernel_value(-0.5).is_err());
    }

    #[test]
    fn hs_values() {
        assert_eq!(hs_value(1.0, 2.0).unwrap(), 2.0);
        assert_eq!(hs_value(2.0, 1.0).unwrap(), 0.0); // 1 · log 1
        assert_eq!(hs_value(3.0, 0.5).unwrap(), 0.125);
        assert!(hs_value(2.0, 0.0).is_err());
        // odd and fractional s take the pure power branch
        assert!((hs_value(2.5, 2.0).unwrap() - 2f64.powf(2.5)).abs() < 1e-15);
    }

    #[test]
    fn fourier_symbols() {
        let ss = KernelSpec::surface_spline(1, 2).unwrap();
        match ss.fourier_symbol(2.0).unwrap() {
            FourierSymbol::Exact(v) => assert!((v - 0.0625).abs() < 1e-15),
            _ => panic!("expected exact symbol"),
        }
        let mt = KernelSpec::matern(1, 2.0).unwrap();
        match mt.fourier_symbol(0.0).unwrap() {
            FourierSymbol::Exact(v) => assert_eq!(v, 1.0),
            _ => panic!(),
        }
        let mt = KernelSpec::matern(2, 1.5).unwrap();
        match mt.fourier_symbol(1.0).unwrap() {
            FourierSymbol::Exact(v) => assert!((v - 2f64.powf(-1.5)).abs() < 1e-15),
            _ => panic!(),
        }
        let gw = KernelSpec::generalized_wendland(2, 1, 3).unwrap();
        match gw.fourier_symbol(3.0).unwrap() {
            FourierSymbol::Envelope { lower, upper } => {
                let shape = 4f64.powi(-5);
                assert!(lower < upper);
                assert!((lower - 0.5 * shape).abs() < 1e-18);
                assert!((upper - 2.0 * shape).abs() < 1e-18);
            }
            _ => panic!("expected envelope"),
        }
        assert!(ss.fourier_symbol(0.0).is_err());
    }

    #[test]
    fn properties_match_family_constants() {
        let p = KernelSpec::generalized_wendland(2, 1, 3).unwrap().properties();
        assert_eq!(p.cpd_order, 0);
        assert_eq!(p.native_exponent, 2.5);
        assert_eq!(p.homogeneity, 3.0);
        assert_eq!(p.support_radius, 1.0);

        let p = KernelSpec::surface_spline(1, 2).unwrap().properties();
        assert_eq!(p.cpd_order, 2);
        assert_eq!(p.native_exponent, 2.0);
        assert_eq!(p.homogeneity, 3.0);
        assert_eq!(p.support_radius, f64::INFINITY);

        let p = KernelSpec::matern(3, 2.0).unwrap().properties();
        assert_eq!(p.cpd_order, 0);
        assert_eq!(p.native_exponent, 2.0);
        assert_eq!(p.homogeneity, 1.0);
        assert_eq!(p.support_radius, f64::INFINITY);
    }

    #[test]
    fn homogeneity_is_consistent() {
        // s = 2 tau - d across all families
        for spec in [
            KernelSpec::surface_spline(1, 2).unwrap(),
            KernelSpec::surface_spline(3, 2).unwrap(),
            KernelSpec::matern(1, 2.0).unwrap(),
            KernelSpec::matern(2, 1.8).unwrap(),
            KernelSpec::generalized_wendland(2, 1, 3).unwrap(),
            KernelSpec::generalized_wendland(1, 2, 5).unwrap(),
        ] {
            let p = spec.properties();
            assert!(
                (p.homogeneity - (2.0 * p.native_exponent - spec.d as f64)).abs() < 1e-14,
                "{spec}"
            );
        }
    }

    #[test]
    fn continuity_by_dense_sampling() {
        for spec in [
            KernelSpec::surface_spline(1, 2).unwrap(),
            KernelSpec::matern(1, 2.0).unwrap(),
            KernelSpec::matern(2, 1.7).unwrap(),
            KernelSpec::generalized_wendland(2, 1, 3).unwrap(),
            KernelSpec::generalized_wendland(2, 2, 6).unwrap(),
        ] {
            let mut prev = spec.eval(0.0);
            let n = 4000;
            for i in 1..=n {
                let r = 2.0 * i as f64 / n as f64;
                let v = spec.eval(r);
                assert!(
                    (v - prev).abs() < 0.02 * (1.0 + prev.abs()),
                    "{spec} jump at r={r}: {prev} -> {v}"
                );
                prev = v;
            }
            if spec.properties().support_radius == 1.0 {
                for r in [1.0, 1.3, 25.0] {
                    assert_eq!(spec.eval(r), 0.0, "{spec} must vanish at r={r}");
                }
            }
        }
    }

    #[test]
    fn spec_string_round_trip() {
        for s in [
            "surface-spline d=1 m=2",
            "matern d=1 tau=2",
            "matern d=2 tau=1.75",
            "generalized-wendland d=2 k=1 ell=3",
        ] {
            let spec: KernelSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("gaussian d=1".parse::<KernelSpec>().is_err());
        assert!("matern d=1".parse::<KernelSpec>().is_err());
        assert!("matern tau=2".parse::<KernelSpec>().is_err());
    }
}
