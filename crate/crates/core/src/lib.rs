//! Kernel (radial basis function) interpolation and quasi-interpolation on
//! scattered centers in box domains, with machinery for measuring errors in
//! Sobolev norms of any integer order and fitting empirical convergence rates.
//!
//! The crate is organized around the pipeline used by the experiment driver:
//!
//! * [`kernels`] — kernel families (surface splines, Matérn, generalized
//!   Wendland) and their analytic constants,
//! * [`geometry`] — center sets, separation radius, fill distance, mesh ratio,
//! * [`interpolate`] — the conditionally-positive-definite saddle-point
//!   interpolation system, power functions, constrained eigenvalues,
//! * [`polyrepro`] — stable local polynomial reproductions,
//! * [`quasiinterp`] — target functions of convolution type and the
//!   integral quasi-interpolation operator built on local reproductions,
//! * [`norms`] — grid-based Sobolev norms and log-log rate fits,
//! * [`oracles`] — independent reference implementations used to freeze
//!   expected values (beta integrals, Bessel quadrature, natural splines).

pub mod geometry;
pub mod interpolate;
pub mod kernels;
pub mod linalg;
pub mod norms;
pub mod oracles;
pub mod poly;
pub mod polyrepro;
pub mod quad;
pub mod quasiinterp;
pub mod special;
