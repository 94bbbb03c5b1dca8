//! Grid-based Sobolev norms of functions sampled on tensor grids, and
//! least-squares convergence-rate fits.
//!
//! Derivatives use 4th-order finite-difference stencils (central in the
//! interior, shifted near grid edges, with weights from Fornberg's
//! algorithm); integrals use the composite trapezoid rule. Fractional orders
//! are interpolation-inequality surrogates between the neighboring integer
//! orders and are meant for diagnostics only.

use crate::poly::multi_indices;
use crate::special::factorial;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NormsError {
    #[error("grid too coarse: axis {axis} has {nodes} nodes, order {order} needs at least {needed}")]
    GridTooCoarse { axis: usize, nodes: usize, order: usize, needed: usize },
    #[error("invalid norm order {0}")]
    InvalidOrder(f64),
    #[error("rate fit needs at least {required} positive data points, found {actual}")]
    InsufficientData { required: usize, actual: usize },
}

/// Finite-difference weights for the `m`-th derivative at `x0` on nodes `xs`
/// (Fornberg's recurrence).
pub fn fornberg_weights(m: usize, x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Function values on a tensor grid over a box, row-major with the last axis
/// fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    lower: Vec<f64>,
    upper: Vec<f64>,
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn from_values(
        lower: Vec<f64>,
        upper: Vec<f64>,
        nodes: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert_eq!(lower.len(), nodes.len());
        assert!(nodes.iter().all(|&n| n >= 2));
        assert_eq!(values.len(), nodes.iter().product::<usize>());
        GridFunction { lower, upper, nodes, values }
    }

    /// Sample a function on the grid.
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(
        lower: Vec<f64>,
        upper: Vec<f64>,
        nodes: Vec<usize>,
        mut f: F,
    ) -> Self {
        let d = lower.len();
        let total: usize = nodes.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        loop {
            for i in 0..d {
                x[i] = lower[i] + idx[i] as f64 * (upper[i] - lower[i]) / (nodes[i] - 1) as f64;
            }
            values.push(f(&x));
            let mut axis = d;
            loop {
                if axis == 0 {
                    return GridFunction::from_values(lower, upper, nodes, values);
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < nodes[axis] {
                    break;
                }
                idx[axis] = 0;
                if axis == 0 {
                    return GridFunction::from_values(lower, upper, nodes, values);
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.nodes[axis] - 1) as f64
    }

    /// Node coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.nodes[axis])
            .map(|i| self.lower[axis] + i as f64 * self.spacing(axis))
            .collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.nodes[axis + 1..].iter().product()
    }

    /// Partial derivative of order `order` along `axis`, 4th-order accurate,
    /// on the same grid.
    pub fn derivative(&self, axis: usize, order: usize) -> Result<GridFunction, NormsError> {
        if order == 0 {
            return Ok(self.clone());
        }
        let n = self.nodes[axis];
        let central_w = order + 3 + (order % 2); // odd width, order >= 4 centered
        let edge_w = order + 4;
        let needed = edge_w.max(central_w);
        if n < needed {
            return Err(NormsError::GridTooCoarse { axis, nodes: n, order, needed });
        }
        let h = self.spacing(axis);
        let scale = h.powi(-(order as i32));

        // Per-node stencil (start offset, weights) in index units.
        let mut stencils: Vec<(usize, Vec<f64>)> = Vec::with_capacity(n);
        for i in 0..n {
            let half = central_w / 2;
            let (w, start) = if i >= half && i + half < n {
                (central_w, i - half)
            } else if i < half {
                (edge_w, 0)
            } else {
                (edge_w, n - edge_w)
            };
            let xs: Vec<f64> = (0..w).map(|j| (start + j) as f64 - i as f64).collect();
            let weights = fornberg_weights(order, 0.0, &xs);
            stencils.push((start, weights));
        }

        let stride = self.stride(axis);
        let total = self.values.len();
        let mut out = vec![0.0; total];
        let block = stride * n;
        let mut base = 0;
        while base < total {
            for off in 0..stride {
                let line = base + off;
                for (i, (start, weights)) in stencils.iter().enumerate() {
                    let mut acc = 0.0;
                    for (j, w) in weights.iter().enumerate() {
                        acc += w * self.values[line + (start + j) * stride];
                    }
                    out[line + i * stride] = acc * scale;
                }
            }
            base += block;
        }
        Ok(GridFunction {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            nodes: self.nodes.clone(),
            values: out,
        })
    }

    /// Composite-trapezoid L2 norm over the grid box.
    pub fn l2_norm(&self) -> f64 {
        self.weighted_sum_of_squares().sqrt()
    }

    fn weighted_sum_of_squares(&self) -> f64 {
        let d = self.dim();
        let mut axis_weights: Vec<Vec<f64>> = Vec::with_capacity(d);
        for i in 0..d {
            let h = self.spacing(i);
            let n = self.nodes[i];
            let mut w = vec![h; n];
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
            axis_weights.push(w);
        }
        let mut idx = vec![0usize; d];
        let mut total = 0.0;
        for v in &self.values {
            let mut w = 1.0;
            for i in 0..d {
                w *= axis_weights[i][idx[i]];
            }
            total += w * v * v;
            for i in (0..d).rev() {
                idx[i] += 1;
                if idx[i] < self.nodes[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        total
    }
}

/// Sobolev seminorm of integer order `k`:
/// `|u|²_k = Σ_{|α|=k} (k!/α!) ‖D^α u‖²_{L2}`.
pub fn sobolev_seminorm_grid(gf: &GridFunction, k: usize) -> Result<f64, NormsError> {
    let d = gf.dim();
    for (axis, &n) in gf.nodes().iter().enumerate() {
        let needed = 2 * k + 5;
        if n < needed {
            return Err(NormsError::GridTooCoarse { axis, nodes: n, order: k, needed });
        }
    }
    if k == 0 {
        return Ok(gf.l2_norm());
    }
    let mut total = 0.0;
    for alpha in multi_indices(d, k as i64) {
        let deg: u32 = alpha.iter().sum();
        if deg as usize != k {
            continue;
        }
        let mut g = gf.clone();
        for (axis, &ord) in alpha.iter().enumerate() {
            if ord > 0 {
                g = g.derivative(axis, ord as usize)?;
            }
        }
        let multinomial =
            factorial(k as u32) / alpha.iter().map(|&a| factorial(a)).product::<f64>();
        total += multinomial * g.weighted_sum_of_squares();
    }
    Ok(total.sqrt())
}

/// Sobolev norm of order `sigma >= 0`. Integer orders combine the seminorms
/// directly; fractional orders return the interpolation surrogate
/// `‖u‖_⌊σ⌋^{1-θ} ‖u‖_⌈σ⌉^θ`.
pub fn sobolev_norm_grid(gf: &GridFunction, sigma: f64) -> Result<f64, NormsError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(NormsError::InvalidOrder(sigma));
    }
    let lo = sigma.floor() as usize;
    if (sigma - lo as f64).abs() < 1e-12 {
        let mut sq = 0.0;
        for j in 0..=lo {
            let s = sobolev_seminorm_grid(gf, j)?;
            sq += s * s;
        }
        Ok(sq.sqrt())
    } else {
        let theta = sigma - lo as f64;
        let a = sobolev_norm_grid(gf, lo as f64)?;
        let b = sobolev_norm_grid(gf, (lo + 1) as f64)?;
        Ok(a.powf(1.0 - theta) * b.powf(theta))
    }
}

/// Least-squares fit of `log e` against `log h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Pairs actually used (positive errors only).
    pub pairs: Vec<(f64, f64)>,
    /// Fitted exponent.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    /// Number of pairs dropped because the error was not positive.
    pub excluded: usize,
}

pub fn fit_convergence_rate(pairs: &[(f64, f64)]) -> Result<RateFit, NormsError> {
    let usable: Vec<(f64, f64)> =
        pairs.iter().copied().filter(|(h, e)| *h > 0.0 && *e > 0.0).collect();
    let excluded = pairs.len() - usable.len();
    if usable.len() < 3 {
        return Err(NormsError::InsufficientData { required: 3, actual: usable.len() });
    }
    let n = usable.len() as f64;
    let logs: Vec<(f64, f64)> = usable.iter().map(|(h, e)| (h.ln(), e.ln())).collect();
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = if denom.abs() < 1e-300 { 0.0 } else { (n * sxy - sx * sy) / denom };
    let intercept = (sy - slope * sx) / n;
    let residual = (logs
        .iter()
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit { pairs: usable, slope, intercept, residual, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fornberg_reproduces_classic_stencils() {
        // central first derivative, 5 points
        let w = fornberg_weights(1, 0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13);
        }
        // central second derivative, 5 points
        let w = fornberg_weights(2, 0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let expect = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_exact_for_polynomials() {
        let gf = GridFunction::from_fn(vec![0.0], vec![1.0], vec![33], |x| {
            x[0].powi(4) - 2.0 * x[0].powi(3) + x[0]
        });
        let d1 = gf.derivative(0, 1).unwrap();
        let coords = gf.axis_coords(0);
        for (i, x) in coords.iter().enumerate() {
            let expect = 4.0 * x.powi(3) - 6.0 * x.powi(2) + 1.0;
            assert!((d1.values()[i] - expect).abs() < 1e-10, "x={x}");
        }
        let d3 = gf.derivative(0, 3).unwrap();
        for (i, x) in coords.iter().enumerate() {
            let expect = 24.0 * x - 12.0;
            assert!((d3.values()[i] - expect).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn linear_function_has_unit_h1_seminorm() {
        let gf = GridFunction::from_fn(vec![0.0], vec![1.0], vec![65], |x| x[0]);
        let s = sobolev_seminorm_grid(&gf, 1).unwrap();
        assert!((s - 1.0).abs() < 1e-10, "{s}");
    }

    #[test]
    fn sine_norms_match_analytic_values() {
        let gf = GridFunction::from_fn(vec![0.0], vec![1.0], vec![513], |x| (2.0 * PI * x[0]).sin());
        let l2 = sobolev_seminorm_grid(&gf, 0).unwrap();
        assert!((l2 - 0.5f64.sqrt()).abs() < 1e-6, "{l2}");
        let s1 = sobolev_seminorm_grid(&gf, 1).unwrap();
        assert!((s1 - 2.0 * PI * 0.5f64.sqrt()).abs() < 1e-5, "{s1}");
    }

    #[test]
    fn fractional_norm_is_interpolated_product() {
        let gf = GridFunction::from_fn(vec![0.0], vec![1.0], vec![513], |x| (2.0 * PI * x[0]).sin());
        let (n0sq, n1sq, n2sq) = crate::oracles::sin_norms_squared();
        let _ = n0sq;
        let n1 = sobolev_norm_grid(&gf, 1.0).unwrap();
        let n2 = sobolev_norm_grid(&gf, 2.0).unwrap();
        assert!((n1 - n1sq.sqrt()).abs() < 1e-5);
        assert!((n2 - n2sq.sqrt()).abs() < 2e-3, "{} vs {}", n2, n2sq.sqrt());
        let mid = sobolev_norm_grid(&gf, 1.5).unwrap();
        assert!((mid - n1.sqrt() * n2.sqrt()).abs() < 1e-12);
        // frozen from the analytic oracle
        let expect = (n1sq.sqrt()).sqrt() * (n2sq.sqrt()).sqrt();
        assert!((mid - expect).abs() / expect < 1e-4, "{mid} vs {expect}");
    }

    #[test]
    fn integer_sigma_matches_direct_combination() {
        let gf = GridFunction::from_fn(vec![0.0], vec![1.0], vec![129], |x| {
            (3.0 * x[0]).sin() + x[0] * x[0]
        });
        let direct = {
            let s0 = sobolev_seminorm_grid(&gf, 0).unwrap();
            let s1 = sobolev_seminorm_grid(&gf, 1).unwrap();
            let s2 = sobolev_seminorm_grid(&gf, 2).unwrap();
            (s0 * s0 + s1 * s1 + s2 * s2).sqrt()
        };
        let n = sobolev_norm_grid(&gf, 2.0).unwrap();
        assert!((n - direct).abs() < 1e-12);
    }

    #[test]
    fn norm_monotone_in_sigma() {
        let gf = GridFunction::from_fn(vec![0.0], vec![1.0], vec![257], |x| {
            (2.0 * PI * x[0]).sin() + 0.3 * (6.0 * x[0]).cos()
        });
        let mut prev = 0.0;
        for sigma in [0.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
            let n = sobolev_norm_grid(&gf, sigma).unwrap();
            assert!(n >= prev - 1e-12, "sigma={sigma}: {n} < {prev}");
            prev = n;
        }
    }

    #[test]
    fn scaling_invariance() {
        let gf = GridFunction::from_fn(vec![0.0, 0.0], vec![1.0, 1.0], vec![33, 33], |x| {
            (x[0] + 2.0 * x[1]).sin()
        });
        let mut gf2 = gf.clone();
        for v in gf2.values_mut() {
            *v *= -2.5;
        }
        for sigma in [0.0, 1.0, 2.0] {
            let a = sobolev_norm_grid(&gf, sigma).unwrap();
            let b = sobolev_norm_grid(&gf2, sigma).unwrap();
            assert!((b - 2.5 * a).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn multinomial_weights_in_2d() {
        // |u|²_{W²} for u = x y on [0,1]²: D^{(1,1)} = 1 with weight 2!/1!1! = 2,
        // all other second derivatives vanish.
        let gf = GridFunction::from_fn(vec![0.0, 0.0], vec![1.0, 1.0], vec![17, 17], |x| {
            x[0] * x[1]
        });
        let s2 = sobolev_seminorm_grid(&gf, 2).unwrap();
        assert!((s2 - 2f64.sqrt()).abs() < 1e-9, "{s2}");
    }

    #[test]
    fn grid_too_coarse_is_an_error() {
        let gf = GridFunction::from_fn(vec![0.0], vec![1.0], vec![7], |x| x[0]);
        assert!(matches!(
            sobolev_seminorm_grid(&gf, 2),
            Err(NormsError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn refinement_consistency_fourth_order() {
        // doubling resolution shrinks the norm error by ~2^4
        let f = |x: &[f64]| (2.0 * PI * x[0]).sin();
        let exact = 2.0 * PI * 0.5f64.sqrt();
        let errs: Vec<f64> = [65usize, 129, 257]
            .iter()
            .map(|&n| {
                let gf = GridFunction::from_fn(vec![0.0], vec![1.0], vec![n], f);
                (sobolev_seminorm_grid(&gf, 1).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 10.0, "expected ~16x error reduction, got {ratio}");
        }
    }

    #[test]
    fn rate_fit_exact_power_law() {
        let pairs: Vec<(f64, f64)> =
            [0.5, 0.25, 0.125, 0.0625].iter().map(|&h| (h, 7.0 * h * h * h)).collect();
        let fit = fit_convergence_rate(&pairs).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-10);
        assert!((fit.intercept - 7.0f64.ln()).abs() < 1e-10);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn rate_fit_constant_errors() {
        let pairs: Vec<(f64, f64)> = [0.5, 0.25, 0.125].iter().map(|&h| (h, 0.3)).collect();
        let fit = fit_convergence_rate(&pairs).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn rate_fit_with_multiplicative_noise() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        // 5 octaves, true slope 4, noise factor in [0.9, 1.1]
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let pairs: Vec<(f64, f64)> = (0..6)
                .map(|i| {
                    let h = 0.5f64.powi(i);
                    let noise = rng.random_range(0.9..1.1);
                    (h, 2.0 * h.powi(4) * noise)
                })
                .collect();
            let fit = fit_convergence_rate(&pairs).unwrap();
            worst = worst.max((fit.slope - 4.0).abs());
        }
        assert!(worst <= 0.08, "worst deviation {worst}");
    }

    #[test]
    fn rate_fit_excludes_nonpositive() {
        let pairs = vec![(0.5, 1.0), (0.25, 0.5), (0.125, 0.25), (0.0625, 0.0)];
        let fit = fit_convergence_rate(&pairs).unwrap();
        assert_eq!(fit.excluded, 1);
        assert_eq!(fit.pairs.len(), 3);
        let err = fit_convergence_rate(&pairs[2..]).unwrap_err();
        assert!(matches!(err, NormsError::InsufficientData { .. }));
    }
}
