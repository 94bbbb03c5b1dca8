//! Gauss–Legendre quadrature: 1-d rules, composite panels, and tensor-product
//! integration over boxes.

use std::sync::Mutex;
use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute_gauss_legendre(n: usize) -> GaussLegendre {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Newton iteration from the Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p0 = 1.0; // P_{j-1}
            let mut p1 = x; // P_j
            for j in 2..=n {
                let pj = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = pj;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussLegendre { nodes, weights }
}

static GL_CACHE: OnceLock<Mutex<Vec<Option<GaussLegendre>>>> = OnceLock::new();

/// Cached n-point rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> GaussLegendre {
    let cache = GL_CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if guard.len() <= n {
        guard.resize(n + 1, None);
    }
    if guard[n].is_none() {
        guard[n] = Some(compute_gauss_legendre(n));
    }
    guard[n].clone().unwrap()
}

/// Quadrature configuration: Gauss–Legendre order per axis per panel, and a
/// minimum panel count per axis for composite rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub min_panels: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule { order: 12, min_panels: 4 }
    }
}

impl QuadratureRule {
    pub fn new(order: usize, min_panels: usize) -> Self {
        QuadratureRule { order, min_panels }
    }
}

/// Composite Gauss–Legendre integration of `f` over the 1-d interval `[a, b]`.
pub fn integrate_interval<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    order: usize,
    panels: usize,
) -> f64 {
    let rule = gauss_legendre(order);
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * w;
        let half = 0.5 * w;
        let mid = lo + half;
        let mut s = 0.0;
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            s += wt * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Tensor-product composite Gauss–Legendre integration over a box.
///
/// `panels[i]` panels per axis `i`; the callback receives the node coordinates.
pub fn integrate_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    lower: &[f64],
    upper: &[f64],
    order: usize,
    panels: &[usize],
) -> f64 {
    let d = lower.len();
    assert_eq!(upper.len(), d);
    assert_eq!(panels.len(), d);
    let rule = gauss_legendre(order);

    // Per-axis node/weight tables over all panels.
    let mut axis_nodes: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut axis_weights: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..d {
        let np = panels[i];
        let w = (upper[i] - lower[i]) / np as f64;
        let half = 0.5 * w;
        let mut xs = Vec::with_capacity(np * order);
        let mut ws = Vec::with_capacity(np * order);
        for p in 0..np {
            let mid = lower[i] + (p as f64 + 0.5) * w;
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                xs.push(mid + half * x);
                ws.push(wt * half);
            }
        }
        axis_nodes.push(xs);
        axis_weights.push(ws);
    }

    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    'outer: loop {
        let mut w = 1.0;
        for i in 0..d {
            x[i] = axis_nodes[i][idx[i]];
            w *= axis_weights[i][idx[i]];
        }
        total += w * f(&x);
        // lexicographic advance
        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < axis_nodes[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
            if i == 0 {
                break 'outer;
            }
        }
    }
    total
}
