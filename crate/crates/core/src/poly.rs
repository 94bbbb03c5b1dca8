//! Multi-indices and shifted/scaled monomial polynomial bases.
//!
//! Bases are always expressed in the variables `(x_i - c_i) / σ_i` for a
//! chosen center and per-axis scale, which keeps Vandermonde-type matrices
//! well conditioned on box domains.

/// All multi-indices in `d` variables with total degree at most `max_degree`,
/// graded lexicographic (degree-major) order. Empty for negative degree.
pub fn multi_indices(d: usize, max_degree: i64) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if max_degree < 0 {
        return out;
    }
    for total in 0..=(max_degree as u32) {
        let mut alpha = vec![0u32; d];
        fill(d, 0, total, &mut alpha, &mut out);
    }
    out
}

fn fill(d: usize, axis: usize, remaining: u32, alpha: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if axis == d - 1 {
        alpha[axis] = remaining;
        out.push(alpha.clone());
        return;
    }
    for v in (0..=remaining).rev() {
        alpha[axis] = v;
        fill(d, axis + 1, remaining - v, alpha, out);
    }
}

/// Dimension of the polynomial space of total degree `<= max_degree`.
pub fn basis_dimension(d: usize, max_degree: i64) -> usize {
    if max_degree < 0 {
        return 0;
    }
    // C(max_degree + d, d)
    let mut num = 1.0f64;
    for i in 1..=d {
        num *= (max_degree as f64 + i as f64) / i as f64;
    }
    num.round() as usize
}

/// Shifted/scaled monomial basis `((x - c)/σ)^α`, `|α| <= degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialBasis {
    center: Vec<f64>,
    scale: Vec<f64>,
    degree: i64,
    exponents: Vec<Vec<u32>>,
}

impl PolynomialBasis {
    pub fn new(center: Vec<f64>, scale: Vec<f64>, degree: i64) -> Self {
        assert_eq!(center.len(), scale.len());
        let d = center.len();
        let exponents = multi_indices(d, degree);
        PolynomialBasis { center, scale, degree, exponents }
    }

    /// Basis centered and scaled to the given box.
    pub fn for_domain(domain: &crate::geometry::Domain, degree: i64) -> Self {
        PolynomialBasis::new(domain.center(), domain.half_widths(), degree)
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.exponents.len());
        let d = self.center.len();
        // powers of the scaled coordinates up to the degree
        let deg = self.degree.max(0) as usize;
        let mut powers = vec![1.0; d * (deg + 1)];
        for i in 0..d {
            let t = (x[i] - self.center[i]) / self.scale[i];
            for p in 1..=deg {
                powers[i * (deg + 1) + p] = powers[i * (deg + 1) + p - 1] * t;
            }
        }
        for (j, alpha) in self.exponents.iter().enumerate() {
            let mut v = 1.0;
            for i in 0..d {
                v *= powers[i * (deg + 1) + alpha[i] as usize];
            }
            out[j] = v;
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }
}

/// A polynomial expressed in a [`PolynomialBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub basis: PolynomialBasis,
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn zero(d: usize) -> Self {
        Polynomial {
            basis: PolynomialBasis::new(vec![0.0; d], vec![1.0; d], -1),
            coeffs: Vec::new(),
        }
    }

    pub fn new(basis: PolynomialBasis, coeffs: Vec<f64>) -> Self {
        assert_eq!(basis.len(), coeffs.len());
        Polynomial { basis, coeffs }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.coeffs.is_empty() {
            return 0.0;
        }
        let vals = self.basis.eval(x);
        vals.iter().zip(&self.coeffs).map(|(v, c)| v * c).sum()
    }
}
