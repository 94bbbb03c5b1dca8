//! Dense factorizations used by the interpolation solvers.
//!
//! The saddle-point matrices arising from conditionally positive definite
//! kernels are symmetric indefinite, so the workhorse here is an LDLᵀ
//! factorization with Bunch–Kaufman pivoting. A Householder QR (with full Q
//! and optional column pivoting) provides orthonormal null-space bases and
//! minimum-norm solutions for the local reproduction solves.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular at column {0}")]
    Singular(usize),
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Neumaier compensated summation.
pub fn comp_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated dot product.
pub fn comp_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    comp_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

const BK_ALPHA: f64 = 0.6403882032022076; // (1 + sqrt(17)) / 8

/// LDLᵀ factorization of a symmetric matrix with Bunch–Kaufman pivoting,
/// `P A Pᵀ = L D Lᵀ` with D block diagonal (1×1 and 2×2 blocks).
pub struct LdltFactor {
    w: DMatrix<f64>,
    perm: Vec<usize>,
    pair_start: Vec<bool>,
    n: usize,
}

fn sym_swap(w: &mut DMatrix<f64>, a: usize, b: usize) {
    // Symmetric row/column interchange on lower-triangular storage, a < b.
    let n = w.nrows();
    for j in 0..a {
        w.swap((a, j), (b, j));
    }
    for i in (b + 1)..n {
        w.swap((i, a), (i, b));
    }
    for m in (a + 1)..b {
        w.swap((m, a), (b, m));
    }
    w.swap((a, a), (b, b));
}

/// Factor a symmetric matrix (only the lower triangle is referenced).
pub fn ldlt_bunch_kaufman(a: &DMatrix<f64>) -> Result<LdltFactor, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::NotSquare(a.nrows(), a.ncols()));
    }
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut pair_start = vec![false; n];

    let mut k = 0;
    while k < n {
        let absakk = w[(k, k)].abs();
        let mut imax = k;
        let mut colmax = 0.0;
        for i in (k + 1)..n {
            let v = w[(i, k)].abs();
            if v > colmax {
                colmax = v;
                imax = i;
            }
        }
        if absakk.max(colmax) == 0.0 {
            return Err(LinalgError::Singular(k));
        }

        let (kstep, kp) = if absakk >= BK_ALPHA * colmax {
            (1, k)
        } else {
            let mut rowmax = 0.0f64;
            for j in k..imax {
                rowmax = rowmax.max(w[(imax, j)].abs());
            }
            for i in (imax + 1)..n {
                rowmax = rowmax.max(w[(i, imax)].abs());
            }
            if absakk * rowmax >= BK_ALPHA * colmax * colmax {
                (1, k)
            } else if w[(imax, imax)].abs() >= BK_ALPHA * rowmax {
                (1, imax)
            } else {
                (2, imax)
            }
        };

        let kk = k + kstep - 1;
        if kp != kk {
            sym_swap(&mut w, kk, kp);
            perm.swap(kk, kp);
        }

        if kstep == 1 {
            let d = w[(k, k)];
            if d == 0.0 {
                return Err(LinalgError::Singular(k));
            }
            let r1 = 1.0 / d;
            for j in (k + 1)..n {
                let cj = w[(j, k)] * r1;
                if cj != 0.0 {
                    for i in j..n {
                        w[(i, j)] -= w[(i, k)] * cj;
                    }
                }
            }
            for i in (k + 1)..n {
                w[(i, k)] *= r1;
            }
        } else {
            // 2x2 pivot block [[d11, d21], [d21, d22]] (LAPACK dsytf2 scheme).
            let d21 = w[(k + 1, k)];
            let t11 = w[(k + 1, k + 1)] / d21;
            let t22 = w[(k, k)] / d21;
            let t = 1.0 / (t11 * t22 - 1.0);
            let d21i = t / d21;
            for j in (k + 2)..n {
                let wk = d21i * (t11 * w[(j, k)] - w[(j, k + 1)]);
                let wkp = d21i * (t22 * w[(j, k + 1)] - w[(j, k)]);
                for i in j..n {
                    w[(i, j)] -= w[(i, k)] * wk + w[(i, k + 1)] * wkp;
                }
                w[(j, k)] = wk;
                w[(j, k + 1)] = wkp;
            }
            pair_start[k] = true;
        }
        k += kstep;
    }

    Ok(LdltFactor {
        w,
        perm,
        pair_start,
        n,
    })
}

impl LdltFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let w = &self.w;

        // c = P b
        let mut c: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();

        // L c = c  (unit lower; subdiagonal entries of 2x2 blocks belong to D)
        let mut k = 0;
        while k < n {
            if self.pair_start[k] {
                let (ck, ck1) = (c[k], c[k + 1]);
                for i in (k + 2)..n {
                    c[i] -= w[(i, k)] * ck + w[(i, k + 1)] * ck1;
                }
                k += 2;
            } else {
                let ck = c[k];
                for i in (k + 1)..n {
                    c[i] -= w[(i, k)] * ck;
                }
                k += 1;
            }
        }

        // D c = c
        let mut k = 0;
        while k < n {
            if self.pair_start[k] {
                let d11 = w[(k, k)];
                let d21 = w[(k + 1, k)];
                let d22 = w[(k + 1, k + 1)];
                let t11 = d22 / d21;
                let t22 = d11 / d21;
                let t = 1.0 / (t11 * t22 - 1.0);
                let d21i = t / d21;
                let (bk, bk1) = (c[k], c[k + 1]);
                c[k] = d21i * (t11 * bk - bk1);
                c[k + 1] = d21i * (t22 * bk1 - bk);
                k += 2;
            } else {
                c[k] /= w[(k, k)];
                k += 1;
            }
        }

        // Lᵀ c = c
        let mut k = n as isize - 1;
        while k >= 0 {
            let ku = k as usize;
            let pair = ku > 0 && self.pair_start[ku - 1];
            if pair {
                let mut s0 = 0.0;
                let mut s1 = 0.0;
                for i in (ku + 1)..n {
                    s0 += w[(i, ku - 1)] * c[i];
                    s1 += w[(i, ku)] * c[i];
                }
                c[ku - 1] -= s0;
                c[ku] -= s1;
                k -= 2;
            } else {
                let mut s = 0.0;
                for i in (ku + 1)..n {
                    s += w[(i, ku)] * c[i];
                }
                c[ku] -= s;
                k -= 1;
            }
        }

        // x = Pᵀ c
        for i in 0..n {
            b[self.perm[i]] = c[i];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Hager–Higham estimate of the 1-norm of the inverse.
    pub fn inv_one_norm_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            est = comp_sum(y.iter().map(|v| v.abs()));
            let mut xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            self.solve_in_place(&mut xi);
            let (jmax, zmax) = xi
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, 0.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            let ztx: f64 = xi.iter().zip(&x).map(|(z, xv)| z * xv).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        est
    }
}

/// Exact 1-norm of a matrix.
pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Householder QR of an `n × m` matrix with `n >= m`.
///
/// `q` is the full `n × n` orthogonal factor; `r` the `m × m` upper triangle.
/// With `pivot = true`, columns are pivoted on largest remaining norm and
/// `jpvt[j]` records the original index of factored column `j`.
pub struct QrFactor {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub jpvt: Vec<usize>,
}

pub fn householder_qr(a: &DMatrix<f64>, pivot: bool) -> QrFactor {
    let n = a.nrows();
    let m = a.ncols();
    assert!(n >= m, "householder_qr requires nrows >= ncols");
    let mut r = a.clone();
    let mut q = DMatrix::<f64>::identity(n, n);
    let mut jpvt: Vec<usize> = (0..m).collect();
    let mut v = vec![0.0; n];

    for k in 0..m {
        if pivot {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..m {
                let nj: f64 = (k..n).map(|i| r[(i, j)] * r[(i, j)]).sum();
                if nj > best_norm {
                    best_norm = nj;
                    best = j;
                }
            }
            if best != k {
                r.swap_columns(k, best);
                jpvt.swap(k, best);
            }
        }

        let mut norm_x: f64 = (k..n).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        if r[(k, k)] > 0.0 {
            norm_x = -norm_x;
        }
        for i in k..n {
            v[i] = r[(i, k)];
        }
        v[k] -= norm_x;
        let vnorm2: f64 = (k..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;

        for j in k..m {
            let s: f64 = (k..n).map(|i| v[i] * r[(i, j)]).sum();
            let s = s * beta;
            for i in k..n {
                r[(i, j)] -= s * v[i];
            }
        }
        for c in 0..n {
            let s: f64 = (k..n).map(|i| q[(c, i)] * v[i]).sum();
            let s = s * beta;
            for i in k..n {
                q[(c, i)] -= s * v[i];
            }
        }
        r[(k, k)] = norm_x;
        for i in (k + 1)..n {
            r[(i, k)] = 0.0;
        }
    }

    let r_top = r.rows(0, m).into_owned();
    QrFactor { q, r: r_top, jpvt }
}

impl QrFactor {
    /// Ratio `|r_00| / min |r_jj|`; infinite when a diagonal entry vanishes.
    pub fn diag_condition(&self) -> f64 {
        let m = self.r.ncols();
        if m == 0 {
            return 1.0;
        }
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        for j in 0..m {
            let d = self.r[(j, j)].abs();
            max = max.max(d);
            min = min.min(d);
        }
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Numerical rank from the diagonal of R.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let m = self.r.ncols();
        if m == 0 {
            return 0;
        }
        let r00 = self.r[(0, 0)].abs();
        if r00 == 0.0 {
            return 0;
        }
        (0..m).take_while(|&j| self.r[(j, j)].abs() > rel_tol * r00).count()
    }

    /// Minimum-ℓ2-norm solution of the underdetermined system `Aᵀ x = b`,
    /// where `A` (n × m, full column rank) is the factored matrix.
    pub fn min_norm_transpose_solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let m = self.r.ncols();
        let n = self.q.nrows();
        if b.len() != m {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs has length {}, expected {}",
                b.len(),
                m
            )));
        }
        // A Π = Q₁ R  =>  Aᵀ x = b  <=>  Rᵀ (Q₁ᵀ x) = Πᵀ b; pick x in range(Q₁).
        let mut y = vec![0.0; m];
        for j in 0..m {
            y[j] = b[self.jpvt[j]];
        }
        for j in 0..m {
            let d = self.r[(j, j)];
            if d == 0.0 {
                return Err(LinalgError::Singular(j));
            }
            let mut s = y[j];
            for i in 0..j {
                s -= self.r[(i, j)] * y[i];
            }
            y[j] = s / d;
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..m {
                s += self.q[(i, j)] * y[j];
            }
            x[i] = s;
        }
        Ok(x)
    }

    /// Orthonormal basis for the null space of `Aᵀ` (the last n−m columns of Q).
    pub fn null_space_basis(&self) -> DMatrix<f64> {
        let n = self.q.nrows();
        let m = self.r.ncols();
        self.q.columns(m, n - m).into_owned()
    }
}
