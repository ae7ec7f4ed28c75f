//! Randomized truncated SVD (range finder with power iterations, followed by
//! an exact one-sided Jacobi SVD of the small projected matrix).

use super::dtm::DocumentTermMatrix;
use crate::error::{contract, Result};
use crate::numerics::{matmul, matmul_tn, Matrix, RngState};

/// Anything that can multiply a dense block from the left, transposed or not.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A · x`
    fn apply(&self, x: &Matrix) -> Matrix;
    /// `Aᵀ · x`
    fn apply_t(&self, x: &Matrix) -> Matrix;
    fn frobenius_sq(&self) -> f64;
}

impl LinearOperator for DocumentTermMatrix {
    fn nrows(&self) -> usize {
        self.docs()
    }
    fn ncols(&self) -> usize {
        self.vocab_len()
    }
    fn apply(&self, x: &Matrix) -> Matrix {
        self.mul_dense(x)
    }
    fn apply_t(&self, x: &Matrix) -> Matrix {
        self.tmul_dense(x)
    }
    fn frobenius_sq(&self) -> f64 {
        DocumentTermMatrix::frobenius_sq(self)
    }
}

impl LinearOperator for Matrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &Matrix) -> Matrix {
        matmul(self, x).expect("operator shapes")
    }
    fn apply_t(&self, x: &Matrix) -> Matrix {
        matmul_tn(self, x).expect("operator shapes")
    }
    fn frobenius_sq(&self) -> f64 {
        self.data().iter().map(|v| v * v).sum()
    }
}

/// Matrices whose smaller side is at most this get a full-width sketch.
pub const EXACT_BELOW: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    pub oversampling: usize,
    pub power_iterations: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            oversampling: 10,
            power_iterations: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub k: usize,
    /// rows × k
    pub left: Matrix,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// k × cols
    pub right: Matrix,
    /// `σᵢ² / ‖A‖²_F`
    pub explained_variance_ratio: Vec<f64>,
}

impl SvdFactors {
    /// Rank-k reconstruction `U Σ Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.left.clone();
        for r in 0..us.rows() {
            for (v, s) in us.row_mut(r).iter_mut().zip(&self.singular_values) {
                *v *= s;
            }
        }
        matmul(&us, &self.right).expect("factor shapes")
    }

    /// Coordinates of row `i` in the reduced space, `(U Σ)ᵢ`.
    pub fn projected_row(&self, i: usize) -> Vec<f64> {
        self.left
            .row(i)
            .iter()
            .zip(&self.singular_values)
            .map(|(u, s)| u * s)
            .collect()
    }
}

pub fn truncated_svd(a: &impl LinearOperator, k: usize, rng: &mut RngState) -> Result<SvdFactors> {
    truncated_svd_with(a, k, SvdOptions::default(), rng)
}

pub fn truncated_svd_with(
    a: &impl LinearOperator,
    k: usize,
    opts: SvdOptions,
    rng: &mut RngState,
) -> Result<SvdFactors> {
    let (m, n) = (a.nrows(), a.ncols());
    let max_rank = m.min(n);
    if k < 1 || k > max_rank {
        return Err(contract(format!("rank k={k} outside 1..={max_rank}")));
    }
    // Small problems sketch the whole range, which makes the result exact
    // at negligible cost.
    let l = if max_rank <= EXACT_BELOW {
        max_rank
    } else {
        (k + opts.oversampling).min(max_rank)
    };

    let omega = rng.normal_matrix(n, l);
    let mut q = orthonormalize(&a.apply(&omega));
    for _ in 0..opts.power_iterations {
        let z = orthonormalize(&a.apply_t(&q));
        q = orthonormalize(&a.apply(&z));
    }

    // Bᵀ = Aᵀ Q is n × l; its thin SVD gives B's factors with roles swapped.
    let bt = a.apply_t(&q);
    let (w, sigma, rot) = jacobi_svd(&bt);
    // Bᵀ = W Σ Rᵀ  ⇒  B = R Σ Wᵀ  ⇒  A ≈ (Q R) Σ Wᵀ.
    let u_full = matmul(&q, &rot)?;

    let mut left = Matrix::zeros(m, k);
    let mut right = Matrix::zeros(k, n);
    let mut singular_values = Vec::with_capacity(k);
    for c in 0..k {
        let s = sigma[c];
        // Deterministic sign: largest-magnitude entry of the right vector is positive.
        let mut pivot = 0.0f64;
        for j in 0..n {
            let v = w.get(j, c);
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        let flip = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            let v = if s > 0.0 { w.get(j, c) / s } else { 0.0 };
            right.set(c, j, flip * v);
        }
        for i in 0..m {
            left.set(i, c, flip * u_full.get(i, c));
        }
        singular_values.push(s);
    }
    let total = a.frobenius_sq();
    let explained_variance_ratio = singular_values
        .iter()
        .map(|s| if total > 0.0 { (s * s / total).min(1.0) } else { 0.0 })
        .collect();
    Ok(SvdFactors {
        k,
        left,
        singular_values,
        right,
        explained_variance_ratio,
    })
}

/// Cumulative explained-variance ratio; nondecreasing and capped at 1.
pub fn explained_variance_curve(f: &SvdFactors) -> Vec<f64> {
    let mut acc = 0.0;
    f.explained_variance_ratio
        .iter()
        .map(|r| {
            acc += r;
            acc.min(1.0)
        })
        .collect()
}

/// Smallest number of components whose cumulative ratio reaches `target`.
pub fn components_for_ratio(curve: &[f64], target: f64) -> Option<usize> {
    curve.iter().position(|&c| c >= target).map(|i| i + 1)
}

/// Modified Gram-Schmidt, applied twice. Columns that vanish relative to
/// their original norm become zero columns.
fn orthonormalize(y: &Matrix) -> Matrix {
    let (rows, cols) = y.shape();
    let mut colv: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| y.get(r, c)).collect()).collect();
    for j in 0..cols {
        let orig = norm(&colv[j]);
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = colv.split_at_mut(j);
                let qi = &done[i];
                let d = dot(qi, &rest[0]);
                for (x, q) in rest[0].iter_mut().zip(qi) {
                    *x -= d * q;
                }
            }
        }
        let nrm = norm(&colv[j]);
        if orig == 0.0 || nrm <= 1e-12 * orig {
            colv[j].iter_mut().for_each(|x| *x = 0.0);
        } else {
            colv[j].iter_mut().for_each(|x| *x /= nrm);
        }
    }
    let mut q = Matrix::zeros(rows, cols);
    for (c, col) in colv.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            q.set(r, c, v);
        }
    }
    q
}

/// One-sided (Hestenes) Jacobi on `g` (n × l). Returns `W` with mutually
/// orthogonal columns sorted by decreasing norm, the norms `σ`, and the
/// accumulated rotation `R` (l × l) such that `g = W̃ Σ Rᵀ` where
/// `W̃ = W / σ` column-wise.
fn jacobi_svd(g: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (n, l) = g.shape();
    let mut cols: Vec<Vec<f64>> = (0..l).map(|c| (0..n).map(|r| g.get(r, c)).collect()).collect();
    let mut rot: Vec<Vec<f64>> = (0..l)
        .map(|c| (0..l).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..l {
            for j in i + 1..l {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, i, j, c, s);
                rotate(&mut rot, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let mut w = Matrix::zeros(n, l);
    let mut r = Matrix::zeros(l, l);
    let mut sigma = Vec::with_capacity(l);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        for i in 0..n {
            w.set(i, dst, cols[src][i]);
        }
        for i in 0..l {
            r.set(i, dst, rot[src][i]);
        }
    }
    (w, sigma, r)
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factors_with(sv: &[f64], total: f64) -> SvdFactors {
        SvdFactors {
            k: sv.len(),
            left: Matrix::zeros(1, sv.len()),
            singular_values: sv.to_vec(),
            right: Matrix::zeros(sv.len(), 1),
            explained_variance_ratio: sv.iter().map(|s| s * s / total).collect(),
        }
    }

    #[test]
    fn curve_examples() {
        assert_eq!(explained_variance_curve(&factors_with(&[2.0, 0.0], 4.0)), vec![1.0, 1.0]);
        assert_eq!(
            explained_variance_curve(&factors_with(&[1.0; 4], 4.0)),
            vec![0.25, 0.5, 0.75, 1.0]
        );
    }

    #[test]
    fn exact_rank_two_is_recovered() {
        let mut rng = RngState::new(1);
        let a = matmul(&rng.normal_matrix(30, 2), &rng.normal_matrix(2, 25)).unwrap();
        let f = truncated_svd(&a, 2, &mut rng).unwrap();
        assert!(f.reconstruct().sub(&a).unwrap().frobenius_norm() < 1e-8);
        assert!(f.singular_values[0] >= f.singular_values[1]);
    }

    #[test]
    fn k_out_of_range() {
        let mut rng = RngState::new(1);
        let a = Matrix::filled(3, 4, 1.0);
        assert!(truncated_svd(&a, 0, &mut rng).is_err());
        assert!(truncated_svd(&a, 4, &mut rng).is_err());
    }

    #[test]
    fn factors_are_orthonormal() {
        let mut rng = RngState::new(2);
        let a = rng.normal_matrix(40, 20);
        let f = truncated_svd(&a, 5, &mut rng).unwrap();
        let utu = matmul_tn(&f.left, &f.left).unwrap();
        assert!(utu.max_abs_diff(&Matrix::identity(5)) < 1e-10);
        let vvt = crate::numerics::matmul_nt(&f.right, &f.right).unwrap();
        assert!(vvt.max_abs_diff(&Matrix::identity(5)) < 1e-10);
        let curve = explained_variance_curve(&f);
        assert!(curve.windows(2).all(|w| w[1] >= w[0]));
        assert!(*curve.last().unwrap() <= 1.0);
    }

    #[test]
    fn components_for_ratio_scans_the_curve() {
        assert_eq!(components_for_ratio(&[0.5, 0.79, 0.81, 0.9], 0.8), Some(3));
        assert_eq!(components_for_ratio(&[0.5], 0.8), None);
    }
}
