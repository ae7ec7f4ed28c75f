//! Ordinary least squares with classical standard errors.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{contract, Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub residual_variance: f64,
    pub n: usize,
    pub dof: usize,
}

/// Upper tail `P(T > t)` of Student's t with `dof` degrees of freedom.
pub fn student_t_sf(t: f64, dof: f64) -> f64 {
    assert!(dof > 0.0, "dof must be positive");
    if t == 0.0 {
        return 0.5;
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * beta_reg(dof / 2.0, 0.5, x);
    if t > 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

pub fn two_sided_p(t: f64, dof: f64) -> f64 {
    (2.0 * student_t_sf(t.abs(), dof)).min(1.0)
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// A pivot below `tol · max|a|` marks the column as dependent.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>, tol: f64) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() <= tol * scale {
            return Err(Error::SingularDesign { column: col });
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            for c in 0..b[r].len() {
                b[r][c] -= f * b[col][c];
            }
        }
    }
    for col in (0..n).rev() {
        for c in 0..b[col].len() {
            let mut s = b[col][c];
            for k in col + 1..n {
                s -= a[col][k] * b[k][c];
            }
            b[col][c] = s / a[col][col];
        }
    }
    Ok(b)
}

/// Fits `y ≈ X β`. `x` is n × p and should include an intercept column.
pub fn ols_fit(y: &[f64], x: &Matrix) -> Result<OlsResult> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(contract(format!("{} responses for {n} design rows", y.len())));
    }
    if n <= p {
        return Err(contract(format!("need more rows ({n}) than regressors ({p})")));
    }
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![vec![0.0]; p];
    for r in 0..n {
        let row = x.row(r);
        for i in 0..p {
            xty[i][0] += row[i] * y[r];
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    let identity: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let beta: Vec<f64> = solve(xtx.clone(), xty, 1e-12)?.into_iter().map(|r| r[0]).collect();
    let inv = solve(xtx, identity, 1e-12)?;

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let (mut rss, mut tss) = (0.0, 0.0);
    for r in 0..n {
        let fit: f64 = x.row(r).iter().zip(&beta).map(|(a, b)| a * b).sum();
        rss += (y[r] - fit).powi(2);
        tss += (y[r] - mean_y).powi(2);
    }
    let dof = n - p;
    let sigma2 = rss / dof as f64;
    let std_errors: Vec<f64> = (0..p).map(|i| (sigma2 * inv[i][i]).max(0.0).sqrt()).collect();
    let t_stats: Vec<f64> = beta
        .iter()
        .zip(&std_errors)
        .map(|(b, s)| if *s > 0.0 { b / s } else { f64::INFINITY.copysign(*b) })
        .collect();
    let p_values = t_stats.iter().map(|&t| if t.is_finite() { two_sided_p(t, dof as f64) } else { 0.0 }).collect();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 1.0 };
    Ok(OlsResult {
        coefficients: beta,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        residual_variance: sigma2,
        n,
        dof,
    })
}

/// Design for `v'ₜ = α + β₁ v'ₜ₋₁ + β₂ c'ₜ + β₃ c'ₜ₋₁`; returns `(y, X)`.
pub fn lagged_design(v: &[f64], c: &[f64]) -> Result<(Vec<f64>, Matrix)> {
    if v.len() != c.len() {
        return Err(contract(format!("series lengths {} and {} differ", v.len(), c.len())));
    }
    if v.len() < 2 {
        return Err(contract("lagged design needs at least 2 points"));
    }
    let n = v.len() - 1;
    let mut data = Vec::with_capacity(n * 4);
    for t in 1..v.len() {
        data.extend([1.0, v[t - 1], c[t], c[t - 1]]);
    }
    Ok((v[1..].to_vec(), Matrix::from_vec(n, 4, data)?))
}

pub const LAGGED_TERMS: [&str; 4] = ["alpha", "beta1_v_lag1", "beta2_c", "beta3_c_lag1"];
