//! Shared fixtures and independent reference implementations for the
//! integration tests.
#![allow(dead_code)]

use flash::data::{standardize, Dataset, StandardizedDataset};
use flash::glm::{glm_loglik, GlmData};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian design whose columns share a common factor with loading `rho`,
/// response `X beta + sigma * noise` with the first `k` coefficients nonzero.
pub fn random_dataset(n: usize, p: usize, k: usize, rho: f64, sigma: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let common: f64 = r.sample(StandardNormal);
        for j in 0..p {
            let e: f64 = r.sample(StandardNormal);
            x[(i, j)] = rho.sqrt() * common + (1.0 - rho).sqrt() * e;
        }
    }
    let mut beta = DVector::zeros(p);
    for j in 0..k.min(p) {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        beta[j] = sign * (1.0 + j as f64 * 0.5);
    }
    let mut y = &x * &beta;
    for i in 0..n {
        let e: f64 = r.sample(StandardNormal);
        y[i] += sigma * e + 0.7;
    }
    Dataset::from_parts(x, y).unwrap()
}

pub fn random_standardized(n: usize, p: usize, k: usize, rho: f64, sigma: f64, seed: u64) -> StandardizedDataset {
    standardize(&random_dataset(n, p, k, rho, sigma, seed)).unwrap()
}

/// Centered orthonormal columns with `X^T y = xty` exactly (up to rounding).
pub fn orthonormal(n: usize, xty: &[f64], seed: u64) -> StandardizedDataset {
    let p = xty.len();
    let mut r = rng(seed);
    let mut raw = DMatrix::from_fn(n, p + 1, |_, _| r.sample::<f64, _>(StandardNormal));
    for mut c in raw.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    let q = raw.qr().q();
    let x = q.columns(0, p).into_owned();
    let extra = q.column(p).into_owned();
    let y = &x * DVector::from_column_slice(xty) + extra * 0.3;
    standardize(&Dataset::from_parts(x, y).unwrap()).unwrap()
}

/// Lasso `min 0.5 |y - X b|^2 + lambda |b|_1` by cyclic coordinate descent run to
/// machine precision. Columns must have unit norm.
pub fn lasso_cd(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let p = x.ncols();
    let mut b: DVector<f64> = DVector::zeros(p);
    let mut r = y.clone();
    for _ in 0..200_000 {
        let mut biggest = 0.0f64;
        for j in 0..p {
            let xj = x.column(j);
            let nrm = xj.norm_squared();
            let z = xj.dot(&r) + nrm * b[j];
            let new = if z > lambda {
                (z - lambda) / nrm
            } else if z < -lambda {
                (z + lambda) / nrm
            } else {
                0.0
            };
            let d = new - b[j];
            if d != 0.0 {
                r.axpy(-d, &xj, 1.0);
                b[j] = new;
                biggest = biggest.max(d.abs());
            }
        }
        if biggest < 1e-15 {
            break;
        }
    }
    b
}

/// Least squares on the listed columns by SVD, padded to length `p`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    let mut out = DVector::zeros(x.ncols());
    if cols.is_empty() {
        return out;
    }
    let xa = x.select_columns(cols.iter());
    let sol = xa.svd(true, true).solve(y, 1e-14).unwrap();
    for (k, &j) in cols.iter().enumerate() {
        out[j] = sol[k];
    }
    out
}

/// Classic forward selection: add the column most correlated with the current
/// residual, refit by least squares, repeat.
pub fn greedy_forward(x: &DMatrix<f64>, y: &DVector<f64>, steps: usize) -> Vec<(usize, DVector<f64>)> {
    let p = x.ncols();
    let mut active: Vec<usize> = Vec::new();
    let mut beta = DVector::zeros(p);
    let mut out = Vec::new();
    for _ in 0..steps.min(p) {
        let c = x.tr_mul(&(y - x * &beta));
        let j = (0..p)
            .filter(|j| !active.contains(j))
            .max_by(|a, b| c[*a].abs().partial_cmp(&c[*b].abs()).unwrap().then(b.cmp(a)))
            .unwrap();
        active.push(j);
        beta = ols(x, y, &active);
        out.push((j, beta.clone()));
    }
    out
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// Least squares with an intercept on the listed original-scale columns, by SVD.
/// Returns the padded slope vector and the intercept.
pub fn ols_with_intercept(x: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> (DVector<f64>, f64) {
    let n = x.nrows();
    let mut z = DMatrix::from_element(n, cols.len() + 1, 1.0);
    for (k, &j) in cols.iter().enumerate() {
        z.set_column(k + 1, &x.column(j));
    }
    let sol = z.svd(true, true).solve(y, 1e-14).unwrap();
    let mut beta = DVector::zeros(x.ncols());
    for (k, &j) in cols.iter().enumerate() {
        beta[j] = sol[k + 1];
    }
    (beta, sol[0])
}

/// Maximizer of a unimodal function on `[a, b]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while (b - a).abs() > 1e-12 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

/// One-variable logistic ML fit: golden-section search on the slope with the
/// intercept profiled out by a nested golden-section search.
pub fn ml_one_variable(gd: &GlmData, j: usize) -> (f64, f64) {
    let profile = |b: f64| {
        let mut beta = DVector::zeros(gd.p());
        beta[j] = b;
        let b0 = golden_max(|a| glm_loglik(gd, &beta, a), -20.0, 20.0);
        (glm_loglik(gd, &beta, b0), b0)
    };
    let b = golden_max(|b| profile(b).0, -500.0, 500.0);
    (b, profile(b).1)
}

/// Logistic ML fit on the listed columns by a dense Newton iteration on
/// `[1 | X_A]` with step halving. Returns padded slopes and the intercept.
pub fn logistic_newton(x: &DMatrix<f64>, y: &DVector<f64>, cols: &[usize]) -> (DVector<f64>, f64) {
    let n = x.nrows();
    let k = cols.len() + 1;
    let mut z = DMatrix::from_element(n, k, 1.0);
    for (c, &j) in cols.iter().enumerate() {
        z.set_column(c + 1, &x.column(j));
    }
    let loglik = |t: &DVector<f64>| -> f64 {
        let eta = &z * t;
        (0..n).map(|i| y[i] * eta[i] - (1.0 + eta[i].exp()).ln()).sum()
    };
    let mut theta = DVector::zeros(k);
    for _ in 0..200 {
        let eta = &z * &theta;
        let mu = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
        let grad = z.tr_mul(&(y - &mu));
        if grad.amax() < 1e-13 {
            break;
        }
        let mut h = DMatrix::zeros(k, k);
        for i in 0..n {
            let w = mu[i] * (1.0 - mu[i]);
            let row = z.row(i);
            h += row.transpose() * row * w;
        }
        let step = h.cholesky().expect("information matrix is positive definite").solve(&grad);
        let base = loglik(&theta);
        let mut t = 1.0;
        while t > 1e-10 && loglik(&(&theta + &step * t)) < base {
            t *= 0.5;
        }
        theta += step * t;
    }
    let mut beta = DVector::zeros(x.ncols());
    for (c, &j) in cols.iter().enumerate() {
        beta[j] = theta[c + 1];
    }
    (beta, theta[0])
}

/// Logistic responses from `eta = X beta` with the first `k` coefficients set to
/// `+-strength`, standardized for the GLM engine.
pub fn logistic_data(n: usize, p: usize, k: usize, strength: f64, seed: u64) -> GlmData {
    use flash::glm::Family;
    let mut r = rng(seed);
    let x = DMatrix::from_fn(n, p, |_, _| r.sample::<f64, _>(StandardNormal));
    let mut beta = DVector::zeros(p);
    for j in 0..k {
        beta[j] = if j % 2 == 0 { strength } else { -strength };
    }
    let eta = &x * &beta;
    let y = eta.map(|e| if r.random::<f64>() < 1.0 / (1.0 + (-e).exp()) { 1.0 } else { 0.0 });
    GlmData::from_dataset(&Dataset::from_parts(x, y).unwrap(), Family::BernoulliLogit).unwrap()
}
