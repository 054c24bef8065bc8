use nalgebra::{DMatrix, DVector};

use super::family::{loglik_from_eta, GlmData};
use crate::error::{FlashError, Result};

/// Convergence controls for the penalized IRLS corrector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorOptions {
    pub max_outer: usize,
    /// Largest coefficient change allowed at convergence.
    pub coef_tol: f64,
    /// Largest violation of the optimality conditions allowed at convergence.
    pub kkt_tol: f64,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        Self {
            max_outer: 500,
            coef_tol: 1e-8,
            kkt_tol: 1e-6,
        }
    }
}

/// A solution of the penalized problem restricted to an active set.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Full-length coefficients; zero outside the active set.
    pub beta: DVector<f64>,
    pub intercept: f64,
    pub eta: DVector<f64>,
    pub mu: DVector<f64>,
    /// `X^T (y - mu)` for every column.
    pub grad: DVector<f64>,
    pub outer_iterations: usize,
    pub kkt_residual: f64,
}

fn soft(g: f64, lam: f64) -> f64 {
    if g > lam {
        g - lam
    } else if g < -lam {
        g + lam
    } else {
        0.0
    }
}

fn objective(gd: &GlmData, eta: &DVector<f64>, beta: &[f64], lam: &[f64]) -> f64 {
    let pen: f64 = beta.iter().zip(lam).map(|(b, l)| l * b.abs()).sum();
    -loglik_from_eta(gd, eta) + pen
}

/// Largest violation of the stationarity conditions of
/// `max l(beta) - sum_k lam_k |beta_k|` over the active coordinates and the intercept.
pub fn kkt_residual(grad_active: &[f64], beta_active: &[f64], lam: &[f64], intercept_grad: f64) -> f64 {
    let mut worst = intercept_grad.abs();
    for ((g, b), l) in grad_active.iter().zip(beta_active).zip(lam) {
        let r = if *b != 0.0 {
            (g - l * b.signum()).abs()
        } else {
            (g.abs() - l).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

/// Solves `max l(beta) - sum_k lam_k |beta_k|` over the coordinates in `active`
/// (all other coefficients fixed at zero) by iteratively reweighted least squares,
/// each weighted problem solved by cyclic coordinate descent with soft thresholding.
pub fn solve_penalized(
    gd: &GlmData,
    active: &[usize],
    lam: &[f64],
    warm_beta: &DVector<f64>,
    warm_intercept: f64,
    opts: &CorrectorOptions,
) -> Result<Solution> {
    if active.len() != lam.len() {
        return Err(FlashError::Shape(format!(
            "{} penalties for {} active coordinates",
            lam.len(),
            active.len()
        )));
    }
    let n = gd.n();
    let m = active.len();
    let cols: Vec<_> = active.iter().map(|&j| gd.x.column(j)).collect();
    let mut beta: Vec<f64> = active.iter().map(|&j| warm_beta[j]).collect();
    let mut b0 = warm_intercept;
    let mut eta = DVector::from_element(n, b0);
    for (k, c) in cols.iter().enumerate() {
        if beta[k] != 0.0 {
            eta.axpy(beta[k], c, 1.0);
        }
    }
    let mut obj = objective(gd, &eta, &beta, lam);
    let mut kkt = f64::INFINITY;

    for outer in 1..=opts.max_outer {
        let mu = eta.map(|e| gd.family.mean(e));
        let w = mu.map(|v| gd.family.weight(v));
        // weighted working residual w * (z - eta) = y - mu
        let mut rw = &gd.y - &mu;
        let sw = w.sum();
        let wcols: Vec<DVector<f64>> = cols.iter().map(|c| c.component_mul(&w)).collect();
        let xwx: Vec<f64> = cols.iter().zip(&wcols).map(|(c, wc)| c.dot(wc)).collect();

        let mut nb = beta.clone();
        let mut nb0 = b0;
        let mut sweep_all = true;
        for _sweep in 0..10_000 {
            let mut biggest = 0.0f64;
            let d0 = rw.sum() / sw;
            if d0 != 0.0 {
                nb0 += d0;
                rw.axpy(-d0, &w, 1.0);
                biggest = biggest.max(d0.abs());
            }
            for k in 0..m {
                if !sweep_all && nb[k] == 0.0 {
                    continue;
                }
                if xwx[k] <= 0.0 {
                    continue;
                }
                let g = cols[k].dot(&rw) + xwx[k] * nb[k];
                let new = soft(g, lam[k]) / xwx[k];
                let d = new - nb[k];
                if d != 0.0 {
                    rw.axpy(-d, &wcols[k], 1.0);
                    nb[k] = new;
                    biggest = biggest.max(d.abs() * xwx[k].sqrt());
                }
            }
            if biggest <= 1e-13 {
                if sweep_all {
                    break;
                }
                sweep_all = true;
            } else {
                sweep_all = false;
            }
        }

        // Step halving on the true objective keeps IRLS monotone.
        let mut dir = DVector::from_element(n, nb0 - b0);
        for k in 0..m {
            let d = nb[k] - beta[k];
            if d != 0.0 {
                dir.axpy(d, &cols[k], 1.0);
            }
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-10 {
            let eta_t = &eta + &dir * t;
            let beta_t: Vec<f64> = beta.iter().zip(&nb).map(|(b, n)| b + t * (n - b)).collect();
            let obj_t = objective(gd, &eta_t, &beta_t, lam);
            if obj_t <= obj + 1e-12 * obj.abs().max(1.0) {
                accepted = Some((eta_t, beta_t, obj_t));
                break;
            }
            t *= 0.5;
        }
        let mut change = 0.0f64;
        let stalled = accepted.is_none();
        if let Some((eta_t, beta_t, obj_t)) = accepted {
            change = (t * (nb0 - b0)).abs();
            for k in 0..m {
                change = change.max((beta_t[k] - beta[k]).abs());
            }
            b0 += t * (nb0 - b0);
            beta = beta_t;
            // exact zeros from the thresholding survive a full step only
            if t < 1.0 {
                for k in 0..m {
                    if nb[k] == 0.0 && beta[k].abs() < 1e-14 {
                        beta[k] = 0.0;
                    }
                }
            }
            eta = eta_t;
            obj = obj_t;
        }

        let resid = gd.y.clone() - eta.map(|e| gd.family.mean(e));
        let ga: Vec<f64> = cols.iter().map(|c| c.dot(&resid)).collect();
        kkt = kkt_residual(&ga, &beta, lam, resid.sum());
        if change <= opts.coef_tol && kkt <= opts.kkt_tol {
            return Ok(finish(gd, active, &beta, b0, eta, outer, kkt));
        }
        if stalled && kkt <= opts.kkt_tol.sqrt() {
            // no descent possible at machine precision; accept a near-stationary point
            return Ok(finish(gd, active, &beta, b0, eta, outer, kkt));
        }
    }
    let sol = finish(gd, active, &beta, b0, eta, opts.max_outer, kkt);
    Err(FlashError::Corrector {
        iterations: opts.max_outer,
        kkt_residual: kkt,
        last: Box::new(super::path::GlmPathPoint::from_solution(&sol, active, lam, f64::NAN)),
    })
}

fn finish(
    gd: &GlmData,
    active: &[usize],
    beta_active: &[f64],
    intercept: f64,
    eta: DVector<f64>,
    outer: usize,
    kkt: f64,
) -> Solution {
    let mut beta = DVector::zeros(gd.p());
    for (k, &j) in active.iter().enumerate() {
        beta[j] = beta_active[k];
    }
    let mu = eta.map(|e| gd.family.mean(e));
    let grad = gd.x.tr_mul(&(&gd.y - &mu));
    Solution {
        beta,
        intercept,
        eta,
        mu,
        grad,
        outer_iterations: outer,
        kkt_residual: kkt,
    }
}

/// Unpenalized maximum-likelihood fit on `active` by Newton's method with
/// step halving, solving the normal equations with a Cholesky factorization.
/// Independent of the coordinate-descent corrector.
pub fn ml_fit(
    gd: &GlmData,
    active: &[usize],
    warm_beta: &DVector<f64>,
    warm_intercept: f64,
    max_iter: usize,
) -> Result<Solution> {
    let n = gd.n();
    let m = active.len();
    // design with a leading intercept column
    let mut z = DMatrix::from_element(n, m + 1, 1.0);
    for (k, &j) in active.iter().enumerate() {
        z.set_column(k + 1, &gd.x.column(j));
    }
    let mut theta = DVector::from_iterator(
        m + 1,
        std::iter::once(warm_intercept).chain(active.iter().map(|&j| warm_beta[j])),
    );
    let mut eta = &z * &theta;
    let mut ll = loglik_from_eta(gd, &eta);
    let mut grad_norm = f64::INFINITY;
    for it in 1..=max_iter {
        let mu = eta.map(|e| gd.family.mean(e));
        let grad = z.tr_mul(&(&gd.y - &mu));
        grad_norm = grad.amax();
        if grad_norm <= 1e-10 * (n as f64).sqrt().max(1.0) {
            return Ok(finish_ml(gd, active, &theta, eta, it, grad_norm));
        }
        let w = mu.map(|v| gd.family.weight(v));
        let mut zw = z.clone();
        for (i, mut row) in zw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let mut h = z.tr_mul(&zw);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                let ridge = 1e-10 * h.diagonal().amax().max(1.0);
                for d in 0..=m {
                    h[(d, d)] += ridge;
                }
                h.cholesky().ok_or(FlashError::SingularGram { index: m })?.solve(&grad)
            }
        };
        let dir = &z * &step;
        let mut t = 1.0;
        loop {
            let eta_t = &eta + &dir * t;
            let ll_t = loglik_from_eta(gd, &eta_t);
            if ll_t >= ll - 1e-12 * ll.abs().max(1.0) {
                theta += &step * t;
                eta = eta_t;
                ll = ll_t;
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                return Ok(finish_ml(gd, active, &theta, eta, it, grad_norm));
            }
        }
        if (&step * t).amax() <= 1e-12 {
            return Ok(finish_ml(gd, active, &theta, eta, it, grad_norm));
        }
    }
    Ok(finish_ml(gd, active, &theta, eta, max_iter, grad_norm))
}

fn finish_ml(gd: &GlmData, active: &[usize], theta: &DVector<f64>, eta: DVector<f64>, it: usize, g: f64) -> Solution {
    let beta_active: Vec<f64> = theta.iter().skip(1).copied().collect();
    finish(gd, active, &beta_active, theta[0], eta, it, g)
}
