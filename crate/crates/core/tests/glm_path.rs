mod common;

use common::*;
use flash::data::{residual_correlations, standardize, Dataset};
use flash::glm::*;
use flash::linear::{fit_flash_path, DeltaSchedule};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn gaussian_data(n: usize, p: usize, seed: u64) -> (GlmData, flash::data::StandardizedDataset) {
    let d = random_dataset(n, p, 3, 0.5, 1.0, seed);
    let sd = standardize(&d).unwrap();
    let gd = GlmData::new(sd.xs.clone(), d.y.clone(), Family::GaussianIdentity).unwrap();
    (gd, sd)
}

#[test]
fn mean_matches_scalar_loop() {
    let gd = logistic_data(30, 4, 2, 1.0, 1);
    let beta = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.0]);
    let mu = glm_mu(&gd, &beta, 0.3);
    for i in 0..gd.n() {
        let mut eta = 0.3;
        for j in 0..4 {
            eta += gd.x[(i, j)] * beta[j];
        }
        assert!((mu[i] - 1.0 / (1.0 + (-eta).exp())).abs() < 1e-15);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let gd = logistic_data(40, 5, 2, 1.0, 2);
    let mut r = rng(3);
    for _ in 0..10 {
        let beta = DVector::from_fn(5, |_, _| r.random_range(-1.0..1.0));
        let b0 = r.random_range(-0.5..0.5);
        let g = glm_gradient_corr(&gd, &beta, b0);
        for j in 0..5 {
            let h = 1e-5;
            let mut up = beta.clone();
            up[j] += h;
            let mut dn = beta.clone();
            dn[j] -= h;
            let fd = (glm_loglik(&gd, &up, b0) - glm_loglik(&gd, &dn, b0)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6, "{fd} vs {}", g[j]);
        }
    }
}

#[test]
fn gaussian_gradient_is_residual_correlation() {
    let (gd, sd) = gaussian_data(30, 6, 4);
    let beta = DVector::from_vec(vec![0.3, 0.0, -1.2, 0.0, 0.5, 2.0]);
    let g = glm_gradient_corr(&gd, &beta, sd.scaling.y_mean);
    let c = residual_correlations(&sd, &beta).unwrap();
    assert!(max_abs_diff(&g, &c) < 1e-12);
}

#[test]
fn null_gradient_uses_mean_response() {
    let gd = logistic_data(25, 3, 1, 1.0, 5);
    let g = glm_gradient_corr(&gd, &DVector::zeros(3), gd.null_intercept());
    let ybar = gd.y.mean();
    let direct = gd.x.tr_mul(&gd.y.add_scalar(-ybar));
    assert!(max_abs_diff(&g, &direct) < 1e-12);
}

#[test]
fn deviance_is_minus_twice_loglik() {
    let gd = logistic_data(30, 3, 2, 1.0, 6);
    let mut r = rng(7);
    for _ in 0..10 {
        let beta = DVector::from_fn(3, |_, _| r.random_range(-1.0..1.0));
        let mu = glm_mu(&gd, &beta, 0.1);
        let dev = deviance(&gd.y, &mu, Family::BernoulliLogit);
        assert!((dev + 2.0 * glm_loglik(&gd, &beta, 0.1)).abs() < 1e-9);
    }
}

#[test]
fn corrector_single_variable_matches_golden_section() {
    let gd = logistic_data(60, 3, 1, 1.5, 8);
    let warm = GlmPathPoint {
        lam: vec![],
        active: vec![],
        beta: vec![0.0; 3],
        intercept: 0.0,
        max_lam: 0.0,
        mu: vec![],
        grad: vec![],
        corrector_iterations: 0,
    };
    let pt = glm_corrector(&gd, &[0], &[0.0], &warm).unwrap();
    let (b, b0) = ml_one_variable(&gd, 0);
    assert!((pt.beta[0] - b).abs() < 1e-6, "{} vs {b}", pt.beta[0]);
    assert!((pt.intercept - b0).abs() < 1e-6);
}

#[test]
fn corrector_beats_random_feasible_points() {
    let gd = logistic_data(40, 2, 2, 1.0, 9);
    let lam = [0.3, 0.1];
    let sol = solve_penalized(&gd, &[0, 1], &lam, &DVector::zeros(2), 0.0, &CorrectorOptions::default()).unwrap();
    assert!(sol.kkt_residual <= 1e-6);
    let obj = |b: &DVector<f64>, b0: f64| -glm_loglik(&gd, b, b0) + lam[0] * b[0].abs() + lam[1] * b[1].abs();
    let best = obj(&sol.beta, sol.intercept);
    let mut r = rng(10);
    for _ in 0..10_000 {
        let b = DVector::from_fn(2, |i, _| sol.beta[i] + r.random_range(-1.0..1.0));
        let b0 = sol.intercept + r.random_range(-1.0..1.0);
        assert!(obj(&b, b0) >= best - 1e-10);
    }
}

#[test]
fn predictor_is_exact_on_affine_segments() {
    let mk = |lam: f64| GlmPathPoint {
        lam: vec![lam],
        active: vec![1],
        beta: vec![0.0, 2.0 - lam, 0.0],
        intercept: 0.5 * lam,
        max_lam: lam,
        mu: vec![],
        grad: vec![],
        corrector_iterations: 0,
    };
    let (a, b) = (mk(1.0), mk(0.9));
    let pred = glm_predictor(&b, Some(&a), 0.8);
    assert!((pred.beta[1] - 1.2).abs() < 1e-12);
    assert!((pred.intercept - 0.4).abs() < 1e-12);
    let copy = glm_predictor(&b, None, 0.8);
    assert_eq!(copy.beta, b.beta);
}

#[test]
fn predictor_warm_start_saves_iterations() {
    let gd = logistic_data(80, 5, 3, 1.0, 11);
    let count = |ws: WarmStart| {
        let opts = GlmPathOptions {
            warm_start: ws,
            ..GlmPathOptions::default()
        };
        let path = fit_glm_flash_path(&gd, 0.0, &opts).unwrap();
        path.points.iter().map(|p| p.corrector_iterations).sum::<usize>()
    };
    let pred = count(WarmStart::Predictor);
    let zero = count(WarmStart::Zero);
    assert!(pred <= zero, "predictor {pred} vs zero {zero}");
}

fn check_kkt(pt: &GlmPathPoint) {
    for (k, &j) in pt.active.iter().enumerate() {
        let g = pt.grad[j];
        if pt.beta[j] != 0.0 {
            assert!((g - pt.lam[k] * pt.beta[j].signum()).abs() <= 1e-4);
        } else {
            assert!(g.abs() <= pt.lam[k] + 1e-4);
        }
    }
}

#[test]
fn glasso_path_respects_kkt_and_decreasing_grid() {
    for seed in 0..5u64 {
        let gd = logistic_data(60, 10, 3, 1.0, 20 + seed);
        for delta in [0.0, 0.5] {
            let path = fit_glm_flash_path(&gd, delta, &GlmPathOptions::default()).unwrap();
            assert!(path.len() > 3);
            let mut last = f64::INFINITY;
            for pt in &path.points {
                check_kkt(pt);
                assert!(pt.max_lam < last, "grid not decreasing");
                last = pt.max_lam;
                for j in 0..gd.p() {
                    if !pt.active.contains(&j) {
                        assert_eq!(pt.beta[j], 0.0);
                        if delta == 0.0 {
                            assert!(pt.grad[j].abs() <= pt.max_lam + 1e-4);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn forward_glm_path_points_are_ml_fits() {
    let gd = logistic_data(80, 8, 3, 1.0, 30);
    let path = fit_glm_flash_path(&gd, 1.0, &GlmPathOptions::default()).unwrap();
    assert!(path.len() > 3);
    for pt in &path.points {
        for &j in &pt.active {
            assert!(pt.grad[j].abs() <= 1e-6);
        }
    }
}

fn distinct_active_sets<'a>(sets: impl Iterator<Item = &'a Vec<usize>>) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for s in sets {
        let mut s = s.clone();
        s.sort_unstable();
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
    out
}

#[test]
fn gaussian_glasso_follows_the_linear_lasso() {
    for seed in 0..6u64 {
        let (gd, sd) = gaussian_data(40, 8, 40 + seed);
        let opts = GlmPathOptions {
            max_points: Some(5000),
            ..GlmPathOptions::default()
        };
        let glm = fit_glm_flash_path(&gd, 0.0, &opts).unwrap();
        let lin = fit_flash_path(&sd, &DeltaSchedule::lasso(), None).unwrap();
        let glm_sets = distinct_active_sets(glm.points.iter().map(|p| &p.active));
        let lin_sets = distinct_active_sets(lin.breakpoints.iter().flat_map(|b| [&b.active, &b.active_after]));
        assert_eq!(glm_sets, lin_sets, "seed {seed}");
        for pt in &glm.points {
            let lam = pt.max_lam;
            let oracle = if lam > 0.0 {
                lasso_cd(&sd.xs, &sd.ys, lam)
            } else {
                ols(&sd.xs, &sd.ys, &(0..sd.p()).collect::<Vec<_>>())
            };
            assert!(max_abs_diff(&pt.beta_vector(), &oracle) < 1e-6, "seed {seed} lam {lam}");
        }
    }
}

#[test]
fn gaussian_forward_matches_linear_forward() {
    for seed in 0..6u64 {
        let (gd, sd) = gaussian_data(40, 8, 60 + seed);
        let glm = fit_glm_flash_path(&gd, 1.0, &GlmPathOptions::default()).unwrap();
        let newton = glm_forward_path(&gd, 8).unwrap();
        let lin = fit_flash_path(&sd, &DeltaSchedule::forward(), None).unwrap();
        assert_eq!(glm.len(), lin.len() + 1);
        assert_eq!(newton.len(), lin.len() + 1);
        for (k, b) in lin.breakpoints.iter().enumerate() {
            let end = DVector::from_column_slice(&b.beta_end);
            assert!(max_abs_diff(&glm.points[k + 1].beta_vector(), &end) < 1e-6);
            assert!(max_abs_diff(&newton.points[k + 1].beta_vector(), &end) < 1e-6);
            assert_eq!(glm.points[k + 1].active.last().copied(), b.entered);
        }
    }
}

#[test]
fn glm_forward_matches_forward_flash_path() {
    for seed in 0..4u64 {
        let gd = logistic_data(70, 6, 3, 1.0, 80 + seed);
        let a = glm_forward_path(&gd, 6).unwrap();
        let b = fit_glm_flash_path(&gd, 1.0, &GlmPathOptions::default()).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_eq!(pa.active, pb.active);
            assert!(max_abs_diff(&pa.beta_vector(), &pb.beta_vector()) < 1e-6);
        }
    }
    let gd = logistic_data(30, 4, 1, 1.0, 90);
    let null = glm_forward_path(&gd, 0).unwrap();
    assert_eq!(null.len(), 1);
    assert!(null.points[0].active.is_empty());
    assert!((null.points[0].intercept - gd.null_intercept()).abs() < 1e-12);
}

#[test]
fn block_phase_two_is_the_single_variable_fit() {
    let gd = logistic_data(100, 6, 1, 3.0, 100);
    let path = fit_glm_block_flash(&gd, 1, &GlmPathOptions::default()).unwrap();
    assert_eq!(path.l_star_reached, Some(true));
    let k = path.points.iter().position(|p| p.lam.iter().all(|l| *l == 0.0)).unwrap();
    let pt = &path.points[k];
    assert_eq!(pt.active.len(), 1);
    let (b, b0) = ml_one_variable(&gd, pt.active[0]);
    assert!((pt.beta[pt.active[0]] - b).abs() < 1e-6, "{} vs {b}", pt.beta[pt.active[0]]);
    assert!((pt.intercept - b0).abs() < 1e-6);
}

#[test]
fn block_keeps_first_block_unpenalized() {
    for l_star in [1usize, 2, 3] {
        let gd = logistic_data(80, 8, 3, 1.0, 110 + l_star as u64);
        let path = fit_glm_block_flash(&gd, l_star, &GlmPathOptions::default()).unwrap();
        let k = path.points.iter().position(|p| p.lam.iter().all(|l| *l == 0.0)).unwrap();
        let block = path.points[k].active.clone();
        assert_eq!(block.len(), l_star);
        assert!(path.len() > k + 1);
        for pt in &path.points[k..] {
            for &j in &block {
                assert!(pt.grad[j].abs() <= 1e-6, "unpenalized gradient {}", pt.grad[j]);
            }
            check_kkt(pt);
        }
        // the prefix is the GLasso path
        let glasso = fit_glm_flash_path(&gd, 0.0, &GlmPathOptions::default()).unwrap();
        assert_eq!(&glasso.points[..k], &path.points[..k]);
        let reused = glm_block_from_lasso(&glasso, &gd, l_star, &GlmPathOptions::default()).unwrap();
        assert_eq!(reused.points, path.points);
    }
}

#[test]
fn unreachable_block_point_is_flagged() {
    let gd = logistic_data(30, 3, 1, 1.0, 120);
    let path = fit_glm_block_flash(&gd, 10, &GlmPathOptions::default()).unwrap();
    assert_eq!(path.l_star_reached, Some(false));
    let glasso = fit_glm_flash_path(&gd, 0.0, &GlmPathOptions::default()).unwrap();
    assert_eq!(path.points, glasso.points);
}

#[test]
fn separable_data_gives_finite_fit_with_warning() {
    let x = DMatrix::from_column_slice(8, 1, &[-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0]);
    let y = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    let gd = GlmData::from_dataset(&Dataset::from_parts(x, y).unwrap(), Family::BernoulliLogit).unwrap();
    let path = glm_forward_path(&gd, 1).unwrap();
    let last = path.points.last().unwrap();
    assert!(last.beta.iter().all(|b| b.is_finite()));
    assert!(!path.warnings.is_empty());
}

#[test]
fn path_json_fields() {
    let gd = logistic_data(30, 4, 2, 1.0, 130);
    let path = fit_glm_flash_path(&gd, 0.0, &GlmPathOptions::default()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&path.to_json()).unwrap();
    let pt = &v["points"][0];
    for key in ["lam_active", "active", "beta", "intercept", "max_lam"] {
        assert!(pt.get(key).is_some(), "missing {key}");
    }
    assert!(pt.get("mu").is_none());
}

#[test]
fn invalid_options_are_rejected() {
    let gd = logistic_data(20, 3, 1, 1.0, 140);
    assert!(fit_glm_flash_path(&gd, 1.5, &GlmPathOptions::default()).is_err());
    assert!(fit_glm_flash_path(&gd, 0.0, &GlmPathOptions::with_epsilon(0.5)).is_err());
    assert!(fit_glm_block_flash(&gd, 0, &GlmPathOptions::default()).is_err());
}
