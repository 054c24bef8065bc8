mod common;

use common::{ols_with_intercept, random_dataset};
use flash::data::{standardize, Dataset};
use flash::linear::{fit_flash_path, path_coefficients_at, DeltaSchedule};
use flash::tuning::{
    enumerate_candidates, fit_block_flash, fit_global_flash, fold_assignment, kfold_cv_select, validation_select, Method,
    Selector, TuningOptions, DEFAULT_GRID,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn split(d: &Dataset, n_train: usize) -> (Dataset, Dataset) {
    let train: Vec<usize> = (0..n_train).collect();
    let valid: Vec<usize> = (n_train..d.n()).collect();
    (d.select_rows(&train).unwrap(), d.select_rows(&valid).unwrap())
}

fn opts() -> TuningOptions {
    TuningOptions::default()
}

#[test]
fn candidates_are_breakpoints_times_grid() {
    let d = random_dataset(40, 3, 2, 0.0, 0.5, 1);
    let path = fit_flash_path(&standardize(&d).unwrap(), &DeltaSchedule::lasso(), None).unwrap();
    let cands = enumerate_candidates(&path, &DEFAULT_GRID).unwrap();
    assert_eq!(cands.len(), path.len() * 5);
    let plain = enumerate_candidates(&path, &[0.0]).unwrap();
    assert_eq!(plain.len(), path.len());
    for (c, b) in plain.iter().zip(&path.breakpoints) {
        assert_eq!(c.step, b.step);
        assert!(c.score.is_none());
    }
}

#[test]
fn full_relaxation_of_lasso_is_ols_refit() {
    let d = random_dataset(50, 8, 3, 0.3, 1.0, 2);
    let path = fit_flash_path(&standardize(&d).unwrap(), &DeltaSchedule::lasso(), None).unwrap();
    let cands = enumerate_candidates(&path, &[1.0]).unwrap();
    for (c, b) in cands.iter().zip(&path.breakpoints) {
        let (beta, b0) = ols_with_intercept(&d.x, &d.y, &b.active);
        for j in 0..d.p() {
            assert!((c.coef.beta[j] - beta[j]).abs() < 1e-8, "step {} coef {j}", c.step);
        }
        assert!((c.coef.intercept - b0).abs() < 1e-8);
    }
}

#[test]
fn noiseless_single_signal_is_recovered_exactly() {
    // centered orthogonal columns, y = 2 x_1 with no noise
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let make = |r: &mut ChaCha8Rng, n: usize| {
        let mut raw = DMatrix::from_fn(n, 6, |_, _| r.sample::<f64, _>(StandardNormal));
        for mut c in raw.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
        let x = raw.qr().q() * 3.0;
        let y = x.column(0) * 2.0;
        Dataset::from_parts(x, y).unwrap()
    };
    let train = make(&mut r, 40);
    let valid = make(&mut r, 20);
    for method in [Method::Relaxo, Method::GlobalFlash(DEFAULT_GRID.to_vec()), Method::Lasso] {
        let res = validation_select(&train, &valid, &method, &opts()).unwrap();
        if method != Method::Lasso {
            assert!(res.best.score.unwrap() <= 1e-10, "{method:?}: {:?}", res.best.score);
        }
        assert_eq!(res.best.coef.support, vec![0], "{method:?}");
    }
}

#[test]
fn relaxo_never_scores_worse_than_lasso() {
    for seed in 0..10 {
        let d = random_dataset(90, 20, 4, 0.2, 0.5, 100 + seed);
        let (train, valid) = split(&d, 60);
        let lasso = validation_select(&train, &valid, &Method::Lasso, &opts()).unwrap();
        let relaxo = validation_select(&train, &valid, &Method::Relaxo, &opts()).unwrap();
        assert!(relaxo.best.score.unwrap() <= lasso.best.score.unwrap());
    }
}

#[test]
fn zero_delta_grid_is_relaxo() {
    let d = random_dataset(80, 15, 4, 0.3, 1.0, 7);
    let (train, valid) = split(&d, 50);
    let relaxo = validation_select(&train, &valid, &Method::Relaxo, &opts()).unwrap();
    let global = validation_select(&train, &valid, &Method::GlobalFlash(vec![0.0]), &opts()).unwrap();
    assert_eq!(relaxo.table.len(), global.table.len());
    for (a, b) in relaxo.table.iter().zip(&global.table) {
        assert_eq!((a.step, a.phi, &a.coef, a.score), (b.step, b.phi, &b.coef, b.score));
    }
    assert_eq!(relaxo.best.coef, global.best.coef);
}

#[test]
fn two_point_grid_is_best_of_relaxo_and_forward() {
    let d = random_dataset(80, 15, 4, 0.3, 1.0, 8);
    let (train, valid) = split(&d, 50);
    let both = fit_global_flash(&train, Selector::Validation(&valid), &[0.0, 1.0], &opts()).unwrap();
    let relaxo = validation_select(&train, &valid, &Method::Relaxo, &opts()).unwrap();
    let fwd = validation_select(&train, &valid, &Method::GlobalFlash(vec![1.0]), &opts()).unwrap();
    let want = relaxo.best.score.unwrap().min(fwd.best.score.unwrap());
    assert_eq!(both.best.score.unwrap(), want);
}

#[test]
fn default_grid_candidate_count() {
    let d = random_dataset(60, 12, 3, 0.2, 1.0, 9);
    let (train, valid) = split(&d, 40);
    let res = validation_select(&train, &valid, &Method::GlobalFlash(DEFAULT_GRID.to_vec()), &opts()).unwrap();
    let sd = standardize(&train).unwrap();
    let steps: usize = DEFAULT_GRID
        .iter()
        .map(|&delta| fit_flash_path(&sd, &DeltaSchedule::global(delta).unwrap(), None).unwrap().len())
        .sum();
    assert_eq!(res.table.len(), steps * DEFAULT_GRID.len());
}

#[test]
fn block_limit_zero_is_lasso_path() {
    let d = random_dataset(60, 12, 3, 0.2, 1.0, 10);
    let (train, valid) = split(&d, 40);
    let block = fit_block_flash(&train, Selector::Validation(&valid), 0, &opts()).unwrap();
    let relaxo = validation_select(&train, &valid, &Method::Relaxo, &opts()).unwrap();
    assert_eq!(block.table.len(), relaxo.table.len());
    assert!(block.table.iter().all(|c| c.schedule == DeltaSchedule::lasso()));
    assert_eq!(block.best.score, relaxo.best.score);
}

#[test]
fn larger_grids_never_score_worse() {
    for seed in 0..5 {
        let d = random_dataset(80, 15, 4, 0.4, 1.0, 200 + seed);
        let (train, valid) = split(&d, 50);
        let small = validation_select(&train, &valid, &Method::GlobalFlash(vec![0.0, 0.5]), &TuningOptions {
            phi_grid: vec![0.0],
            max_steps: None,
        })
        .unwrap();
        let large = validation_select(&train, &valid, &Method::GlobalFlash(DEFAULT_GRID.to_vec()), &opts()).unwrap();
        assert!(large.best.score.unwrap() <= small.best.score.unwrap());
    }
}

#[test]
fn best_is_minimum_and_matches_its_path_point() {
    let d = random_dataset(80, 15, 4, 0.3, 1.0, 11);
    let (train, valid) = split(&d, 50);
    let res = validation_select(&train, &valid, &Method::GlobalFlash(DEFAULT_GRID.to_vec()), &opts()).unwrap();
    let min = res.table.iter().map(|c| c.score.unwrap()).fold(f64::INFINITY, f64::min);
    assert_eq!(res.best.score.unwrap(), min);
    let path = fit_flash_path(&standardize(&train).unwrap(), &res.best.schedule, None).unwrap();
    let refit = path_coefficients_at(&path, res.best.step, res.best.phi).unwrap();
    assert_eq!(refit, res.best.coef);
    // the score is the validation MSE on the original scale
    let r = &valid.y - res.best.coef.predict(&valid.x);
    assert!((r.norm_squared() / valid.n() as f64 - min).abs() < 1e-12);
}

#[test]
fn leave_one_out_matches_explicit_loop() {
    let d = random_dataset(12, 4, 2, 0.2, 0.5, 12);
    let method = Method::GlobalFlash(vec![0.0, 0.5]);
    let res = kfold_cv_select(&d, d.n(), &method, 3, &opts()).unwrap();
    for c in &res.table {
        let mut total = 0.0;
        for i in 0..d.n() {
            let rest: Vec<usize> = (0..d.n()).filter(|&k| k != i).collect();
            let train = d.select_rows(&rest).unwrap();
            let path = fit_flash_path(&standardize(&train).unwrap(), &c.schedule, None).unwrap();
            let coef = path_coefficients_at(&path, c.step.min(path.len()), c.phi).unwrap();
            let xi = DMatrix::from_row_slice(1, d.p(), d.x.row(i).transpose().as_slice());
            let e = d.y[i] - coef.predict(&xi)[0];
            total += e * e;
        }
        let want = total / d.n() as f64;
        assert!((c.score.unwrap() - want).abs() < 1e-10, "{} vs {want}", c.score.unwrap());
    }
}

#[test]
fn cross_validation_is_deterministic() {
    let d = random_dataset(60, 10, 3, 0.2, 1.0, 13);
    let m = Method::BlockFlash(4);
    let a = kfold_cv_select(&d, 10, &m, 42, &opts()).unwrap();
    let b = kfold_cv_select(&d, 10, &m, 42, &opts()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(fold_assignment(60, 10, 42), fold_assignment(60, 10, 42));
    assert_ne!(fold_assignment(60, 10, 42), fold_assignment(60, 10, 43));
}

#[test]
fn invalid_fold_counts_and_empty_validation_are_rejected() {
    let d = random_dataset(20, 4, 2, 0.0, 1.0, 14);
    assert_eq!(kfold_cv_select(&d, 21, &Method::Lasso, 1, &opts()).unwrap_err().exit_code(), 2);
    assert!(kfold_cv_select(&d, 1, &Method::Lasso, 1, &opts()).is_err());
    // an empty validation set cannot even be constructed
    assert!(Dataset::from_parts(DMatrix::zeros(0, 4), DVector::zeros(0)).is_err());
    let other = random_dataset(20, 5, 2, 0.0, 1.0, 15);
    assert!(validation_select(&d, &other, &Method::Lasso, &opts()).is_err());
}

#[test]
fn json_report_has_documented_fields() {
    let d = random_dataset(60, 10, 3, 0.2, 1.0, 15);
    let (train, valid) = split(&d, 40);
    let res = fit_block_flash(&train, Selector::Validation(&valid), 3, &opts()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&res.to_json()).unwrap();
    assert_eq!(v["method"], "flash_block");
    for key in ["l_star", "step", "phi", "score", "support", "beta", "intercept"] {
        assert!(!v["best"][key].is_null(), "missing {key}");
    }
    assert_eq!(v["table"].as_array().unwrap().len(), res.table.len());
    let csv = res.score_table_csv();
    assert!(csv.starts_with("schedule,step,phi,nonzero,score,rmse\n"));
    assert_eq!(csv.lines().count(), res.table.len() + 1);
}
