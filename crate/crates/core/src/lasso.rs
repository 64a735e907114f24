//! ℓ1-penalized least squares on a row range of the sorted data.
//!
//! The objective on a segment of `m` rows is
//! `(1/m) Σ (y_i - x_iᵀα)² + λ Σ_k f_k |α_k|`, where the penalty factors
//! `f_k` are 1 unless column standardization is requested. No intercept.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SurrogateDataset;
use crate::seed::Rng;

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Convergence threshold on the largest coordinate update in a sweep.
    pub tol: f64,
    /// Maximum number of full sweeps.
    pub max_iter: usize,
    /// Penalize each coefficient in proportion to its column's root mean square.
    pub standardize: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub coef: Vec<f64>,
    pub lambda: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub penalty_factors: Vec<f64>,
}

/// A Lasso problem materialized column-major over a chosen set of rows.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    m: usize,
    p: usize,
    cols: Vec<f64>,
    y: Vec<f64>,
    // (2/m) Σ x_ik²
    curvature: Vec<f64>,
    factors: Vec<f64>,
}

impl LassoProblem {
    pub fn from_rows(
        data: &SurrogateDataset,
        rows: impl IntoIterator<Item = usize>,
        standardize: bool,
    ) -> Self {
        let rows: Vec<usize> = rows.into_iter().collect();
        let m = rows.len();
        let p = data.p();
        let x = data.x();
        let mut cols = vec![0.0; m * p];
        for k in 0..p {
            let col = &mut cols[k * m..(k + 1) * m];
            for (slot, &i) in col.iter_mut().zip(&rows) {
                *slot = x[[i, k]];
            }
        }
        let y = rows.iter().map(|&i| data.y()[i]).collect();
        Self::assemble(m, p, cols, y, standardize)
    }

    /// Sorted rows `lo+1..=hi` (0-based `lo..hi`).
    pub fn segment(data: &SurrogateDataset, lo: usize, hi: usize, standardize: bool) -> Self {
        Self::from_rows(data, lo..hi, standardize)
    }

    fn assemble(m: usize, p: usize, cols: Vec<f64>, y: Vec<f64>, standardize: bool) -> Self {
        let scale = if m > 0 { 2.0 / m as f64 } else { 0.0 };
        let curvature: Vec<f64> = (0..p)
            .map(|k| scale * cols[k * m..(k + 1) * m].iter().map(|v| v * v).sum::<f64>())
            .collect();
        let factors = if standardize {
            curvature
                .iter()
                .map(|&c| {
                    let rms = (c / 2.0).sqrt();
                    if rms > 0.0 {
                        rms
                    } else {
                        1.0
                    }
                })
                .collect()
        } else {
            vec![1.0; p]
        };
        Self {
            m,
            p,
            cols,
            y,
            curvature,
            factors,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    fn col(&self, k: usize) -> &[f64] {
        &self.cols[k * self.m..(k + 1) * self.m]
    }

    pub fn residuals(&self, coef: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        for (k, &a) in coef.iter().enumerate() {
            if a != 0.0 {
                for (ri, xi) in r.iter_mut().zip(self.col(k)) {
                    *ri -= xi * a;
                }
            }
        }
        r
    }

    /// `(2/m) Xᵀr`, the negative gradient of the loss term.
    pub fn correlations(&self, resid: &[f64]) -> Vec<f64> {
        let scale = 2.0 / self.m as f64;
        (0..self.p)
            .map(|k| scale * dot(self.col(k), resid))
            .collect()
    }

    /// Smallest λ at which the zero vector is optimal.
    pub fn lambda_max(&self) -> f64 {
        if self.m == 0 {
            return 0.0;
        }
        self.correlations(&self.y)
            .iter()
            .zip(&self.factors)
            .map(|(c, f)| c.abs() / f)
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, coef: &[f64], lambda: f64) -> f64 {
        let loss = if self.m == 0 {
            0.0
        } else {
            self.residuals(coef).iter().map(|r| r * r).sum::<f64>() / self.m as f64
        };
        let penalty: f64 = coef
            .iter()
            .zip(&self.factors)
            .map(|(a, f)| f * a.abs())
            .sum();
        loss + lambda * penalty
    }

    fn update(&self, k: usize, coef: &mut [f64], resid: &mut [f64], lambda: f64) -> f64 {
        let s = self.curvature[k];
        if s == 0.0 {
            return 0.0;
        }
        let old = coef[k];
        let col = self.col(k);
        let z = 2.0 / self.m as f64 * dot(col, resid) + s * old;
        let new = soft_threshold(z, lambda * self.factors[k]) / s;
        let delta = new - old;
        if delta != 0.0 {
            for (ri, xi) in resid.iter_mut().zip(col) {
                *ri -= xi * delta;
            }
            coef[k] = new;
        }
        delta.abs()
    }

    /// One cyclic pass over every coordinate; returns the largest update.
    pub fn sweep(&self, coef: &mut [f64], resid: &mut [f64], lambda: f64) -> f64 {
        (0..self.p)
            .map(|k| self.update(k, coef, resid, lambda))
            .fold(0.0, f64::max)
    }

    /// Coordinate descent from `init` (or zero). Full sweeps alternate with
    /// passes restricted to the current support; convergence is declared
    /// only after a full sweep moves no coordinate by `tol` or more.
    pub fn solve(&self, lambda: f64, init: Option<&[f64]>, opts: &LassoOptions) -> LassoFit {
        let mut coef = init.map_or_else(|| vec![0.0; self.p], <[f64]>::to_vec);
        if self.m < 2 {
            coef = vec![0.0; self.p];
            return self.finish(coef, lambda, 0, true);
        }
        let mut resid = self.residuals(&coef);
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < opts.max_iter {
            let change = self.sweep(&mut coef, &mut resid, lambda);
            sweeps += 1;
            if change < opts.tol {
                converged = true;
                break;
            }
            let active: Vec<usize> = (0..self.p).filter(|&k| coef[k] != 0.0).collect();
            while sweeps < opts.max_iter {
                let change = active
                    .iter()
                    .map(|&k| self.update(k, &mut coef, &mut resid, lambda))
                    .fold(0.0, f64::max);
                sweeps += 1;
                if change < opts.tol {
                    break;
                }
            }
        }
        self.finish(coef, lambda, sweeps, converged)
    }

    fn finish(&self, coef: Vec<f64>, lambda: f64, iterations: usize, converged: bool) -> LassoFit {
        LassoFit {
            objective: self.objective(&coef, lambda),
            coef,
            lambda,
            iterations,
            converged,
            penalty_factors: self.factors.clone(),
        }
    }

    pub fn kkt(&self, coef: &[f64], lambda: f64, tol: f64) -> bool {
        if self.m == 0 {
            return coef.iter().all(|&a| a == 0.0);
        }
        let grad = self.correlations(&self.residuals(coef));
        grad.iter()
            .zip(coef)
            .zip(&self.factors)
            .all(|((&g, &a), &f)| {
                let pen = lambda * f;
                if a != 0.0 {
                    (g - pen * a.signum()).abs() <= tol
                } else {
                    g.abs() <= pen + tol
                }
            })
    }

    pub fn mean_squared_error(&self, coef: &[f64]) -> f64 {
        if self.m == 0 {
            return 0.0;
        }
        self.residuals(coef).iter().map(|r| r * r).sum::<f64>() / self.m as f64
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_range(data: &SurrogateDataset, lo: usize, hi: usize) -> Result<()> {
    if lo > hi || hi > data.n() {
        return Err(Error::contract(format!(
            "segment ({lo}, {hi}] is not within 0 <= lo <= hi <= {}",
            data.n()
        )));
    }
    Ok(())
}

/// Lasso on sorted rows `lo+1..=hi`. Segments with fewer than two rows
/// yield the zero vector.
pub fn fit_lasso(
    data: &SurrogateDataset,
    lo: usize,
    hi: usize,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    fit_lasso_warm(data, lo, hi, lambda, None, opts)
}

pub fn fit_lasso_warm(
    data: &SurrogateDataset,
    lo: usize,
    hi: usize,
    lambda: f64,
    init: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    check_range(data, lo, hi)?;
    if !(lambda > 0.0) {
        return Err(Error::contract(format!("lambda must be > 0, got {lambda}")));
    }
    if let Some(init) = init {
        if init.len() != data.p() {
            return Err(Error::contract("warm start has the wrong length"));
        }
    }
    let problem = LassoProblem::segment(data, lo, hi, opts.standardize);
    Ok(problem.solve(lambda, init, opts))
}

/// Stationarity check of `fit` on rows `lo+1..=hi` at tolerance `tol`.
pub fn kkt_check(fit: &LassoFit, data: &SurrogateDataset, lo: usize, hi: usize, tol: f64) -> bool {
    if check_range(data, lo, hi).is_err() || fit.coef.len() != data.p() {
        return false;
    }
    let standardize = fit.penalty_factors.iter().any(|&f| f != 1.0);
    let problem = LassoProblem::segment(data, lo, hi, standardize);
    problem.kkt(&fit.coef, fit.lambda, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Descending geometric grid starting at `λ_max`.
    pub lambda_grid: Vec<f64>,
    pub cv_error: Vec<f64>,
    pub lambda_star: f64,
}

/// Ratio between the smallest and largest λ in the CV grid.
pub const LAMBDA_MIN_RATIO: f64 = 1e-3;

pub fn lambda_grid(lambda_max: f64, grid_size: usize) -> Vec<f64> {
    if grid_size == 1 {
        return vec![lambda_max];
    }
    let step = LAMBDA_MIN_RATIO.ln() / (grid_size - 1) as f64;
    (0..grid_size)
        .map(|i| {
            if i == 0 {
                lambda_max
            } else {
                lambda_max * (step * i as f64).exp()
            }
        })
        .collect()
}

/// K-fold cross-validation of λ on sorted rows `lo+1..=hi`.
///
/// Rows are shuffled with `rng` and dealt round-robin into `folds` folds.
/// Each fold's error is the mean squared held-out residual; the CV error is
/// the mean over folds. The selected λ is the largest minimizer.
pub fn cross_validate_lambda(
    data: &SurrogateDataset,
    lo: usize,
    hi: usize,
    folds: usize,
    grid_size: usize,
    rng: &mut Rng,
    opts: &LassoOptions,
) -> Result<CvResult> {
    check_range(data, lo, hi)?;
    if folds < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {folds}")));
    }
    if grid_size == 0 {
        return Err(Error::config("lambda grid must have at least one point"));
    }
    let m = hi - lo;
    if m < folds {
        return Err(Error::config(format!(
            "segment ({lo}, {hi}] has {m} rows, fewer than {folds} folds; reduce the fold count"
        )));
    }
    let full = LassoProblem::segment(data, lo, hi, opts.standardize);
    let lambda_max = full.lambda_max();
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::DegenerateSegment {
            lo,
            hi,
            reason: "response is orthogonal to every predictor".into(),
        });
    }
    let grid = lambda_grid(lambda_max, grid_size);

    let mut rows: Vec<usize> = (lo..hi).collect();
    rows.shuffle(rng);
    let fold_of = |pos: usize| pos % folds;

    let mut fold_errors = vec![vec![0.0; grid.len()]; folds];
    for (fold, errors) in fold_errors.iter_mut().enumerate() {
        let train = rows
            .iter()
            .enumerate()
            .filter(|&(pos, _)| fold_of(pos) != fold)
            .map(|(_, &i)| i);
        let test = rows
            .iter()
            .enumerate()
            .filter(|&(pos, _)| fold_of(pos) == fold)
            .map(|(_, &i)| i);
        let train = LassoProblem::from_rows(data, train, opts.standardize);
        let test = LassoProblem::from_rows(data, test, false);
        let mut warm: Option<Vec<f64>> = None;
        for (slot, &lambda) in errors.iter_mut().zip(&grid) {
            let fit = train.solve(lambda, warm.as_deref(), opts);
            *slot = test.mean_squared_error(&fit.coef);
            warm = Some(fit.coef);
        }
    }

    let cv_error: Vec<f64> = (0..grid.len())
        .map(|g| fold_errors.iter().map(|e| e[g]).sum::<f64>() / folds as f64)
        .collect();
    let best = cv_error
        .iter()
        .enumerate()
        .fold(0, |best, (g, &e)| if e < cv_error[best] { g } else { best });
    Ok(CvResult {
        lambda_star: grid[best],
        lambda_grid: grid,
        cv_error,
    })
}
