//! Simulation study: data-generating process, detection metrics and the
//! Monte Carlo benchmark harness.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{detect, DetectorConfig};
use crate::error::{Error, Result};
use crate::model::{CoefficientSet, Dataset};
use crate::seed::{derive_seed, rng_from, stream, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// True number of change points `N`.
    pub n_changes: usize,
    pub n_check: usize,
    /// Correlation of the AR(1) design, `Σ_ij = rho^|i-j|`.
    pub rho_corr: f64,
    pub sigma_eps: f64,
    pub reps: usize,
    pub seed: u64,
    /// Shuffle rows after generation so detection must re-sort them.
    #[serde(default)]
    pub shuffle_rows: bool,
}

impl SimConfig {
    /// Standard benchmark cell: `ρ = 0.5`, `σ_ε = 1`, `Ň = n/125 + 2`.
    pub fn reference_cell(n: usize, p: usize, n_changes: usize, reps: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            n_changes,
            n_check: default_n_check(n, n_changes),
            rho_corr: 0.5,
            sigma_eps: 1.0,
            reps,
            seed,
            shuffle_rows: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_check < self.n_changes.max(1) {
            return Err(Error::config(format!(
                "n_check = {} must be >= max(1, N = {})",
                self.n_check, self.n_changes
            )));
        }
        if self.n <= self.n_check || self.n <= self.n_changes {
            return Err(Error::config(format!(
                "n = {} too small for n_check = {} and N = {}",
                self.n, self.n_check, self.n_changes
            )));
        }
        let p_min = if self.n_changes >= 1 { 10 } else { 5 };
        if self.p < p_min {
            return Err(Error::config(format!(
                "p = {} < {p_min}: the coefficient pattern needs {p_min} columns",
                self.p
            )));
        }
        if !(0.0..1.0).contains(&self.rho_corr) {
            return Err(Error::config(format!(
                "rho_corr must lie in [0, 1), got {}",
                self.rho_corr
            )));
        }
        if !(self.sigma_eps >= 0.0) || !self.sigma_eps.is_finite() {
            return Err(Error::config(format!(
                "sigma_eps must be >= 0, got {}",
                self.sigma_eps
            )));
        }
        if self.reps == 0 {
            return Err(Error::config("reps must be >= 1"));
        }
        Ok(())
    }
}

/// `Ň = max(n/125 + 2, N, 1)`, which gives 4, 5, 6, 7 at n = 250..625.
pub fn default_n_check(n: usize, n_changes: usize) -> usize {
    (n / 125 + 2).max(n_changes).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tau_true: Vec<f64>,
    /// Observation counts of the true change points.
    pub boundaries: Vec<usize>,
    pub betas: CoefficientSet,
}

/// Rows with i.i.d. `N(0, Σ)`, `Σ_ij = rho^|i-j|`, via the AR(1) recursion.
pub fn gen_design(n: usize, p: usize, rho: f64, rng: &mut Rng) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::contract(format!("rho must lie in [0, 1), got {rho}")));
    }
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = Array2::zeros((n, p));
    for mut row in x.rows_mut() {
        let mut prev = 0.0;
        for (k, v) in row.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            prev = if k == 0 { z } else { rho * prev + innov * z };
            *v = prev;
        }
    }
    Ok(x)
}

/// Even segments carry `(1₅, 0)`, odd segments `(0₅, 1₅, 0)`.
pub fn true_coefficients(p: usize, n_changes: usize) -> CoefficientSet {
    let alphas = (0..=n_changes)
        .map(|j| {
            let mut beta = vec![0.0; p];
            let start = if j % 2 == 0 { 0 } else { 5 };
            for b in beta.iter_mut().skip(start).take(5) {
                *b = 1.0;
            }
            beta
        })
        .collect();
    CoefficientSet::new(alphas).expect("valid pattern")
}

/// `floor(j·n/(N+1))` for `j = 1..N`.
pub fn true_boundaries(n: usize, n_changes: usize) -> Vec<usize> {
    (1..=n_changes).map(|j| j * n / (n_changes + 1)).collect()
}

pub fn gen_dataset(config: &SimConfig, rng: &mut Rng) -> Result<(Dataset, GroundTruth)> {
    config.validate()?;
    let (n, p) = (config.n, config.p);
    let x = gen_design(n, p, config.rho_corr, rng)?;
    let betas = true_coefficients(p, config.n_changes);
    let boundaries = true_boundaries(n, config.n_changes);

    let mut y = Array1::zeros(n);
    let mut segment = 0;
    for i in 0..n {
        while segment < boundaries.len() && i + 1 > boundaries[segment] {
            segment += 1;
        }
        let beta = betas.get(segment);
        let noise: f64 = rng.sample(StandardNormal);
        y[i] = x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
            + config.sigma_eps * noise;
    }
    let w: Array1<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();

    let (y, x, w) = if config.shuffle_rows {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        (
            order.iter().map(|&i| y[i]).collect(),
            x.select(ndarray::Axis(0), &order),
            order.iter().map(|&i| w[i]).collect(),
        )
    } else {
        (y, x, w)
    };

    let tau_true = (1..=config.n_changes)
        .map(|j| j as f64 / (config.n_changes + 1) as f64)
        .collect();
    Ok((
        Dataset::new(y, x, w)?,
        GroundTruth {
            tau_true,
            boundaries,
            betas,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub prm: f64,
    pub pre_: f64,
    pub prl: f64,
    pub bias_n: f64,
    pub rmse_n: f64,
    /// Absent when there are no change points or no matched repetitions.
    pub bias_l: Option<f64>,
    pub rmse_l: Option<f64>,
    pub reps_matched: usize,
    pub reps_used: usize,
}

/// Detection and location metrics over repetitions; `estimates` holds
/// `(Ñ, τ̃)` pairs on the quantile scale.
pub fn compute_metrics(estimates: &[(usize, Vec<f64>)], tau_true: &[f64]) -> Result<MetricsReport> {
    if estimates.is_empty() {
        return Err(Error::contract("no estimates to summarize"));
    }
    let n_true = tau_true.len();
    let reps = estimates.len() as f64;
    let (mut matched, mut over, mut under) = (0usize, 0usize, 0usize);
    let (mut dev_sum, mut dev_sq) = (0.0, 0.0);
    let mut loc_sum = vec![0.0; n_true];
    let mut loc_sq = vec![0.0; n_true];
    for (count, tau) in estimates {
        let dev = *count as f64 - n_true as f64;
        dev_sum += dev;
        dev_sq += dev * dev;
        match count.cmp(&n_true) {
            std::cmp::Ordering::Equal => {
                if tau.len() != n_true {
                    return Err(Error::contract(format!(
                        "estimate reports Ñ = {count} but carries {} locations",
                        tau.len()
                    )));
                }
                matched += 1;
                for j in 0..n_true {
                    let e = tau[j] - tau_true[j];
                    loc_sum[j] += e;
                    loc_sq[j] += e * e;
                }
            }
            std::cmp::Ordering::Greater => over += 1,
            std::cmp::Ordering::Less => under += 1,
        }
    }
    let (bias_l, rmse_l) = if n_true == 0 || matched == 0 {
        (None, None)
    } else {
        let m = matched as f64;
        let bias = loc_sum.iter().map(|s| (s / m).powi(2)).sum::<f64>().sqrt();
        let rmse = loc_sq.iter().map(|s| (s / m).sqrt()).sum::<f64>();
        (Some(bias), Some(rmse))
    };
    Ok(MetricsReport {
        prm: matched as f64 / reps,
        pre_: over as f64 / reps,
        prl: under as f64 / reps,
        bias_n: dev_sum / reps,
        rmse_n: (dev_sq / reps).sqrt(),
        bias_l,
        rmse_l,
        reps_matched: matched,
        reps_used: estimates.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub data_seed: u64,
    pub detect_seed: u64,
    pub n_detected: Option<usize>,
    pub tau_quantile: Vec<f64>,
    pub mu: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub config: SimConfig,
    /// `None` only when every repetition failed.
    pub report: Option<MetricsReport>,
    pub reps_failed: usize,
    pub reps: Vec<RepRecord>,
}

/// One simulated repetition: generate, detect, record.
pub fn run_rep(config: &SimConfig, detector: &DetectorConfig, rep: usize) -> RepRecord {
    let data_seed = derive_seed(config.seed, &[stream::SIM_DATA, rep as u64]);
    let detect_seed = derive_seed(config.seed, &[stream::SIM_DETECT, rep as u64]);
    let mut record = RepRecord {
        rep,
        data_seed,
        detect_seed,
        n_detected: None,
        tau_quantile: Vec::new(),
        mu: None,
        error: None,
    };
    let mut rng = rng_from(data_seed, &[]);
    let outcome = gen_dataset(config, &mut rng).and_then(|(data, _)| {
        let mut det = detector.clone();
        det.n_check = config.n_check;
        detect(&data, &det, detect_seed)
    });
    match outcome {
        Ok(d) => {
            record.n_detected = Some(d.fit.n_detected);
            record.tau_quantile = d.fit.tau_quantile;
            record.mu = Some(d.fit.mu);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs every configuration for its number of repetitions. Failed
/// repetitions are kept in the raw records and excluded from the metrics.
pub fn run_benchmark(configs: &[SimConfig], detector: &DetectorConfig) -> Result<Vec<BenchmarkCell>> {
    for c in configs {
        c.validate()?;
    }
    configs
        .iter()
        .map(|config| {
            let reps: Vec<RepRecord> = (0..config.reps)
                .into_par_iter()
                .map(|rep| run_rep(config, detector, rep))
                .collect();
            summarize(config, reps)
        })
        .collect()
}

pub fn summarize(config: &SimConfig, reps: Vec<RepRecord>) -> Result<BenchmarkCell> {
    let tau_true: Vec<f64> = (1..=config.n_changes)
        .map(|j| j as f64 / (config.n_changes + 1) as f64)
        .collect();
    let estimates: Vec<(usize, Vec<f64>)> = reps
        .iter()
        .filter_map(|r| r.n_detected.map(|k| (k, r.tau_quantile.clone())))
        .collect();
    let reps_failed = reps.len() - estimates.len();
    let report = if estimates.is_empty() {
        None
    } else {
        Some(compute_metrics(&estimates, &tau_true)?)
    };
    Ok(BenchmarkCell {
        config: config.clone(),
        report,
        reps_failed,
        reps,
    })
}

/// The full benchmark grid: `n ∈ {250, 375, 500, 625}` with
/// `N = 0..n/125 - 1`, for each requested `p`.
pub fn full_grid(ps: &[usize], reps: usize, seed: u64) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for &p in ps {
        for n in [250usize, 375, 500, 625] {
            for n_changes in 0..n / 125 {
                let seed = cell_seed(seed, n, p, n_changes);
                out.push(SimConfig::reference_cell(n, p, n_changes, reps, seed));
            }
        }
    }
    out
}

/// Seed of one grid cell, a function of its settings only.
pub fn cell_seed(master: u64, n: usize, p: usize, n_changes: usize) -> u64 {
    derive_seed(master, &[n as u64, p as u64, n_changes as u64])
}
