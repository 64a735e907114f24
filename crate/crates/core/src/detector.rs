//! The detection pipeline: equally spaced initial partition, per-segment
//! cross-validated Lasso fits, ℓ0-penalized annealing over boundaries for a
//! grid of penalties, BIC selection of the penalty, and a final refit on the
//! detected partition.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{anneal, AnnealResult, AnnealSchedule};
use crate::error::{Error, Result};
use crate::lasso::{cross_validate_lambda, fit_lasso, LassoOptions};
use crate::model::{
    build_surrogate, extract_changepoints, map_to_original_scale, ChangePointFit, CoefficientSet,
    Dataset, SegmentLossTable, SegmentState, SurrogateDataset,
};
use crate::seed::{derive_seed, rng_from, stream};

/// Floor applied to the fitted loss inside the BIC logarithm.
pub const BIC_LOSS_FLOOR: f64 = 1e-12;

/// Annealing parameters before they are resolved against a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSettings {
    pub iterations: usize,
    pub temp: f64,
    /// Proposal half-width; `None` means `max(1, round(n/20))`.
    pub max_jump: Option<usize>,
    /// Oscillation counts per component; `None` means `250 + 25·j`.
    pub periods: Option<Vec<f64>>,
}

impl Default for AnnealSettings {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            temp: 1.25,
            max_jump: None,
            periods: None,
        }
    }
}

impl AnnealSettings {
    pub fn resolve(&self, n: usize, n_check: usize, seed: u64) -> Result<AnnealSchedule> {
        let periods = match &self.periods {
            Some(p) if p.len() == n_check => p.clone(),
            Some(p) => {
                return Err(Error::config(format!(
                    "{} oscillation counts given for {n_check} components",
                    p.len()
                )))
            }
            None => AnnealSchedule::default_periods(n_check),
        };
        let max_jump = self
            .max_jump
            .unwrap_or_else(|| AnnealSchedule::default_max_jump(n));
        AnnealSchedule::new(self.iterations, self.temp, max_jump, periods, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Number of initial boundaries `Ň`.
    pub n_check: usize,
    pub mu_grid: Vec<f64>,
    pub anneal: AnnealSettings,
    pub cv_folds: usize,
    pub bic_c: f64,
    pub lambda_grid_size: usize,
    pub lasso: LassoOptions,
}

impl DetectorConfig {
    pub fn new(n_check: usize) -> Self {
        Self {
            n_check,
            mu_grid: Self::default_mu_grid(),
            anneal: AnnealSettings::default(),
            cv_folds: 5,
            bic_c: 10.0,
            lambda_grid_size: 20,
            lasso: LassoOptions::default(),
        }
    }

    /// 20 geometrically spaced penalties on `[0.01, 2]`.
    pub fn default_mu_grid() -> Vec<f64> {
        geometric_grid(0.01, 2.0, 20)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_check == 0 {
            return Err(Error::config("n_check must be >= 1"));
        }
        if self.mu_grid.is_empty() {
            return Err(Error::config("mu grid is empty"));
        }
        if let Some(mu) = self.mu_grid.iter().find(|&&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::config(format!("mu values must be > 0, got {mu}")));
        }
        if !(self.bic_c > 0.0) || !self.bic_c.is_finite() {
            return Err(Error::config(format!("bic_c must be > 0, got {}", self.bic_c)));
        }
        if self.cv_folds < 2 {
            return Err(Error::config(format!("need at least 2 folds, got {}", self.cv_folds)));
        }
        if self.lambda_grid_size == 0 {
            return Err(Error::config("lambda grid size must be >= 1"));
        }
        if !(self.lasso.tol > 0.0) || self.lasso.max_iter == 0 {
            return Err(Error::config("lasso tolerance and iteration cap must be positive"));
        }
        if self.anneal.iterations == 0 {
            return Err(Error::config("annealing needs at least one iteration"));
        }
        Ok(())
    }
}

/// `count` points from `lo` to `hi`, evenly spaced in log scale.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo * (step * i as f64).exp()
            }
        })
        .collect()
}

/// Equally spaced boundaries `floor(j·n/(Ň+1))`.
pub fn initial_partition(n: usize, n_check: usize) -> Result<SegmentState> {
    if n_check == 0 || n_check >= n {
        return Err(Error::contract(format!(
            "initial partition needs 1 <= n_check < n, got n_check = {n_check}, n = {n}"
        )));
    }
    let boundary = |j: usize| j * n / (n_check + 1);
    let gaps = (1..=n_check).map(|j| boundary(j) - boundary(j - 1)).collect();
    SegmentState::new(gaps, n)
}

/// Cross-validated Lasso on each segment. Segment `j` draws its folds from
/// a stream derived from `(seed, j)`; segments that cannot be fitted get
/// the zero vector.
pub fn fit_segments(
    data: &SurrogateDataset,
    segments: &[(usize, usize)],
    config: &DetectorConfig,
    seed: u64,
) -> CoefficientSet {
    let alphas = segments
        .par_iter()
        .enumerate()
        .map(|(j, &(lo, hi))| fit_one_segment(data, lo, hi, config, seed, j))
        .collect();
    CoefficientSet::new(alphas).expect("segment fits are finite and share p")
}

fn fit_one_segment(
    data: &SurrogateDataset,
    lo: usize,
    hi: usize,
    config: &DetectorConfig,
    seed: u64,
    j: usize,
) -> Vec<f64> {
    let zero = vec![0.0; data.p()];
    let m = hi - lo;
    if m < 2 {
        return zero;
    }
    let folds = config.cv_folds.min(m);
    let mut rng = rng_from(seed, &[j as u64]);
    let cv = match cross_validate_lambda(
        data,
        lo,
        hi,
        folds,
        config.lambda_grid_size,
        &mut rng,
        &config.lasso,
    ) {
        Ok(cv) => cv,
        Err(e) => {
            log::debug!("segment ({lo}, {hi}] left at zero: {e}");
            return zero;
        }
    };
    match fit_lasso(data, lo, hi, cv.lambda_star, &config.lasso) {
        Ok(fit) if fit.coef.iter().all(|v| v.is_finite()) => fit.coef,
        Ok(_) => zero,
        Err(e) => {
            log::debug!("segment ({lo}, {hi}] left at zero: {e}");
            zero
        }
    }
}

/// Initial coefficient estimates on the segments of `init`.
pub fn step0_fit(
    data: &SurrogateDataset,
    init: &SegmentState,
    config: &DetectorConfig,
    seed: u64,
) -> CoefficientSet {
    fit_segments(data, &init.segments(), config, seed)
}

/// Anneals the ℓ0-penalized objective for one penalty `mu`. Segment `j` of
/// every candidate is always scored with coefficient vector `j`.
pub fn step1_detect(
    data: &SurrogateDataset,
    coeffs: &CoefficientSet,
    mu: f64,
    init: &SegmentState,
    schedule: &AnnealSchedule,
    record_trace: bool,
) -> Result<AnnealResult> {
    if coeffs.len() != init.len() + 1 {
        return Err(Error::contract(format!(
            "{} coefficient vectors for {} boundaries",
            coeffs.len(),
            init.len()
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::contract(format!("mu must be > 0, got {mu}")));
    }
    if schedule.periods.len() != init.len() {
        return Err(Error::contract("schedule and initial state disagree on Ň"));
    }
    let table = SegmentLossTable::new(coeffs, data)?;
    Ok(anneal(|s| table.objective(s, mu), init, schedule, record_trace))
}

/// `ln(max(Q, floor)) + c·l0·ln(n)/n`; the flag reports whether the floor applied.
pub fn bic_value(loss: f64, l0: usize, n: usize, c: f64) -> (f64, bool) {
    let floored = !(loss > BIC_LOSS_FLOOR);
    let q = if floored { loss + BIC_LOSS_FLOOR } else { loss };
    let q = q.max(BIC_LOSS_FLOOR);
    (q.ln() + c * l0 as f64 * (n as f64).ln() / n as f64, floored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicRecord {
    pub mu: f64,
    pub gaps: Vec<usize>,
    pub l0: usize,
    pub loss: f64,
    pub objective: f64,
    pub bic: f64,
    pub loss_floored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicTrace {
    pub records: Vec<BicRecord>,
    /// Index of the selected record.
    pub selected: usize,
}

impl BicTrace {
    pub fn selected(&self) -> &BicRecord {
        &self.records[self.selected]
    }
}

/// Annealing seed used for penalty `mu`: a function of the value itself so
/// that reordering the grid never changes any run.
pub fn mu_seed(anneal_seed: u64, mu: f64) -> u64 {
    derive_seed(anneal_seed, &[mu.to_bits()])
}

/// Anneals once per penalty in the grid and keeps the one with minimal BIC
/// (ties go to the larger penalty).
pub fn bic_select_mu(
    data: &SurrogateDataset,
    coeffs: &CoefficientSet,
    init: &SegmentState,
    config: &DetectorConfig,
    anneal_seed: u64,
) -> Result<(f64, BicTrace, AnnealResult)> {
    if config.mu_grid.is_empty() {
        return Err(Error::config("mu grid is empty"));
    }
    let n = data.n();
    let table = SegmentLossTable::new(coeffs, data)?;
    let runs: Vec<(BicRecord, AnnealResult)> = config
        .mu_grid
        .par_iter()
        .map(|&mu| {
            let schedule = config
                .anneal
                .resolve(n, init.len(), mu_seed(anneal_seed, mu))?;
            let result = step1_detect(data, coeffs, mu, init, &schedule, false)?;
            let best = &result.best_state;
            let loss = table.total(best);
            let l0 = best.nonzero_count();
            let (bic, loss_floored) = bic_value(loss, l0, n, config.bic_c);
            let record = BicRecord {
                mu,
                gaps: best.gaps().to_vec(),
                l0,
                loss,
                objective: result.best_objective,
                bic,
                loss_floored,
            };
            Ok((record, result))
        })
        .collect::<Result<_>>()?;

    let mut selected = 0;
    for (i, (rec, _)) in runs.iter().enumerate() {
        let best = &runs[selected].0;
        if rec.bic < best.bic || (rec.bic == best.bic && rec.mu > best.mu) {
            selected = i;
        }
    }
    let (records, results): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let mu_star = records[selected].mu;
    let result = results.into_iter().nth(selected).expect("selected index in range");
    Ok((mu_star, BicTrace { records, selected }, result))
}

/// Converts quantile-scale change points back to observation counts.
pub fn quantiles_to_boundaries(tau_quantile: &[f64], n: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(tau_quantile.len());
    for &t in tau_quantile {
        let scaled = t * n as f64;
        let k = scaled.round();
        if (scaled - k).abs() > 1e-9 || k < 1.0 || k > (n - 1) as f64 {
            return Err(Error::contract(format!(
                "tau = {t} is not on the interior grid for n = {n}"
            )));
        }
        let k = k as usize;
        if out.last().is_some_and(|&prev| prev >= k) {
            return Err(Error::contract("change points must be strictly increasing"));
        }
        out.push(k);
    }
    Ok(out)
}

/// Cross-validated Lasso on each segment of the partition given by
/// `tau_quantile`; a single fit on all rows when it is empty.
pub fn refit(
    data: &SurrogateDataset,
    tau_quantile: &[f64],
    config: &DetectorConfig,
    seed: u64,
) -> Result<CoefficientSet> {
    let n = data.n();
    let boundaries = quantiles_to_boundaries(tau_quantile, n)?;
    let mut segments = Vec::with_capacity(boundaries.len() + 1);
    let mut lo = 0;
    for b in boundaries {
        segments.push((lo, b));
        lo = b;
    }
    segments.push((lo, n));
    Ok(fit_segments(data, &segments, config, seed))
}

/// Everything the pipeline produced, including intermediate stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub fit: ChangePointFit,
    pub bic: BicTrace,
    pub initial_state: SegmentState,
    pub initial_coefficients: CoefficientSet,
    pub best_state: SegmentState,
}

fn check_dimensions(n: usize, config: &DetectorConfig) -> Result<()> {
    config.validate()?;
    if config.n_check >= n {
        return Err(Error::config(format!(
            "n_check = {} must be smaller than n = {n}",
            config.n_check
        )));
    }
    if 4 * config.n_check >= n {
        warn!(
            "n_check = {} leaves fewer than 4 rows per initial segment (n = {n})",
            config.n_check
        );
    }
    Ok(())
}

/// Full pipeline on raw data, deterministic in `seed`.
pub fn detect(data: &Dataset, config: &DetectorConfig, seed: u64) -> Result<Detection> {
    check_dimensions(data.n(), config)?;
    let surrogate = build_surrogate(data)?;
    detect_surrogate(&surrogate, config, seed)
}

pub fn detect_surrogate(
    data: &SurrogateDataset,
    config: &DetectorConfig,
    seed: u64,
) -> Result<Detection> {
    let n = data.n();
    check_dimensions(n, config)?;
    let initial_state = initial_partition(n, config.n_check)?;
    let initial_coefficients =
        step0_fit(data, &initial_state, config, derive_seed(seed, &[stream::STEP0]));
    let (mu, bic, result) = bic_select_mu(
        data,
        &initial_coefficients,
        &initial_state,
        config,
        derive_seed(seed, &[stream::ANNEAL]),
    )?;
    let changes = extract_changepoints(&result.best_state);
    let tau_original = map_to_original_scale(&changes.tau_quantile, data)?;
    let coefficients = refit(
        data,
        &changes.tau_quantile,
        config,
        derive_seed(seed, &[stream::REFIT]),
    )?;
    Ok(Detection {
        fit: ChangePointFit {
            n_detected: changes.count(),
            boundaries: changes.boundaries,
            tau_quantile: changes.tau_quantile,
            tau_original,
            coefficients,
            objective: result.best_objective,
            mu,
        },
        bic,
        initial_state,
        initial_coefficients,
        best_state: result.best_state,
    })
}

/// Refits coefficients for change points given on the quantile scale,
/// using the same seed stream as [`detect`].
pub fn refit_dataset(
    data: &Dataset,
    tau_quantile: &[f64],
    config: &DetectorConfig,
    seed: u64,
) -> Result<CoefficientSet> {
    config.validate()?;
    let surrogate = build_surrogate(data)?;
    refit(&surrogate, tau_quantile, config, derive_seed(seed, &[stream::REFIT]))
}

/// A single traced annealing run at a fixed penalty, as used for inspecting
/// the chain's evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedRun {
    pub initial_state: SegmentState,
    pub coefficients: CoefficientSet,
    pub schedule: AnnealSchedule,
    pub result: AnnealResult,
}

/// Step-0 fits on `init` (or the equally spaced partition) followed by one
/// traced annealing run at `mu`, using the same seed streams as [`detect`].
pub fn trace_run(
    data: &SurrogateDataset,
    config: &DetectorConfig,
    mu: f64,
    init: Option<SegmentState>,
    seed: u64,
) -> Result<TracedRun> {
    let n = data.n();
    check_dimensions(n, config)?;
    let initial_state = match init {
        Some(s) if s.len() == config.n_check && s.n() == n => s,
        Some(s) => {
            return Err(Error::config(format!(
                "initial state has {} gaps over n = {}, expected {} over n = {n}",
                s.len(),
                s.n(),
                config.n_check
            )))
        }
        None => initial_partition(n, config.n_check)?,
    };
    let coefficients =
        step0_fit(data, &initial_state, config, derive_seed(seed, &[stream::STEP0]));
    let schedule = config.anneal.resolve(
        n,
        config.n_check,
        mu_seed(derive_seed(seed, &[stream::ANNEAL]), mu),
    )?;
    let result = step1_detect(data, &coefficients, mu, &initial_state, &schedule, true)?;
    Ok(TracedRun {
        initial_state,
        coefficients,
        schedule,
        result,
    })
}
