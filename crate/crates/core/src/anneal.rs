//! Simulated annealing over gap vectors `d ∈ {0..n}^Ň` with `Σd ≤ n`.
//!
//! Candidates come from a componentwise discrete uniform band around the
//! current gap, inflated at zero with a probability that oscillates on a
//! sine curve whose frequency differs per component. Temperatures follow
//! `T_i = 1 / (temp · ln(1 + i))`.

use std::f64::consts::PI;

use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SegmentState;
use crate::seed::Rng;

/// Peak zero-inflation probability is `2 · ZERO_INFLATION_AMPLITUDE`.
pub const ZERO_INFLATION_AMPLITUDE: f64 = 0.475;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    /// Total iterations `M`.
    pub iterations: usize,
    /// Temperature scale.
    pub temp: f64,
    /// Half-width `b` of the uniform proposal band.
    pub max_jump: usize,
    /// Number of sine oscillations over the run, one entry per component.
    pub periods: Vec<f64>,
    pub seed: u64,
}

impl AnnealSchedule {
    pub fn new(
        iterations: usize,
        temp: f64,
        max_jump: usize,
        periods: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let schedule = Self {
            iterations,
            temp,
            max_jump,
            periods,
            seed,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("annealing needs at least one iteration"));
        }
        if !(self.temp > 0.0) || !self.temp.is_finite() {
            return Err(Error::config(format!("temp must be > 0, got {}", self.temp)));
        }
        if self.max_jump == 0 {
            return Err(Error::config("max jump must be >= 1"));
        }
        if let Some(p) = self.periods.iter().find(|&&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::config(format!("oscillation counts must be > 0, got {p}")));
        }
        Ok(())
    }

    /// `250 + 25·j` oscillations for component `j` (0-based).
    pub fn default_periods(n_check: usize) -> Vec<f64> {
        (0..n_check).map(|j| 250.0 + 25.0 * j as f64).collect()
    }

    /// `max(1, round(n/20))`.
    pub fn default_max_jump(n: usize) -> usize {
        ((n as f64 / 20.0).round() as usize).max(1)
    }
}

/// Zero-inflation probability for `component` (0-based) at `iteration` (1-based).
pub fn zero_inflation(iteration: usize, component: usize, schedule: &AnnealSchedule) -> f64 {
    let phase =
        2.0 * PI * iteration as f64 * schedule.periods[component] / schedule.iterations as f64;
    ZERO_INFLATION_AMPLITUDE * phase.sin() + ZERO_INFLATION_AMPLITUDE
}

/// Temperature at `iteration` (1-based).
pub fn temperature(iteration: usize, schedule: &AnnealSchedule) -> f64 {
    1.0 / (schedule.temp * (1.0 + iteration as f64).ln())
}

/// Draws a candidate state. Components are generated in order and the
/// upper limit of each band is capped by the budget left over by the
/// components already drawn, so every candidate is feasible.
pub fn sample_proposal(
    current: &SegmentState,
    iteration: usize,
    schedule: &AnnealSchedule,
    rng: &mut Rng,
) -> SegmentState {
    let inflation: Vec<f64> = (0..current.len())
        .map(|j| zero_inflation(iteration, j, schedule))
        .collect();
    propose_with_inflation(current, &inflation, schedule.max_jump, rng)
}

/// The proposal with explicit per-component zero-inflation probabilities.
pub fn propose_with_inflation(
    current: &SegmentState,
    inflation: &[f64],
    max_jump: usize,
    rng: &mut Rng,
) -> SegmentState {
    let n = current.n();
    let mut used = 0usize;
    let gaps = current
        .gaps()
        .iter()
        .zip(inflation)
        .map(|(&d, &pi)| {
            let draw = if rng.random::<f64>() < pi {
                0
            } else {
                let lower = d.saturating_sub(max_jump);
                let upper = (n - used).min(d + max_jump);
                if upper < lower {
                    0
                } else {
                    rng.random_range(lower..=upper)
                }
            };
            used += draw;
            draw
        })
        .collect();
    SegmentState::new_unchecked(gaps, n)
}

/// Metropolis rule: accept with probability `min(exp(delta_h / t), 1)`,
/// where `delta_h = h(current) - h(candidate)`.
pub fn accept(delta_h: f64, t: f64, rng: &mut Rng) -> bool {
    if delta_h >= 0.0 {
        return true;
    }
    rng.random::<f64>() < (delta_h / t).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Chain state after this iteration.
    pub gaps: Vec<usize>,
    pub objective: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealResult {
    pub best_state: SegmentState,
    pub best_objective: f64,
    pub final_state: SegmentState,
    pub trace: Option<Vec<TraceEntry>>,
}

/// Runs the annealing chain from `init` and returns the best state visited.
pub fn anneal<F>(
    mut objective: F,
    init: &SegmentState,
    schedule: &AnnealSchedule,
    record_trace: bool,
) -> AnnealResult
where
    F: FnMut(&SegmentState) -> f64,
{
    assert_eq!(
        schedule.periods.len(),
        init.len(),
        "schedule has {} oscillation counts for {} components",
        schedule.periods.len(),
        init.len()
    );
    let mut rng = Rng::seed_from_u64(schedule.seed);
    let mut current = init.clone();
    let mut current_h = objective(&current);
    let mut best = current.clone();
    let mut best_h = current_h;
    let mut trace = record_trace.then(|| Vec::with_capacity(schedule.iterations));

    for i in 1..=schedule.iterations {
        let candidate = sample_proposal(&current, i, schedule, &mut rng);
        let candidate_h = objective(&candidate);
        let accepted = accept(current_h - candidate_h, temperature(i, schedule), &mut rng);
        if accepted {
            current = candidate;
            current_h = candidate_h;
            if current_h < best_h {
                best = current.clone();
                best_h = current_h;
            }
        }
        if let Some(trace) = trace.as_mut() {
            trace.push(TraceEntry {
                iteration: i,
                gaps: current.gaps().to_vec(),
                objective: current_h,
                accepted,
            });
        }
    }

    AnnealResult {
        best_state: best,
        best_objective: best_h,
        final_state: current,
        trace,
    }
}

/// Largest state space `exhaustive_minimize` agrees to enumerate.
pub const EXHAUSTIVE_LIMIT: f64 = 1e7;

/// Brute-force minimizer over every feasible gap vector. Ties go to the
/// lexicographically smallest state.
pub fn exhaustive_minimize<F>(
    mut objective: F,
    n: usize,
    n_check: usize,
) -> Result<(SegmentState, f64)>
where
    F: FnMut(&SegmentState) -> f64,
{
    let size = (n as f64 + 1.0).powi(n_check as i32);
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let mut gaps = vec![0usize; n_check];
    let mut best_state = SegmentState::new_unchecked(gaps.clone(), n);
    let mut best_h = objective(&best_state);
    loop {
        // odometer increment, last component fastest, respecting Σ ≤ n
        let mut pos = n_check;
        loop {
            if pos == 0 {
                return Ok((best_state, best_h));
            }
            pos -= 1;
            let sum: usize = gaps.iter().sum();
            if sum < n {
                gaps[pos] += 1;
                break;
            }
            gaps[pos] = 0;
        }
        let state = SegmentState::new_unchecked(gaps.clone(), n);
        let h = objective(&state);
        if h < best_h {
            best_h = h;
            best_state = state;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(iterations: usize, periods: Vec<f64>, max_jump: usize) -> AnnealSchedule {
        AnnealSchedule::new(iterations, 1.25, max_jump, periods, 42).unwrap()
    }

    #[test]
    fn zero_inflation_quarter_half_three_quarter() {
        let s = schedule(10_000, vec![250.0], 1);
        assert!((zero_inflation(10, 0, &s) - 0.95).abs() < 1e-12);
        assert!((zero_inflation(20, 0, &s) - 0.475).abs() < 1e-12);
        assert!(zero_inflation(30, 0, &s).abs() < 1e-12);
    }

    #[test]
    fn temperature_values() {
        let s = schedule(10, vec![1.0], 1);
        assert!((temperature(1, &s) - 1.154156).abs() < 1e-6);
        assert!((temperature(2, &s) - 0.728191).abs() < 1e-6);
        assert!((1..10).all(|i| temperature(i, &s) > temperature(i + 1, &s)));
    }

    #[test]
    fn schedule_validation() {
        assert!(AnnealSchedule::new(0, 1.0, 1, vec![1.0], 0).is_err());
        assert!(AnnealSchedule::new(1, 0.0, 1, vec![1.0], 0).is_err());
        assert!(AnnealSchedule::new(1, 1.0, 0, vec![1.0], 0).is_err());
        assert!(AnnealSchedule::new(1, 1.0, 1, vec![0.0], 0).is_err());
        assert_eq!(AnnealSchedule::default_periods(3), vec![250.0, 275.0, 300.0]);
        assert_eq!(AnnealSchedule::default_max_jump(375), 19);
        assert_eq!(AnnealSchedule::default_max_jump(12), 1);
    }

    #[test]
    fn full_inflation_gives_zero_state() {
        let current = SegmentState::new(vec![2, 3, 1], 10).unwrap();
        let mut rng = Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let c = propose_with_inflation(&current, &[1.0, 1.0, 1.0], 3, &mut rng);
            assert_eq!(c.gaps(), &[0, 0, 0]);
        }
    }

    #[test]
    fn uniform_band_without_inflation() {
        // b >= n from the zero state: uniform on {0, ..., n}
        let n = 9;
        let current = SegmentState::zeros(1, n);
        let mut rng = Rng::seed_from_u64(17);
        let draws = 100_000;
        let mut counts = vec![0usize; n + 1];
        for _ in 0..draws {
            counts[propose_with_inflation(&current, &[0.0], n, &mut rng).gaps()[0]] += 1;
        }
        let expected = draws as f64 / (n + 1) as f64;
        let sd = (draws as f64 * (1.0 / (n + 1) as f64) * (n as f64 / (n + 1) as f64)).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sd, "count {c}");
        }
    }

    #[test]
    fn budget_exhaustion_forces_zero() {
        // at iteration M/2 the inflation is 0.475; the second component must be 0
        // whenever the first lands on n
        let s = schedule(2, vec![1.0, 1.0], 20);
        let current = SegmentState::new(vec![10, 0], 10).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let c = sample_proposal(&current, 1, &s, &mut rng);
            if c.gaps()[0] == 10 {
                assert_eq!(c.gaps()[1], 0);
            }
            assert!(c.gaps().iter().sum::<usize>() <= 10);
        }
    }

    #[test]
    fn accept_rules() {
        let mut rng = Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| accept(0.0, 0.1, &mut rng)));
        assert!((0..1000).all(|_| accept(5.0, 0.1, &mut rng)));
        let t = 0.7;
        let hits = (0..100_000)
            .filter(|_| accept(-t * 2f64.ln(), t, &mut rng))
            .count();
        assert!((hits as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn single_iteration_keeps_the_better_state() {
        let s = schedule(1, vec![1.0, 1.0], 2);
        let init = SegmentState::new(vec![3, 3], 10).unwrap();
        let obj = |st: &SegmentState| st.gaps()[0] as f64 * 0.1 + st.gaps()[1] as f64;
        let r = anneal(obj, &init, &s, true);
        let trace = r.trace.unwrap();
        assert_eq!(trace.len(), 1);
        let mut rng = Rng::seed_from_u64(s.seed);
        let first = sample_proposal(&init, 1, &s, &mut rng);
        assert_eq!(r.best_objective, obj(&init).min(obj(&first)));
    }

    #[test]
    fn constant_objective_accepts_everything() {
        let s = schedule(500, vec![3.0, 5.0], 2);
        let init = SegmentState::new(vec![3, 3], 10).unwrap();
        let r = anneal(|_| 1.5, &init, &s, true);
        assert_eq!(r.best_objective, 1.5);
        assert!(r.trace.unwrap().iter().all(|e| e.accepted));
    }

    #[test]
    fn same_seed_same_trace() {
        let s = schedule(2000, vec![25.0, 30.0, 35.0], 3);
        let init = SegmentState::new(vec![5, 5, 5], 20).unwrap();
        let obj = |st: &SegmentState| {
            let b = st.boundaries();
            (b[0] as f64 - 7.0).abs() + (b[2] as f64 - 13.0).abs() + 0.5 * st.nonzero_count() as f64
        };
        let a = anneal(obj, &init, &s, true);
        let b = anneal(obj, &init, &s, true);
        assert_eq!(a, b);
        let trace = a.trace.unwrap();
        assert!(trace.iter().all(|e| e.objective >= a.best_objective));
    }

    #[test]
    fn exhaustive_enumerates_feasible_states() {
        let mut count = 0;
        let (state, h) = exhaustive_minimize(
            |s| {
                count += 1;
                s.gaps().iter().sum::<usize>() as f64
            },
            6,
            2,
        )
        .unwrap();
        assert_eq!(count, 28);
        assert_eq!(state.gaps(), &[0, 0]);
        assert_eq!(h, 0.0);
        assert!(matches!(
            exhaustive_minimize(|_| 0.0, 100, 4),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn exhaustive_tie_break_is_lexicographic() {
        // minimized by any state with d1 + d2 = 4; smallest lexicographically is (0, 4)
        let (state, _) = exhaustive_minimize(
            |s| (s.gaps().iter().sum::<usize>() as f64 - 4.0).abs(),
            6,
            2,
        )
        .unwrap();
        assert_eq!(state.gaps(), &[0, 4]);
    }
}
