//! Data types, least-squares losses and change-point representations.
//!
//! Observations are always addressed on the surrogate (sorted) scale: row
//! `i` (1-based) sits at quantile `i/n`. A segment `(lo, hi]` holds the
//! sorted rows `lo+1..=hi`, and change points are integer boundaries.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw regression data: response `y`, design `x` (one row per observation)
/// and the change-inducing variable `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Array1<f64>,
    x: Array2<f64>,
    w: Array1<f64>,
}

impl Dataset {
    pub fn new(y: Array1<f64>, x: Array2<f64>, w: Array1<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::input("dataset has no observations"));
        }
        if x.nrows() != n || w.len() != n {
            return Err(Error::input(format!(
                "row count mismatch: y has {n}, x has {}, w has {}",
                x.nrows(),
                w.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::input("design matrix has no columns"));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite y at row {}", i + 1)));
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite w at row {}", i + 1)));
        }
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            if let Some(k) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "non-finite x{} at row {}",
                    k + 1,
                    i + 1
                )));
            }
        }
        Ok(Self { y, x, w })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn w(&self) -> ArrayView1<'_, f64> {
        self.w.view()
    }
}

/// A [`Dataset`] re-ordered by ascending `w`, carrying the uniform surrogate
/// `w*_i = i/n` and the permutation that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateDataset {
    y: Array1<f64>,
    x: Array2<f64>,
    w: Array1<f64>,
    wstar: Array1<f64>,
    perm: Vec<usize>,
}

impl SurrogateDataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Sorted responses.
    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    /// Sorted design rows.
    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    /// Sorted change-inducing variable (the order statistics of `w`).
    pub fn w(&self) -> ArrayView1<'_, f64> {
        self.w.view()
    }

    pub fn wstar(&self) -> ArrayView1<'_, f64> {
        self.wstar.view()
    }

    /// `perm[i]` is the original (0-based) index of sorted row `i`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Undo the sort, recovering the original dataset.
    pub fn restore(&self) -> Dataset {
        let n = self.n();
        let mut y = Array1::zeros(n);
        let mut w = Array1::zeros(n);
        let mut x = Array2::zeros((n, self.p()));
        for (sorted, &orig) in self.perm.iter().enumerate() {
            y[orig] = self.y[sorted];
            w[orig] = self.w[sorted];
            x.row_mut(orig).assign(&self.x.row(sorted));
        }
        Dataset { y, x, w }
    }
}

/// Sorts the observations by `w` (stable, so ties keep their original
/// order) and attaches the surrogate `w*_i = i/n`.
pub fn build_surrogate(data: &Dataset) -> Result<SurrogateDataset> {
    if let Some(i) = data.w.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("non-finite w at row {}", i + 1)));
    }
    let n = data.n();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| data.w[a].total_cmp(&data.w[b]));

    let y = perm.iter().map(|&i| data.y[i]).collect::<Array1<_>>();
    let w = perm.iter().map(|&i| data.w[i]).collect::<Array1<_>>();
    let x = data.x.select(Axis(0), &perm);
    let wstar = (1..=n).map(|i| i as f64 / n as f64).collect();
    Ok(SurrogateDataset {
        y,
        x,
        w,
        wstar,
        perm,
    })
}

/// Gap encoding of `Ň` ordered boundaries: boundary `j` sits at the
/// cumulative sum of the first `j` gaps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentState {
    gaps: Vec<usize>,
    n: usize,
}

impl SegmentState {
    pub fn new(gaps: Vec<usize>, n: usize) -> Result<Self> {
        let mut total = 0usize;
        for &d in &gaps {
            total = total.saturating_add(d);
        }
        if total > n {
            return Err(Error::contract(format!(
                "gaps sum to {total}, exceeding n = {n}"
            )));
        }
        Ok(Self { gaps, n })
    }

    pub(crate) fn new_unchecked(gaps: Vec<usize>, n: usize) -> Self {
        debug_assert!(gaps.iter().sum::<usize>() <= n);
        Self { gaps, n }
    }

    pub fn zeros(n_check: usize, n: usize) -> Self {
        Self {
            gaps: vec![0; n_check],
            n,
        }
    }

    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of boundaries `Ň`.
    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// The ℓ0 norm of the gap vector.
    pub fn nonzero_count(&self) -> usize {
        self.gaps.iter().filter(|&&d| d != 0).count()
    }

    /// Cumulative sums `(d_1, d_1+d_2, ..., Σd)`.
    pub fn boundaries(&self) -> Vec<usize> {
        self.gaps
            .iter()
            .scan(0usize, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }

    /// Segment endpoints `(lo, hi)` for all `Ň+1` segments, positionally.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.gaps.len() + 1);
        let mut lo = 0;
        for b in self.boundaries() {
            out.push((lo, b));
            lo = b;
        }
        out.push((lo, self.n));
        out
    }
}

/// Equivalent to [`SegmentState::boundaries`].
pub fn state_to_boundaries(state: &SegmentState) -> Vec<usize> {
    state.boundaries()
}

/// One coefficient vector per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    alphas: Vec<Vec<f64>>,
}

impl CoefficientSet {
    pub fn new(alphas: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = alphas.first() else {
            return Err(Error::contract("coefficient set must hold at least one vector"));
        };
        let p = first.len();
        for (j, a) in alphas.iter().enumerate() {
            if a.len() != p {
                return Err(Error::contract(format!(
                    "coefficient vector {j} has length {}, expected {p}",
                    a.len()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::contract(format!(
                    "coefficient vector {j} has non-finite entries"
                )));
            }
        }
        Ok(Self { alphas })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn p(&self) -> usize {
        self.alphas[0].len()
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.alphas[j]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.alphas.iter().map(Vec::as_slice)
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.alphas
    }
}

/// Output of the full detection pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointFit {
    pub n_detected: usize,
    /// Boundary observation counts of the detected change points.
    pub boundaries: Vec<usize>,
    pub tau_quantile: Vec<f64>,
    pub tau_original: Vec<f64>,
    pub coefficients: CoefficientSet,
    pub objective: f64,
    pub mu: f64,
}

fn row_residual_sq(gamma: &[f64], x: ArrayView1<'_, f64>, y: f64) -> f64 {
    let fitted: f64 = x.iter().zip(gamma).map(|(a, b)| a * b).sum();
    let r = y - fitted;
    r * r
}

/// Residual sum of squares of `gamma` over sorted rows `lo+1..=hi`.
pub fn segment_loss(gamma: &[f64], lo: usize, hi: usize, data: &SurrogateDataset) -> Result<f64> {
    if lo > hi || hi > data.n() {
        return Err(Error::contract(format!(
            "segment ({lo}, {hi}] is not within 0 <= lo <= hi <= {}",
            data.n()
        )));
    }
    if gamma.len() != data.p() {
        return Err(Error::contract(format!(
            "coefficient length {} does not match p = {}",
            gamma.len(),
            data.p()
        )));
    }
    Ok((lo..hi)
        .map(|i| row_residual_sq(gamma, data.x.row(i), data.y[i]))
        .sum())
}

/// `(1/n) Σ_j segment_loss(α_(j-1), b_{j-1}, b_j)`.
pub fn total_loss(
    coeffs: &CoefficientSet,
    state: &SegmentState,
    data: &SurrogateDataset,
) -> Result<f64> {
    if coeffs.len() != state.len() + 1 {
        return Err(Error::contract(format!(
            "{} coefficient vectors for {} boundaries",
            coeffs.len(),
            state.len()
        )));
    }
    if state.n() != data.n() {
        return Err(Error::contract("state and data disagree on n"));
    }
    let mut sum = 0.0;
    for (alpha, (lo, hi)) in coeffs.iter().zip(state.segments()) {
        sum += segment_loss(alpha, lo, hi, data)?;
    }
    Ok(sum / data.n() as f64)
}

/// `total_loss + mu · ‖d‖₀`.
pub fn penalized_objective(
    coeffs: &CoefficientSet,
    state: &SegmentState,
    mu: f64,
    data: &SurrogateDataset,
) -> Result<f64> {
    if !(mu >= 0.0) {
        return Err(Error::contract(format!("penalty mu must be >= 0, got {mu}")));
    }
    Ok(total_loss(coeffs, state, data)? + mu * state.nonzero_count() as f64)
}

/// Detected change points: interior boundaries reached by a nonzero gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedChanges {
    pub boundaries: Vec<usize>,
    pub tau_quantile: Vec<f64>,
}

impl DetectedChanges {
    pub fn count(&self) -> usize {
        self.boundaries.len()
    }
}

pub fn extract_changepoints(state: &SegmentState) -> DetectedChanges {
    let n = state.n();
    let boundaries: Vec<usize> = state
        .gaps()
        .iter()
        .zip(state.boundaries())
        .filter(|&(&d, b)| d > 0 && b < n)
        .map(|(_, b)| b)
        .collect();
    let tau_quantile = boundaries.iter().map(|&b| b as f64 / n as f64).collect();
    DetectedChanges {
        boundaries,
        tau_quantile,
    }
}

/// Index set of distinct, finite components of an ordered threshold vector
/// on the original scale, with `τ_0 = -∞` (1-based indices).
pub fn distinct_finite_indices(tau: &[f64]) -> Vec<usize> {
    let mut prev = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for (j, &t) in tau.iter().enumerate() {
        if t != prev && t != f64::NEG_INFINITY {
            out.push(j + 1);
        }
        prev = t;
    }
    out
}

/// Maps quantile-scale change points `k/n` to the `k`-th order statistic of `w`.
pub fn map_to_original_scale(tau_quantile: &[f64], data: &SurrogateDataset) -> Result<Vec<f64>> {
    let n = data.n();
    tau_quantile
        .iter()
        .map(|&t| {
            let scaled = t * n as f64;
            let k = scaled.round();
            if !(scaled - k).abs().le(&1e-9) || k < 1.0 || k > (n - 1) as f64 {
                return Err(Error::contract(format!(
                    "tau = {t} is not on the interior grid {{1/n, ..., (n-1)/n}} with n = {n}"
                )));
            }
            Ok(data.w[k as usize - 1])
        })
        .collect()
}

/// Prefix sums of squared residuals, one table per coefficient vector, so
/// that any segment loss is a difference of two entries.
#[derive(Debug, Clone)]
pub struct SegmentLossTable {
    prefix: Vec<Vec<f64>>,
    n: usize,
}

impl SegmentLossTable {
    pub fn new(coeffs: &CoefficientSet, data: &SurrogateDataset) -> Result<Self> {
        if coeffs.p() != data.p() {
            return Err(Error::contract(format!(
                "coefficient length {} does not match p = {}",
                coeffs.p(),
                data.p()
            )));
        }
        let n = data.n();
        let prefix = coeffs
            .iter()
            .map(|alpha| {
                let mut acc = 0.0;
                let mut row = Vec::with_capacity(n + 1);
                row.push(0.0);
                for i in 0..n {
                    acc += row_residual_sq(alpha, data.x.row(i), data.y[i]);
                    row.push(acc);
                }
                row
            })
            .collect();
        Ok(Self { prefix, n })
    }

    pub fn n_coefficients(&self) -> usize {
        self.prefix.len()
    }

    /// RSS of coefficient vector `j` over `(lo, hi]`.
    pub fn segment(&self, j: usize, lo: usize, hi: usize) -> f64 {
        if lo == hi {
            return 0.0;
        }
        self.prefix[j][hi] - self.prefix[j][lo]
    }

    /// Total loss `Q` with positional coefficient assignment.
    pub fn total(&self, state: &SegmentState) -> f64 {
        debug_assert_eq!(state.len() + 1, self.prefix.len());
        let mut lo = 0;
        let mut sum = 0.0;
        for (j, &d) in state.gaps().iter().enumerate() {
            let hi = lo + d;
            sum += self.segment(j, lo, hi);
            lo = hi;
        }
        sum += self.segment(state.len(), lo, self.n);
        sum / self.n as f64
    }

    pub fn objective(&self, state: &SegmentState, mu: f64) -> f64 {
        self.total(state) + mu * state.nonzero_count() as f64
    }
}
