//! Detection and estimation of multiple change points in high-dimensional
//! linear regression.
//!
//! The pipeline starts from an oversized, equally spaced partition of the
//! observations (ordered by the change-inducing variable), fits a Lasso on
//! every initial segment, and then collapses superfluous boundaries in a
//! single ℓ0-penalized discrete optimization solved by simulated
//! annealing. The penalty is chosen by a BIC-type criterion and the final
//! coefficients are refitted on the detected segments.
//!
//! ```no_run
//! use segdetect::{detect, DetectorConfig, SimConfig, gen_dataset, rng_from};
//!
//! let sim = SimConfig::reference_cell(250, 50, 1, 1, 7);
//! let (data, _truth) = gen_dataset(&sim, &mut rng_from(7, &[])).unwrap();
//! let found = detect(&data, &DetectorConfig::new(4), 7).unwrap();
//! println!("{} change point(s) at {:?}", found.fit.n_detected, found.fit.tau_original);
//! ```

pub mod anneal;
pub mod detector;
pub mod error;
pub mod lasso;
pub mod model;
pub mod seed;
pub mod simulate;

pub use anneal::{
    accept, anneal, exhaustive_minimize, propose_with_inflation, sample_proposal, temperature,
    zero_inflation, AnnealResult, AnnealSchedule, TraceEntry,
};
pub use detector::{
    bic_select_mu, bic_value, detect, detect_surrogate, geometric_grid, initial_partition, refit,
    refit_dataset, step0_fit,
    step1_detect, trace_run, AnnealSettings, BicRecord, BicTrace, Detection, DetectorConfig,
    TracedRun,
};
pub use error::{Error, Result};
pub use lasso::{
    cross_validate_lambda, fit_lasso, fit_lasso_warm, kkt_check, soft_threshold, CvResult,
    LassoFit, LassoOptions, LassoProblem,
};
pub use model::{
    build_surrogate, extract_changepoints, map_to_original_scale, penalized_objective,
    segment_loss, state_to_boundaries, total_loss, ChangePointFit, CoefficientSet, Dataset,
    DetectedChanges, SegmentLossTable, SegmentState, SurrogateDataset,
};
pub use seed::{derive_seed, rng_from, Rng};
pub use simulate::{
    cell_seed, compute_metrics, default_n_check, gen_dataset, gen_design, full_grid, run_benchmark,
    run_rep, summarize, true_boundaries, true_coefficients, BenchmarkCell, GroundTruth,
    MetricsReport, RepRecord, SimConfig,
};
