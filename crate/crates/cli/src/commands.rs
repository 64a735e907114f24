use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use segdetect::{
    build_surrogate, default_n_check, detect, gen_dataset, map_to_original_scale, full_grid,
    refit_dataset, rng_from, run_benchmark, total_loss, trace_run, BenchmarkCell, BicTrace,
    CoefficientSet, DetectorConfig, SegmentState, SimConfig,
};

use crate::args::{
    parse_list, BenchmarkArgs, DetectArgs, DetectorFlags, RefitArgs, SimFlags, SimulateArgs,
    TraceArgs,
};
use crate::error::{CliError, CliResult};
use crate::io::{format_dataset, metric, read_dataset, sibling, to_json, write_file};

/// What a command wrote, and the settings it resolved.
pub struct Outcome {
    pub primary: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub config: serde_json::Value,
}

fn config_value<T: Serialize>(value: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| CliError::Internal(format!("serialization failed: {e}")))
}

#[derive(Debug, Serialize)]
pub struct SparseEntry {
    /// 1-based column of the design.
    pub index: usize,
    pub value: f64,
}

pub fn sparse(coeffs: &CoefficientSet) -> Vec<Vec<SparseEntry>> {
    coeffs
        .iter()
        .map(|alpha| {
            alpha
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(k, &value)| SparseEntry { index: k + 1, value })
                .collect()
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FitDocument<'a> {
    n: usize,
    p: usize,
    n_detected: usize,
    boundaries: &'a [usize],
    tau_quantile: &'a [f64],
    tau_original: &'a [f64],
    coefficients: Vec<Vec<SparseEntry>>,
    objective: f64,
    mu: f64,
    initial_boundaries: Vec<usize>,
    bic_trace: &'a BicTrace,
}

/// `Ň` for a dataset when the user gave none, kept below `n`.
fn dataset_n_check(n: usize) -> usize {
    default_n_check(n, 0).min(n.saturating_sub(1)).max(1)
}

pub fn cmd_detect(args: &DetectArgs, seed: u64) -> CliResult<Outcome> {
    let data = read_dataset(&args.input)?;
    let config = args.detector.resolve(dataset_n_check(data.n()))?;
    let found = detect(&data, &config, seed)?;
    let fit = &found.fit;
    let doc = FitDocument {
        n: data.n(),
        p: data.p(),
        n_detected: fit.n_detected,
        boundaries: &fit.boundaries,
        tau_quantile: &fit.tau_quantile,
        tau_original: &fit.tau_original,
        coefficients: sparse(&fit.coefficients),
        objective: fit.objective,
        mu: fit.mu,
        initial_boundaries: found.initial_state.boundaries(),
        bic_trace: &found.bic,
    };
    write_file(&args.output, &to_json(&doc)?)?;
    println!(
        "detected {} change point(s) at w = {:?} (mu = {})",
        fit.n_detected, fit.tau_original, fit.mu
    );
    Ok(Outcome {
        primary: args.output.clone(),
        outputs: vec![args.output.clone()],
        config: config_value(&config)?,
    })
}

#[derive(Debug, Serialize)]
struct RefitDocument<'a> {
    n: usize,
    p: usize,
    boundaries: &'a [usize],
    tau_quantile: &'a [f64],
    tau_original: Vec<f64>,
    coefficients: Vec<Vec<SparseEntry>>,
    loss: f64,
}

pub fn cmd_refit(args: &RefitArgs, seed: u64) -> CliResult<Outcome> {
    let data = read_dataset(&args.input)?;
    let tau: Vec<f64> = parse_list(&args.tau, "--tau")?;
    let config = args.detector.resolve(dataset_n_check(data.n()))?;
    let coeffs = refit_dataset(&data, &tau, &config, seed)?;
    let surrogate = build_surrogate(&data)?;
    let n = data.n();
    let boundaries: Vec<usize> = tau.iter().map(|t| (t * n as f64).round() as usize).collect();
    let mut prev = 0;
    let gaps = boundaries
        .iter()
        .map(|&b| {
            let g = b - prev;
            prev = b;
            g
        })
        .collect();
    let state = SegmentState::new(gaps, n)?;
    let doc = RefitDocument {
        n,
        p: data.p(),
        boundaries: &boundaries,
        tau_quantile: &tau,
        tau_original: map_to_original_scale(&tau, &surrogate)?,
        coefficients: sparse(&coeffs),
        loss: total_loss(&coeffs, &state, &surrogate)?,
    };
    write_file(&args.output, &to_json(&doc)?)?;
    Ok(Outcome {
        primary: args.output.clone(),
        outputs: vec![args.output.clone()],
        config: config_value(&config)?,
    })
}

fn sim_config(n: usize, p: usize, n_changes: usize, reps: usize, seed: u64, flags: &SimFlags) -> SimConfig {
    let mut config = SimConfig::reference_cell(n, p, n_changes, reps, seed);
    config.rho_corr = flags.rho;
    config.sigma_eps = flags.sigma;
    config.shuffle_rows = flags.shuffle_rows;
    config
}

#[derive(Debug, Serialize)]
struct TruthDocument {
    tau_true: Vec<f64>,
    boundaries: Vec<usize>,
    /// 1-based nonzero columns of each true segment coefficient.
    supports: Vec<Vec<usize>>,
}

pub fn cmd_simulate(args: &SimulateArgs, seed: u64) -> CliResult<Outcome> {
    let mut config = sim_config(args.n, args.p, args.n_changes, 1, seed, &args.sim);
    config.n_check = args.n_changes.max(1);
    let (data, truth) = gen_dataset(&config, &mut rng_from(seed, &[]))?;
    write_file(&args.output, &format_dataset(&data))?;
    let supports = truth
        .betas
        .iter()
        .map(|b| (0..b.len()).filter(|&k| b[k] != 0.0).map(|k| k + 1).collect())
        .collect();
    let truth_path = sibling(&args.output, "truth.json");
    let doc = TruthDocument {
        tau_true: truth.tau_true,
        boundaries: truth.boundaries,
        supports,
    };
    write_file(&truth_path, &to_json(&doc)?)?;
    Ok(Outcome {
        primary: args.output.clone(),
        outputs: vec![args.output.clone(), truth_path],
        config: config_value(&config)?,
    })
}

pub const TABLE_HEADER: &str =
    "n,N,N_check,p,PrM,PrE,PrL,Bias(N),RMSE(N),Bias(L),RMSE(L),reps,failed";

pub fn format_table(cells: &[BenchmarkCell]) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for cell in cells {
        let c = &cell.config;
        let _ = write!(out, "{},{},{},{}", c.n, c.n_changes, c.n_check, c.p);
        let r = cell.report.as_ref();
        for v in [
            r.map(|r| r.prm),
            r.map(|r| r.pre_),
            r.map(|r| r.prl),
            r.map(|r| r.bias_n),
            r.map(|r| r.rmse_n),
            r.and_then(|r| r.bias_l),
            r.and_then(|r| r.rmse_l),
        ] {
            let _ = write!(out, ",{}", metric(v));
        }
        let _ = writeln!(out, ",{},{}", c.reps, cell.reps_failed);
    }
    out
}

pub fn format_reps(cells: &[BenchmarkCell]) -> CliResult<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Internal(format!("csv output failed: {e}"));
    writer
        .write_record([
            "n", "N", "N_check", "p", "rep", "data_seed", "detect_seed", "n_detected", "mu",
            "tau_quantile", "error",
        ])
        .map_err(csv_err)?;
    for cell in cells {
        let c = &cell.config;
        for r in &cell.reps {
            let tau: Vec<String> = r.tau_quantile.iter().map(f64::to_string).collect();
            writer
                .write_record([
                    c.n.to_string(),
                    c.n_changes.to_string(),
                    c.n_check.to_string(),
                    c.p.to_string(),
                    r.rep.to_string(),
                    r.data_seed.to_string(),
                    r.detect_seed.to_string(),
                    r.n_detected.map_or("NA".into(), |k| k.to_string()),
                    r.mu.map_or("NA".into(), |m| m.to_string()),
                    tau.join(";"),
                    r.error.clone().unwrap_or_default(),
                ])
                .map_err(csv_err)?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Internal(format!("csv output failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

fn benchmark_cells(args: &BenchmarkArgs, seed: u64, flags: &DetectorFlags) -> CliResult<Vec<SimConfig>> {
    let mut cells = if args.full_grid {
        full_grid(&parse_list::<usize>(&args.p, "--p")?, args.reps, seed)
    } else {
        let mut cells = Vec::new();
        for &p in &parse_list::<usize>(&args.p, "--p")? {
            for &n in &parse_list::<usize>(&args.n, "--n")? {
                for &n_changes in &parse_list::<usize>(&args.n_changes, "--n-changes")? {
                    let cell_seed = segdetect::cell_seed(seed, n, p, n_changes);
                    cells.push(SimConfig::reference_cell(n, p, n_changes, args.reps, cell_seed));
                }
            }
        }
        cells
    };
    if cells.is_empty() {
        return Err(CliError::Config("benchmark grid is empty".into()));
    }
    let n_check = flags.n_check_override()?;
    for c in &mut cells {
        c.rho_corr = args.sim.rho;
        c.sigma_eps = args.sim.sigma;
        c.shuffle_rows = args.sim.shuffle_rows;
        if let Some(k) = n_check {
            c.n_check = k;
        }
        c.validate()?;
    }
    Ok(cells)
}

pub fn cmd_benchmark(args: &BenchmarkArgs, seed: u64) -> CliResult<Outcome> {
    let cells = benchmark_cells(args, seed, &args.detector)?;
    let detector = args.detector.resolve(cells[0].n_check)?;
    let results = run_benchmark(&cells, &detector)?;
    write_file(&args.output, &format_table(&results))?;
    let reps_path = sibling(&args.output, "reps.csv");
    write_file(&reps_path, &format_reps(&results)?)?;
    let failed: usize = results.iter().map(|c| c.reps_failed).sum();
    if failed > 0 {
        log::warn!("{failed} repetition(s) failed; see {}", reps_path.display());
    }
    #[derive(Serialize)]
    struct BenchmarkSettings<'a> {
        cells: &'a [SimConfig],
        detector: &'a DetectorConfig,
    }
    Ok(Outcome {
        primary: args.output.clone(),
        outputs: vec![args.output.clone(), reps_path],
        config: config_value(&BenchmarkSettings {
            cells: &cells,
            detector: &detector,
        })?,
    })
}

pub fn cmd_trace(args: &TraceArgs, seed: u64) -> CliResult<Outcome> {
    let data = read_dataset(&args.input)?;
    let n = data.n();
    let init = match &args.init {
        Some(text) => Some(SegmentState::new(parse_list(text, "--init")?, n)?),
        None => None,
    };
    let default_k = init.as_ref().map_or_else(|| dataset_n_check(n), SegmentState::len);
    let config = args.detector.resolve(default_k)?;
    if !(args.mu >= 0.0) || !args.mu.is_finite() {
        return Err(CliError::Config(format!("--mu must be >= 0, got {}", args.mu)));
    }
    let surrogate = build_surrogate(&data)?;
    let run = trace_run(&surrogate, &config, args.mu, init, seed)?;

    let mut out = String::from("iteration");
    for j in 1..=config.n_check {
        let _ = write!(out, ",d{j}");
    }
    out.push_str(",objective,accepted\n");
    for e in run.result.trace.as_deref().unwrap_or_default() {
        let _ = write!(out, "{}", e.iteration);
        for g in &e.gaps {
            let _ = write!(out, ",{g}");
        }
        let _ = writeln!(out, ",{},{}", e.objective, u8::from(e.accepted));
    }
    write_file(&args.output, &out)?;
    println!(
        "best gaps {:?}, objective {}",
        run.result.best_state.gaps(),
        run.result.best_objective
    );
    Ok(Outcome {
        primary: args.output.clone(),
        outputs: vec![args.output.clone()],
        config: config_value(&(&config, &run.schedule))?,
    })
}
