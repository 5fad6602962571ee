//! The six subcommands. Each one reads files, calls into the library, and
//! writes files; progress and summaries go to standard error so data
//! streams stay clean.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mpf_core::basis::{build_basis, BasisSpec};
use mpf_core::calibration::{apply_margins, compute_margins, interval_errors};
use mpf_core::forecast::{
    fit_baseline, fit_smooth_auto, predict, CoefficientSet, ForecastFrame,
};
use mpf_core::linalg::Matrix;
use mpf_core::panel::{
    build_design, build_design_with, format_time, load_panel, DesignOptions, DesignSet,
    PanelDataset, TaskSpec,
};
use mpf_core::quantile::{fit_baseline_q, fit_smooth_q, QuantileLevel};
use mpf_core::sim::{predictor_label, simulate, NoiseSpec, SimConfig, SimOutput};
use mpf_core::{compute_metrics, cv_select_df, sse_by_ahead, CvScheme};

use crate::artifact::{
    coefficients_from_artifact, coefficients_to_payload, load_artifact, margins_from_artifact,
    margins_to_artifact, matrix_to_payload, save_artifact, task_from_artifact, task_to_artifact,
    ArtifactBasis, ArtifactMetadata, ModelArtifact, QuantilePayload, FORMAT_VERSION,
};
use crate::config::{load_task_config, parse_cli_time, TaskConfig};
use crate::error::CliError;
use crate::tables::{read_forecasts, write_cv_table, write_forecasts, write_metrics, ForecastRow};

pub const SIM_RESPONSE: &str = "y";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Baseline,
    Smooth,
}

impl ModelArg {
    fn name(self) -> &'static str {
        match self {
            ModelArg::Baseline => "baseline",
            ModelArg::Smooth => "smooth",
        }
    }

    fn from_kind(kind: &str) -> Result<Self, CliError> {
        match kind {
            "baseline" => Ok(ModelArg::Baseline),
            "smooth" => Ok(ModelArg::Smooth),
            other => Err(CliError::Data(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    ByLocation,
    ByTime,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of locations (one design row each)
    #[arg(long)]
    pub n: usize,
    /// Number of predictor variables
    #[arg(long)]
    pub p: usize,
    /// Number of horizons (0 through q-1)
    #[arg(long)]
    pub q: usize,
    /// Basis size of the generating model
    #[arg(long = "true-df")]
    pub true_df: usize,
    /// Signal-to-noise ratio (signal variance over noise variance)
    #[arg(long, conflicts_with = "noiseless")]
    pub snr: Option<f64>,
    /// Generate without noise instead of specifying an SNR
    #[arg(long)]
    pub noiseless: bool,
    /// Fraction of response cells to mask, in [0, 1)
    #[arg(long = "missing-frac", default_value_t = 0.0)]
    pub missing_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for panel.csv, truth.csv, truth_artifact.json
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training panel CSV
    #[arg(long)]
    pub train: PathBuf,
    /// Task config TOML
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Basis size; required for --model smooth
    #[arg(long)]
    pub df: Option<usize>,
    /// Comma-separated quantile levels to fit alongside the mean,
    /// strictly increasing, e.g. 0.2,0.5,0.8
    #[arg(long)]
    pub quantiles: Option<String>,
    /// Only use data issued at or before this time (overrides the config)
    #[arg(long = "as-of")]
    pub as_of: Option<String>,
    /// Output artifact path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Fitted model artifact
    #[arg(long)]
    pub artifact: PathBuf,
    /// Panel CSV supplying predictor values
    #[arg(long)]
    pub data: PathBuf,
    /// Task config overriding forecast times / as-of; the response,
    /// predictors, and horizons must match the artifact
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "as-of")]
    pub as_of: Option<String>,
    /// Floor point predictions at zero
    #[arg(long = "clamp-zero")]
    pub clamp_zero: bool,
    /// Output forecasts CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Artifact holding at least two quantile fits
    #[arg(long)]
    pub artifact: PathBuf,
    /// Panel CSV to split into fitting and calibration slices
    #[arg(long)]
    pub train: PathBuf,
    /// Number of trailing weeks reserved for calibration
    #[arg(long = "cal-weeks", default_value_t = 4)]
    pub cal_weeks: u32,
    /// Empirical-quantile order for the margins
    #[arg(long, default_value_t = 0.8)]
    pub level: f64,
    /// Output artifact path (refitted coefficients plus margins)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Panel CSV with observed truths
    #[arg(long)]
    pub data: PathBuf,
    /// Forecasts CSV produced by `predict`
    #[arg(long)]
    pub forecasts: PathBuf,
    /// Task config describing rows and horizons
    #[arg(long)]
    pub config: PathBuf,
    /// Output metrics CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated candidate basis sizes, e.g. 1,2,3,4,5,6
    #[arg(long = "df-grid")]
    pub df_grid: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::ByLocation)]
    pub scheme: SchemeArg,
    /// Output CV table CSV; the chosen df is printed to standard output
    #[arg(long)]
    pub out: PathBuf,
}

fn write_sim_panel(path: &Path, out: &SimOutput, masked_only: bool) -> Result<usize, CliError> {
    let design = &out.design;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["geo_id", "time_value", "signal", "value"])?;
    let mut rows = 0usize;
    for i in 0..design.num_rows() {
        let loc = &design.row_index[i].location;
        for k in 0..design.num_features() {
            w.write_record([
                loc.as_str(),
                "0",
                &design.column_index[k].variable,
                &design.x.get(i, k).to_string(),
            ])?;
            rows += 1;
        }
        for j in 0..design.num_aheads() {
            if masked_only && design.w.get(i, j) != 1.0 {
                continue;
            }
            w.write_record([
                loc.as_str(),
                &design.ahead_index[j].to_string(),
                SIM_RESPONSE,
                &out.full_y.get(i, j).to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush().map_err(CliError::from)?;
    Ok(rows)
}

fn sim_task(p: usize, q: usize) -> TaskSpec {
    TaskSpec {
        response: SIM_RESPONSE.into(),
        predictors: (0..p)
            .map(|k| mpf_core::panel::PredictorSpec::new(predictor_label(k), vec![0]))
            .collect(),
        aheads: (0..q as i64).collect(),
        forecast_times: vec![0],
        as_of: None,
    }
}

pub fn simulate_cmd(args: &SimulateArgs) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&args.missing_frac) {
        return Err(CliError::Usage(format!(
            "--missing-frac must be in [0, 1), got {}",
            args.missing_frac
        )));
    }
    let noise = match (args.snr, args.noiseless) {
        (Some(snr), false) if snr > 0.0 && snr.is_finite() => NoiseSpec::Snr(snr),
        (Some(snr), false) => {
            return Err(CliError::Usage(format!(
                "--snr must be positive and finite, got {snr}"
            )))
        }
        (None, true) => NoiseSpec::Noiseless,
        (None, false) => {
            return Err(CliError::Usage("give either --snr or --noiseless".into()))
        }
        (Some(_), true) => unreachable!("clap rejects the conflict"),
    };
    let cfg = SimConfig {
        n_locations: args.n,
        p_predictors: args.p,
        q_aheads: args.q,
        true_df: args.true_df,
        noise,
        missing_frac: args.missing_frac,
        seed: args.seed,
    };
    let out = simulate(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", args.out.display())))?;
    let panel_path = args.out.join("panel.csv");
    let truth_path = args.out.join("truth.csv");
    let artifact_path = args.out.join("truth_artifact.json");

    let panel_rows = write_sim_panel(&panel_path, &out, true)?;
    let truth_rows = write_sim_panel(&truth_path, &out, false)?;

    let task = sim_task(args.p, args.q);
    let artifact = ModelArtifact {
        format_version: FORMAT_VERSION,
        kind: "smooth".into(),
        task: task_to_artifact(&task, false),
        basis: Some(ArtifactBasis {
            family: "orthogonal-polynomial".into(),
            degrees_of_freedom: args.true_df,
            aheads: task.aheads.clone(),
        }),
        coefficients: matrix_to_payload(&out.theta_star),
        quantiles: None,
        margins: None,
        metadata: ArtifactMetadata {
            train_rows: args.n,
            observed_cells: out.design.observed_cells(),
            ..ArtifactMetadata::default()
        },
    };
    save_artifact(&artifact_path, &artifact)?;

    let masked = args.n * args.q - out.design.observed_cells();
    eprintln!(
        "simulate: seed {} -> {} ({panel_rows} records, {masked} of {} response cells masked), \
         {} ({truth_rows} records), {}",
        args.seed,
        panel_path.display(),
        args.n * args.q,
        truth_path.display(),
        artifact_path.display()
    );
    Ok(())
}

fn parse_quantiles(text: &str) -> Result<Vec<f64>, CliError> {
    let mut taus = Vec::new();
    for part in text.split(',') {
        let tau: f64 = part
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("--quantiles: bad level {part:?}: {e}")))?;
        QuantileLevel::new(tau).map_err(|e| CliError::Usage(format!("--quantiles: {e}")))?;
        taus.push(tau);
    }
    if !taus.windows(2).all(|p| p[0] < p[1]) {
        return Err(CliError::Usage(
            "--quantiles must be strictly increasing".into(),
        ));
    }
    Ok(taus)
}

fn apply_as_of_override(
    task: &mut TaskSpec,
    dates: bool,
    flag: &Option<String>,
) -> Result<(), CliError> {
    if let Some(text) = flag {
        let (day, mode) = parse_cli_time(text, "--as-of")?;
        if mode != dates {
            return Err(CliError::Usage(
                "--as-of time format does not match the task's".into(),
            ));
        }
        task.as_of = Some(day);
    }
    Ok(())
}

fn load_matching_panel(path: &Path, dates: bool) -> Result<PanelDataset, CliError> {
    let panel = load_panel(path)?;
    if panel.dates != dates {
        return Err(CliError::Data(format!(
            "panel {} uses {} but the task uses {}",
            path.display(),
            if panel.dates { "ISO dates" } else { "integer times" },
            if dates { "ISO dates" } else { "integer times" },
        )));
    }
    Ok(panel)
}

struct FitOutcome {
    mean: CoefficientSet,
    quantiles: Vec<(f64, CoefficientSet)>,
    sse_per_ahead: Vec<f64>,
}

fn fit_models(
    design: &DesignSet,
    model: ModelArg,
    df: Option<usize>,
    taus: &[f64],
) -> Result<FitOutcome, CliError> {
    let q = design.num_aheads();
    let mean = match model {
        ModelArg::Baseline => {
            if df.is_some() {
                return Err(CliError::Usage("--df only applies to --model smooth".into()));
            }
            fit_baseline(design)?
        }
        ModelArg::Smooth => {
            let d =
                df.ok_or_else(|| CliError::Usage("--model smooth requires --df".into()))?;
            if d < 1 || d > q {
                return Err(CliError::Usage(format!(
                    "--df must be between 1 and the number of horizons ({q}), got {d}"
                )));
            }
            let basis = build_basis(&BasisSpec::polynomial(d, design.ahead_index.clone()))?;
            fit_smooth_auto(design, &basis)?
        }
    };
    let mut quantiles = Vec::with_capacity(taus.len());
    for &tau in taus {
        let level = QuantileLevel::new(tau).map_err(|e| CliError::Usage(e.to_string()))?;
        let fit = match model {
            ModelArg::Baseline => fit_baseline_q(design, level)?,
            ModelArg::Smooth => {
                let d = df.expect("checked above");
                let basis = build_basis(&BasisSpec::polynomial(d, design.ahead_index.clone()))?;
                fit_smooth_q(design, &basis, level)?
            }
        };
        quantiles.push((tau, fit));
    }
    let sse_per_ahead = sse_by_ahead(design, &mean)?;
    Ok(FitOutcome {
        mean,
        quantiles,
        sse_per_ahead,
    })
}

fn build_artifact(
    outcome: &FitOutcome,
    model: ModelArg,
    df: Option<usize>,
    task: &TaskSpec,
    dates: bool,
    design: &DesignSet,
) -> ModelArtifact {
    ModelArtifact {
        format_version: FORMAT_VERSION,
        kind: model.name().into(),
        task: task_to_artifact(task, dates),
        basis: df.map(|d| ArtifactBasis {
            family: "orthogonal-polynomial".into(),
            degrees_of_freedom: d,
            aheads: task.aheads.clone(),
        }),
        coefficients: coefficients_to_payload(&outcome.mean),
        quantiles: if outcome.quantiles.is_empty() {
            None
        } else {
            Some(
                outcome
                    .quantiles
                    .iter()
                    .map(|(tau, fit)| QuantilePayload {
                        tau: *tau,
                        coefficients: coefficients_to_payload(fit),
                    })
                    .collect(),
            )
        },
        margins: None,
        metadata: ArtifactMetadata {
            train_rows: design.num_rows(),
            observed_cells: design.observed_cells(),
            objective: Some(outcome.sse_per_ahead.iter().sum()),
            per_ahead_objective: Some(outcome.sse_per_ahead.clone()),
            ..ArtifactMetadata::default()
        },
    }
}

pub fn fit_cmd(args: &FitArgs) -> Result<(), CliError> {
    let TaskConfig { mut task, dates } = load_task_config(&args.config)?;
    apply_as_of_override(&mut task, dates, &args.as_of)?;
    let taus = match &args.quantiles {
        Some(text) => parse_quantiles(text)?,
        None => Vec::new(),
    };
    let panel = load_matching_panel(&args.train, dates)?;
    let design = build_design(&panel, &task)?;
    let outcome = fit_models(&design, args.model, args.df, &taus)?;

    match args.model {
        ModelArg::Baseline => {
            for (j, sse) in outcome.sse_per_ahead.iter().enumerate() {
                eprintln!(
                    "fit: ahead {} training sse {sse}",
                    design.ahead_index[j]
                );
            }
        }
        ModelArg::Smooth => {
            eprintln!(
                "fit: total training sse {}",
                outcome.sse_per_ahead.iter().sum::<f64>()
            );
        }
    }
    let artifact = build_artifact(&outcome, args.model, args.df, &task, dates, &design);
    save_artifact(&args.out, &artifact)?;
    eprintln!(
        "fit: {} model on {} rows x {} features, {} horizons, {} quantile level(s) -> {}",
        args.model.name(),
        design.num_rows(),
        design.num_features(),
        design.num_aheads(),
        taus.len(),
        args.out.display()
    );
    Ok(())
}

fn check_task_compatible(art: &ModelArtifact, cfg: &TaskConfig) -> Result<(), CliError> {
    let a = &art.task;
    let t = &cfg.task;
    let same_predictors = a.predictors.len() == t.predictors.len()
        && a.predictors.iter().zip(&t.predictors).all(|(ap, tp)| {
            let mut al = ap.lags.clone();
            let mut tl = tp.lags.clone();
            al.sort_unstable();
            tl.sort_unstable();
            ap.variable == tp.variable && al == tl
        });
    if a.response != t.response || !same_predictors || a.aheads != t.aheads {
        return Err(CliError::Data(
            "config does not match the artifact's response/predictors/horizons".into(),
        ));
    }
    if a.dates != cfg.dates {
        return Err(CliError::Data(
            "config time format does not match the artifact's".into(),
        ));
    }
    Ok(())
}

/// Predicts every quantile payload; returns (tau, frame) pairs in stored
/// order. Shape problems here mean the artifact and data disagree.
fn quantile_frames(
    art: &ModelArtifact,
    design: &DesignSet,
) -> Result<Vec<(f64, ForecastFrame)>, CliError> {
    let mut frames = Vec::new();
    if let Some(payloads) = &art.quantiles {
        for payload in payloads {
            let coef = coefficients_from_artifact(
                art,
                &payload.coefficients,
                &format!("quantile {} payload", payload.tau),
            )?;
            let frame = predict(&coef, &design.x, &design.row_index)
                .map_err(|e| CliError::Data(e.to_string()))?;
            frames.push((payload.tau, frame));
        }
    }
    Ok(frames)
}

pub fn predict_cmd(args: &PredictArgs) -> Result<(), CliError> {
    let art = load_artifact(&args.artifact)?;
    let (mut task, dates) = match &args.config {
        Some(path) => {
            let cfg = load_task_config(path)?;
            check_task_compatible(&art, &cfg)?;
            let dates = cfg.dates;
            (cfg.task, dates)
        }
        None => (task_from_artifact(&art.task)?, art.task.dates),
    };
    apply_as_of_override(&mut task, dates, &args.as_of)?;
    let panel = load_matching_panel(&args.data, dates)?;
    let design = build_design_with(&panel, &task, DesignOptions { retain_empty: true })?;

    let mean = coefficients_from_artifact(&art, &art.coefficients, "coefficients")?;
    let mean_frame =
        predict(&mean, &design.x, &design.row_index).map_err(|e| CliError::Data(e.to_string()))?;
    let qframes = quantile_frames(&art, &design)?;

    // The point forecast is the median when one was fitted, else the mean.
    let (point_label, point_frame) = match qframes.iter().find(|(tau, _)| *tau == 0.5) {
        Some((tau, frame)) => (tau.to_string(), frame),
        None => ("mean".to_string(), &mean_frame),
    };
    let interval = if qframes.len() >= 2 {
        let lo = &qframes[0].1;
        let hi = &qframes[qframes.len() - 1].1;
        match &art.margins {
            Some(m) => {
                let margins = margins_from_artifact(m)?;
                Some(apply_margins(lo, hi, &margins)?)
            }
            None => Some((lo.clone(), hi.clone())),
        }
    } else {
        None
    };

    let mut rows = Vec::with_capacity(design.num_rows() * design.num_aheads());
    for r in 0..design.num_rows() {
        let key = &design.row_index[r];
        for j in 0..design.num_aheads() {
            let mut value = point_frame.values.get(r, j);
            if args.clamp_zero {
                value = value.max(0.0);
            }
            rows.push(ForecastRow {
                location: key.location.clone(),
                time: key.time,
                ahead: design.ahead_index[j],
                quantile: point_label.clone(),
                value,
                lower: interval.as_ref().map(|(lo, _)| lo.values.get(r, j)),
                upper: interval.as_ref().map(|(_, hi)| hi.values.get(r, j)),
            });
        }
    }
    write_forecasts(&args.out, &rows, dates)?;
    eprintln!(
        "predict: {} cells ({} rows x {} horizons){} -> {}",
        rows.len(),
        design.num_rows(),
        design.num_aheads(),
        if art.margins.is_some() {
            ", intervals calibrated"
        } else {
            ""
        },
        args.out.display()
    );
    Ok(())
}

pub fn calibrate_cmd(args: &CalibrateArgs) -> Result<(), CliError> {
    if !(args.level.is_finite() && 0.0 < args.level && args.level < 1.0) {
        return Err(CliError::Usage(format!(
            "--level must be in (0, 1), got {}",
            args.level
        )));
    }
    let art = load_artifact(&args.artifact)?;
    let payloads = art.quantiles.as_deref().unwrap_or(&[]);
    if payloads.len() < 2 {
        return Err(CliError::Data(
            "calibration needs an artifact with at least two quantile fits".into(),
        ));
    }
    let taus: Vec<f64> = payloads.iter().map(|p| p.tau).collect();
    if !taus.windows(2).all(|p| p[0] < p[1]) {
        return Err(CliError::Data(
            "artifact quantile levels are not strictly increasing".into(),
        ));
    }
    let model = ModelArg::from_kind(&art.kind)?;
    let df = art.basis.as_ref().map(|b| b.degrees_of_freedom);
    let task = task_from_artifact(&art.task)?;
    let dates = art.task.dates;

    let panel = load_matching_panel(&args.train, dates)?;
    let design = build_design(&panel, &task)?;
    let max_time = design
        .row_index
        .iter()
        .map(|k| k.time)
        .max()
        .expect("designs are never empty");
    let cutoff = max_time - i64::from(args.cal_weeks) * 7;
    let (fit_part, cal_part) = mpf_core::panel::split_by_time(&design, cutoff);
    if fit_part.num_rows() == 0 || cal_part.num_rows() == 0 {
        return Err(CliError::Data(format!(
            "cutting {} week(s) before {} splits {} rows into {} to fit and {} to calibrate; \
             both sides must be non-empty",
            args.cal_weeks,
            format_time(max_time, dates),
            design.num_rows(),
            fit_part.num_rows(),
            cal_part.num_rows()
        )));
    }

    let outcome = fit_models(&fit_part, model, df, &taus)?;
    let (lo_tau, lo_fit) = &outcome.quantiles[0];
    let (hi_tau, hi_fit) = &outcome.quantiles[outcome.quantiles.len() - 1];
    let lo_frame = predict(lo_fit, &cal_part.x, &cal_part.row_index)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let hi_frame = predict(hi_fit, &cal_part.x, &cal_part.row_index)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let (e_lower, e_upper) = interval_errors(&cal_part, &lo_frame, &hi_frame)?;
    let lower_level = QuantileLevel::new(*lo_tau).map_err(|e| CliError::Data(e.to_string()))?;
    let upper_level = QuantileLevel::new(*hi_tau).map_err(|e| CliError::Data(e.to_string()))?;
    let margins = compute_margins(&e_lower, &e_upper, args.level, lower_level, upper_level)?;

    let mut artifact = build_artifact(&outcome, model, df, &task, dates, &fit_part);
    artifact.margins = Some(margins_to_artifact(&margins));
    artifact.metadata.calibration_cutoff = Some(format_time(cutoff, dates));
    artifact.metadata.calibration_rows = Some(cal_part.num_rows());
    save_artifact(&args.out, &artifact)?;
    eprintln!(
        "calibrate: refit on {} rows through {}, margins ({}, {}) from {} rows \
         ({} observed cells) -> {}",
        fit_part.num_rows(),
        format_time(cutoff, dates),
        margins.q_lower,
        margins.q_upper,
        cal_part.num_rows(),
        e_lower.len(),
        args.out.display()
    );
    Ok(())
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), CliError> {
    let TaskConfig { task, dates } = load_task_config(&args.config)?;
    let panel = load_matching_panel(&args.data, dates)?;
    let truth = build_design(&panel, &task)?;
    let forecasts = read_forecasts(&args.forecasts)?;

    let mut by_cell: BTreeMap<(&str, i64, i64), &ForecastRow> = BTreeMap::new();
    for row in &forecasts {
        by_cell.insert((row.location.as_str(), row.time, row.ahead), row);
    }

    let (n, q) = (truth.num_rows(), truth.num_aheads());
    let mut median = Matrix::zeros(n, q);
    let mut lower = Matrix::zeros(n, q);
    let mut upper = Matrix::zeros(n, q);
    let mut with_interval = 0usize;
    let mut observed = 0usize;
    for r in 0..n {
        let key = &truth.row_index[r];
        for j in 0..q {
            if truth.w.get(r, j) != 1.0 {
                continue;
            }
            observed += 1;
            let ahead = truth.ahead_index[j];
            let row = by_cell
                .get(&(key.location.as_str(), key.time, ahead))
                .ok_or_else(|| {
                    CliError::Data(format!(
                        "no forecast for {} @ {} ahead {ahead}",
                        key.location,
                        format_time(key.time, dates)
                    ))
                })?;
            median.set(r, j, row.value);
            if let (Some(lo), Some(hi)) = (row.lower, row.upper) {
                lower.set(r, j, lo);
                upper.set(r, j, hi);
                with_interval += 1;
            }
        }
    }
    if with_interval != 0 && with_interval != observed {
        return Err(CliError::Data(format!(
            "{with_interval} of {observed} forecast cells carry interval bounds; \
             intervals must be all-or-none"
        )));
    }
    let frame = |values: Matrix| ForecastFrame {
        row_index: truth.row_index.clone(),
        ahead_index: truth.ahead_index.clone(),
        values,
    };
    let median = frame(median);
    let interval = (with_interval > 0).then(|| (frame(lower), frame(upper)));
    let report = compute_metrics(
        &truth,
        &median,
        interval.as_ref().map(|(lo, hi)| (lo, hi)),
    )?;
    write_metrics(&args.out, &report)?;
    eprintln!(
        "evaluate: {} observed cells, mae {}{} -> {}",
        report.m,
        report.mae,
        match (report.lmr, report.umr) {
            (Some(l), Some(u)) => format!(", lmr {l}, umr {u}"),
            _ => String::new(),
        },
        args.out.display()
    );
    Ok(())
}

pub fn cv_cmd(args: &CvArgs) -> Result<(), CliError> {
    let TaskConfig { task, dates } = load_task_config(&args.config)?;
    let panel = load_matching_panel(&args.train, dates)?;
    let design = build_design(&panel, &task)?;
    let mut grid = Vec::new();
    for part in args.df_grid.split(',') {
        let df: usize = part
            .trim()
            .parse()
            .map_err(|e| CliError::Usage(format!("--df-grid: bad entry {part:?}: {e}")))?;
        grid.push(df);
    }
    let scheme = match args.scheme {
        SchemeArg::ByLocation => CvScheme::ByLocation,
        SchemeArg::ByTime => CvScheme::ByTime,
    };
    let (best, table) = cv_select_df(&design, &grid, args.folds, scheme)?;
    write_cv_table(&args.out, &table)?;
    eprintln!(
        "cv: {} candidate df value(s), {} folds ({:?}) on {} rows -> {}",
        table.len(),
        args.folds,
        args.scheme,
        design.num_rows(),
        args.out.display()
    );
    println!("{best}");
    Ok(())
}
