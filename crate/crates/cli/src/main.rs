//! `dagb` — batch front end for ΔAGB model fitting, map prediction,
//! design-based estimation, and Monte Carlo simulation.
//!
//! Exit codes: 0 success, 1 input error, 2 computation infeasibility.
//! Diagnostics use stable codes (E-SCHEMA, E-GEOM, E-RANGE, W-OOB).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dagb_core::estimation::EstimateReport;
use dagb_core::features::{build_design, enumerate_terms, Epoch, Mode};
use dagb_core::mapping::{
    plot_predictions, predict_map, synthetic_mean_for_estimator, Accounting,
};
use dagb_core::plots::{parse_plot_table, PlotTable};
use dagb_core::raster::{locate_pixel, read_raster_file, write_raster_file, ForestMask, RasterStack};
use dagb_core::sim::{monte_carlo, McOptions, SimConfig};
use dagb_core::spectra::{extract_plot_spectra, PlotSpectra};
use dagb_core::subset::{select_model, ModelFit};
use dagb_core::Error as CoreError;

const EXIT_INPUT: u8 = 1;
const EXIT_COMPUTE: u8 = 2;

#[derive(Parser)]
#[command(name = "dagb", version, about = "Forest biomass-change mapping and estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check input formats, geometry agreement, and plot coverage.
    Validate(CommonArgs),
    /// Build the candidate term pool, run best-subsets selection, write the model JSON.
    Fit(CommonArgs),
    /// Predict over the map, then compute BE and MA totals with variances and CIs.
    Estimate(CommonArgs),
    /// Apply a fitted model over the rasters and write the ΔAGB map only.
    Predict(CommonArgs),
    /// Generate a synthetic population and run the Monte Carlo estimator study.
    Simulate(SimArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Run configuration JSON; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Plot table CSV (plot_id,x,y,forest,agb_t1,agb_t2).
    #[arg(long)]
    plots: Option<PathBuf>,
    /// BGRID stack for epoch t1.
    #[arg(long)]
    stack_t1: Option<PathBuf>,
    /// BGRID stack for epoch t2.
    #[arg(long)]
    stack_t2: Option<PathBuf>,
    /// BGRID forest mask (single band `mask`).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Model JSON path (output of `fit`, input of `estimate`/`predict`).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Report output path (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// ΔAGB map output path (BGRID).
    #[arg(long)]
    map_out: Option<PathBuf>,
    /// bi_temporal or uni_temporal.
    #[arg(long)]
    mode: Option<String>,
    /// Population land area in hectares.
    #[arg(long)]
    area_ha: Option<f64>,
    /// Largest subset size searched.
    #[arg(long)]
    k_max: Option<usize>,
    /// Candidates kept per subset size.
    #[arg(long)]
    m: Option<usize>,
    /// population_mean or forest_mean.
    #[arg(long)]
    accounting: Option<String>,
    /// Seed recorded in the manifest; all randomness flows from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for map prediction.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct SimArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sample size per replicate.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo replicates.
    #[arg(long)]
    replicates: Option<usize>,
    /// Write per-replicate (t_be, var_be, t_ma, var_ma) CSV here.
    #[arg(long)]
    draws_out: Option<PathBuf>,
}

/// Effective run configuration: file values with flag overrides applied.
/// Serialized (stable field order) to produce the manifest config hash.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    plots: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stack_t1: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stack_t2: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    map_out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    area_ha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accounting: Option<Accounting>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim: Option<SimConfig>,
}

/// A failure carrying the process exit code and a stable diagnostic code.
struct Failure {
    exit: u8,
    code: &'static str,
    message: String,
}

impl Failure {
    fn input(code: &'static str, message: impl Into<String>) -> Self {
        Failure { exit: EXIT_INPUT, code, message: message.into() }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::GeometryMismatch(_) => "E-GEOM",
            CoreError::MissingColumn(_)
            | CoreError::RowError { .. }
            | CoreError::DuplicatePlotId(_)
            | CoreError::RasterFormat(_)
            | CoreError::RasterLength { .. }
            | CoreError::UnknownBand { .. }
            | CoreError::MissingTerm(_)
            | CoreError::Io(_) => "E-SCHEMA",
            _ => "E-COMPUTE",
        };
        let exit = match &e {
            CoreError::SingularDesign
            | CoreError::SampleTooSmall { .. }
            | CoreError::VarianceUndefined(_)
            | CoreError::EnumerationGuard { .. }
            | CoreError::SelectionInfeasible { .. }
            | CoreError::NoPredictors
            | CoreError::ZeroDenominator(_)
            | CoreError::EmptyBandList(_)
            | CoreError::InvalidConfig(_)
            | CoreError::SampleExceedsPopulation { .. } => EXIT_COMPUTE,
            _ => EXIT_INPUT,
        };
        Failure { exit, code, message: e.to_string() }
    }
}

type RunResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}: {}", f.code, f.message);
            ExitCode::from(f.exit)
        }
    }
}

// ---------------------------------------------------------------------------
// configuration plumbing

fn load_config(args: &CommonArgs) -> RunResult<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::input("E-SCHEMA", format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| {
                Failure::input("E-SCHEMA", format!("config {}: {e}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    // flags win over the file
    macro_rules! take {
        ($field:ident) => {
            if args.$field.is_some() {
                cfg.$field = args.$field.clone();
            }
        };
    }
    take!(plots);
    take!(stack_t1);
    take!(stack_t2);
    take!(mask);
    take!(model);
    take!(out);
    take!(map_out);
    take!(area_ha);
    take!(k_max);
    take!(m);
    take!(seed);
    take!(workers);
    if let Some(mode) = &args.mode {
        cfg.mode = Some(parse_mode(mode)?);
    }
    if let Some(acc) = &args.accounting {
        cfg.accounting = Some(parse_accounting(acc)?);
    }
    Ok(cfg)
}

fn parse_mode(s: &str) -> RunResult<Mode> {
    match s {
        "bi_temporal" => Ok(Mode::BiTemporal),
        "uni_temporal" => Ok(Mode::UniTemporal),
        other => Err(Failure::input(
            "E-SCHEMA",
            format!("mode must be bi_temporal or uni_temporal, got `{other}`"),
        )),
    }
}

fn parse_accounting(s: &str) -> RunResult<Accounting> {
    match s {
        "population_mean" => Ok(Accounting::PopulationMean),
        "forest_mean" => Ok(Accounting::ForestMean),
        other => Err(Failure::input(
            "E-SCHEMA",
            format!("accounting must be population_mean or forest_mean, got `{other}`"),
        )),
    }
}

fn require<'a, T>(field: &'a Option<T>, name: &str) -> RunResult<&'a T> {
    field
        .as_ref()
        .ok_or_else(|| Failure::input("E-SCHEMA", format!("missing required setting `{name}`")))
}

// ---------------------------------------------------------------------------
// manifest

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    config_hash: String,
    seed: u64,
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

fn manifest_path(primary_output: &Path) -> PathBuf {
    let stem = primary_output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    primary_output.with_file_name(format!("{stem}.manifest.json"))
}

/// Write the run manifest next to the primary output.
fn write_manifest(
    command: &str,
    cfg: &RunConfig,
    input_paths: &[&Path],
    outputs: &[&Path],
    primary_output: &Path,
) -> RunResult<()> {
    let config_json = serde_json::to_string(cfg).expect("config serializes");
    let mut inputs = Vec::new();
    for p in input_paths {
        let bytes = std::fs::read(p).map_err(|e| {
            Failure::input("E-SCHEMA", format!("cannot read input {}: {e}", p.display()))
        })?;
        inputs.push(ManifestInput {
            path: p.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: sha256_hex(config_json.as_bytes()),
        seed: cfg.seed.unwrap_or(0),
        inputs,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(manifest_path(primary_output), text + "\n")
        .map_err(|e| Failure::input("E-SCHEMA", format!("cannot write manifest: {e}")))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> RunResult<()> {
    std::fs::write(path, text)
        .map_err(|e| Failure::input("E-SCHEMA", format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// shared loading

fn load_plots(path: &Path) -> RunResult<PlotTable> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::input("E-SCHEMA", format!("cannot read plots {}: {e}", path.display()))
    })?;
    parse_plot_table(&text).map_err(Failure::from)
}

fn load_stack(path: &Path, epoch: Epoch) -> RunResult<RasterStack> {
    Ok(read_raster_file(path)?.with_epoch(epoch.to_string()))
}

fn load_mask(path: &Path) -> RunResult<ForestMask> {
    Ok(ForestMask::from_stack(read_raster_file(path)?)?)
}

/// Load the stacks a mode needs: [t1, t2] for bi-temporal, [t2] alone for
/// uni-temporal.
fn load_stacks_for_mode(cfg: &RunConfig, mode: Mode) -> RunResult<Vec<RasterStack>> {
    let mut stacks = Vec::new();
    if mode == Mode::BiTemporal {
        stacks.push(load_stack(require(&cfg.stack_t1, "stack_t1")?, Epoch::T1)?);
    }
    stacks.push(load_stack(require(&cfg.stack_t2, "stack_t2")?, Epoch::T2)?);
    Ok(stacks)
}

/// Restrict spectra to forest plots, aligned delta values included.
fn forest_subset(plots: &PlotTable, spectra: &PlotSpectra) -> (PlotSpectra, BTreeMap<String, f64>) {
    let mut filtered = PlotSpectra::new();
    filtered.bands = spectra.bands.clone();
    let mut deltas = BTreeMap::new();
    for (plot, rec) in plots.iter().zip(&spectra.records) {
        if plot.forest {
            filtered.records.push(rec.clone());
            deltas.insert(plot.plot_id.clone(), plot.delta_agb);
        }
    }
    (filtered, deltas)
}

// ---------------------------------------------------------------------------
// validate

fn cmd_validate(args: &CommonArgs) -> RunResult<ExitCode> {
    let cfg = load_config(args)?;
    let mut errors = 0usize;
    let mut warnings = 0usize;
    let report = |code: &str, message: &str| {
        println!("{code}: {message}");
    };

    let plots = match &cfg.plots {
        Some(path) => match load_plots(path) {
            Ok(p) => {
                report("OK", &format!("plots: {} records", p.len()));
                Some(p)
            }
            Err(f) => {
                report(f.code, &f.message);
                errors += 1;
                None
            }
        },
        None => None,
    };

    let mut stacks: Vec<RasterStack> = Vec::new();
    for (path, epoch) in [(&cfg.stack_t1, Epoch::T1), (&cfg.stack_t2, Epoch::T2)] {
        if let Some(path) = path {
            match load_stack(path, epoch) {
                Ok(s) => {
                    report(
                        "OK",
                        &format!(
                            "stack {epoch}: {}x{} pixels, {} bands",
                            s.ncols,
                            s.nrows,
                            s.band_names.len()
                        ),
                    );
                    stacks.push(s);
                }
                Err(f) => {
                    report("E-SCHEMA", &f.message);
                    errors += 1;
                }
            }
        }
    }

    let mask = match &cfg.mask {
        Some(path) => match load_mask(path) {
            Ok(m) => {
                report("OK", "mask: values in {0, 1, nodata}");
                Some(m)
            }
            Err(f) => {
                report("E-SCHEMA", &f.message);
                errors += 1;
                None
            }
        },
        None => None,
    };

    for pair in stacks.windows(2) {
        if !pair[0].same_geometry(&pair[1]) {
            report("E-GEOM", "stack t1 and stack t2 grids disagree");
            errors += 1;
        }
    }
    if let Some(mask) = &mask {
        for s in &stacks {
            if !s.same_geometry(&mask.grid) {
                report(
                    "E-GEOM",
                    &format!("mask grid does not match stack {}", s.epoch_label),
                );
                errors += 1;
            }
        }
    }

    if let Some(a) = cfg.area_ha {
        if !(a > 0.0) {
            report("E-RANGE", &format!("area_ha must be > 0, got {a}"));
            errors += 1;
        }
    }

    if let (Some(plots), Some(first)) = (&plots, stacks.first()) {
        for p in plots {
            if locate_pixel(first, p.x, p.y).is_none() {
                report(
                    "W-OOB",
                    &format!("plot `{}` at ({}, {}) falls outside the raster extent", p.plot_id, p.x, p.y),
                );
                warnings += 1;
            }
        }
    }

    println!("validate: {errors} error(s), {warnings} warning(s)");
    Ok(if errors == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INPUT) })
}

// ---------------------------------------------------------------------------
// fit

#[derive(Serialize)]
struct FitReport {
    mode: Mode,
    candidate_pool_size: usize,
    n: usize,
    n_dropped: usize,
    terms: Vec<String>,
    intercept: f64,
    coefficients: Vec<f64>,
    adj_r2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bic: Option<f64>,
    max_vif: f64,
}

fn cmd_fit(args: &CommonArgs) -> RunResult<ExitCode> {
    let cfg = load_config(args)?;
    let mode = *require(&cfg.mode, "mode")?;
    let plots_path = require(&cfg.plots, "plots")?.clone();
    let model_path = require(&cfg.model, "model")?.clone();
    let k_max = cfg.k_max.unwrap_or(3);
    let m = cfg.m.unwrap_or(10);

    let plots = load_plots(&plots_path)?;
    let stacks = load_stacks_for_mode(&cfg, mode)?;
    let stack_refs: Vec<&RasterStack> = stacks.iter().collect();
    let spectra = extract_plot_spectra(&plots, &stack_refs)?;
    let (forest_spectra, deltas) = forest_subset(&plots, &spectra);

    let empty = Vec::new();
    let bands_t1 = stacks
        .iter()
        .find(|s| s.epoch_label == "t1")
        .map(|s| &s.band_names)
        .unwrap_or(&empty);
    let bands_t2 = stacks
        .iter()
        .find(|s| s.epoch_label == "t2")
        .map(|s| &s.band_names)
        .unwrap_or(&empty);
    let terms = enumerate_terms(bands_t1, bands_t2, mode)?;
    println!("candidate_pool_size: {}", terms.len());

    let design = build_design(&forest_spectra, &terms)?;
    let y: Vec<f64> = design.row_ids.iter().map(|id| deltas[id]).collect();
    let model = select_model(&design, &y, mode, k_max, m)?;

    write_text(&model_path, &(model.to_json() + "\n"))?;

    let report = FitReport {
        mode,
        candidate_pool_size: terms.len(),
        n: model.n,
        n_dropped: design.dropped.len(),
        terms: model.terms.iter().map(|t| t.name()).collect(),
        intercept: model.intercept,
        coefficients: model.coefficients.clone(),
        adj_r2: model.adj_r2,
        bic: model.bic,
        max_vif: model.max_vif,
    };
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{report_json}");
    if let Some(out) = &cfg.out {
        write_text(out, &(report_json.clone() + "\n"))?;
    }

    let mut input_paths: Vec<&Path> = vec![&plots_path];
    let stack_paths: Vec<PathBuf> = stack_input_paths(&cfg, mode)?;
    input_paths.extend(stack_paths.iter().map(|p| p.as_path()));
    let mut outputs: Vec<&Path> = vec![&model_path];
    if let Some(out) = &cfg.out {
        outputs.push(out);
    }
    write_manifest("fit", &cfg, &input_paths, &outputs, &model_path)?;
    Ok(ExitCode::SUCCESS)
}

fn stack_input_paths(cfg: &RunConfig, mode: Mode) -> RunResult<Vec<PathBuf>> {
    let mut paths = Vec::new();
    if mode == Mode::BiTemporal {
        paths.push(require(&cfg.stack_t1, "stack_t1")?.clone());
    }
    paths.push(require(&cfg.stack_t2, "stack_t2")?.clone());
    Ok(paths)
}

// ---------------------------------------------------------------------------
// estimate

fn cmd_estimate(args: &CommonArgs) -> RunResult<ExitCode> {
    let cfg = load_config(args)?;
    let model_path = require(&cfg.model, "model")?.clone();
    let plots_path = require(&cfg.plots, "plots")?.clone();
    let mask_path = require(&cfg.mask, "mask")?.clone();
    let out_path = require(&cfg.out, "out")?.clone();
    let area_ha = *require(&cfg.area_ha, "area_ha")?;
    if !(area_ha > 0.0) {
        return Err(Failure::input("E-RANGE", format!("area_ha must be > 0, got {area_ha}")));
    }
    let accounting = cfg.accounting.unwrap_or(Accounting::PopulationMean);
    let workers = cfg.workers.unwrap_or(1);

    let model_text = std::fs::read_to_string(&model_path).map_err(|e| {
        Failure::input("E-SCHEMA", format!("cannot read model {}: {e}", model_path.display()))
    })?;
    let model = ModelFit::from_json(&model_text)?;

    let plots = load_plots(&plots_path)?;
    let stacks = load_stacks_for_mode(&cfg, model.mode)?;
    let stack_refs: Vec<&RasterStack> = stacks.iter().collect();
    let mask = load_mask(&mask_path)?;

    let (map, stats) = predict_map(&model, &stack_refs, &mask, workers)?;
    if stats.out_of_range_fraction > 0.0 {
        eprintln!(
            "W-OOB: {:.4} of predicted pixels fall outside the model's training ranges",
            stats.out_of_range_fraction
        );
    }
    let synthetic_mean = synthetic_mean_for_estimator(&stats, accounting)?;

    let spectra = extract_plot_spectra(&plots, &stack_refs)?;
    let predictions = plot_predictions(&model, &plots, &spectra)?;
    let report = EstimateReport::compute(&plots, &predictions, synthetic_mean, area_ha)?;

    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&out_path, &(report_json.clone() + "\n"))?;
    println!("{report_json}");

    let mut outputs: Vec<&Path> = vec![&out_path];
    if let Some(map_out) = &cfg.map_out {
        write_raster_file(map_out, &map)?;
        outputs.push(map_out);
    }
    let mut input_paths: Vec<&Path> = vec![&plots_path, &mask_path, &model_path];
    let stack_paths = stack_input_paths(&cfg, model.mode)?;
    input_paths.extend(stack_paths.iter().map(|p| p.as_path()));
    write_manifest("estimate", &cfg, &input_paths, &outputs, &out_path)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// predict (map only)

fn cmd_predict(args: &CommonArgs) -> RunResult<ExitCode> {
    let cfg = load_config(args)?;
    let model_path = require(&cfg.model, "model")?.clone();
    let mask_path = require(&cfg.mask, "mask")?.clone();
    let map_out = require(&cfg.map_out, "map_out")?.clone();
    let workers = cfg.workers.unwrap_or(1);

    let model_text = std::fs::read_to_string(&model_path).map_err(|e| {
        Failure::input("E-SCHEMA", format!("cannot read model {}: {e}", model_path.display()))
    })?;
    let model = ModelFit::from_json(&model_text)?;
    let stacks = load_stacks_for_mode(&cfg, model.mode)?;
    let stack_refs: Vec<&RasterStack> = stacks.iter().collect();
    let mask = load_mask(&mask_path)?;

    let (map, stats) = predict_map(&model, &stack_refs, &mask, workers)?;
    write_raster_file(&map_out, &map)?;
    if stats.out_of_range_fraction > 0.0 {
        eprintln!(
            "W-OOB: {:.4} of predicted pixels fall outside the model's training ranges",
            stats.out_of_range_fraction
        );
    }
    let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    println!("{stats_json}");
    let mut outputs: Vec<&Path> = vec![&map_out];
    if let Some(out) = &cfg.out {
        write_text(out, &(stats_json.clone() + "\n"))?;
        outputs.push(out);
    }
    let mut input_paths: Vec<&Path> = vec![&mask_path, &model_path];
    let stack_paths = stack_input_paths(&cfg, model.mode)?;
    input_paths.extend(stack_paths.iter().map(|p| p.as_path()));
    write_manifest("predict", &cfg, &input_paths, &outputs, &map_out)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// simulate

fn cmd_simulate(args: &SimArgs) -> RunResult<ExitCode> {
    let mut cfg = load_config(&args.common)?;
    if args.n.is_some() {
        cfg.sample_size = args.n;
    }
    if args.replicates.is_some() {
        cfg.replicates = args.replicates;
    }
    let out_path = require(&cfg.out, "out")?.clone();
    let n = *require(&cfg.sample_size, "sample_size")?;
    let replicates = *require(&cfg.replicates, "replicates")?;

    let mut sim = cfg.sim.clone().unwrap_or_default();
    if let Some(seed) = cfg.seed {
        sim.seed = seed;
    }
    sim.validate()?;

    let mut options = McOptions::new(n, replicates);
    if let Some(mode) = cfg.mode {
        options.mode = mode;
    }
    if let Some(k_max) = cfg.k_max {
        options.k_max = k_max;
    }
    if let Some(m) = cfg.m {
        options.m = m;
    }
    options.keep_draws = args.draws_out.is_some();

    let mut report = monte_carlo(&sim, &options)?;
    if let Some(draws_path) = &args.draws_out {
        let mut csv = String::from("t_be_t,var_be_t2,t_ma_t,var_ma_t2\n");
        for d in report.draws.as_deref().unwrap_or_default() {
            csv.push_str(&format!("{},{},{},{}\n", d.t_be_t, d.var_be_t2, d.t_ma_t, d.var_ma_t2));
        }
        write_text(draws_path, &csv)?;
        report.draws = None; // keep the JSON report compact; draws live in the CSV
    }

    let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&out_path, &(report_json.clone() + "\n"))?;
    println!("{report_json}");

    // record the effective simulation config in the manifest hash
    cfg.sim = Some(sim.clone());
    cfg.seed = Some(sim.seed);
    let mut outputs: Vec<&Path> = vec![&out_path];
    if let Some(draws_path) = &args.draws_out {
        outputs.push(draws_path);
    }
    write_manifest("simulate", &cfg, &[], &outputs, &out_path)?;
    Ok(ExitCode::SUCCESS)
}
