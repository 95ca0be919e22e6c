use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spatrpm::config::{parse_config, RunConfig};
use spatrpm::data::read_points_csv;
use spatrpm::experiment::{
    consensus_estimate, fit as fit_model, generate_ushape_data, generate_ushape_test, run_asymptotic_sweep,
    waic_grid_search, SweepConfig, UShapeTruth,
};
use spatrpm::io::{read_samples_file, write_csv_rows, write_json, write_samples, ChainDiagnostics, FitManifest};
use spatrpm::metrics::{crps_mean, mae, normalized_errors, prediction_error_e3, waic, DomainOverlap};
use spatrpm::predict::{predict_mean, prediction_matrix, PredictionRequest};
use spatrpm::{BlockGrid, Dataset, Error, PosteriorSample};

use crate::{EvaluateArgs, FitArgs, PredictArgs, Reference, SimulateArgs, SweepArgs, WaicArgs};

pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => e.fmt(f),
        }
    }
}

impl CliError {
    /// 2 for bad input or configuration, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e {
                Error::Csv { .. }
                | Error::MissingColumn(_)
                | Error::InvalidDataset(_)
                | Error::OutOfDomain { .. }
                | Error::EmptyDataset
                | Error::Config(_)
                | Error::Json(_)
                | Error::Record { .. }
                | Error::DimensionMismatch { .. } => 2,
                _ => 1,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Lib(e) => match e {
                Error::Csv { .. } | Error::Record { .. } => "parse",
                Error::MissingColumn(_) => "missing_column",
                Error::InvalidDataset(_) | Error::OutOfDomain { .. } | Error::EmptyDataset => "invalid_data",
                Error::Config(_) | Error::Json(_) => "config",
                Error::Disconnected { .. } => "disconnected",
                Error::NonFinite { .. } | Error::StatsMismatch(_) => "numeric",
                Error::Io(_) => "io",
                _ => "runtime",
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Arguments and version of a command, written next to its outputs.
#[derive(Serialize)]
struct CommandManifest<'a, A: Serialize> {
    version: &'static str,
    command: &'static str,
    args: &'a A,
}

fn write_command_manifest<A: Serialize>(path: &Path, command: &'static str, args: &A) -> Result<()> {
    let m = CommandManifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        args,
    };
    Ok(write_json(path, &m)?)
}

/// `<file>.<suffix>` beside `file`.
fn sibling(file: &Path, suffix: &str) -> PathBuf {
    let mut name = file.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    Ok(match path {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    })
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    let data_path = args
        .data
        .clone()
        .or_else(|| config.io.data.clone())
        .ok_or_else(|| CliError::Usage("no data: pass --data or set io.data".into()))?;
    let out = args
        .out
        .clone()
        .or_else(|| config.io.out_dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set io.out_dir".into()))?;
    if let Some(s) = args.seed {
        config.sampler.seed = s;
    }
    if let Some(n) = args.iters {
        config.sampler.n_iters = n;
    }
    if let Some(b) = args.burn_in {
        config.sampler.burn_in = b;
    }
    if let Some(c) = args.chains {
        config.sampler.n_chains = c;
    }
    config.io.data = Some(data_path.clone());
    config.io.out_dir = Some(out.clone());
    config.validate()?;

    let dataset = Dataset::read_csv(&data_path)?;
    let resolved = config.resolve(&dataset)?;
    let fitted = fit_model(&dataset, resolved.resolution, &resolved.model, &resolved.sampler)?;

    fs::create_dir_all(&out)?;
    write_samples(create(&out.join("samples.jsonl"))?, &fitted.chains)?;
    let diagnostics: Vec<ChainDiagnostics> = fitted.chains.iter().map(ChainDiagnostics::new).collect();
    write_json(out.join("diagnostics.json"), &diagnostics)?;
    let manifest = FitManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        data: data_path,
        config,
        resolved,
        n_input: dataset.len(),
        n_kept: fitted.dataset.len(),
        n_blocks: fitted.grid.n_blocks(),
    };
    write_json(out.join("manifest.json"), &manifest)?;

    let samples = fitted.samples();
    let mut k_hist = vec![0usize; manifest.resolved.sampler.k_max + 1];
    for s in &samples {
        k_hist[s.k] += 1;
    }
    println!(
        "{}",
        serde_json::json!({
            "samples": samples.len(),
            "resolution": manifest.resolved.resolution,
            "log_lambda": manifest.resolved.sampler.log_lambda,
            "n_kept": manifest.n_kept,
            "k_counts": k_hist,
        })
    );
    Ok(())
}

/// Rebuilds the fitted grid and loads the samples of a run directory.
fn load_run(run: &Path, data: Option<&Path>) -> Result<(FitManifest, Dataset, BlockGrid, Vec<PosteriorSample>)> {
    let manifest = FitManifest::read(run.join("manifest.json"))?;
    let path = data.map(Path::to_path_buf).unwrap_or_else(|| manifest.data.clone());
    let full = Dataset::read_csv(&path)?;
    let (grid, kept, _) = BlockGrid::build_largest_component(&full, manifest.resolved.resolution)?;
    if kept.len() != manifest.n_kept || grid.n_blocks() != manifest.n_blocks {
        return Err(CliError::Usage(format!(
            "data {} does not match the run: {} kept rows / {} blocks, manifest has {} / {}",
            path.display(),
            kept.len(),
            grid.n_blocks(),
            manifest.n_kept,
            manifest.n_blocks
        )));
    }
    let samples = read_samples_file(run.join("samples.jsonl"))?;
    if let Some(s) = samples.iter().find(|s| s.labels.len() != grid.n_blocks()) {
        return Err(CliError::Usage(format!(
            "sample at iteration {} labels {} blocks, grid has {}",
            s.iter,
            s.labels.len(),
            grid.n_blocks()
        )));
    }
    Ok((manifest, kept, grid, samples))
}

#[derive(Serialize)]
struct PredictionRow {
    s_h: f64,
    s_v: f64,
    mean: f64,
    q05: f64,
    q95: f64,
    modal_label: usize,
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let (_, _, grid, samples) = load_run(&args.run, args.data.as_deref())?;
    let (locs, covs) = read_points_csv(File::open(&args.points)?)?;
    let rows = locs
        .iter()
        .zip(covs)
        .map(|(&location, covariate)| {
            let p = predict_mean(&samples, &grid, &PredictionRequest { location, covariate })?;
            Ok(PredictionRow {
                s_h: location.s_h,
                s_v: location.s_v,
                mean: p.mean,
                q05: p.q05,
                q95: p.q95,
                modal_label: p.modal_label,
            })
        })
        .collect::<std::result::Result<Vec<_>, Error>>()?;
    write_csv_rows(create(&args.out)?, &rows)?;
    write_command_manifest(&sibling(&args.out, "manifest.json"), "predict", args)
}

#[derive(Serialize)]
struct EvaluationRow {
    sample: usize,
    iter: u64,
    k: usize,
    e1: Option<f64>,
    e2: Option<f64>,
    e3: Option<f64>,
}

#[derive(Serialize)]
struct EvaluationSummary {
    n: usize,
    samples: usize,
    waic: spatrpm::metrics::Waic,
    consensus_index: usize,
    consensus_k: usize,
    consensus_thetas: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crps_mean: Option<f64>,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (manifest, dataset, grid, samples) = load_run(&args.run, args.data.as_deref())?;
    let n = dataset.len();
    let truth = UShapeTruth::default();
    let overlap = match args.reference {
        Some(Reference::Ushape) => Some(DomainOverlap::new(&grid, &truth, args.lattice)?),
        None => None,
    };
    if let Some(t) = truth.thetas.first().filter(|_| overlap.is_some()) {
        if samples[0].thetas[0].len() != t.len() {
            return Err(CliError::Usage("U-shape reference needs two covariates".into()));
        }
    }
    let pred = match &args.test {
        Some(path) => {
            let test = Dataset::read_csv(path)?;
            let covs: Vec<Vec<f64>> = (0..test.len()).map(|i| test.x(i).to_vec()).collect();
            let pred = prediction_matrix(&samples, &grid, test.locations(), &covs)?;
            Some((pred, test.responses().to_vec()))
        }
        None => None,
    };
    let e3 = match &pred {
        Some((p, mu)) => Some(prediction_error_e3(p, mu, args.alpha0, args.alpha_b, n)?),
        None => None,
    };
    let rows: Vec<EvaluationRow> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (e1, e2) = match &overlap {
                Some(ov) => {
                    let (a, b) = normalized_errors(s, ov, &truth.thetas, args.alpha0, args.alpha_b, n);
                    (Some(a), Some(b))
                }
                None => (None, None),
            };
            EvaluationRow {
                sample: i,
                iter: s.iter,
                k: s.k,
                e1,
                e2,
                e3: e3.as_ref().map(|v| v[i]),
            }
        })
        .collect();
    write_csv_rows(create(&args.out)?, &rows)?;

    let consensus = consensus_estimate(&samples, &dataset, &grid, &manifest.resolved.model)?;
    let summary = EvaluationSummary {
        n,
        samples: samples.len(),
        waic: waic(&samples, &dataset, &grid, &manifest.resolved.model)?,
        consensus_index: consensus.index,
        consensus_k: consensus.k,
        consensus_thetas: consensus.thetas,
        mae: pred.as_ref().map(|(p, mu)| mae(p, mu)).transpose()?,
        crps_mean: pred.as_ref().map(|(p, mu)| crps_mean(p, mu)).transpose()?,
    };
    write_json(sibling(&args.out, "summary.json"), &summary)?;
    write_command_manifest(&sibling(&args.out, "manifest.json"), "evaluate", args)
}

#[derive(Serialize)]
struct TruthRow {
    region: usize,
    mean: f64,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let sim = generate_ushape_data(args.n, args.seed)?;
    sim.dataset.write_csv(create(&args.out)?)?;
    if let Some(path) = &args.truth {
        let rows: Vec<TruthRow> = sim
            .regions
            .iter()
            .zip(&sim.means)
            .map(|(&region, &mean)| TruthRow { region, mean })
            .collect();
        write_csv_rows(create(path)?, &rows)?;
    }
    if let Some(path) = &args.test_out {
        generate_ushape_test(args.test_size, args.seed)?.dataset.write_csv(create(path)?)?;
    }
    write_command_manifest(&sibling(&args.out, "manifest.json"), "simulate", args)
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let mut config: SweepConfig = match &args.config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?).map_err(Error::from)?,
        None => SweepConfig::default(),
    };
    if let Some(g) = &args.n_grid {
        config.n_grid = g.clone();
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    if let Some(n) = args.iters {
        config.sampler.n_iters = n;
    }
    if let Some(b) = args.burn_in {
        config.sampler.burn_in = b;
    }
    let result = run_asymptotic_sweep(&config)?;
    fs::create_dir_all(&args.out)?;
    write_csv_rows(create(&args.out.join("sweep.csv"))?, &result.rows)?;
    write_json(args.out.join("summary.json"), &result.summaries)?;
    write_csv_rows(create(&args.out.join("medians.csv"))?, &result.pooled())?;
    write_json(
        args.out.join("manifest.json"),
        &serde_json::json!({ "version": env!("CARGO_PKG_VERSION"), "command": "sweep", "config": config }),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct WaicRow {
    c_b: f64,
    c_p: f64,
    resolution: usize,
    log_lambda: f64,
    waic: Option<f64>,
    lppd: Option<f64>,
    p_waic: Option<f64>,
}

pub fn waic_select(args: &WaicArgs) -> Result<()> {
    let config = load_config(args.config.as_deref())?;
    let data_path = args
        .data
        .clone()
        .or_else(|| config.io.data.clone())
        .ok_or_else(|| CliError::Usage("no data: pass --data or set io.data".into()))?;
    let dataset = Dataset::read_csv(&data_path)?;
    let resolved = config.resolve(&dataset)?;
    let spatrpm::config::HyperSpec::Rate(constants) = resolved.hyper else {
        return Err(CliError::Usage("waic-select needs rate-based hyperparameters".into()));
    };
    let search = waic_grid_search(
        &dataset,
        &args.c_b,
        &args.c_p,
        constants.alpha_b,
        constants.alpha_p,
        &resolved.model,
        &resolved.sampler,
    )?;
    let rows: Vec<WaicRow> = search
        .cells
        .iter()
        .map(|c| WaicRow {
            c_b: c.c_b,
            c_p: c.c_p,
            resolution: c.resolution,
            log_lambda: c.log_lambda,
            waic: c.waic.map(|w| w.waic),
            lppd: c.waic.map(|w| w.lppd),
            p_waic: c.waic.map(|w| w.p_waic),
        })
        .collect();
    fs::create_dir_all(&args.out)?;
    write_csv_rows(create(&args.out.join("waic.csv"))?, &rows)?;
    let best = &search.cells[search.best];
    write_json(
        args.out.join("manifest.json"),
        &serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": "waic-select",
            "args": args,
            "config": config,
            "data": data_path,
        }),
    )?;
    println!(
        "{}",
        serde_json::json!({ "c_b": best.c_b, "c_p": best.c_p, "resolution": best.resolution, "waic": best.waic.map(|w| w.waic) })
    );
    Ok(())
}
