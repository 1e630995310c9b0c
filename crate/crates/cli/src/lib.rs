//! Command-line front end for `binuq-core`.
//!
//! Commands: `synth` writes synthetic data, `fit` and `predict` train and
//! apply a binned ensemble, `evaluate` runs nested cross-validation for
//! several methods, and `map` kriges point predictions into rasters.

use std::path::{Path, PathBuf};

use binuq_core::synth::{self, NoiseModel, SynthSpec};
use binuq_core::{ClassifierSpec, Dataset};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod config;
pub mod error;
pub mod model;
pub mod raster;
pub mod report;
pub mod table;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result};
pub use model::ModelContainer;
pub use report::ReportFile;
pub use table::{load_csv, read_external_proba};

use binuq_core::geostats::{Variogram, VariogramFamily};
use error::Context;

#[derive(Debug, Parser)]
#[command(name = "binuq", version, about = "Predictive uncertainty through target binning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic regression dataset as CSV.
    Synth(SynthArgs),
    /// Fit a binned ensemble and save it.
    Fit(FitArgs),
    /// Predict distributions for new rows with a saved model.
    Predict(PredictArgs),
    /// Nested cross-validation of one or more methods.
    Evaluate(EvaluateArgs),
    /// Krige point predictions into ASCII grids and PNG images.
    Map(MapArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseKind {
    Homoscedastic,
    Heteroscedastic,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t = NoiseKind::Heteroscedastic)]
    pub noise: NoiseKind,
    /// Noise standard deviation for homoscedastic noise.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Add x and y coordinate columns (meters).
    #[arg(long)]
    pub spatial: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Settings shared by `fit` and `evaluate`; each overrides the config file.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML or JSON run configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Coordinate columns, e.g. `x,y`.
    #[arg(long, value_delimiter = ',')]
    pub coords: Option<Vec<String>>,
    #[arg(long)]
    pub id_column: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// `random_forest`, `softmax` or `external`; defaults to the first
    /// configured BUEE method's classifier.
    #[arg(long)]
    pub classifier: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub id_column: Option<String>,
    /// Directory with `member_<b>.csv` probability files for external models.
    #[arg(long)]
    pub external_proba: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated method names; replaces the configured list.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub outer_k: Option<usize>,
    #[arg(long)]
    pub inner_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Spherical,
    Exponential,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Predictions CSV with coordinate columns.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "x,y")]
    pub coords: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "mean,std")]
    pub columns: Vec<String>,
    #[arg(long)]
    pub cell_size: Option<f64>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Spherical)]
    pub family: FamilyArg,
    /// Fixed variogram instead of a per-column fit; needs all three of
    /// nugget, partial sill and range.
    #[arg(long, requires_all = ["partial_sill", "range"])]
    pub nugget: Option<f64>,
    #[arg(long, requires_all = ["nugget", "range"])]
    pub partial_sill: Option<f64>,
    #[arg(long, requires_all = ["nugget", "partial_sill"])]
    pub range: Option<f64>,
    #[arg(long, default_value_t = 15)]
    pub n_lags: usize,
    #[arg(long, default_value_t = binuq_core::geostats::DEFAULT_MAX_NEIGHBORS)]
    pub max_neighbors: usize,
    #[arg(long, short)]
    pub output: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a).map(drop),
        Command::Fit(a) => cmd_fit(&a).map(drop),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a).map(drop),
        Command::Map(a) => cmd_map(&a).map(drop),
    }
}

fn run_config(run: &RunArgs, methods: Option<Vec<String>>, outer_k: Option<usize>, inner_n: Option<usize>) -> Result<RunConfig> {
    let mut cfg = match &run.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(Overrides {
        data: run.data.clone(),
        target: run.target.clone(),
        coords: run.coords.clone(),
        id_column: run.id_column.clone(),
        methods,
        output: run.output.clone(),
        seed: run.seed,
        outer_k,
        inner_n,
    });
    Ok(cfg)
}

fn load_training(cfg: &RunConfig) -> Result<Dataset> {
    load_csv(cfg.data()?, cfg.target()?, cfg.coords()?, cfg.id_column.as_deref())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Dataset> {
    let spec = SynthSpec {
        n: args.n,
        d: args.d,
        noise: match args.noise {
            NoiseKind::Homoscedastic => NoiseModel::Homoscedastic { sigma: args.sigma },
            NoiseKind::Heteroscedastic => NoiseModel::Heteroscedastic,
        },
        spatial: args.spatial,
        seed: args.seed,
    };
    let data = synth::generate(&spec).context("synthetic data")?;
    write_synth(&data, &args.output)?;
    Ok(data)
}

/// Columns: `[x, y,] x1..xd, target`.
fn write_synth(data: &Dataset, path: &Path) -> Result<()> {
    let mut header: Vec<String> = Vec::new();
    if data.coords().is_some() {
        header.extend(["x".to_string(), "y".to_string()]);
    }
    header.extend(data.feature_names().iter().cloned());
    header.push("target".into());
    let mut w = table::writer(path)?;
    table::write_record(&mut w, path, &header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        if let Some(c) = data.coords() {
            row.extend(c.row(i).iter().map(f64::to_string));
        }
        row.extend(data.row(i).iter().map(f64::to_string));
        row.push(data.target()[i].to_string());
        table::write_record(&mut w, path, &row)?;
    }
    table::finish(w, path)
}

pub fn cmd_fit(args: &FitArgs) -> Result<ModelContainer> {
    let cfg = run_config(&args.run, None, None, None)?;
    let ensemble = cfg.ensemble_spec()?;
    let configured = cfg.methods.iter().find(|m| m.name == "buee");
    let classifier = match (&args.classifier, configured) {
        (Some(name), m) => {
            let base = m.map(|m| m.base.clone()).unwrap_or_default();
            ClassifierSpec::new(config::parse_classifier(name)?, base)
                .map_err(|e| CliError::Config(format!("classifier: {e}")))?
        }
        (None, Some(m)) => m.classifier_spec()?,
        (None, None) => ClassifierSpec::random_forest(),
    };
    let output = cfg.output()?.to_path_buf();
    let data = load_training(&cfg)?;
    let model = ModelContainer::fit(&data, cfg.coords()?, &classifier, &ensemble, cfg.seed)?;
    let model_path = if output.extension().is_some_and(|e| e == "json") {
        output
    } else {
        output.join("model.json")
    };
    model.save(&model_path)?;

    if classifier.kind == binuq_core::ClassifierKind::External {
        let dir = model_path.parent().unwrap_or(Path::new("."));
        let ids = match &cfg.id_column {
            Some(c) => {
                let t = table::Table::read(cfg.data()?)?;
                t.text(t.require(c)?)
            }
            None => (0..data.len()).map(|i| i.to_string()).collect(),
        };
        for (b, labels) in model.member_labels(&data).iter().enumerate() {
            let path = model::labels_path(dir, b);
            let mut w = table::writer(&path)?;
            table::write_record(&mut w, &path, ["id", "label"])?;
            for (id, l) in ids.iter().zip(labels) {
                table::write_record(&mut w, &path, [id.clone(), l.to_string()])?;
            }
            table::finish(w, &path)?;
        }
    }
    Ok(model)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = ModelContainer::load(&args.model)?;
    let frame = table::load_frame(
        &args.data,
        &model.feature_names,
        &model.target_name,
        model.coord_names.as_deref(),
        args.id_column.as_deref(),
    )?;
    let predictions = model.predict(&frame, args.external_proba.as_deref())?;
    model::write_predictions(&args.output, &frame, model.coord_names.as_deref(), &predictions)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<ReportFile> {
    let cfg = run_config(&args.run, args.methods.clone(), args.outer_k, args.inner_n)?;
    // validate everything before the first fit
    let methods = cfg.method_specs()?;
    let output = cfg.output()?.to_path_buf();
    let data = load_training(&cfg)?;
    let report = report::evaluate(&data, &methods, &cfg)?;
    report::write_outputs(&report, &output)?;
    for m in &report.methods {
        println!("{:<32} mean CRPS {:.6}", m.label, m.report.mean_crps);
    }
    Ok(report)
}

pub fn cmd_map(args: &MapArgs) -> Result<Vec<raster::MapLayer>> {
    let family = match args.family {
        FamilyArg::Spherical => VariogramFamily::Spherical,
        FamilyArg::Exponential => VariogramFamily::Exponential,
        FamilyArg::Gaussian => VariogramFamily::Gaussian,
    };
    let variogram = match (args.nugget, args.partial_sill, args.range) {
        (Some(n), Some(s), Some(r)) => {
            Some(Variogram::new(family, n, s, r).map_err(|e| CliError::Config(format!("variogram: {e}")))?)
        }
        _ => None,
    };
    let options = raster::MapOptions {
        coords: args.coords.clone(),
        columns: args.columns.clone(),
        cell_size: args.cell_size,
        family,
        variogram,
        n_lags: args.n_lags,
        max_neighbors: args.max_neighbors,
    };
    let table = table::Table::read(&args.predictions)?;
    let layers = raster::krige_columns(&table, &options)?;
    raster::write_layers(&layers, &args.output)?;
    for layer in &layers {
        if layer.singular_cells > 0 {
            eprintln!("{}: {} cells left as nodata (singular system)", layer.column, layer.singular_cells);
        }
    }
    Ok(layers)
}
