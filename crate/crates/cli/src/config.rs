//! Run configuration: a TOML or JSON file, with command-line flags layered
//! on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use binuq_core::classifiers::{HyperValue, Hyperparams};
use binuq_core::validation::DEFAULT_CALIBRATION_FRACTION;
use binuq_core::{BinStrategy, BinningConfig, ClassifierKind, ClassifierSpec, EnsembleSpec, HyperparameterGrid, MethodSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const METHOD_NAMES: [&str; 4] = ["buee", "conformal", "qr_postprocess", "quantile_regression"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub coords: Option<Vec<String>>,
    pub id_column: Option<String>,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
    /// Ensemble members; the default is uniform and quantile binning at
    /// 5, 10, 15 and 20 bins.
    pub ensemble: Option<Vec<MemberConfig>>,
    #[serde(default)]
    pub cv: CvConfig,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    /// `random_forest` (default) or `softmax`; BUEE only.
    pub classifier: Option<String>,
    /// Replaces the method's default search grid.
    pub grid: Option<BTreeMap<String, Vec<HyperValue>>>,
    /// Fixed settings shared by every grid point.
    #[serde(default)]
    pub base: Hyperparams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    pub strategy: BinStrategy,
    pub k: usize,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub outer_k: usize,
    pub inner_n: usize,
    pub calibration_fraction: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            outer_k: 5,
            inner_n: 5,
            calibration_fraction: DEFAULT_CALIBRATION_FRACTION,
        }
    }
}

/// Values given on the command line; each one that is set replaces the
/// file's value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub coords: Option<Vec<String>>,
    pub id_column: Option<String>,
    pub methods: Option<Vec<String>>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub outer_k: Option<usize>,
    pub inner_n: Option<usize>,
}

impl RunConfig {
    /// Reads a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("{}: {e}", path.display()));
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| bad(&e)),
            Some("json") => serde_json::from_str(&text).map_err(|e| bad(&e)),
            _ => Err(CliError::Config(format!(
                "{}: config files must end in .toml or .json",
                path.display()
            ))),
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = o.$field {
                    self.$field = Some(v);
                }
            };
        }
        set!(data);
        set!(target);
        set!(coords);
        set!(id_column);
        set!(output);
        if let Some(names) = o.methods {
            // keep per-method settings from the file when a name repeats
            self.methods = names
                .into_iter()
                .map(|name| {
                    self.methods
                        .iter()
                        .find(|m| m.name == name)
                        .cloned()
                        .unwrap_or_else(|| MethodConfig::named(&name))
                })
                .collect();
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(k) = o.outer_k {
            self.cv.outer_k = k;
        }
        if let Some(n) = o.inner_n {
            self.cv.inner_n = n;
        }
    }

    pub fn data(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| CliError::Config("no dataset path given".into()))
    }

    pub fn target(&self) -> Result<&str> {
        self.target.as_deref().ok_or_else(|| CliError::Config("no target column given".into()))
    }

    pub fn output(&self) -> Result<&Path> {
        self.output.as_deref().ok_or_else(|| CliError::Config("no output location given".into()))
    }

    pub fn coords(&self) -> Result<Option<&[String]>> {
        match &self.coords {
            Some(c) if c.len() != 2 => Err(CliError::Config(format!("expected two coordinate columns, got {c:?}"))),
            c => Ok(c.as_deref()),
        }
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let Some(members) = &self.ensemble else {
            return Ok(EnsembleSpec::default());
        };
        let configs = members
            .iter()
            .map(|m| BinningConfig::new(m.strategy, m.k))
            .collect::<binuq_core::Result<Vec<_>>>()
            .map_err(|e| CliError::Config(format!("ensemble: {e}")))?;
        let spec = if members.iter().all(|m| m.weight.is_none()) {
            EnsembleSpec::uniform(configs)
        } else {
            let weights = members.iter().map(|m| m.weight.unwrap_or(0.0)).collect();
            EnsembleSpec::new(configs, weights)
        };
        spec.map_err(|e| CliError::Config(format!("ensemble: {e}")))
    }

    /// Resolves and validates every configured method. Runs before any
    /// data is touched, so a bad name or grid costs nothing.
    pub fn method_specs(&self) -> Result<Vec<(String, MethodSpec)>> {
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods configured".into()));
        }
        let ensemble = self.ensemble_spec()?;
        self.methods
            .iter()
            .map(|m| Ok((m.label()?, m.to_spec(ensemble.clone())?)))
            .collect()
    }
}

impl MethodConfig {
    pub fn named(name: &str) -> MethodConfig {
        MethodConfig {
            name: name.to_string(),
            classifier: None,
            grid: None,
            base: Hyperparams::new(),
        }
    }

    fn classifier_kind(&self) -> Result<ClassifierKind> {
        parse_classifier(self.classifier.as_deref().unwrap_or("random_forest"))
    }

    /// `buee+random_forest`, `conformal+random_forest`, ... as used in the
    /// summary table.
    pub fn label(&self) -> Result<String> {
        Ok(match self.name.as_str() {
            "buee" => format!("buee+{}", classifier_name(self.classifier_kind()?)),
            "quantile_regression" => "quantile_regression".into(),
            other => format!("{other}+random_forest"),
        })
    }

    pub fn to_spec(&self, ensemble: EnsembleSpec) -> Result<MethodSpec> {
        let kind = self.classifier_kind()?;
        if self.classifier.is_some() && self.name != "buee" {
            return Err(CliError::Config(format!(
                "method '{}' does not take a classifier",
                self.name
            )));
        }
        let custom = self
            .grid
            .clone()
            .map(HyperparameterGrid::new)
            .transpose()
            .map_err(|e| CliError::Config(format!("method '{}': {e}", self.name)))?;
        let spec = match self.name.as_str() {
            "buee" => {
                let default = match kind {
                    ClassifierKind::RandomForest => HyperparameterGrid::random_forest(),
                    _ => HyperparameterGrid::single(Hyperparams::new()),
                };
                MethodSpec::buee(kind, custom.unwrap_or(default)).with_ensemble(ensemble)
            }
            "conformal" => MethodSpec::conformal(custom.unwrap_or_else(HyperparameterGrid::random_forest)),
            "qr_postprocess" => MethodSpec::qr_postprocess(custom.unwrap_or_else(HyperparameterGrid::qr_postprocess)),
            "quantile_regression" => {
                MethodSpec::quantile_regression(custom.unwrap_or_else(HyperparameterGrid::quantile_regression))
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown method '{other}' (expected one of {})",
                    METHOD_NAMES.join(", ")
                )))
            }
        }
        .with_base(self.base.clone());
        spec.validate()
            .map_err(|e| CliError::Config(format!("method '{}': {e}", self.name)))?;
        Ok(spec)
    }

    /// The classifier a standalone `fit` would train for this method.
    pub fn classifier_spec(&self) -> Result<ClassifierSpec> {
        ClassifierSpec::new(self.classifier_kind()?, self.base.clone())
            .map_err(|e| CliError::Config(format!("classifier: {e}")))
    }
}

pub fn parse_classifier(name: &str) -> Result<ClassifierKind> {
    match name {
        "random_forest" => Ok(ClassifierKind::RandomForest),
        "softmax" => Ok(ClassifierKind::Softmax),
        "external" => Ok(ClassifierKind::External),
        other => Err(CliError::Config(format!(
            "unknown classifier '{other}' (expected random_forest, softmax or external)"
        ))),
    }
}

pub fn classifier_name(kind: ClassifierKind) -> &'static str {
    match kind {
        ClassifierKind::RandomForest => "random_forest",
        ClassifierKind::Softmax => "softmax",
        ClassifierKind::External => "external",
    }
}
