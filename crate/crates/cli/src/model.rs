//! Versioned model container and batch prediction.

use std::path::Path;

use binuq_core::baselines::standard_levels;
use binuq_core::classifiers::FittedClassifier;
use binuq_core::{assign_bins, fit_ensemble, ClassifierSpec, Dataset, EnsembleModel, EnsembleSpec, ProbabilisticPrediction, SeededRng};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};
use crate::table::{self, Frame};

pub const MODEL_FORMAT: &str = "binuq-model";
pub const MODEL_VERSION: u32 = 1;

/// A fitted ensemble with everything needed to check and reproduce
/// predictions: column names, the classifier settings and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelContainer {
    pub format: String,
    pub version: u32,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub coord_names: Option<Vec<String>>,
    pub classifier: ClassifierSpec,
    pub seed: u64,
    pub ensemble: EnsembleModel,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

impl ModelContainer {
    pub fn fit(
        data: &Dataset,
        coord_names: Option<&[String]>,
        classifier: &ClassifierSpec,
        ensemble: &EnsembleSpec,
        seed: u64,
    ) -> Result<ModelContainer> {
        let model = fit_ensemble(data, ensemble, classifier, &SeededRng::new(seed)).context("fitting ensemble")?;
        Ok(ModelContainer {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_names: data.feature_names().to_vec(),
            target_name: data.target_name().to_string(),
            coord_names: coord_names.map(<[String]>::to_vec),
            classifier: classifier.clone(),
            seed,
            ensemble: model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self).map_err(|e| CliError::Format(e.to_string()))?;
        write_file(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<ModelContainer> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let bad = |e: serde_json::Error| CliError::Format(format!("{}: {e}", path.display()));
        let header: Header = serde_json::from_str(&text).map_err(bad)?;
        if header.format != MODEL_FORMAT {
            return Err(CliError::Format(format!(
                "{}: not a model file (format '{}')",
                path.display(),
                header.format
            )));
        }
        if header.version != MODEL_VERSION {
            return Err(CliError::VersionMismatch {
                what: "model",
                found: header.version.to_string(),
                supported: MODEL_VERSION.to_string(),
            });
        }
        serde_json::from_str(&text).map_err(bad)
    }

    /// Bin labels of the training target for each member, for training an
    /// outside classifier.
    pub fn member_labels(&self, data: &Dataset) -> Vec<Vec<usize>> {
        let y = data.target().to_vec();
        self.ensemble.members().iter().map(|m| assign_bins(&y, m.bins())).collect()
    }

    /// Predicts every row of `frame`. External-classifier models need one
    /// probability file per member in `external_dir`.
    pub fn predict(&self, frame: &Frame, external_dir: Option<&Path>) -> Result<Vec<ProbabilisticPrediction>> {
        let mut model = self.ensemble.clone();
        let external = model.members().iter().any(|m| matches!(m.classifier(), FittedClassifier::External(_)));
        if external {
            let dir = external_dir.ok_or_else(|| {
                CliError::Config("model uses an external classifier; pass a probability directory".into())
            })?;
            for (b, member) in model.members_mut().iter_mut().enumerate() {
                let k = member.classifier().n_classes();
                let p = table::read_external_proba(&external_proba_path(dir, b), &frame.ids, k)?;
                if let Some(ext) = member.classifier_mut().as_external_mut() {
                    ext.attach(p).context(format!("member {b}"))?;
                }
            }
        }
        model.predict_batch(frame.features.view()).context("predicting")
    }
}

pub fn external_proba_path(dir: &Path, member: usize) -> std::path::PathBuf {
    dir.join(format!("member_{member}.csv"))
}

pub fn labels_path(dir: &Path, member: usize) -> std::path::PathBuf {
    dir.join(format!("labels_member_{member}.csv"))
}

/// Writes `id, [coords], mean, std, q0.05 .. q0.95`.
pub fn write_predictions(
    path: &Path,
    frame: &Frame,
    coord_names: Option<&[String]>,
    predictions: &[ProbabilisticPrediction],
) -> Result<()> {
    let levels = standard_levels();
    let coords = frame.coords.as_ref().zip(coord_names);
    let mut header = vec!["id".to_string()];
    if let Some((_, names)) = coords {
        header.extend(names.iter().cloned());
    }
    header.extend(["mean".to_string(), "std".to_string()]);
    header.extend(levels.iter().map(|l| format!("q{l:.2}")));

    let mut w = table::writer(path)?;
    table::write_record(&mut w, path, &header)?;
    for (i, p) in predictions.iter().enumerate() {
        let mut row = vec![frame.ids[i].clone()];
        if let Some((xy, _)) = coords {
            row.extend(xy.row(i).iter().map(f64::to_string));
        }
        row.push(p.mean().to_string());
        row.push(p.std().to_string());
        row.extend(levels.iter().map(|&l| p.quantile(l).to_string()));
        table::write_record(&mut w, path, &row)?;
    }
    table::finish(w, path)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, bytes).map_err(CliError::io(path))
}
