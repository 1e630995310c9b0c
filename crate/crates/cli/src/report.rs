//! Cross-validation reports: `report.json` and `summary.csv`.

use std::path::Path;

use binuq_core::{nested_cv, CVPlan, CVReport, Dataset, MethodSpec};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Context, Result};
use crate::model::write_file;
use crate::table;

pub const REPORT_FORMAT: &str = "binuq-report";
/// `major.minor`; readers refuse files with a newer major version.
pub const REPORT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub label: String,
    pub report: CVReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: String,
    pub target: String,
    pub seed: u64,
    pub methods: Vec<MethodReport>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: String,
}

fn major(version: &str) -> Option<u64> {
    version.split('.').next()?.parse().ok()
}

impl ReportFile {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ReportFile> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let bad = |e: serde_json::Error| CliError::Format(format!("{}: {e}", path.display()));
        let header: Header = serde_json::from_str(&text).map_err(bad)?;
        if header.format != REPORT_FORMAT {
            return Err(CliError::Format(format!("{}: not a report file", path.display())));
        }
        match major(&header.version) {
            Some(m) if m <= major(REPORT_VERSION).expect("valid version constant") => {}
            _ => {
                return Err(CliError::VersionMismatch {
                    what: "report",
                    found: header.version,
                    supported: REPORT_VERSION.into(),
                })
            }
        }
        serde_json::from_str(&text).map_err(bad)
    }
}

/// Runs nested cross-validation for each method in order.
pub fn evaluate(data: &Dataset, methods: &[(String, MethodSpec)], config: &RunConfig) -> Result<ReportFile> {
    let mut reports = Vec::with_capacity(methods.len());
    for (label, spec) in methods {
        let plan = CVPlan {
            calibration_fraction: config.cv.calibration_fraction,
            ..CVPlan::new(config.cv.outer_k, config.cv.inner_n, config.seed)
        }
        .for_method(spec);
        let report = nested_cv(data, spec, &plan).context(format!("method '{label}'"))?;
        reports.push(MethodReport {
            label: label.clone(),
            report,
        });
    }
    Ok(ReportFile {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION.into(),
        target: data.target_name().to_string(),
        seed: config.seed,
        methods: reports,
    })
}

/// Writes `report.json` and `summary.csv` (one row per method) into `dir`.
pub fn write_outputs(report: &ReportFile, dir: &Path) -> Result<()> {
    write_file(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    let path = dir.join("summary.csv");
    let mut w = table::writer(&path)?;
    table::write_record(&mut w, &path, ["method", "crps_path", "n", "mean_crps"])?;
    for m in &report.methods {
        let path_name = match m.report.crps_path {
            binuq_core::metrics::CrpsPath::Discrete => "discrete",
            binuq_core::metrics::CrpsPath::Quantile => "quantile",
        };
        table::write_record(
            &mut w,
            &path,
            [
                m.label.clone(),
                path_name.to_string(),
                m.report.n.to_string(),
                m.report.mean_crps.to_string(),
            ],
        )?;
    }
    table::finish(w, &path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn major_version_parsing() {
        assert_eq!(major("1.0"), Some(1));
        assert_eq!(major("12.3"), Some(12));
        assert_eq!(major("x"), None);
    }
}
