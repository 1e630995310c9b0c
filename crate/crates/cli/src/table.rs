//! CSV ingestion and emission.

use std::fs::File;
use std::path::Path;

use binuq_core::{validate_dataset, Dataset};
use ndarray::{Array1, Array2};

use crate::error::{CliError, Context, Result};

/// A CSV file held as text, header first.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let file = File::open(path).map_err(CliError::io(path))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = reader
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
        Ok(Table { headers, rows })
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.position(name).ok_or_else(|| CliError::MissingColumn(name.to_string()))
    }

    /// Parses a column as numbers. Rows are reported 1-based, not counting
    /// the header.
    pub fn numeric(&self, col: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let cell = rec.get(col).unwrap_or("");
                cell.parse::<f64>().map_err(|_| CliError::Parse {
                    row: i + 1,
                    column: self.headers[col].clone(),
                    value: cell.to_string(),
                })
            })
            .collect()
    }

    pub fn text(&self, col: usize) -> Vec<String> {
        self.rows.iter().map(|r| r.get(col).unwrap_or("").to_string()).collect()
    }

    fn matrix(&self, cols: &[usize]) -> Result<Array2<f64>> {
        let mut m = Array2::zeros((self.rows.len(), cols.len()));
        for (j, &c) in cols.iter().enumerate() {
            for (i, v) in self.numeric(c)?.into_iter().enumerate() {
                m[[i, j]] = v;
            }
        }
        Ok(m)
    }
}

/// Rows to predict: features in training order plus optional ids and
/// coordinates carried through to the output.
#[derive(Debug, Clone)]
pub struct Frame {
    pub ids: Vec<String>,
    pub features: Array2<f64>,
    pub coords: Option<Array2<f64>>,
}

/// Loads a training table. Every column other than the target, the
/// coordinates and the id column is a feature.
pub fn load_csv(path: &Path, target: &str, coords: Option<&[String]>, id_column: Option<&str>) -> Result<Dataset> {
    let table = Table::read(path)?;
    let target_col = table.require(target)?;
    let coord_cols = coord_columns(&table, coords)?;
    let id_col = id_column.map(|c| table.require(c)).transpose()?;
    let feature_cols: Vec<usize> = (0..table.headers.len())
        .filter(|c| *c != target_col && Some(*c) != id_col && !coord_cols.as_ref().is_some_and(|cc| cc.contains(c)))
        .collect();

    let features = table.matrix(&feature_cols)?;
    let y = Array1::from(table.numeric(target_col)?);
    let xy = coord_cols.map(|cc| table.matrix(&cc)).transpose()?;
    let names = feature_cols.iter().map(|&c| table.headers[c].clone()).collect();
    validate_dataset(features, y, xy)
        .and_then(|d| d.with_names(names, target))
        .context(format!("{}", path.display()))
}

/// Loads rows for prediction. The columns left after removing the target
/// (if present), coordinates and id must be exactly `feature_names`.
pub fn load_frame(
    path: &Path,
    feature_names: &[String],
    target: &str,
    coords: Option<&[String]>,
    id_column: Option<&str>,
) -> Result<Frame> {
    let table = Table::read(path)?;
    let id_col = id_column.map(|c| table.require(c)).transpose()?;
    // coordinates are optional at prediction time
    let coord_cols = match coords {
        Some(names) if names.iter().all(|n| table.position(n).is_some()) => coord_columns(&table, coords)?,
        _ => None,
    };
    let skipped = |c: &usize| {
        Some(*c) == table.position(target)
            || Some(*c) == id_col
            || coord_cols.as_ref().is_some_and(|cc| cc.contains(c))
            || coords.is_some_and(|names| names.contains(&table.headers[*c]))
    };
    let found: Vec<String> = (0..table.headers.len())
        .filter(|c| !skipped(c))
        .map(|c| table.headers[c].clone())
        .collect();
    if found != feature_names {
        return Err(CliError::SchemaMismatch {
            expected: feature_names.to_vec(),
            found,
        });
    }
    let feature_cols: Vec<usize> = feature_names.iter().map(|n| table.require(n)).collect::<Result<_>>()?;
    let features = table.matrix(&feature_cols)?;
    if let Some((i, j)) = features.indexed_iter().find(|(_, v)| !v.is_finite()).map(|(ix, _)| ix) {
        return Err(CliError::Format(format!(
            "non-finite value at row {}, column '{}'",
            i + 1,
            feature_names[j]
        )));
    }
    let ids = match id_col {
        Some(c) => table.text(c),
        None => (0..table.rows.len()).map(|i| i.to_string()).collect(),
    };
    Ok(Frame {
        ids,
        features,
        coords: coord_cols.map(|cc| table.matrix(&cc)).transpose()?,
    })
}

fn coord_columns(table: &Table, coords: Option<&[String]>) -> Result<Option<Vec<usize>>> {
    let Some(names) = coords else { return Ok(None) };
    if names.len() != 2 {
        return Err(CliError::Config(format!("expected two coordinate columns, got {names:?}")));
    }
    names.iter().map(|n| table.require(n)).collect::<Result<Vec<_>>>().map(Some)
}

/// Reads an external probability file (`id, p1..pK`) for `ids.len()` rows
/// and `k` classes. Rows must sum to one within 1e-6.
pub fn read_external_proba(path: &Path, ids: &[String], k: usize) -> Result<Array2<f64>> {
    let table = Table::read(path)?;
    let found = table.headers.len().saturating_sub(1);
    if found != k {
        return Err(CliError::ShapeMismatch {
            what: "probability columns",
            expected: k,
            found,
        });
    }
    if table.rows.len() != ids.len() {
        return Err(CliError::ShapeMismatch {
            what: "rows",
            expected: ids.len(),
            found: table.rows.len(),
        });
    }
    for (i, (got, want)) in table.text(0).iter().zip(ids).enumerate() {
        if got != want {
            return Err(CliError::Format(format!(
                "{}: row {} has id '{got}', expected '{want}'",
                path.display(),
                i + 1
            )));
        }
    }
    let p = table.matrix(&(1..=k).collect::<Vec<_>>())?;
    for (i, row) in p.rows().into_iter().enumerate() {
        let sum = row.sum();
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(CliError::RowSumViolation { row: i + 1, sum });
        }
    }
    Ok(p)
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let file = File::create(path).map_err(CliError::io(path))?;
    Ok(csv::Writer::from_writer(file))
}

pub(crate) fn write_record<I, S>(w: &mut csv::Writer<File>, path: &Path, record: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(record).map_err(|e| csv_error(path, e))
}

pub(crate) fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(CliError::io(path))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Format(format!("{}: {other:?}", path.display())),
    }
}
