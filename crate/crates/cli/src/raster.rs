//! Kriged maps: ESRI ASCII grids and grayscale PNG renderings.

use std::fmt::Write as _;
use std::path::Path;

use binuq_core::geostats::{
    default_max_dist, empirical_semivariogram, fit_variogram, GridSpec, OrdinaryKriging, RasterGrid, Variogram,
    VariogramFamily, DEFAULT_NODATA,
};
use image::GrayImage;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};
use crate::model::write_file;
use crate::table::Table;

/// Digits after the decimal point in ASCII grids.
pub const ASCII_DECIMALS: usize = 6;

pub fn format_ascii_grid(grid: &RasterGrid) -> String {
    let s = &grid.spec;
    let mut out = String::new();
    writeln!(out, "ncols {}", s.n_cols).unwrap();
    writeln!(out, "nrows {}", s.n_rows).unwrap();
    writeln!(out, "xllcorner {}", s.x_origin).unwrap();
    writeln!(out, "yllcorner {}", s.y_origin).unwrap();
    writeln!(out, "cellsize {}", s.cell_size).unwrap();
    writeln!(out, "NODATA_value {}", grid.nodata).unwrap();
    for row in grid.values.rows() {
        let cells: Vec<String> = row
            .iter()
            .map(|&v| {
                if v == grid.nodata {
                    grid.nodata.to_string()
                } else {
                    format!("{v:.ASCII_DECIMALS$}")
                }
            })
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_ascii_grid(path: &Path, grid: &RasterGrid) -> Result<()> {
    write_file(path, format_ascii_grid(grid).as_bytes())
}

pub fn parse_ascii_grid(text: &str) -> Result<RasterGrid> {
    let bad = |msg: String| CliError::Format(format!("ASCII grid: {msg}"));
    let mut lines = text.lines();
    let mut header = |key: &str| -> Result<f64> {
        let line = lines.next().ok_or_else(|| bad(format!("missing '{key}'")))?;
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some(k), Some(v)) if k.eq_ignore_ascii_case(key) => {
                v.parse().map_err(|_| bad(format!("bad value for '{key}': {v}")))
            }
            _ => Err(bad(format!("expected '{key}', found '{line}'"))),
        }
    };
    let n_cols = header("ncols")? as usize;
    let n_rows = header("nrows")? as usize;
    let x_origin = header("xllcorner")?;
    let y_origin = header("yllcorner")?;
    let cell_size = header("cellsize")?;
    let nodata = header("NODATA_value")?;
    let spec = GridSpec::new(x_origin, y_origin, cell_size, n_rows, n_cols).context("ASCII grid header")?;

    let values: Vec<f64> = lines
        .flat_map(str::split_whitespace)
        .map(|v| v.parse().map_err(|_| bad(format!("bad cell value '{v}'"))))
        .collect::<Result<_>>()?;
    if values.len() != n_rows * n_cols {
        return Err(bad(format!("expected {} cells, found {}", n_rows * n_cols, values.len())));
    }
    let values = Array2::from_shape_vec((n_rows, n_cols), values).expect("length checked");
    RasterGrid::new(spec, values, nodata).context("ASCII grid")
}

/// Value-to-gray mapping written next to every PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorScale {
    pub ramp: String,
    pub variable: String,
    /// Value drawn as `min_gray`.
    pub min_value: f64,
    /// Value drawn as `max_gray`.
    pub max_value: f64,
    pub min_gray: u8,
    pub max_gray: u8,
    pub nodata_value: f64,
    pub nodata_gray: u8,
}

impl ColorScale {
    pub fn gray(&self, v: f64) -> u8 {
        let span = self.max_value - self.min_value;
        if span <= 0.0 {
            return ((self.min_gray as u16 + self.max_gray as u16) / 2) as u8;
        }
        let t = ((v - self.min_value) / span).clamp(0.0, 1.0);
        let levels = (self.max_gray - self.min_gray) as f64;
        self.min_gray + (t * levels).round() as u8
    }
}

/// Linear grayscale: the data range maps onto 1..=255 and nodata is 0.
pub fn render_png(grid: &RasterGrid, variable: &str) -> (GrayImage, ColorScale) {
    let (lo, hi) = grid.value_range().unwrap_or((0.0, 0.0));
    let scale = ColorScale {
        ramp: "linear_grayscale".into(),
        variable: variable.into(),
        min_value: lo,
        max_value: hi,
        min_gray: 1,
        max_gray: 255,
        nodata_value: grid.nodata,
        nodata_gray: 0,
    };
    let (rows, cols) = grid.values.dim();
    let img = GrayImage::from_fn(cols as u32, rows as u32, |c, r| {
        let v = grid.values[[r as usize, c as usize]];
        image::Luma([if v == grid.nodata { scale.nodata_gray } else { scale.gray(v) }])
    });
    (img, scale)
}

pub fn write_png(png_path: &Path, scale_path: &Path, grid: &RasterGrid, variable: &str) -> Result<ColorScale> {
    let (img, scale) = render_png(grid, variable);
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| CliError::Format(format!("{}: {e}", png_path.display())))?;
    write_file(png_path, &bytes)?;
    let json = serde_json::to_string_pretty(&scale).map_err(|e| CliError::Format(e.to_string()))?;
    write_file(scale_path, json.as_bytes())?;
    Ok(scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapOptions {
    pub coords: Vec<String>,
    pub columns: Vec<String>,
    /// Defaults to 1/100 of the longer side of the sample bounding box.
    pub cell_size: Option<f64>,
    pub family: VariogramFamily,
    /// Used as given instead of fitting one per column.
    pub variogram: Option<Variogram>,
    pub n_lags: usize,
    pub max_neighbors: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            coords: vec!["x".into(), "y".into()],
            columns: vec!["mean".into(), "std".into()],
            cell_size: None,
            family: VariogramFamily::default(),
            variogram: None,
            n_lags: 15,
            max_neighbors: binuq_core::geostats::DEFAULT_MAX_NEIGHBORS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapLayer {
    pub column: String,
    /// `None` when the column is constant and no model was needed.
    pub variogram: Option<Variogram>,
    pub grid: RasterGrid,
    pub singular_cells: usize,
}

/// Kriges each requested column of a predictions table onto a common grid.
pub fn krige_columns(table: &Table, options: &MapOptions) -> Result<Vec<MapLayer>> {
    let coord_cols: Vec<usize> = options
        .coords
        .iter()
        .map(|c| table.position(c))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::MissingCoordinates(options.coords.clone()))?;
    if coord_cols.len() != 2 {
        return Err(CliError::Config(format!("expected two coordinate columns, got {:?}", options.coords)));
    }
    let mut coords = Array2::zeros((table.rows.len(), 2));
    for (j, &c) in coord_cols.iter().enumerate() {
        coords.column_mut(j).assign(&Array1::from(table.numeric(c)?));
    }
    let spec = grid_spec(coords.view(), options.cell_size)?;

    options
        .columns
        .iter()
        .map(|name| {
            let values = Array1::from(table.numeric(table.require(name)?)?);
            krige_layer(coords.view(), values.view(), name, &spec, options)
        })
        .collect()
}

fn grid_spec(coords: ArrayView2<f64>, cell_size: Option<f64>) -> Result<GridSpec> {
    if coords.nrows() < 2 {
        return Err(CliError::Format(format!("need at least 2 samples to map, got {}", coords.nrows())));
    }
    let size = match cell_size {
        Some(s) => s,
        None => {
            let span = |c: usize| {
                let col = coords.column(c);
                col.fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - col.fold(f64::INFINITY, |a, &b| a.min(b))
            };
            let side = span(0).max(span(1));
            if side > 0.0 {
                side / 100.0
            } else {
                1.0
            }
        }
    };
    GridSpec::covering(coords, size).map_err(|e| CliError::Config(e.to_string()))
}

fn krige_layer(
    coords: ArrayView2<f64>,
    values: ArrayView1<f64>,
    name: &str,
    spec: &GridSpec,
    options: &MapOptions,
) -> Result<MapLayer> {
    let first = values[0];
    // a constant surface needs no model, and fitting one would be degenerate
    if values.iter().all(|v| *v == first) && options.variogram.is_none() {
        return Ok(MapLayer {
            column: name.into(),
            variogram: None,
            grid: RasterGrid::new(*spec, Array2::from_elem((spec.n_rows, spec.n_cols), first), DEFAULT_NODATA)
                .context(name.to_string())?,
            singular_cells: 0,
        });
    }
    let variogram = match options.variogram {
        Some(v) => v,
        None => {
            let empirical = empirical_semivariogram(coords, values, options.n_lags, default_max_dist(coords))
                .context(format!("semivariogram of '{name}'"))?;
            fit_variogram(&empirical, options.family).context(format!("variogram fit for '{name}'"))?
        }
    };
    let kriged = OrdinaryKriging::new(coords, values, variogram, options.max_neighbors)
        .and_then(|k| k.raster(spec, DEFAULT_NODATA))
        .context(format!("kriging '{name}'"))?;
    Ok(MapLayer {
        column: name.into(),
        variogram: Some(variogram),
        grid: kriged.prediction,
        singular_cells: kriged.singular_cells,
    })
}

/// Writes `<column>.asc`, `<column>.png` and `<column>.scale.json` per layer.
pub fn write_layers(layers: &[MapLayer], dir: &Path) -> Result<()> {
    for layer in layers {
        write_ascii_grid(&dir.join(format!("{}.asc", layer.column)), &layer.grid)?;
        write_png(
            &dir.join(format!("{}.png", layer.column)),
            &dir.join(format!("{}.scale.json", layer.column)),
            &layer.grid,
            &layer.column,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn grid() -> RasterGrid {
        let spec = GridSpec::new(10.0, 20.0, 2.5, 2, 3).unwrap();
        RasterGrid::new(spec, array![[1.0, 2.123456789, DEFAULT_NODATA], [-0.5, 1e-9, 1234.5]], DEFAULT_NODATA).unwrap()
    }

    #[test]
    fn header_tokens() {
        let text = format_ascii_grid(&grid());
        let keys: Vec<&str> = text.lines().take(6).map(|l| l.split(' ').next().unwrap()).collect();
        assert_eq!(keys, ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value"]);
        assert_eq!(text.lines().nth(6).unwrap(), "1.000000 2.123457 -9999");
    }

    #[test]
    fn ascii_round_trip() {
        let g = grid();
        let back = parse_ascii_grid(&format_ascii_grid(&g)).unwrap();
        assert_eq!(back.spec, g.spec);
        assert_eq!(back.nodata, g.nodata);
        for (a, b) in g.values.iter().zip(back.values.iter()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn gray_ramp_is_linear() {
        let (img, scale) = render_png(&grid(), "v");
        assert_eq!((scale.min_value, scale.max_value), (-0.5, 1234.5));
        assert_eq!(img.get_pixel(0, 1).0[0], 1);
        assert_eq!(img.get_pixel(2, 1).0[0], 255);
        assert_eq!(img.get_pixel(2, 0).0[0], 0);
        assert_eq!(scale.gray(617.0), 128);
    }
}
