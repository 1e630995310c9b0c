use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::variogram::Variogram;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_NEIGHBORS: usize = 32;
pub const DEFAULT_NODATA: f64 = -9999.0;
const MAX_CONDITION: f64 = 1e12;

/// Placement of a raster: `(x_origin, y_origin)` is the lower-left corner
/// and row 0 is the northernmost row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_origin: f64,
    pub y_origin: f64,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl GridSpec {
    pub fn new(x_origin: f64, y_origin: f64, cell_size: f64, n_rows: usize, n_cols: usize) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) || n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "raster needs a positive cell size and shape, got {cell_size} and {n_rows}x{n_cols}"
            )));
        }
        Ok(GridSpec {
            x_origin,
            y_origin,
            cell_size,
            n_rows,
            n_cols,
        })
    }

    /// Smallest grid of `cell_size` cells covering the bounding box of
    /// `coords`.
    pub fn covering(coords: ArrayView2<f64>, cell_size: f64) -> Result<Self> {
        let bound = |c: usize, f: fn(f64, f64) -> f64, init: f64| coords.column(c).iter().cloned().fold(init, f);
        let (x0, x1) = (bound(0, f64::min, f64::INFINITY), bound(0, f64::max, f64::NEG_INFINITY));
        let (y0, y1) = (bound(1, f64::min, f64::INFINITY), bound(1, f64::max, f64::NEG_INFINITY));
        let cols = (((x1 - x0) / cell_size).ceil() as usize).max(1);
        let rows = (((y1 - y0) / cell_size).ceil() as usize).max(1);
        GridSpec::new(x0, y0, cell_size, rows, cols)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.x_origin + (col as f64 + 0.5) * self.cell_size,
            self.y_origin + ((self.n_rows - row) as f64 - 0.5) * self.cell_size,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    pub spec: GridSpec,
    pub values: Array2<f64>,
    pub nodata: f64,
}

impl RasterGrid {
    pub fn new(spec: GridSpec, values: Array2<f64>, nodata: f64) -> Result<Self> {
        if values.dim() != (spec.n_rows, spec.n_cols) {
            return Err(Error::DimensionMismatch {
                what: "raster cells",
                expected: spec.n_rows * spec.n_cols,
                found: values.len(),
            });
        }
        Ok(RasterGrid { spec, values, nodata })
    }

    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.values[[row, col]] == self.nodata
    }

    /// Minimum and maximum over cells holding data.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| **v != self.nodata)
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

/// Solution of one kriging system.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingPoint {
    pub prediction: f64,
    pub variance: f64,
    /// `(sample index, weight)` for the neighbours used.
    pub weights: Vec<(usize, f64)>,
    pub lagrange: f64,
}

/// Ordinary kriging over a fixed sample set. Samples sharing a location are
/// merged into one sample carrying their mean value.
#[derive(Debug, Clone)]
pub struct OrdinaryKriging {
    points: Vec<(f64, f64)>,
    values: Vec<f64>,
    variogram: Variogram,
    max_neighbors: usize,
}

impl OrdinaryKriging {
    pub fn new(
        coords: ArrayView2<f64>,
        values: ArrayView1<f64>,
        variogram: Variogram,
        max_neighbors: usize,
    ) -> Result<Self> {
        if coords.ncols() != 2 || coords.nrows() != values.len() {
            return Err(Error::DimensionMismatch {
                what: "sample coordinates",
                expected: values.len(),
                found: coords.nrows(),
            });
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| {
            coords[[a, 0]]
                .total_cmp(&coords[[b, 0]])
                .then(coords[[a, 1]].total_cmp(&coords[[b, 1]]))
                .then(a.cmp(&b))
        });
        let mut points: Vec<(f64, f64)> = Vec::new();
        let mut sums: Vec<(f64, usize, usize)> = Vec::new();
        for i in order {
            let p = (coords[[i, 0]], coords[[i, 1]]);
            match points.last() {
                Some(&last) if last == p => {
                    let s = sums.last_mut().expect("parallel vectors");
                    s.0 += values[i];
                    s.1 += 1;
                }
                _ => {
                    points.push(p);
                    sums.push((values[i], 1, i));
                }
            }
        }
        // restore input order of first occurrences so neighbour ties are stable
        let mut merged: Vec<((f64, f64), f64, usize)> = points
            .into_iter()
            .zip(sums)
            .map(|(p, (s, c, first))| (p, s / c as f64, first))
            .collect();
        merged.sort_by_key(|m| m.2);
        if merged.len() < 2 {
            return Err(Error::TooFewPoints(merged.len()));
        }
        if max_neighbors < 2 {
            return Err(Error::InvalidConfig(format!("max_neighbors must be at least 2, got {max_neighbors}")));
        }
        Ok(OrdinaryKriging {
            points: merged.iter().map(|m| m.0).collect(),
            values: merged.iter().map(|m| m.1).collect(),
            variogram,
            max_neighbors,
        })
    }

    /// Number of distinct sample locations.
    pub fn n_samples(&self) -> usize {
        self.points.len()
    }

    fn neighbours(&self, x: f64, y: f64) -> Vec<usize> {
        let mut idx: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p.0 - x).hypot(p.1 - y), i))
            .collect();
        let m = self.max_neighbors.min(idx.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if m < idx.len() {
            idx.select_nth_unstable_by(m - 1, cmp);
            idx.truncate(m);
        }
        idx.sort_by(cmp);
        idx.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, x: f64, y: f64) -> Result<KrigingPoint> {
        let nb = self.neighbours(x, y);
        let m = nb.len();
        let vg = &self.variogram;
        let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
        let a = DMatrix::from_fn(m + 1, m + 1, |r, c| match (r < m, c < m) {
            (true, true) => vg.gamma(dist(self.points[nb[r]], self.points[nb[c]])),
            (false, false) => 0.0,
            _ => 1.0,
        });
        let gamma0: Vec<f64> = nb.iter().map(|&i| vg.gamma(dist(self.points[i], (x, y)))).collect();
        let b = DVector::from_fn(m + 1, |r, _| if r < m { gamma0[r] } else { 1.0 });

        let svd = a.svd(true, true);
        let s_max = svd.singular_values.max();
        let s_min = svd.singular_values.min();
        let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularSystem { condition });
        }
        let sol = svd
            .solve(&b, 0.0)
            .map_err(|e| Error::Solver(e.to_string()))?;
        let weights: Vec<(usize, f64)> = nb.iter().zip(sol.iter()).map(|(&i, &w)| (i, w)).collect();
        let lagrange = sol[m];
        let prediction = weights.iter().map(|&(i, w)| w * self.values[i]).sum();
        let variance = weights.iter().zip(&gamma0).map(|(&(_, w), g)| w * g).sum::<f64>() + lagrange;
        Ok(KrigingPoint {
            prediction,
            variance,
            weights,
            lagrange,
        })
    }

    /// Predicts every cell center. Cells whose system is singular are set to
    /// `nodata` and counted.
    pub fn raster(&self, spec: &GridSpec, nodata: f64) -> Result<KrigedRasters> {
        let cells: Vec<Result<Option<(f64, f64)>>> = (0..spec.n_rows * spec.n_cols)
            .into_par_iter()
            .map(|k| {
                let (x, y) = spec.cell_center(k / spec.n_cols, k % spec.n_cols);
                match self.predict(x, y) {
                    Ok(p) => Ok(Some((p.prediction, p.variance))),
                    Err(Error::SingularSystem { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut pred = Array2::from_elem((spec.n_rows, spec.n_cols), nodata);
        let mut var = pred.clone();
        let mut singular_cells = 0;
        for (k, cell) in cells.into_iter().enumerate() {
            let at = [k / spec.n_cols, k % spec.n_cols];
            match cell? {
                Some((p, v)) => {
                    pred[at] = p;
                    var[at] = v;
                }
                None => singular_cells += 1,
            }
        }
        Ok(KrigedRasters {
            prediction: RasterGrid::new(*spec, pred, nodata)?,
            variance: RasterGrid::new(*spec, var, nodata)?,
            singular_cells,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrigedRasters {
    pub prediction: RasterGrid,
    pub variance: RasterGrid,
    pub singular_cells: usize,
}

pub fn krige_point(
    coords: ArrayView2<f64>,
    values: ArrayView1<f64>,
    variogram: Variogram,
    location: (f64, f64),
    max_neighbors: usize,
) -> Result<KrigingPoint> {
    OrdinaryKriging::new(coords, values, variogram, max_neighbors)?.predict(location.0, location.1)
}

pub fn ordinary_krige(
    coords: ArrayView2<f64>,
    values: ArrayView1<f64>,
    variogram: Variogram,
    grid: &GridSpec,
    max_neighbors: usize,
) -> Result<KrigedRasters> {
    OrdinaryKriging::new(coords, values, variogram, max_neighbors)?.raster(grid, DEFAULT_NODATA)
}
