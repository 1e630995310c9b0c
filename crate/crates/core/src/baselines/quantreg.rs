//! Linear quantile regression, solved exactly as a linear program.
//!
//! The objective for level `tau` is the mean pinball loss plus an L1 penalty
//! on the slopes, `mean(rho_tau(y - Xw - b)) + alpha * |w|_1`. The intercept is
//! never penalized.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::curve::{validate_levels, QuantileCurve};
use crate::classifiers::Hyperparams;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::pinball_loss;

pub const ALPHA_GRID: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
pub const GRID_DIMENSIONS: [&str; 2] = ["alpha", "fit_intercept"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QrParams {
    pub alpha: f64,
    pub fit_intercept: bool,
}

impl Default for QrParams {
    fn default() -> Self {
        QrParams {
            alpha: 1.0,
            fit_intercept: true,
        }
    }
}

impl QrParams {
    /// Reads `alpha` (from the search grid) and `fit_intercept`.
    pub fn from_hyperparams(hp: &Hyperparams) -> Result<Self> {
        let mut p = QrParams::default();
        for (name, value) in hp {
            match name.as_str() {
                "alpha" => {
                    p.alpha = match value.as_f64() {
                        Some(v) if ALPHA_GRID.contains(&v) => v,
                        _ => return Err(Error::hyper(name, value)),
                    }
                }
                "fit_intercept" => {
                    p.fit_intercept = value.as_bool().ok_or_else(|| Error::hyper(name, value))?
                }
                _ => return Err(Error::hyper(name, value)),
            }
        }
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::hyper("alpha", self.alpha));
        }
        Ok(())
    }
}

/// Coefficients of one fitted quantile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQuantile {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearQuantile {
    pub fn predict(&self, row: ArrayView1<f64>) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }

    /// Penalized objective this fit minimizes.
    pub fn objective(&self, x: ArrayView2<f64>, y: ArrayView1<f64>, tau: f64, alpha: f64) -> f64 {
        let n = y.len() as f64;
        let loss: f64 = x
            .rows()
            .into_iter()
            .zip(y)
            .map(|(row, yi)| pinball_loss(tau, yi - self.predict(row)))
            .sum();
        loss / n + alpha * self.coef.iter().map(|w| w.abs()).sum::<f64>()
    }
}

/// Fits a single level. `x` may have zero columns, which yields an
/// intercept-only model (a sample `tau`-quantile when `fit_intercept`).
pub fn fit_pinball(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    tau: f64,
    alpha: f64,
    fit_intercept: bool,
) -> Result<LinearQuantile> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidLevel(tau));
    }
    let (n, d) = x.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: n,
            found: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyDataset("no rows for quantile regression"));
    }

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let nonneg = (0.0, f64::INFINITY);
    let slopes: Vec<_> = (0..d)
        .map(|_| (lp.add_var(alpha, nonneg), lp.add_var(alpha, nonneg)))
        .collect();
    let intercept = fit_intercept.then(|| lp.add_var(0.0, free));
    let inv_n = 1.0 / n as f64;
    for (row, &yi) in x.rows().into_iter().zip(y) {
        let over = lp.add_var(tau * inv_n, nonneg);
        let under = lp.add_var((1.0 - tau) * inv_n, nonneg);
        let mut terms = Vec::with_capacity(2 * d + 3);
        for (&(pos, neg), &xij) in slopes.iter().zip(row) {
            if xij != 0.0 {
                terms.push((pos, xij));
                terms.push((neg, -xij));
            }
        }
        if let Some(b) = intercept {
            terms.push((b, 1.0));
        }
        terms.push((over, 1.0));
        terms.push((under, -1.0));
        lp.add_constraint(terms, ComparisonOp::Eq, yi);
    }

    let solution = lp
        .solve()
        .map_err(|e| Error::Solver(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Solver("quantile regression solve interrupted".into()))?;
    Ok(LinearQuantile {
        coef: slopes
            .iter()
            .map(|&(pos, neg)| solution.var_value(pos) - solution.var_value(neg))
            .collect(),
        intercept: intercept.map_or(0.0, |b| solution.var_value(b)),
    })
}

/// One linear model per quantile level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRegression {
    levels: Vec<f64>,
    params: QrParams,
    fits: Vec<LinearQuantile>,
}

pub fn fit_quantile_regression(train: &Dataset, levels: &[f64], params: QrParams) -> Result<QuantileRegression> {
    QuantileRegression::fit(train.features(), train.target(), levels, params)
}

impl QuantileRegression {
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>, levels: &[f64], params: QrParams) -> Result<Self> {
        validate_levels(levels)?;
        params.validate()?;
        let fits = levels
            .iter()
            .map(|&tau| fit_pinball(x, y, tau, params.alpha, params.fit_intercept))
            .collect::<Result<_>>()?;
        Ok(QuantileRegression {
            levels: levels.to_vec(),
            params,
            fits,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn params(&self) -> QrParams {
        self.params
    }

    pub fn fits(&self) -> &[LinearQuantile] {
        &self.fits
    }

    pub fn n_features(&self) -> usize {
        self.fits[0].coef.len()
    }

    /// Per-level predictions, rearranged to be nondecreasing.
    pub fn predict(&self, row: ArrayView1<f64>) -> Result<QuantileCurve> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "feature columns",
                expected: self.n_features(),
                found: row.len(),
            });
        }
        let values = self.fits.iter().map(|f| f.predict(row)).collect();
        QuantileCurve::new(self.levels.clone(), values)
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<QuantileCurve>> {
        x.rows().into_iter().map(|row| self.predict(row)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::HyperValue;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use ndarray::{Array1, Array2};
    use proptest::prelude::*;

    fn objective(x: &Array2<f64>, y: &Array1<f64>, tau: f64, alpha: f64, theta: &[f64], intercept: bool) -> f64 {
        let d = x.ncols();
        let b = if intercept { theta[d] } else { 0.0 };
        let mut loss = 0.0;
        for i in 0..y.len() {
            let r = y[i] - b - (0..d).map(|j| theta[j] * x[[i, j]]).sum::<f64>();
            loss += if r >= 0.0 { tau * r } else { (tau - 1.0) * r };
        }
        loss / y.len() as f64 + alpha * theta[..d].iter().map(|w| w.abs()).sum::<f64>()
    }

    // The objective is piecewise linear and convex, so a minimizer sits on a
    // vertex of the arrangement formed by the zero-residual hyperplanes and
    // the coordinate hyperplanes w_j = 0. Enumerate every vertex.
    fn vertex_oracle(x: &Array2<f64>, y: &Array1<f64>, tau: f64, alpha: f64, intercept: bool) -> f64 {
        let d = x.ncols();
        let p = d + usize::from(intercept);
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..y.len() {
            let mut a: Vec<f64> = x.row(i).to_vec();
            if intercept {
                a.push(1.0);
            }
            planes.push((a, y[i]));
        }
        for j in 0..d {
            let mut a = vec![0.0; p];
            a[j] = 1.0;
            planes.push((a, 0.0));
        }
        let mut best = f64::INFINITY;
        let mut pick: Vec<usize> = (0..p).collect();
        loop {
            let a = DMatrix::from_fn(p, p, |r, c| planes[pick[r]].0[c]);
            let rhs = DVector::from_fn(p, |r, _| planes[pick[r]].1);
            if let Some(theta) = a.lu().solve(&rhs) {
                if theta.iter().all(|v| v.is_finite()) {
                    best = best.min(objective(x, y, tau, alpha, theta.as_slice(), intercept));
                }
            }
            // next combination
            let m = planes.len();
            let mut k = p;
            loop {
                if k == 0 {
                    return best;
                }
                k -= 1;
                if pick[k] < m - p + k {
                    pick[k] += 1;
                    for l in k + 1..p {
                        pick[l] = pick[l - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn exact_linear_relation_recovered() {
        let n = 200;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / (n - 1) as f64);
        let y = x.column(0).mapv(|v| 2.0 * v);
        let fit = fit_pinball(x.view(), y.view(), 0.5, 0.1, false).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 0.05, "{:?}", fit.coef);
    }

    #[test]
    fn intercept_only_is_sample_median() {
        let y = Array1::from_iter((1..=10).map(f64::from));
        let x = Array2::zeros((10, 0));
        let fit = fit_pinball(x.view(), y.view(), 0.5, 1.0, true).unwrap();
        assert!((5.0..=6.0).contains(&fit.intercept), "{}", fit.intercept);
        let fit = fit_pinball(x.view(), y.view(), 0.25, 1.0, true).unwrap();
        // 10 * 0.25 = 2.5 is fractional, so the optimum is unique
        assert_abs_diff_eq!(fit.intercept, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn invalid_levels_rejected() {
        let x = Array2::zeros((3, 1));
        let y = Array1::zeros(3);
        let err = QuantileRegression::fit(x.view(), y.view(), &[0.5, 1.2], QrParams::default()).unwrap_err();
        assert_eq!(err, Error::InvalidLevel(1.2));
    }

    #[test]
    fn alpha_outside_grid_rejected() {
        let mut hp = Hyperparams::new();
        hp.insert("alpha".into(), HyperValue::Float(0.3));
        assert!(matches!(QrParams::from_hyperparams(&hp), Err(Error::InvalidHyperparameter { .. })));
        hp.insert("alpha".into(), HyperValue::Float(5.0));
        hp.insert("fit_intercept".into(), HyperValue::Bool(false));
        let p = QrParams::from_hyperparams(&hp).unwrap();
        assert_eq!(p.alpha, 5.0);
        assert!(!p.fit_intercept);
    }

    #[test]
    fn symmetric_data_gives_symmetric_curve() {
        // residual pattern -2..2 repeated at every x, slope zero in truth
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..10 {
            for e in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                xs.push(i as f64 / 9.0);
                ys.push(5.0 + e);
            }
        }
        let x = Array2::from_shape_vec((xs.len(), 1), xs).unwrap();
        let y = Array1::from(ys);
        let params = QrParams { alpha: 0.1, fit_intercept: true };
        let model = QuantileRegression::fit(x.view(), y.view(), &[0.3, 0.5, 0.7], params).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let c = model.predict(Array1::from(vec![t]).view()).unwrap();
            let v = c.values();
            assert!(((v[2] - v[1]) - (v[1] - v[0])).abs() < 1e-6, "{v:?}");
        }
    }

    #[test]
    fn wrong_width_rejected() {
        let x = Array2::from_shape_fn((5, 2), |(i, j)| (i + j) as f64);
        let y = Array1::from_iter((0..5).map(f64::from));
        let m = QuantileRegression::fit(x.view(), y.view(), &[0.5], QrParams::default()).unwrap();
        assert!(matches!(
            m.predict(Array1::zeros(3).view()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(m.predict(x.row(0)).unwrap().len(), 1);
    }

    #[test]
    fn oracle_agrees_on_fixed_instance() {
        let x = Array2::from_shape_vec((6, 1), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let y = Array1::from(vec![0.5, 1.0, 2.5, 2.0, 4.5, 5.0]);
        let fit = fit_pinball(x.view(), y.view(), 0.5, 0.1, true).unwrap();
        let oracle = vertex_oracle(&x, &y, 0.5, 0.1, true);
        assert!(fit.objective(x.view(), y.view(), 0.5, 0.1) <= oracle + 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn objective_matches_vertex_oracle(
            d in 1usize..=3,
            n in 4usize..=14,
            seed in proptest::collection::vec(-5.0f64..5.0, 14 * 4),
            tau_i in 1usize..=19,
            alpha_i in 0usize..6,
            intercept in any::<bool>(),
        ) {
            let tau = tau_i as f64 / 20.0;
            let alpha = ALPHA_GRID[alpha_i] / 10.0;
            let x = Array2::from_shape_fn((n, d), |(i, j)| seed[i * 4 + j]);
            let y = Array1::from_shape_fn(n, |i| seed[i * 4 + 3]);
            let fit = fit_pinball(x.view(), y.view(), tau, alpha, intercept).unwrap();
            let got = fit.objective(x.view(), y.view(), tau, alpha);
            let best = vertex_oracle(&x, &y, tau, alpha, intercept);
            prop_assert!(got <= best + 1e-6, "lp {} vs oracle {}", got, best);
            prop_assert!(got >= best - 1e-6, "lp {} below oracle {}", got, best);
        }
    }
}
