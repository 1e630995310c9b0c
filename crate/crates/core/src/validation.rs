//! K x N nested cross-validation with exhaustive grid search.
//!
//! For every outer fold the training part is split into N inner folds. Each
//! inner cell evaluates the whole grid on its validation fold by mean CRPS,
//! keeps the best model, and the N kept models predict the outer test fold
//! jointly: BUEE distributions are mixed with equal weights, quantile curves
//! are averaged level-wise.
//!
//! Every random draw comes from a stream derived from `(seed, outer, inner,
//! purpose)`, and the same stream is used for every grid point of a cell.
//! Refitting the winning configuration would therefore reproduce the search
//! model bit for bit, so the search model is kept instead.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    miscoverage_grid, quantreg, standard_levels, ConformalModel, QrParams, QrPostProcess, QuantileCurve,
    QuantileRegression,
};
use crate::buee::{fit_ensemble, mixture, EnsembleModel, EnsembleSpec};
use crate::classifiers::{forest, ClassifierKind, ClassifierSpec, HyperValue, Hyperparams};
use crate::classifiers::{RandomForestParams, RandomForestRegressor};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{crps_discrete, crps_from_quantiles, CrpsPath};
use crate::prediction::ProbabilisticPrediction;
use crate::rng::{tags, SeededRng};

pub const DEFAULT_CALIBRATION_FRACTION: f64 = 0.25;

/// Splits `0..n` into `k` folds after a seeded shuffle. Fold sizes differ by
/// at most one; each fold is returned sorted.
pub fn make_folds(n: usize, k: usize, rng: &SeededRng) -> Result<Vec<Vec<usize>>> {
    if k == 0 || n < k {
        return Err(Error::TooFewSamples { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng.generator());
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Named dimensions, each with an ordered list of candidate values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperparameterGrid {
    dims: BTreeMap<String, Vec<HyperValue>>,
}

impl HyperparameterGrid {
    /// A grid with no dimensions has exactly one point, the empty setting.
    pub fn new(dims: BTreeMap<String, Vec<HyperValue>>) -> Result<Self> {
        if let Some((name, _)) = dims.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::InvalidConfig(format!("grid dimension '{name}' has no values")));
        }
        Ok(HyperparameterGrid { dims })
    }

    pub fn single(point: Hyperparams) -> Self {
        HyperparameterGrid {
            dims: point.into_iter().map(|(k, v)| (k, vec![v])).collect(),
        }
    }

    pub fn random_forest() -> Self {
        let mut dims = BTreeMap::new();
        dims.insert("max_depth".into(), forest::MAX_DEPTH_GRID.map(HyperValue::from).to_vec());
        dims.insert(
            "max_features".into(),
            vec![HyperValue::Float(1.0), "sqrt".into(), "log2".into()],
        );
        dims.insert(
            "min_samples_leaf".into(),
            forest::MIN_SAMPLES_LEAF_GRID.map(HyperValue::from).to_vec(),
        );
        dims.insert("max_samples".into(), forest::MAX_SAMPLES_GRID.map(HyperValue::from).to_vec());
        HyperparameterGrid { dims }
    }

    pub fn quantile_regression() -> Self {
        let mut dims = BTreeMap::new();
        dims.insert("alpha".into(), quantreg::ALPHA_GRID.map(HyperValue::from).to_vec());
        dims.insert("fit_intercept".into(), vec![true.into(), false.into()]);
        HyperparameterGrid { dims }
    }

    /// Penalty grid used for post-processing (the intercept is always fit).
    pub fn qr_postprocess() -> Self {
        let mut dims = BTreeMap::new();
        dims.insert("alpha".into(), quantreg::ALPHA_GRID.map(HyperValue::from).to_vec());
        HyperparameterGrid { dims }
    }

    pub fn dims(&self) -> &BTreeMap<String, Vec<HyperValue>> {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn enumerate(&self) -> Vec<Hyperparams> {
        grid_enumerate(self)
    }
}

/// Cartesian product with dimensions in name order; the last dimension
/// varies fastest.
pub fn grid_enumerate(grid: &HyperparameterGrid) -> Vec<Hyperparams> {
    let dims: Vec<(&String, &Vec<HyperValue>)> = grid.dims.iter().collect();
    let mut out = Vec::with_capacity(grid.len());
    let mut idx = vec![0usize; dims.len()];
    loop {
        out.push(
            dims.iter()
                .zip(&idx)
                .map(|((name, values), &i)| ((*name).clone(), values[i].clone()))
                .collect(),
        );
        let mut d = dims.len();
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < dims[d].1.len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    #[serde(rename = "buee")]
    Buee,
    #[serde(rename = "qr_postprocess")]
    QrPostProcess,
    #[serde(rename = "conformal")]
    Conformal,
    #[serde(rename = "quantile_regression")]
    QuantileRegression,
}

impl MethodKind {
    pub fn needs_calibration(self) -> bool {
        matches!(self, MethodKind::QrPostProcess | MethodKind::Conformal)
    }

    pub fn crps_path(self) -> CrpsPath {
        match self {
            MethodKind::Buee => CrpsPath::Discrete,
            _ => CrpsPath::Quantile,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            MethodKind::Buee => "buee",
            MethodKind::QrPostProcess => "qr_postprocess",
            MethodKind::Conformal => "conformal",
            MethodKind::QuantileRegression => "quantile_regression",
        }
    }
}

/// A method, its fixed settings and the grid searched over.
///
/// `base` holds settings shared by every grid point (grid values override
/// them). For BUEE they go to the classifier; for conformal and
/// post-processing to the random-forest point model, except `alpha`, which
/// is the post-processing penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub classifier: ClassifierKind,
    pub ensemble: EnsembleSpec,
    pub base: Hyperparams,
    pub grid: HyperparameterGrid,
}

impl MethodSpec {
    pub fn buee(classifier: ClassifierKind, grid: HyperparameterGrid) -> Self {
        MethodSpec {
            kind: MethodKind::Buee,
            classifier,
            ensemble: EnsembleSpec::default(),
            base: Hyperparams::new(),
            grid,
        }
    }

    pub fn conformal(grid: HyperparameterGrid) -> Self {
        MethodSpec {
            kind: MethodKind::Conformal,
            ..MethodSpec::buee(ClassifierKind::RandomForest, grid)
        }
    }

    pub fn qr_postprocess(grid: HyperparameterGrid) -> Self {
        MethodSpec {
            kind: MethodKind::QrPostProcess,
            ..MethodSpec::buee(ClassifierKind::RandomForest, grid)
        }
    }

    pub fn quantile_regression(grid: HyperparameterGrid) -> Self {
        MethodSpec {
            kind: MethodKind::QuantileRegression,
            ..MethodSpec::buee(ClassifierKind::RandomForest, grid)
        }
    }

    pub fn with_base(mut self, base: Hyperparams) -> Self {
        self.base = base;
        self
    }

    pub fn with_ensemble(mut self, ensemble: EnsembleSpec) -> Self {
        self.ensemble = ensemble;
        self
    }

    fn settings(&self, theta: &Hyperparams) -> Hyperparams {
        let mut hp = self.base.clone();
        hp.extend(theta.iter().map(|(k, v)| (k.clone(), v.clone())));
        hp
    }

    /// Checks every grid point before any fitting starts.
    pub fn validate(&self) -> Result<()> {
        if self.kind == MethodKind::Buee && self.classifier == ClassifierKind::External {
            return Err(Error::InvalidConfig(
                "external classifiers cannot be cross-validated in-process".into(),
            ));
        }
        for theta in self.grid.enumerate() {
            self.resolve(&theta)?;
        }
        Ok(())
    }

    fn resolve(&self, theta: &Hyperparams) -> Result<Resolved> {
        let mut hp = self.settings(theta);
        Ok(match self.kind {
            MethodKind::Buee => {
                let spec = ClassifierSpec::new(self.classifier, hp)?;
                Resolved::Buee(spec)
            }
            MethodKind::Conformal => Resolved::Conformal(RandomForestParams::from_hyperparams(&hp)?),
            MethodKind::QrPostProcess => {
                let mut qr = Hyperparams::new();
                if let Some(alpha) = hp.remove("alpha") {
                    qr.insert("alpha".into(), alpha);
                }
                let alpha = QrParams::from_hyperparams(&qr)?.alpha;
                Resolved::QrPostProcess(RandomForestParams::from_hyperparams(&hp)?, alpha)
            }
            MethodKind::QuantileRegression => Resolved::QuantileRegression(QrParams::from_hyperparams(&hp)?),
        })
    }
}

enum Resolved {
    Buee(ClassifierSpec),
    Conformal(RandomForestParams),
    QrPostProcess(RandomForestParams, f64),
    QuantileRegression(QrParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CVPlan {
    pub outer_k: usize,
    pub inner_n: usize,
    pub seed: u64,
    pub needs_calibration: bool,
    pub calibration_fraction: f64,
}

impl CVPlan {
    pub fn new(outer_k: usize, inner_n: usize, seed: u64) -> Self {
        CVPlan {
            outer_k,
            inner_n,
            seed,
            needs_calibration: false,
            calibration_fraction: DEFAULT_CALIBRATION_FRACTION,
        }
    }

    /// Sets `needs_calibration` to what `method` requires.
    pub fn for_method(mut self, method: &MethodSpec) -> Self {
        self.needs_calibration = method.kind.needs_calibration();
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.outer_k < 2 {
            return Err(Error::InvalidConfig(format!("outer_k must be at least 2, got {}", self.outer_k)));
        }
        if self.inner_n < 2 {
            return Err(Error::InvalidConfig(format!("inner_n must be at least 2, got {}", self.inner_n)));
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "calibration fraction {} outside (0, 1)",
                self.calibration_fraction
            )));
        }
        if n < 2 * self.outer_k {
            return Err(Error::TooFewSamples { n, k: 2 * self.outer_k });
        }
        Ok(())
    }
}

/// A predictive distribution in either representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Forecast {
    Distribution(ProbabilisticPrediction),
    Curve(QuantileCurve),
}

impl Forecast {
    pub fn crps(&self, y: f64) -> f64 {
        match self {
            Forecast::Distribution(p) => crps_discrete(p, y),
            Forecast::Curve(c) => crps_from_quantiles(c, y),
        }
    }

    /// Distribution mean, or the curve's median level.
    pub fn center(&self) -> f64 {
        match self {
            Forecast::Distribution(p) => p.mean(),
            Forecast::Curve(c) => c.value_at(0.5).unwrap_or(c.values()[c.len() / 2]),
        }
    }

    pub fn quantile(&self, level: f64) -> Option<f64> {
        match self {
            Forecast::Distribution(p) => Some(p.quantile(level)),
            Forecast::Curve(c) => c.value_at(level),
        }
    }
}

/// A model fitted by one inner cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedMethod {
    Buee(EnsembleModel),
    Conformal(ConformalModel<RandomForestRegressor>),
    QrPostProcess(QrPostProcess<RandomForestRegressor>),
    QuantileRegression(QuantileRegression),
}

impl FittedMethod {
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Vec<Forecast>> {
        Ok(match self {
            FittedMethod::Buee(m) => m.predict_batch(x)?.into_iter().map(Forecast::Distribution).collect(),
            FittedMethod::Conformal(m) => m.predict_batch(x)?.into_iter().map(Forecast::Curve).collect(),
            FittedMethod::QrPostProcess(m) => m.predict_batch(x)?.into_iter().map(Forecast::Curve).collect(),
            FittedMethod::QuantileRegression(m) => m.predict_batch(x)?.into_iter().map(Forecast::Curve).collect(),
        })
    }
}

/// Fits one grid point. `calib` is required by the calibrated methods.
pub fn fit_method(
    method: &MethodSpec,
    theta: &Hyperparams,
    train: &Dataset,
    calib: Option<&Dataset>,
    rng: &SeededRng,
) -> Result<FittedMethod> {
    let need_calib = || calib.ok_or_else(|| Error::InsufficientCalibration("no calibration set".into()));
    Ok(match method.resolve(theta)? {
        Resolved::Buee(spec) => FittedMethod::Buee(fit_ensemble(train, &method.ensemble, &spec, rng)?),
        Resolved::Conformal(params) => {
            let base = RandomForestRegressor::fit(train.features(), train.target().as_slice().unwrap(), &params, rng)?;
            let cal = need_calib()?;
            FittedMethod::Conformal(ConformalModel::calibrate(
                base,
                cal.features(),
                cal.target(),
                &miscoverage_grid(),
            )?)
        }
        Resolved::QrPostProcess(params, alpha) => {
            let base = RandomForestRegressor::fit(train.features(), train.target().as_slice().unwrap(), &params, rng)?;
            let cal = need_calib()?;
            FittedMethod::QrPostProcess(QrPostProcess::fit(
                base,
                cal.features(),
                cal.target(),
                &standard_levels(),
                alpha,
            )?)
        }
        Resolved::QuantileRegression(params) => FittedMethod::QuantileRegression(QuantileRegression::fit(
            train.features(),
            train.target(),
            &standard_levels(),
            params,
        )?),
    })
}

/// Equal-weight aggregate of the inner models' forecasts for one sample.
pub fn aggregate(forecasts: &[Forecast]) -> Result<Forecast> {
    match forecasts.first() {
        None => Err(Error::InvalidConfig("nothing to aggregate".into())),
        Some(Forecast::Distribution(_)) => {
            let parts: Vec<ProbabilisticPrediction> = forecasts
                .iter()
                .map(|f| match f {
                    Forecast::Distribution(p) => Ok(p.clone()),
                    Forecast::Curve(_) => Err(Error::InvalidConfig("mixed forecast types".into())),
                })
                .collect::<Result<_>>()?;
            let w = vec![1.0 / parts.len() as f64; parts.len()];
            Ok(Forecast::Distribution(mixture(&w, &parts)))
        }
        Some(Forecast::Curve(_)) => {
            let curves: Vec<QuantileCurve> = forecasts
                .iter()
                .map(|f| match f {
                    Forecast::Curve(c) => Ok(c.clone()),
                    Forecast::Distribution(_) => Err(Error::InvalidConfig("mixed forecast types".into())),
                })
                .collect::<Result<_>>()?;
            Ok(Forecast::Curve(QuantileCurve::vincentize(&curves)?))
        }
    }
}

/// One inner cell `(outer, inner)`: the index sets it used and the grid
/// search outcome. Indices refer to rows of the full dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub outer: usize,
    pub inner: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub calibration: Vec<usize>,
    /// Mean validation CRPS for every grid point, in enumeration order.
    pub grid_crps: Vec<f64>,
    pub best_index: usize,
    pub best: Hyperparams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFoldReport {
    pub fold: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub mean_crps: f64,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub index: usize,
    pub outer_fold: usize,
    pub observed: f64,
    pub crps: f64,
    pub forecast: Forecast,
}

/// Wall-clock timings. Not serialized, so that reports of repeated runs
/// compare byte for byte.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timing {
    pub total: Duration,
    pub per_outer: Vec<Duration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub method: MethodKind,
    pub crps_path: CrpsPath,
    pub plan: CVPlan,
    pub grid: Vec<Hyperparams>,
    pub n: usize,
    pub mean_crps: f64,
    pub folds: Vec<OuterFoldReport>,
    /// One entry per dataset row, in row order.
    pub predictions: Vec<SamplePrediction>,
    #[serde(skip)]
    pub timing: Timing,
}

impl CVReport {
    pub fn per_sample_crps(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.crps).collect()
    }

    pub fn fold_of(&self) -> Vec<usize> {
        self.predictions.iter().map(|p| p.outer_fold).collect()
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        // NaN never wins
        if *v < values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

fn pick(indices: &[usize], positions: &[usize]) -> Vec<usize> {
    positions.iter().map(|&p| indices[p]).collect()
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

struct CellOutcome {
    report: CellReport,
    model: FittedMethod,
}

fn run_cell(
    data: &Dataset,
    method: &MethodSpec,
    plan: &CVPlan,
    thetas: &[Hyperparams],
    outer: usize,
    inner: usize,
    train_pool: Vec<usize>,
    validation: Vec<usize>,
) -> Result<CellOutcome> {
    let (train, calibration) = if plan.needs_calibration {
        let mut shuffled = train_pool;
        shuffled.shuffle(&mut SeededRng::for_cell(plan.seed, outer, Some(inner), tags::CALIBRATION).generator());
        let m = shuffled.len();
        let n_cal = ((plan.calibration_fraction * m as f64).round() as usize).clamp(1, m.saturating_sub(1));
        let cal = shuffled.split_off(m - n_cal);
        (sorted(shuffled), sorted(cal))
    } else {
        (train_pool, Vec::new())
    };

    let train_set = data.subset(&train);
    let val_set = data.subset(&validation);
    let cal_set = (!calibration.is_empty()).then(|| data.subset(&calibration));
    let model_rng = SeededRng::for_cell(plan.seed, outer, Some(inner), tags::MODEL);
    let y_val = val_set.target();

    let scored: Vec<(f64, FittedMethod)> = thetas
        .par_iter()
        .map(|theta| {
            let model = fit_method(method, theta, &train_set, cal_set.as_ref(), &model_rng)?;
            let forecasts = model.predict_batch(val_set.features())?;
            let scores: Vec<f64> = forecasts.iter().zip(y_val).map(|(f, y)| f.crps(*y)).collect();
            Ok((mean(&scores), model))
        })
        .collect::<Result<_>>()?;

    let grid_crps: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let best_index = argmin_first(&grid_crps);
    let model = scored.into_iter().nth(best_index).expect("grid is nonempty").1;
    Ok(CellOutcome {
        report: CellReport {
            outer,
            inner,
            train,
            validation,
            calibration,
            grid_crps,
            best_index,
            best: thetas[best_index].clone(),
        },
        model,
    })
}

fn run_outer(
    data: &Dataset,
    method: &MethodSpec,
    plan: &CVPlan,
    thetas: &[Hyperparams],
    outer: usize,
    train: Vec<usize>,
    test: Vec<usize>,
) -> Result<(OuterFoldReport, Vec<Forecast>, Duration)> {
    let start = Instant::now();
    let inner_rng = SeededRng::for_cell(plan.seed, outer, None, tags::INNER_SPLIT);
    let inner_folds = make_folds(train.len(), plan.inner_n, &inner_rng).map_err(|e| e.in_fold(outer, None))?;

    let cells: Vec<CellOutcome> = (0..plan.inner_n)
        .into_par_iter()
        .map(|j| {
            let validation = pick(&train, &inner_folds[j]);
            let pool: Vec<usize> = inner_folds
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != j)
                .flat_map(|(_, f)| pick(&train, f))
                .collect();
            run_cell(data, method, plan, thetas, outer, j, sorted(pool), validation)
                .map_err(|e| e.in_fold(outer, Some(j)))
        })
        .collect::<Result<_>>()?;

    let test_set = data.subset(&test);
    let per_model = cells
        .iter()
        .map(|c| c.model.predict_batch(test_set.features()))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_fold(outer, None))?;
    let forecasts = (0..test.len())
        .map(|r| {
            let row: Vec<Forecast> = per_model.iter().map(|p| p[r].clone()).collect();
            aggregate(&row)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_fold(outer, None))?;
    let scores: Vec<f64> = forecasts
        .iter()
        .zip(test_set.target())
        .map(|(f, y)| f.crps(*y))
        .collect();

    let report = OuterFoldReport {
        fold: outer,
        train,
        test,
        mean_crps: mean(&scores),
        cells: cells.into_iter().map(|c| c.report).collect(),
    };
    Ok((report, forecasts, start.elapsed()))
}

/// Runs the full protocol. Results do not depend on the number of threads.
pub fn nested_cv(data: &Dataset, method: &MethodSpec, plan: &CVPlan) -> Result<CVReport> {
    let start = Instant::now();
    let n = data.len();
    plan.validate(n)?;
    if plan.needs_calibration != method.kind.needs_calibration() {
        return Err(Error::InvalidConfig(format!(
            "method '{}' {} a calibration split",
            method.kind.tag(),
            if method.kind.needs_calibration() { "requires" } else { "does not use" }
        )));
    }
    method.validate()?;
    let thetas = method.grid.enumerate();
    let folds = make_folds(n, plan.outer_k, &SeededRng::new(plan.seed).derive(tags::OUTER_SPLIT))?;

    let outcomes: Vec<(OuterFoldReport, Vec<Forecast>, Duration)> = (0..plan.outer_k)
        .into_par_iter()
        .map(|i| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(l, _)| *l != i)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            run_outer(data, method, plan, &thetas, i, sorted(train), folds[i].clone())
        })
        .collect::<Result<_>>()?;

    let mut slots: Vec<Option<SamplePrediction>> = vec![None; n];
    let mut reports = Vec::with_capacity(plan.outer_k);
    let mut per_outer = Vec::with_capacity(plan.outer_k);
    for (report, forecasts, elapsed) in outcomes {
        for (&idx, forecast) in report.test.iter().zip(forecasts) {
            let observed = data.target()[idx];
            slots[idx] = Some(SamplePrediction {
                index: idx,
                outer_fold: report.fold,
                observed,
                crps: forecast.crps(observed),
                forecast,
            });
        }
        reports.push(report);
        per_outer.push(elapsed);
    }
    let predictions: Vec<SamplePrediction> = slots
        .into_iter()
        .map(|s| s.expect("outer folds partition the rows"))
        .collect();
    let mean_crps = mean(&predictions.iter().map(|p| p.crps).collect::<Vec<_>>());
    Ok(CVReport {
        method: method.kind,
        crps_path: method.kind.crps_path(),
        plan: *plan,
        grid: thetas,
        n,
        mean_crps,
        folds: reports,
        predictions,
        timing: Timing {
            total: start.elapsed(),
            per_outer,
        },
    })
}
