use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariogramFamily {
    #[default]
    Spherical,
    Exponential,
    Gaussian,
}

impl VariogramFamily {
    /// Correlation structure `g(h / range)` rising from 0 to 1. Exponential
    /// and Gaussian use the practical-range convention (95% of the sill at
    /// `h = range`).
    fn shape(self, r: f64) -> f64 {
        match self {
            VariogramFamily::Spherical if r >= 1.0 => 1.0,
            VariogramFamily::Spherical => 1.5 * r - 0.5 * r * r * r,
            VariogramFamily::Exponential => 1.0 - (-3.0 * r).exp(),
            VariogramFamily::Gaussian => 1.0 - (-3.0 * r * r).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variogram {
    pub family: VariogramFamily,
    pub nugget: f64,
    pub partial_sill: f64,
    pub range: f64,
}

impl Variogram {
    pub fn new(family: VariogramFamily, nugget: f64, partial_sill: f64, range: f64) -> Result<Self> {
        if !(nugget.is_finite() && nugget >= 0.0) {
            return Err(Error::hyper("nugget", nugget));
        }
        if !(partial_sill.is_finite() && partial_sill >= 0.0) {
            return Err(Error::hyper("partial_sill", partial_sill));
        }
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::hyper("range", range));
        }
        Ok(Variogram {
            family,
            nugget,
            partial_sill,
            range,
        })
    }

    pub fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }

    /// Semivariance at separation `h`; zero at `h == 0`.
    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        self.nugget + self.partial_sill * self.family.shape(h / self.range)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lag {
    pub center: f64,
    pub gamma: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    pub lags: Vec<Lag>,
    /// Sample variance of the values, which bounds the fitted parameters.
    pub sample_variance: f64,
    pub max_dist: f64,
    /// Pairs at distance zero; they carry no lag information and are skipped.
    pub duplicate_pairs: usize,
}

/// Half the diagonal of the bounding box of `coords`.
pub fn default_max_dist(coords: ArrayView2<f64>) -> f64 {
    let span = |c: usize| {
        let col = coords.column(c);
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    0.5 * span(0).hypot(span(1))
}

fn check_points(coords: ArrayView2<f64>, values: ArrayView1<f64>) -> Result<()> {
    if coords.ncols() != 2 {
        return Err(Error::DimensionMismatch {
            what: "coordinate columns",
            expected: 2,
            found: coords.ncols(),
        });
    }
    if coords.nrows() != values.len() {
        return Err(Error::DimensionMismatch {
            what: "values",
            expected: coords.nrows(),
            found: values.len(),
        });
    }
    if values.len() < 2 {
        return Err(Error::TooFewPoints(values.len()));
    }
    Ok(())
}

/// Matheron estimator `sum (z_i - z_j)^2 / (2 N(h))` over `n_lags`
/// equal-width distance classes on `(0, max_dist]`. Empty classes are
/// omitted; each class is reported at its midpoint.
pub fn empirical_semivariogram(
    coords: ArrayView2<f64>,
    values: ArrayView1<f64>,
    n_lags: usize,
    max_dist: f64,
) -> Result<EmpiricalVariogram> {
    check_points(coords, values)?;
    if n_lags == 0 || !(max_dist > 0.0 && max_dist.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "need n_lags >= 1 and max_dist > 0, got {n_lags} and {max_dist}"
        )));
    }
    let width = max_dist / n_lags as f64;
    let mut sums = vec![0.0; n_lags];
    let mut counts = vec![0usize; n_lags];
    let mut duplicate_pairs = 0;
    let n = values.len();
    for i in 0..n {
        for j in i + 1..n {
            let h = (coords[[i, 0]] - coords[[j, 0]]).hypot(coords[[i, 1]] - coords[[j, 1]]);
            if h == 0.0 {
                duplicate_pairs += 1;
                continue;
            }
            if h > max_dist {
                continue;
            }
            let bin = ((h / width).ceil() as usize).clamp(1, n_lags) - 1;
            let dz = values[i] - values[j];
            sums[bin] += dz * dz;
            counts[bin] += 1;
        }
    }
    let lags = (0..n_lags)
        .filter(|&b| counts[b] > 0)
        .map(|b| Lag {
            center: (b as f64 + 0.5) * width,
            gamma: sums[b] / (2.0 * counts[b] as f64),
            count: counts[b],
        })
        .collect();
    let mean = values.sum() / n as f64;
    let sample_variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(EmpiricalVariogram {
        lags,
        sample_variance,
        max_dist,
        duplicate_pairs,
    })
}

const RANGE_SCAN: usize = 400;
const RANGE_TOLERANCE: f64 = 1e-9;

/// Weighted least-squares fit with weights `count / lag^2` inside the box
/// `nugget in [0, s2]`, `partial_sill in [0, 2 s2]`, `range in (0, 2 max_dist]`.
///
/// For a fixed range the model is linear in nugget and partial sill, so that
/// inner problem is solved exactly. The range is located by a dense scan
/// followed by golden-section refinement around the best scan point.
pub fn fit_variogram(empirical: &EmpiricalVariogram, family: VariogramFamily) -> Result<Variogram> {
    let lags = &empirical.lags;
    if lags.len() < 3 {
        return Err(Error::InsufficientLags(lags.len()));
    }
    let s2 = empirical.sample_variance.max(0.0);
    let max_range = 2.0 * empirical.max_dist;
    let weights: Vec<f64> = lags.iter().map(|l| l.count as f64 / (l.center * l.center)).collect();
    let profile = |range: f64| {
        let shape: Vec<f64> = lags.iter().map(|l| family.shape(l.center / range)).collect();
        let (c0, c1) = box_lsq(&weights, &shape, lags, s2);
        let sse: f64 = lags
            .iter()
            .zip(&shape)
            .zip(&weights)
            .map(|((l, g), w)| w * (l.gamma - c0 - c1 * g).powi(2))
            .sum();
        (sse, c0, c1)
    };

    let grid: Vec<f64> = (1..=RANGE_SCAN)
        .map(|i| max_range * i as f64 / RANGE_SCAN as f64)
        .collect();
    let scores: Vec<f64> = grid.iter().map(|&a| profile(a).0).collect();
    let best = (0..grid.len()).fold(0, |b, i| if scores[i] < scores[b] { i } else { b });

    let mut lo = if best == 0 { max_range * 1e-6 } else { grid[best - 1] };
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = profile(a).0;
    let mut fb = profile(b).0;
    while hi - lo > RANGE_TOLERANCE * max_range {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = profile(a).0;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = profile(b).0;
        }
    }
    let candidates = [grid[best], a, b];
    let (range, (_, c0, c1)) = candidates
        .iter()
        .map(|&r| (r, profile(r)))
        .fold(None::<(f64, (f64, f64, f64))>, |acc, cur| match acc {
            Some(prev) if prev.1 .0 <= cur.1 .0 => Some(prev),
            _ => Some(cur),
        })
        .expect("nonempty candidates");
    Variogram::new(family, c0, c1, range)
}

/// Minimizes `sum w (gamma - c0 - c1 g)^2` over `c0 in [0, s2]`,
/// `c1 in [0, 2 s2]`. When nugget and structure cannot be told apart (all
/// `g` equal) the pure-nugget solution is returned.
fn box_lsq(w: &[f64], g: &[f64], lags: &[Lag], s2: f64) -> (f64, f64) {
    let (mut sw, mut sg, mut sgg, mut sy, mut sgy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for ((wi, gi), l) in w.iter().zip(g).zip(lags) {
        sw += wi;
        sg += wi * gi;
        sgg += wi * gi * gi;
        sy += wi * l.gamma;
        sgy += wi * gi * l.gamma;
        syy += wi * l.gamma * l.gamma;
    }
    let sse = |c0: f64, c1: f64| syy - 2.0 * (c0 * sy + c1 * sgy) + c0 * c0 * sw + 2.0 * c0 * c1 * sg + c1 * c1 * sgg;
    let c0_max = s2;
    let c1_max = 2.0 * s2;

    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(9);
    let det = sw * sgg - sg * sg;
    if det > 1e-12 * sw * sgg {
        let c0 = (sgg * sy - sg * sgy) / det;
        let c1 = (sw * sgy - sg * sy) / det;
        if (0.0..=c0_max).contains(&c0) && (0.0..=c1_max).contains(&c1) {
            return (c0, c1);
        }
    }
    // one coordinate on a bound, the other optimal and clipped
    for c0 in [0.0, c0_max] {
        let c1 = if sgg > 0.0 { (sgy - c0 * sg) / sgg } else { 0.0 };
        candidates.push((c0, c1.clamp(0.0, c1_max)));
    }
    for c1 in [0.0, c1_max] {
        let c0 = if sw > 0.0 { (sy - c1 * sg) / sw } else { 0.0 };
        candidates.push((c0.clamp(0.0, c0_max), c1));
    }
    candidates.sort_by(|a, b| sse(a.0, a.1).total_cmp(&sse(b.0, b.1)).then(a.1.total_cmp(&b.1)));
    candidates[0]
}
