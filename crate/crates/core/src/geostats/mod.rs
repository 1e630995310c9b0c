//! Semivariogram estimation and ordinary kriging, used to turn point
//! predictions into raster maps.

mod kriging;
mod variogram;

pub use kriging::{
    krige_point, ordinary_krige, GridSpec, KrigedRasters, KrigingPoint, OrdinaryKriging, RasterGrid,
    DEFAULT_MAX_NEIGHBORS, DEFAULT_NODATA,
};
pub use variogram::{
    default_max_dist, empirical_semivariogram, fit_variogram, EmpiricalVariogram, Lag, Variogram, VariogramFamily,
};
