//! From raw observations to supervised-learning matrices.

mod aligned;
mod dump;
mod impute;
mod lag;
mod matrix;
mod scaler;
mod split;

pub use aligned::{drop_sparse, AlignedSeries, Dropped};
pub use dump::write_matrix;
pub use impute::impute_linear;
pub use lag::{build_lag_matrix, DesignMatrix, FeatureLayout, HorizonMode, LagSpec, WeightMode};
pub use matrix::Matrix;
pub use scaler::{quantile, RobustScaler};
pub use split::{chrono_split, split_sizes, Split, DEFAULT_FRACTIONS};

/// Default lag count for hourly series.
pub const HOURLY_LAGS: usize = 24;
/// Default lag count for weekly series.
pub const WEEKLY_LAGS: usize = 4;
