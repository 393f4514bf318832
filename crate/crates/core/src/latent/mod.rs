//! Trend analysis of acoustic features over a 2-D reduction of the latent
//! space.
//!
//! Embeddings are reduced with PCA; for each feature a plane
//! `f(x, y) = a·x + b·y + c` is fitted by least squares over the reduced
//! points, scored by the absolute Pearson correlation (APCC) between its
//! predictions and the observed values, and summarized by the unit gradient
//! direction `(a, b) / ‖(a, b)‖`.

mod pca;
mod selection;
mod trend;
mod trend_map;

pub use pca::{fit_pca, Projection};
pub use selection::{
    select_features, Elimination, EliminationReason, SelectionConfig, SelectionResult,
};
pub use trend::{cross_validated_apcc, fit_all_trends, fit_trend, TrendModel, CV_FOLDS};
pub use trend_map::{
    export_trend_map, read_trend_map_data, TrendMapArrow, TrendMapData, TrendMapPoint,
};
