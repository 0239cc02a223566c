//! Panel container, transformations and descriptive statistics.

mod panel;
mod summary;
mod transform;

pub use panel::TimePanel;
pub use summary::{
    adf_statistic, adf_statistic_with, summary_stats, summary_stats_with, AdfDeterministic,
    KurtosisConvention, SeriesSummary, SummaryOptions, SummaryReport, MIN_ADF_OBS,
};
pub use transform::{
    destandardize, lag_embed, lag_vector, log_returns, standardization_stats, standardize,
    LagEmbedding, StandardizationStats,
};
