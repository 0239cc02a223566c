//! Loading raw inputs and turning them into daily panels: reconstructed
//! search-interest indexes and averaged sentiment compound scores.

mod sentiment;
mod trends;

pub use sentiment::{
    compound_normalize, daily_aggregate, read_scored_items, DateWindow, FillPolicy, ScoredItem,
    SentimentConfig,
};
pub use trends::{
    read_daily_chunk, read_monthly_index, rescale_gtrends, DailyChunks, MonthlyIndex,
};
