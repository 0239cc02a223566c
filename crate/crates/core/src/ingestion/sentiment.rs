use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data_model::TimePanel;
use crate::error::{Error, Result};
use crate::io::parse_f64;

/// Value assigned to a day without any scored item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    /// Neutral sentiment (0).
    #[default]
    Zero,
    /// Previous day's value; 0 before the first observed day.
    CarryForward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentConfig {
    pub alpha: f64,
    #[serde(default)]
    pub fill: FillPolicy,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        Self {
            alpha: 15.0,
            fill: FillPolicy::Zero,
        }
    }
}

impl SentimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A text item already scored by a lexicon: the sum of its word valences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredItem {
    pub timestamp: DateTime<Utc>,
    pub valence_sum: f64,
}

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidConfig(format!("empty window {start}..{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }
}

/// Largest representable magnitude strictly below 1.
const MAX_SCORE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Maps a valence sum into (−1, 1) via `x / sqrt(x² + alpha)`.
pub fn compound_normalize(x: f64, cfg: &SentimentConfig) -> f64 {
    let score = if x.abs() > 1e100 {
        // x² would overflow
        x.signum() / (1.0 + cfg.alpha / x / x).sqrt()
    } else {
        x / (x * x + cfg.alpha).sqrt()
    };
    score.clamp(-MAX_SCORE, MAX_SCORE)
}

/// Averages the compound scores of all items per UTC calendar day over
/// `window`. Items dated outside the window are dropped.
pub fn daily_aggregate(
    items: &[ScoredItem],
    cfg: &SentimentConfig,
    window: DateWindow,
    name: &str,
) -> Result<TimePanel> {
    cfg.validate()?;
    let days = window.days();
    let mut sums = vec![0.0; days];
    let mut counts = vec![0usize; days];
    let mut dropped = 0usize;
    for item in items {
        let day = item.timestamp.date_naive();
        if day < window.start || day > window.end {
            dropped += 1;
            continue;
        }
        let i = (day - window.start).num_days() as usize;
        sums[i] += compound_normalize(item.valence_sum, cfg);
        counts[i] += 1;
    }
    if dropped > 0 {
        log::warn!(
            "{name}: dropped {dropped} items outside {}..{}",
            window.start,
            window.end
        );
    }
    let mut values = Vec::with_capacity(days);
    let mut last = 0.0;
    for (s, c) in sums.iter().zip(&counts) {
        let v = if *c > 0 {
            s / *c as f64
        } else {
            match cfg.fill {
                FillPolicy::Zero => 0.0,
                FillPolicy::CarryForward => last,
            }
        };
        last = v;
        values.push(v);
    }
    let dates = (0..days as u64)
        .map(|d| window.start + chrono::Days::new(d))
        .collect();
    TimePanel::new(
        dates,
        vec![name.to_string()],
        Array2::from_shape_vec((days, 1), values).expect("shape"),
    )
}

fn parse_timestamp(s: &str) -> Result<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc());
        }
    }
    Err(Error::Parse(format!("bad timestamp '{s}'")))
}

/// Reads a `timestamp,valence_sum` CSV. Timestamps without an offset are
/// taken as UTC.
pub fn read_scored_items<R: Read>(reader: R) -> Result<Vec<ScoredItem>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let timestamp = parse_timestamp(rec.get(0).unwrap_or(""))?;
        let valence_sum = parse_f64(rec.get(1).unwrap_or(""), "valence_sum")?;
        if !valence_sum.is_finite() {
            return Err(Error::Parse(format!("non-finite valence at {timestamp}")));
        }
        out.push(ScoredItem {
            timestamp,
            valence_sum,
        });
    }
    Ok(out)
}
