use std::collections::BTreeMap;
use std::io::Read;

use chrono::{Datelike, NaiveDate};
use ndarray::Array2;

use crate::data_model::TimePanel;
use crate::error::{Error, Result};
use crate::io::{parse_date, parse_f64};

/// Per-month daily values on the 0–100 scale, keyed by `(year, month)`.
pub type DailyChunks = BTreeMap<(i32, u32), Vec<f64>>;

/// Whole-period monthly interest on the 0–100 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyIndex {
    months: Vec<(i32, u32)>,
    weights: Vec<f64>,
}

impl MonthlyIndex {
    pub fn new(months: Vec<(i32, u32)>, weights: Vec<f64>) -> Result<Self> {
        if months.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} months for {} weights",
                months.len(),
                weights.len()
            )));
        }
        if months.is_empty() {
            return Err(Error::InvalidPanel("monthly index is empty".into()));
        }
        for w in months.windows(2) {
            if next_month(w[0]) != w[1] {
                return Err(Error::InvalidPanel(format!(
                    "months not contiguous: {}-{:02} then {}-{:02}",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        if let Some((m, w)) = months
            .iter()
            .zip(&weights)
            .find(|(_, w)| !(0.0..=100.0).contains(*w))
        {
            return Err(Error::InvalidPanel(format!(
                "weight {w} for {}-{:02} outside [0, 100]",
                m.0, m.1
            )));
        }
        Ok(Self { months, weights })
    }

    pub fn months(&self) -> &[(i32, u32)] {
        &self.months
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.months.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }
}

fn next_month((y, m): (i32, u32)) -> (i32, u32) {
    if m == 12 {
        (y + 1, 1)
    } else {
        (y, m + 1)
    }
}

fn first_day((y, m): (i32, u32)) -> Result<NaiveDate> {
    NaiveDate::from_ymd_opt(y, m, 1).ok_or_else(|| Error::Parse(format!("bad month {y}-{m}")))
}

pub(crate) fn days_in_month(month: (i32, u32)) -> Result<usize> {
    let start = first_day(month)?;
    let end = first_day(next_month(month))?;
    Ok((end - start).num_days() as usize)
}

/// Puts independently normalized monthly chunks of daily search interest
/// on a common scale: each day's value is multiplied by its month's weight
/// and divided by 100.
pub fn rescale_gtrends(
    chunks: &DailyChunks,
    monthly: &MonthlyIndex,
    name: &str,
) -> Result<TimePanel> {
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (&month, &weight) in monthly.months.iter().zip(&monthly.weights) {
        let chunk = chunks.get(&month).ok_or_else(|| {
            Error::InvalidPanel(format!("no daily chunk for {}-{:02}", month.0, month.1))
        })?;
        let expected = days_in_month(month)?;
        if chunk.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "chunk for {}-{:02} has {} days, calendar has {expected}",
                month.0,
                month.1,
                chunk.len()
            )));
        }
        let start = first_day(month)?;
        for (d, v) in chunk.iter().enumerate() {
            dates.push(start + chrono::Days::new(d as u64));
            values.push(v * weight / 100.0);
        }
    }
    let t = dates.len();
    TimePanel::new(
        dates,
        vec![name.to_string()],
        Array2::from_shape_vec((t, 1), values).expect("shape"),
    )
}

/// Reads a `month,weight` CSV with months as `YYYY-MM`.
pub fn read_monthly_index<R: Read>(reader: R) -> Result<MonthlyIndex> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut months = Vec::new();
    let mut weights = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let label = rec.get(0).unwrap_or("");
        let (y, m) = label
            .split_once('-')
            .and_then(|(y, m)| Some((y.parse::<i32>().ok()?, m.parse::<u32>().ok()?)))
            .filter(|(_, m)| (1..=12).contains(m))
            .ok_or_else(|| Error::Parse(format!("bad month '{label}'")))?;
        months.push((y, m));
        weights.push(parse_f64(
            rec.get(1).unwrap_or(""),
            &format!("weight for {label}"),
        )?);
    }
    MonthlyIndex::new(months, weights)
}

/// Reads one month of `date,value` rows; returns its `(year, month)` key.
pub fn read_daily_chunk<R: Read>(reader: R) -> Result<((i32, u32), Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut key = None;
    let mut values = Vec::new();
    let mut prev: Option<NaiveDate> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let date = parse_date(rec.get(0).unwrap_or(""))?;
        let this = (date.year(), date.month());
        match key {
            None => key = Some(this),
            Some(k) if k != this => {
                return Err(Error::InvalidPanel(format!(
                    "daily chunk mixes months ({date} outside {}-{:02})",
                    k.0, k.1
                )))
            }
            _ => {}
        }
        if let Some(p) = prev {
            if p.succ_opt() != Some(date) {
                return Err(Error::MissingDates(vec![p.succ_opt().unwrap_or(date)]));
            }
        } else if date.day() != 1 {
            return Err(Error::InvalidPanel(format!("daily chunk starts on {date}")));
        }
        prev = Some(date);
        values.push(parse_f64(
            rec.get(1).unwrap_or(""),
            &format!("value on {date}"),
        )?);
    }
    let key = key.ok_or_else(|| Error::InvalidPanel("empty daily chunk".into()))?;
    Ok((key, values))
}
