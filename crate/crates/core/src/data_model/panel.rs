use std::collections::HashSet;
use std::ops::Range;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// A date-indexed block of named daily series. Row `t` holds every series
/// observed on `dates[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimePanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    values: Array2<f64>,
}

impl TimePanel {
    pub fn new(dates: Vec<NaiveDate>, names: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != dates.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} dates for {} rows",
                dates.len(),
                values.nrows()
            )));
        }
        if values.ncols() != names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPanel(format!(
                "dates not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidPanel(format!(
                    "duplicate series name '{name}'"
                )));
            }
        }
        for ((t, k), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::InvalidPanel(format!(
                    "non-finite value in '{}' on {}",
                    names[k], dates[t]
                )));
            }
        }
        Ok(Self {
            dates,
            names,
            values,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Number of observations (rows).
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Number of series (columns).
    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, k: usize) -> ArrayView1<'_, f64> {
        self.values.column(k)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Rows in `range`, as a new panel.
    pub fn slice_rows(&self, range: Range<usize>) -> TimePanel {
        TimePanel {
            dates: self.dates[range.clone()].to_vec(),
            names: self.names.clone(),
            values: self.values.slice(ndarray::s![range, ..]).to_owned(),
        }
    }

    /// Panel restricted to the named columns, in the order given.
    pub fn select(&self, names: &[String]) -> Result<TimePanel> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::InvalidSpec(format!("unknown series '{n}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        TimePanel::new(
            self.dates.clone(),
            names.to_vec(),
            self.values.select(Axis(1), &idx),
        )
    }

    /// Same dates and names with replacement values.
    pub fn with_values(&self, values: Array2<f64>) -> Result<TimePanel> {
        TimePanel::new(self.dates.clone(), self.names.clone(), values)
    }

    /// Checks that consecutive rows are consecutive calendar days.
    pub fn require_daily(&self) -> Result<()> {
        let mut missing = Vec::new();
        for w in self.dates.windows(2) {
            let mut d = w[0].succ_opt().expect("date overflow");
            while d < w[1] {
                missing.push(d);
                d = d.succ_opt().expect("date overflow");
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingDates(missing))
        }
    }

    /// Joins panels column-wise on identical date indexes.
    pub fn hstack(panels: &[TimePanel]) -> Result<TimePanel> {
        let first = panels
            .first()
            .ok_or_else(|| Error::InvalidPanel("nothing to join".into()))?;
        let mut names = Vec::new();
        let mut views = Vec::new();
        for p in panels {
            if p.dates != first.dates {
                let diff: Vec<NaiveDate> = p
                    .dates
                    .iter()
                    .filter(|d| first.date_index(**d).is_none())
                    .chain(first.dates.iter().filter(|d| p.date_index(**d).is_none()))
                    .copied()
                    .collect();
                return Err(Error::MissingDates(diff));
            }
            names.extend(p.names.iter().cloned());
            views.push(p.values.view());
        }
        let values = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        TimePanel::new(first.dates.clone(), names, values)
    }

    /// Rows whose dates fall inside `[start, end]`.
    pub fn between(&self, start: NaiveDate, end: NaiveDate) -> TimePanel {
        let lo = self.dates.partition_point(|d| *d < start);
        let hi = self.dates.partition_point(|d| *d <= end);
        self.slice_rows(lo..hi.max(lo))
    }
}
