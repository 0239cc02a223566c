//! CSV and JSON persistence shared by the pipeline stages.
//!
//! Every float written by this crate goes through [`fmt_f64`], which uses a
//! fixed 17-significant-digit scientific form so outputs are byte-stable and
//! round-trip exactly.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;

use crate::data_model::TimePanel;
use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| Error::Parse(format!("bad date '{s}': {e}")))
}

pub fn parse_f64(s: &str, context: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number '{s}' in {context}")))
}

/// Reads a `date,<series>...` CSV. Dates must be strictly increasing
/// consecutive days and every cell a finite number.
pub fn read_panel<R: Read>(reader: R) -> Result<TimePanel> {
    let panel = read_panel_unchecked(reader)?;
    panel.require_daily()?;
    Ok(panel)
}

/// Like [`read_panel`] without the consecutive-day requirement.
pub fn read_panel_unchecked<R: Read>(reader: R) -> Result<TimePanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("date") {
        return Err(Error::Parse("first CSV column must be 'date'".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::Parse("panel CSV has no series columns".into()));
    }
    let mut dates = Vec::new();
    let mut flat = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date = parse_date(&rec[0])?;
        for (k, name) in names.iter().enumerate() {
            let cell = rec.get(k + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::Parse(format!(
                    "missing value for '{name}' on {date} (row {})",
                    line + 2
                )));
            }
            flat.push(parse_f64(cell, &format!("'{name}' on {date}"))?);
        }
        dates.push(date);
    }
    let t = dates.len();
    let values = Array2::from_shape_vec((t, names.len()), flat)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    TimePanel::new(dates, names, values)
}

pub fn write_panel<W: Write>(panel: &TimePanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(panel.names().iter().cloned());
    w.write_record(&header)?;
    for (t, date) in panel.dates().iter().enumerate() {
        let mut rec = vec![date.format(DATE_FORMAT).to_string()];
        rec.extend(panel.values().row(t).iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_panel_file(path: &Path) -> Result<TimePanel> {
    let f =
        std::fs::File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    read_panel(f)
}

pub fn write_panel_file(panel: &TimePanel, path: &Path) -> Result<()> {
    write_panel(panel, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_roundtrip_is_exact() {
        let csv = "date,a,b\n2020-01-01,1.5,0.1\n2020-01-02,-2,3e-5\n";
        let p = read_panel(csv.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_panel(&p, &mut out).unwrap();
        let back = read_panel(out.as_slice()).unwrap();
        assert_eq!(p, back);
        assert!(String::from_utf8(out)
            .unwrap()
            .contains("1.0000000000000001e-1"));
    }

    #[test]
    fn rejects_gaps_and_blanks() {
        let gap = "date,a\n2020-01-01,1\n2020-01-03,2\n";
        assert!(matches!(
            read_panel(gap.as_bytes()),
            Err(Error::MissingDates(_))
        ));
        let blank = "date,a\n2020-01-01,\n";
        assert!(read_panel(blank.as_bytes()).is_err());
        let nan = "date,a\n2020-01-01,NaN\n";
        assert!(read_panel(nan.as_bytes()).is_err());
    }

    #[test]
    fn fixed_digits() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(-3.0), "-3.0000000000000000e0");
    }
}
