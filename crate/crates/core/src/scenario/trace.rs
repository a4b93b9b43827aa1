use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Hourly wind farm outputs; `None` marks a missing cell.
#[derive(Clone, Debug, PartialEq)]
pub struct WindTrace {
    pub timestamps: Vec<NaiveDateTime>,
    pub farm_names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

fn parse_hour(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];
    let s = s.trim();
    for f in FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, f) {
            return Some(t);
        }
    }
    // YYYY-MM-DDTHH and compact YYYYMMDDHH carry no minutes
    if s.len() == 13 && s.as_bytes()[10] == b'T' {
        return NaiveDateTime::parse_from_str(&format!("{s}:00"), "%Y-%m-%dT%H:%M").ok();
    }
    if s.len() == 10 && s.bytes().all(|b| b.is_ascii_digit()) {
        return NaiveDateTime::parse_from_str(&format!("{s}00"), "%Y%m%d%H%M").ok();
    }
    None
}

fn parse_cell(s: &str) -> std::result::Result<Option<f64>, ()> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| ())
}

impl WindTrace {
    pub fn n_farms(&self) -> usize {
        self.farm_names.len()
    }

    /// Reads `timestamp,farm_1,...,farm_W` with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::Parse {
                line: 1,
                message: "trace needs a timestamp column and at least one farm column".into(),
            });
        }
        let farm_names = headers.iter().skip(1).map(str::to_string).collect();
        let mut timestamps = Vec::new();
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            let ts = parse_hour(&rec[0]).ok_or_else(|| Error::Parse {
                line,
                message: format!("invalid ISO-8601 hour '{}'", &rec[0]),
            })?;
            let row = rec
                .iter()
                .skip(1)
                .map(|c| {
                    parse_cell(c).map_err(|_| Error::Parse {
                        line,
                        message: format!("invalid value '{c}'"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            timestamps.push(ts);
            rows.push(row);
        }
        Ok(WindTrace {
            timestamps,
            farm_names,
            rows,
        })
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot open trace {}: {e}", path.display())))?;
        Self::read_csv(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.farm_names.iter().cloned());
        wtr.write_record(&header)?;
        for (ts, row) in self.timestamps.iter().zip(&self.rows) {
            let mut rec = vec![ts.format(TIMESTAMP_FORMAT).to_string()];
            rec.extend(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Rows without missing cells as a `T×W` matrix, plus the dropped-row count.
    pub fn complete_rows(&self) -> (Matrix<f64>, usize) {
        let w = self.n_farms();
        let complete: Vec<Vec<f64>> = self
            .rows
            .iter()
            .filter(|r| r.iter().all(Option::is_some))
            .map(|r| r.iter().map(|c| c.unwrap_or(f64::NAN)).collect())
            .collect();
        let dropped = self.rows.len() - complete.len();
        let m = if complete.is_empty() {
            Matrix::zeros(0, w)
        } else {
            Matrix::from_rows(&complete).expect("rows share the header width")
        };
        (m, dropped)
    }
}
