//! CSV and JSON artifacts.
//!
//! Series files have a header `t,<name>_1,...,<name>_m` and one row per time
//! point, with `t` increasing by exactly one from row to row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecaster::ForecastResult;
use crate::frame::TimeSeriesFrame;
use crate::numerics::Matrix;
use crate::scalar::Real;
use crate::trainer::{FittedModel, TrainConfig};

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Open {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a series CSV (`t,y_1,...,y_m`).
pub fn ingest_csv<T: Real>(path: impl AsRef<Path>) -> Result<TimeSeriesFrame<T>> {
    read_indexed(open(path.as_ref())?)
}

/// Reads a trend CSV (`t,mu_1,...,mu_m`).
pub fn read_trend_csv<T: Real>(path: impl AsRef<Path>) -> Result<TimeSeriesFrame<T>> {
    read_indexed(open(path.as_ref())?)
}

/// Parses a time-indexed CSV. Row numbers in errors count the header as row 1;
/// columns are 1-based.
pub fn read_indexed<T: Real, R: Read>(reader: R) -> Result<TimeSeriesFrame<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(reader));
    let header = rdr.headers()?.clone();
    if header.is_empty() || &header[0] != "t" {
        return Err(Error::ParseError {
            row: 1,
            column: 1,
            message: "first header field must be `t`".into(),
        });
    }
    let m = header.len() - 1;
    if m == 0 {
        return Err(Error::ParseError {
            row: 1,
            column: 2,
            message: "no value columns".into(),
        });
    }
    let mut time = Vec::new();
    let mut data = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 2;
        if record.len() != m + 1 {
            return Err(Error::ParseError {
                row,
                column: record.len().min(m + 1) + 1,
                message: format!("expected {} fields, found {}", m + 1, record.len()),
            });
        }
        let t: i64 = record[0].parse().map_err(|_| Error::NonNumeric {
            row,
            column: 1,
            value: record[0].to_string(),
        })?;
        if let Some(&prev) = time.last() {
            if t > prev + 1 {
                return Err(Error::GapError { missing: prev + 1 });
            }
            if t <= prev {
                return Err(Error::ParseError {
                    row,
                    column: 1,
                    message: format!("time index {t} does not increase after {prev}"),
                });
            }
        }
        time.push(t);
        for (c, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::NonNumeric {
                row,
                column: c + 1,
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    row,
                    column: c + 1,
                    value: field.to_string(),
                });
            }
            data.push(T::lit(v));
        }
    }
    if time.is_empty() {
        return Err(Error::EmptyData);
    }
    TimeSeriesFrame::new(time.clone(), Matrix::from_vec(time.len(), m, data))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `time` and the rows of `values` under header `t,<prefix>_1,...`.
pub fn write_indexed<T: Real, W: Write>(
    out: W,
    prefix: &str,
    time: &[i64],
    values: &Matrix<T>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=values.cols()).map(|c| format!("{prefix}_{c}")));
    w.write_record(&header)?;
    for (r, t) in time.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(values.row(r).iter().map(|v| v.as_f64().to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv<T: Real>(path: impl AsRef<Path>, frame: &TimeSeriesFrame<T>) -> Result<()> {
    write_indexed(create(path.as_ref())?, "y", frame.time(), frame.values())
}

/// Trend rows labelled `1..=T`.
pub fn write_trend_csv<T: Real>(path: impl AsRef<Path>, trend: &Matrix<T>) -> Result<()> {
    let time: Vec<i64> = (1..=trend.rows() as i64).collect();
    write_indexed(create(path.as_ref())?, "mu", &time, trend)
}

/// Innovations with the time labels of the observations they belong to.
pub fn write_residuals_csv<T: Real>(
    path: impl AsRef<Path>,
    time: &[i64],
    residuals: &Matrix<T>,
) -> Result<()> {
    write_indexed(create(path.as_ref())?, "e", time, residuals)
}

/// One row per step and component: point, sd, lower, upper, trend.
pub fn write_forecast<T: Real, W: Write>(out: W, result: &ForecastResult<T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "horizon",
        "component",
        "point",
        "sd",
        "lower",
        "upper",
        "trend",
    ])?;
    for (s, &step) in result.horizons.iter().enumerate() {
        for c in 0..result.points.cols() {
            w.write_record([
                step.to_string(),
                (c + 1).to_string(),
                result.points[(s, c)].as_f64().to_string(),
                result.sd(step, c).as_f64().to_string(),
                result.lower[(s, c)].as_f64().to_string(),
                result.upper[(s, c)].as_f64().to_string(),
                result.trend_path[(s, c)].as_f64().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_forecast_csv<T: Real>(
    path: impl AsRef<Path>,
    result: &ForecastResult<T>,
) -> Result<()> {
    write_forecast(create(path.as_ref())?, result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEntry {
    pub horizon: usize,
    pub component: usize,
    pub point: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub trend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDocument {
    pub seed: u64,
    pub level: f64,
    pub entries: Vec<ForecastEntry>,
}

impl ForecastDocument {
    pub fn new<T: Real>(result: &ForecastResult<T>, seed: u64, level: f64) -> Self {
        let mut entries = Vec::new();
        for (s, &step) in result.horizons.iter().enumerate() {
            for c in 0..result.points.cols() {
                entries.push(ForecastEntry {
                    horizon: step,
                    component: c + 1,
                    point: result.points[(s, c)].as_f64(),
                    sd: result.sd(step, c).as_f64(),
                    lower: result.lower[(s, c)].as_f64(),
                    upper: result.upper[(s, c)].as_f64(),
                    trend: result.trend_path[(s, c)].as_f64(),
                });
            }
        }
        Self {
            seed,
            level,
            entries,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = create(path.as_ref())?;
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// A fitted model with the configuration and seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchive<T> {
    pub format_version: u32,
    pub seed: u64,
    pub config: TrainConfig,
    pub model: FittedModel<T>,
}

impl<T: Real + Serialize + DeserializeOwned> ModelArchive<T> {
    pub fn new(model: FittedModel<T>, config: TrainConfig) -> Self {
        Self {
            format_version: ARCHIVE_FORMAT_VERSION,
            seed: config.seed,
            config,
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = create(path.as_ref())?;
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let archive: Self = serde_json::from_reader(BufReader::new(open(path.as_ref())?))?;
        if archive.format_version != ARCHIVE_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported archive format version {}",
                archive.format_version
            )));
        }
        Ok(archive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<TimeSeriesFrame<f64>> {
        read_indexed(text.as_bytes())
    }

    #[test]
    fn well_formed_file() {
        let f = parse("t,y_1,y_2\n1,0.5,2\n2,1.5,-3\n3,2.5,4e-1\n").unwrap();
        assert_eq!((f.len(), f.dim()), (3, 2));
        assert_eq!(f.time(), &[1, 2, 3]);
        assert_eq!(f.values().row(2), &[2.5, 0.4]);
    }

    #[test]
    fn gap_names_missing_index() {
        assert!(matches!(
            parse("t,y_1\n1,0\n2,0\n4,0\n"),
            Err(Error::GapError { missing: 3 })
        ));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(parse("t,y_1,y_2\n"), Err(Error::EmptyData)));
    }

    #[test]
    fn bad_cells_are_located() {
        match parse("t,y_1,y_2\n1,0,1\n2,abc,1\n") {
            Err(Error::NonNumeric { row, column, value }) => {
                assert_eq!((row, column, value.as_str()), (3, 2, "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("t,y_1\n1,0,5\n"),
            Err(Error::ParseError { row: 2, .. })
        ));
        assert!(matches!(
            parse("time,y_1\n1,0\n"),
            Err(Error::ParseError { row: 1, .. })
        ));
        assert!(matches!(
            parse("t,y_1\n2,0\n1,0\n"),
            Err(Error::ParseError { row: 3, .. })
        ));
    }

    #[test]
    fn series_round_trip() {
        let values = Matrix::<f64>::from_rows(&[&[0.1, 1.0 / 3.0], &[-2.5e-8, 7.0]]);
        let frame = TimeSeriesFrame::new(vec![5, 6], values).unwrap();
        let mut buf = Vec::new();
        write_indexed(&mut buf, "y", frame.time(), frame.values()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,y_1,y_2\n5,"));
        assert!(!text.contains('\r'));
        assert_eq!(read_indexed::<f64, _>(&buf[..]).unwrap(), frame);
    }
}
