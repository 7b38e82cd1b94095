//! Rolling-origin forecast evaluation.
//!
//! Origin `i` trains on a fixed-length window ending `origins − 1 − i` steps
//! before the last forecastable point, forecasts the next `max(horizons)`
//! steps, and scores each component with APE and SIS. Origins are independent
//! fits and run in parallel.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecaster::{self, IntervalSpec};
use crate::frame::TimeSeriesFrame;
use crate::metrics::{self, aggregate, EvalConfig, ScoreTable};
use crate::scalar::Real;
use crate::trainer::{self, TrainConfig};

/// Scores of one component at one origin, one entry per horizon.
type ScoreRow = Vec<Option<f64>>;

/// Per-origin scores for one component series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesScores {
    pub ape: ScoreTable,
    pub sis: ScoreTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub series: usize,
    /// Label of the horizon selection: a single step (`"3"`) or a range (`"1-4"`).
    pub horizons: String,
    pub ape: f64,
    pub sis: f64,
    /// APE entries dropped because the actual was zero.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub series: Vec<SeriesScores>,
    pub summary: Vec<SummaryRow>,
}

/// First index of the training window for each origin.
pub fn origin_starts(len: usize, config: &EvalConfig) -> Result<Vec<usize>> {
    let needed = config.window + config.max_horizon() + config.origins - 1;
    if len < needed {
        return Err(Error::TooShort { len, p: needed - 1 });
    }
    let first = len - needed;
    Ok((0..config.origins).map(|i| first + i).collect())
}

pub fn evaluate<T: Real>(
    y: &TimeSeriesFrame<T>,
    train: &TrainConfig,
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    train.validate()?;
    let starts = origin_starts(y.len(), config)?;
    let max_h = config.max_horizon();
    let interval = IntervalSpec {
        level: 1.0 - config.alpha,
        round_z: false,
    };
    let m = y.dim();

    // [origin][component] -> (ape row, sis row)
    let per_origin: Vec<Vec<(ScoreRow, ScoreRow)>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &start)| {
            let window = y.window(start, config.window)?;
            let model = trainer::fit(&window, train)?;
            let fc = forecaster::forecast(&model, &window, max_h, interval)?;
            log::info!("origin {} of {} fitted", i + 1, config.origins);
            (0..m)
                .map(|c| {
                    let history: Vec<T> = window.values().col_to_vec(c);
                    let mut ape_row = Vec::with_capacity(config.horizons.len());
                    let mut sis_row = Vec::with_capacity(config.horizons.len());
                    for &h in &config.horizons {
                        let actual = y.values()[(start + config.window + h - 1, c)];
                        let s = h - 1;
                        ape_row.push(match metrics::ape(actual, fc.points[(s, c)]) {
                            Ok(v) => Some(v.as_f64()),
                            Err(Error::ZeroActual) => None,
                            Err(e) => return Err(e),
                        });
                        let score = metrics::sis(
                            actual,
                            fc.lower[(s, c)],
                            fc.upper[(s, c)],
                            &history,
                            config.alpha,
                            config.seasonality,
                        )?;
                        sis_row.push(Some(score.as_f64()));
                    }
                    Ok((ape_row, sis_row))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let series: Vec<SeriesScores> = (0..m)
        .map(|c| SeriesScores {
            ape: per_origin.iter().map(|o| o[c].0.clone()).collect(),
            sis: per_origin.iter().map(|o| o[c].1.clone()).collect(),
        })
        .collect();

    let mut selections: Vec<(String, Vec<usize>)> = config
        .horizons
        .iter()
        .enumerate()
        .map(|(pos, h)| (h.to_string(), vec![pos]))
        .collect();
    for cap in [4, 8] {
        let pos: Vec<usize> = (0..config.horizons.len())
            .filter(|&k| config.horizons[k] <= cap)
            .collect();
        if pos.len() > 1 && config.max_horizon() >= cap {
            selections.push((format!("1-{cap}"), pos));
        }
    }
    let mut summary = Vec::new();
    for (c, scores) in series.iter().enumerate() {
        for (label, pos) in &selections {
            let (ape, excluded) = aggregate(&scores.ape, pos)?;
            let (sis, _) = aggregate(&scores.sis, pos)?;
            summary.push(SummaryRow {
                series: c + 1,
                horizons: label.clone(),
                ape,
                sis,
                excluded,
            });
        }
    }
    Ok(EvalReport {
        config: config.clone(),
        series,
        summary,
    })
}

/// Rows `series,horizons,ape,sis,excluded`.
pub fn write_summary<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["series", "horizons", "ape", "sis", "excluded"])?;
    for row in &report.summary {
        w.write_record([
            row.series.to_string(),
            row.horizons.clone(),
            row.ape.to_string(),
            row.sis.to_string(),
            row.excluded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `series,origin,horizon,ape,sis`, empty where a score was excluded.
pub fn write_scores<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["series", "origin", "horizon", "ape", "sis"])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (c, s) in report.series.iter().enumerate() {
        for (o, (ape_row, sis_row)) in s.ape.iter().zip(&s.sis).enumerate() {
            for (k, &h) in report.config.horizons.iter().enumerate() {
                w.write_record([
                    (c + 1).to_string(),
                    (o + 1).to_string(),
                    h.to_string(),
                    fmt(ape_row[k]),
                    fmt(sis_row[k]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
