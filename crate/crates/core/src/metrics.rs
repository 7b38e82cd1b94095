//! Forecast accuracy scores: absolute percentage error and the scaled
//! interval score, plus averaging over rolling origins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// One minus the interval level.
    pub alpha: f64,
    /// Seasonal period of the scaling denominator.
    pub seasonality: usize,
    pub horizons: Vec<usize>,
    pub origins: usize,
    /// Training window length at every origin.
    pub window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            seasonality: 4,
            horizons: (1..=8).collect(),
            origins: 20,
            window: 166,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.seasonality == 0 {
            return Err(Error::InvalidConfig(
                "seasonality must be at least 1".into(),
            ));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidConfig(
                "horizons must be a nonempty list of positive steps".into(),
            ));
        }
        if self.origins == 0 {
            return Err(Error::InvalidConfig("origins must be at least 1".into()));
        }
        if self.window <= self.seasonality {
            return Err(Error::InvalidConfig(
                "window must exceed the seasonality".into(),
            ));
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }
}

/// `100·|y − ŷ| / |y|`.
pub fn ape<T: Real>(actual: T, forecast: T) -> Result<T> {
    if actual == T::zero() {
        return Err(Error::ZeroActual);
    }
    Ok(T::lit(100.0) * (actual - forecast).abs() / actual.abs())
}

/// Mean absolute seasonal difference `(1/(n − s)) Σ_{t>s} |x_t − x_{t−s}|`.
pub fn seasonal_scale<T: Real>(history: &[T], s: usize) -> Result<T> {
    if s == 0 || history.len() <= s {
        return Err(Error::TooShort {
            len: history.len(),
            p: s,
        });
    }
    let total: T = (s..history.len())
        .map(|t| (history[t] - history[t - s]).abs())
        .sum();
    let scale = total / T::from_usize_lossy(history.len() - s);
    if scale > T::zero() {
        Ok(scale)
    } else {
        Err(Error::DegenerateScale)
    }
}

/// Interval score of `[lower, upper]` at `actual`, divided by the seasonal
/// scale of `history`. Values exactly on a bound are not penalized.
pub fn sis<T: Real>(
    actual: T,
    lower: T,
    upper: T,
    history: &[T],
    alpha: f64,
    s: usize,
) -> Result<T> {
    if lower > upper {
        return Err(Error::InvalidConfig(
            "interval lower bound exceeds upper bound".into(),
        ));
    }
    let scale = seasonal_scale(history, s)?;
    let k = T::lit(2.0 / alpha);
    let mut score = upper - lower;
    if actual < lower {
        score = score + k * (lower - actual);
    }
    if actual > upper {
        score = score + k * (actual - upper);
    }
    Ok(score / scale)
}

/// Scores indexed `[origin][horizon position]`; `None` marks an excluded
/// entry (an APE with a zero actual).
pub type ScoreTable = Vec<Vec<Option<f64>>>;

/// Mean over origins at each selected horizon position, then the mean over
/// those horizons. Returns the average and the number of excluded entries.
pub fn aggregate(scores: &ScoreTable, positions: &[usize]) -> Result<(f64, usize)> {
    if positions.is_empty() {
        return Err(Error::EmptySelection("no horizons selected"));
    }
    let mut excluded = 0;
    let mut per_h = Vec::with_capacity(positions.len());
    for &h in positions {
        let vals: Vec<f64> = scores
            .iter()
            .filter_map(|row| {
                let v = row.get(h).copied().flatten();
                if v.is_none() {
                    excluded += 1;
                }
                v
            })
            .collect();
        if vals.is_empty() {
            return Err(Error::EmptySelection(
                "no usable scores at a selected horizon",
            ));
        }
        per_h.push(vals.iter().sum::<f64>() / vals.len() as f64);
    }
    Ok((per_h.iter().sum::<f64>() / per_h.len() as f64, excluded))
}
