//! Multi-step forecasts through the companion (VAR(1)) form.
//!
//! With state `z_t = (d_t, …, d_{t−p+1})` of deviations from trend, the best
//! linear predictor is `ẑ_{T+ℓ} = A*ˡ z_T` and its error covariance is
//! `Σ_{i<ℓ} A*ⁱ Σ* A*ⁱᵀ`. Forecasts and covariances are the top-left `m`
//! components of these. Trend uncertainty is not propagated into the intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;
use crate::numerics::{linalg, Matrix};
use crate::scalar::Real;
use crate::trainer::FittedModel;
use crate::var_stability::CausalVarParams;

#[derive(Debug, Clone, PartialEq)]
pub struct CompanionSystem<T> {
    /// `mp × mp`: `A_1 … A_p` across the top, identity blocks below.
    pub a_star: Matrix<T>,
    /// `mp × mp`: `Σ` in the top-left block, zero elsewhere.
    pub sigma_star: Matrix<T>,
}

pub fn build_companion<T: Real>(causal: &CausalVarParams<T>) -> CompanionSystem<T> {
    let m = causal.dim();
    let mp = m * causal.lag_order();
    let mut sigma_star = Matrix::zeros(mp, mp);
    sigma_star.set_block(0, 0, &causal.sigma);
    CompanionSystem {
        a_star: linalg::companion_matrix(&causal.a_causal),
        sigma_star,
    }
}

/// Central interval level and how its normal quantile is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub level: f64,
    /// Round the quantile to two decimals (1.96 instead of 1.959964 at 95%).
    pub round_z: bool,
}

impl Default for IntervalSpec {
    fn default() -> Self {
        Self {
            level: 0.95,
            round_z: false,
        }
    }
}

impl IntervalSpec {
    pub fn z(&self) -> Result<f64> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "interval level must lie in (0, 1), got {}",
                self.level
            )));
        }
        let normal = Normal::standard();
        let z = normal.inverse_cdf(0.5 + self.level / 2.0);
        Ok(if self.round_z {
            (z * 100.0).round() / 100.0
        } else {
            z
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult<T> {
    /// `1..=h`.
    pub horizons: Vec<usize>,
    /// `h × m` point forecasts.
    pub points: Matrix<T>,
    pub error_covs: Vec<Matrix<T>>,
    pub lower: Matrix<T>,
    pub upper: Matrix<T>,
    /// Trend `μ_{T+1} … μ_{T+h}`.
    pub trend_path: Matrix<T>,
}

impl<T: Real> ForecastResult<T> {
    pub fn horizon(&self) -> usize {
        self.horizons.len()
    }

    /// Forecast standard deviation of component `c` at step `ℓ` (1-based).
    pub fn sd(&self, step: usize, c: usize) -> T {
        self.error_covs[step - 1][(c, c)].max(T::zero()).sqrt()
    }
}

/// Forecasts of deviations from trend, `h × m`, given the last `p` deviations
/// (`p × m`, oldest first).
pub fn forecast_deviations<T: Real>(
    causal: &CausalVarParams<T>,
    recent: &Matrix<T>,
    h: usize,
) -> Result<Matrix<T>> {
    if h == 0 {
        return Err(Error::HorizonZero);
    }
    let (m, p) = (causal.dim(), causal.lag_order());
    if recent.rows() != p || recent.cols() != m {
        return Err(Error::LengthMismatch {
            what: "recent deviations vs. lag order",
            expected: p,
            got: recent.rows(),
        });
    }
    let companion = build_companion(causal);
    let mut state = Matrix::zeros(m * p, 1);
    for k in 0..p {
        for c in 0..m {
            state[(k * m + c, 0)] = recent[(p - 1 - k, c)];
        }
    }
    let mut power = Matrix::identity(m * p);
    let mut out = Matrix::zeros(h, m);
    for step in 0..h {
        power = companion.a_star.matmul(&power);
        let z = power.matmul(&state);
        for c in 0..m {
            out[(step, c)] = z[(c, 0)];
        }
    }
    Ok(out)
}

/// Prediction-error covariances for steps `1..=h`.
pub fn forecast_covariance<T: Real>(
    causal: &CausalVarParams<T>,
    h: usize,
) -> Result<Vec<Matrix<T>>> {
    if h == 0 {
        return Err(Error::HorizonZero);
    }
    let m = causal.dim();
    let companion = build_companion(causal);
    let mp = companion.a_star.rows();
    let mut power = Matrix::identity(mp);
    let mut acc = Matrix::zeros(m, m);
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        // Σ* is zero outside its top-left block, so only the first m columns
        // of A*ⁱ contribute.
        let psi = power.block(0, 0, m, m);
        acc.add_assign(&psi.matmul(&causal.sigma).matmul_t(&psi));
        out.push(acc.symmetrized());
        power = companion.a_star.matmul(&power);
    }
    Ok(out)
}

/// `point ± z·√diag(cov)` for each step.
pub fn prediction_intervals<T: Real>(
    points: &Matrix<T>,
    covs: &[Matrix<T>],
    z: T,
) -> Result<(Matrix<T>, Matrix<T>)> {
    if covs.len() != points.rows() {
        return Err(Error::LengthMismatch {
            what: "covariances vs. forecast steps",
            expected: points.rows(),
            got: covs.len(),
        });
    }
    let half = Matrix::from_fn(points.rows(), points.cols(), |s, c| {
        z * covs[s][(c, c)].max(T::zero()).sqrt()
    });
    Ok((points.sub(&half), points.add(&half)))
}

/// Point forecasts `ŷ_{T+1} … ŷ_{T+h}` from the end of `y`, with the trend
/// continued by running the trained network past `T`.
pub fn point_forecast<T: Real>(
    model: &FittedModel<T>,
    y: &TimeSeriesFrame<T>,
    h: usize,
) -> Result<Matrix<T>> {
    Ok(forecast(model, y, h, IntervalSpec::default())?.points)
}

pub fn forecast<T: Real>(
    model: &FittedModel<T>,
    y: &TimeSeriesFrame<T>,
    h: usize,
    interval: IntervalSpec,
) -> Result<ForecastResult<T>> {
    if h == 0 {
        return Err(Error::HorizonZero);
    }
    let (n, p) = (y.len(), model.lag_order());
    if y.dim() != model.dim() {
        return Err(Error::LengthMismatch {
            what: "series dimension vs. model dimension",
            expected: model.dim(),
            got: y.dim(),
        });
    }
    if n < p {
        return Err(Error::TooShort { len: n, p });
    }
    let trend = model.trend(n + h);
    let recent = y
        .values()
        .slice_rows(n - p, n)
        .sub(&trend.slice_rows(n - p, n));
    let trend_path = trend.slice_rows(n, n + h);
    let points = forecast_deviations(&model.causal, &recent, h)?.add(&trend_path);
    let error_covs = forecast_covariance(&model.causal, h)?;
    let (lower, upper) = prediction_intervals(&points, &error_covs, T::lit(interval.z()?))?;
    Ok(ForecastResult {
        horizons: (1..=h).collect(),
        points,
        error_covs,
        lower,
        upper,
        trend_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ar1(a: f64, s2: f64) -> CausalVarParams<f64> {
        CausalVarParams {
            a_causal: vec![Matrix::from_rows(&[&[a]])],
            sigma: Matrix::from_rows(&[&[s2]]),
        }
    }

    #[test]
    fn companion_layout() {
        let c = CausalVarParams::<f64> {
            a_causal: vec![Matrix::from_rows(&[&[0.5]]), Matrix::from_rows(&[&[0.2]])],
            sigma: Matrix::from_rows(&[&[2.0]]),
        };
        let sys = build_companion(&c);
        assert_eq!(sys.a_star, Matrix::from_rows(&[&[0.5, 0.2], &[1.0, 0.0]]));
        assert_eq!(
            sys.sigma_star,
            Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 0.0]])
        );
        let one = ar1(0.3, 1.0);
        assert_eq!(build_companion(&one).a_star, one.a_causal[0]);
    }

    #[test]
    fn geometric_decay() {
        let f = forecast_deviations(&ar1(0.5, 1.0), &Matrix::from_rows(&[&[2.0]]), 3).unwrap();
        assert_eq!(f.col_to_vec(0), vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn covariance_accumulates() {
        let covs = forecast_covariance(&ar1(0.5, 1.0), 3).unwrap();
        assert_eq!(covs[0][(0, 0)], 1.0);
        assert!((covs[1][(0, 0)] - 1.25).abs() < 1e-15);
        assert!((covs[2][(0, 0)] - 1.3125).abs() < 1e-15);
    }

    #[test]
    fn interval_bounds() {
        let z = IntervalSpec::default().z().unwrap();
        assert!((z - 1.959964).abs() < 1e-6);
        let rounded = IntervalSpec {
            round_z: true,
            ..Default::default()
        }
        .z()
        .unwrap();
        assert_eq!(rounded, 1.96);
        let points = Matrix::zeros(1, 2);
        let cov = Matrix::diag(&[1.0, 4.0]);
        let (lo, hi) = prediction_intervals(&points, &[cov], 1.959964).unwrap();
        assert_eq!(lo.row(0), &[-1.959964, -3.919928]);
        assert_eq!(hi.row(0), &[1.959964, 3.919928]);
        let (lo, hi) = prediction_intervals(&points, &[Matrix::zeros(2, 2)], 1.959964).unwrap();
        assert_eq!(lo, points);
        assert_eq!(hi, points);
    }

    #[test]
    fn zero_horizon_is_rejected() {
        assert!(matches!(
            forecast_covariance(&ar1(0.5, 1.0), 0),
            Err(Error::HorizonZero)
        ));
        assert!(matches!(
            forecast_deviations(&ar1(0.5, 1.0), &Matrix::zeros(1, 1), 0),
            Err(Error::HorizonZero)
        ));
    }
}
