//! Synthetic data from the VAR-with-trend model.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;
use crate::likelihood::build_rp;
use crate::numerics::{linalg, Matrix};
use crate::scalar::Real;
use crate::var_stability::CausalVarParams;

/// Where the trend added to simulated deviations comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TrendSource<T> {
    /// CSV with header `t,mu_1,...,mu_m`.
    File(PathBuf),
    /// [`synth_trend`] with this seed.
    Synthetic {
        seed: u64,
    },
    Values(Matrix<T>),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// First `p` deviations drawn from their stationary joint law.
    Stationary,
    /// Start at zero and discard this many steps.
    BurnIn(usize),
}

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec<T> {
    pub causal: CausalVarParams<T>,
    pub trend: TrendSource<T>,
    pub len: usize,
    pub replications: usize,
    pub seed: u64,
    pub init: InitMode,
}

impl<T: Real> SimSpec<T> {
    pub fn new(causal: CausalVarParams<T>, len: usize, seed: u64) -> Self {
        Self {
            causal,
            trend: TrendSource::Zero,
            len,
            replications: 1,
            seed,
            init: InitMode::Stationary,
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.causal.lag_order();
        if self.len < p + 1 {
            return Err(Error::TooShort { len: self.len, p });
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The `len × m` trend this spec adds to every replication.
    pub fn resolve_trend(&self) -> Result<Matrix<T>> {
        let m = self.causal.dim();
        let trend = match &self.trend {
            TrendSource::Zero => return Ok(Matrix::zeros(self.len, m)),
            TrendSource::Synthetic { seed } => return Ok(synth_trend(m, self.len, *seed)),
            TrendSource::Values(v) => v.clone(),
            TrendSource::File(path) => crate::io::read_trend_csv(path)?.values().clone(),
        };
        if trend.cols() != m {
            return Err(Error::LengthMismatch {
                what: "trend columns vs. series dimension",
                expected: m,
                got: trend.cols(),
            });
        }
        if trend.rows() < self.len {
            return Err(Error::TrendLengthMismatch {
                needed: self.len,
                got: trend.rows(),
            });
        }
        Ok(trend.slice_rows(0, self.len))
    }
}

fn standard_normals<T: Real, R: Rng>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Random generator for replication `index` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Deviations `y_t − μ_t` for `t = 1..=len` drawn from the causal VAR.
pub fn simulate_deviations<T: Real, R: Rng>(
    causal: &CausalVarParams<T>,
    len: usize,
    init: InitMode,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let (m, p) = (causal.dim(), causal.lag_order());
    let chol_sigma = linalg::cholesky(&causal.sigma)?;
    let burn = match init {
        InitMode::Stationary => 0,
        InitMode::BurnIn(n) => n,
    };
    let total = len + burn;
    let mut dev = Matrix::zeros(total.max(p), m);
    let start = match init {
        InitMode::Stationary => {
            let rp = build_rp(causal, p)?.r_p;
            let chol_rp = linalg::cholesky(&rp)?;
            let z = Matrix::column(&standard_normals(rng, m * p));
            let d0 = chol_rp.matmul(&z);
            for k in 0..p.min(total) {
                for c in 0..m {
                    dev[(k, c)] = d0[(k * m + c, 0)];
                }
            }
            p
        }
        InitMode::BurnIn(_) => 0,
    };
    for t in start..total {
        let z = standard_normals::<T, _>(rng, m);
        for r in 0..m {
            let mut v = (0..=r).map(|c| chol_sigma[(r, c)] * z[c]).sum::<T>();
            for (i, a) in causal.a_causal.iter().enumerate() {
                if t > i {
                    let lagged = dev.row(t - i - 1);
                    v = v + (0..m).map(|c| a[(r, c)] * lagged[c]).sum::<T>();
                }
            }
            dev[(t, r)] = v;
        }
    }
    Ok(dev.slice_rows(burn, burn + len))
}

/// One frame per replication, each from its own random stream, so the output
/// does not depend on scheduling.
pub fn simulate<T: Real>(spec: &SimSpec<T>) -> Result<Vec<TimeSeriesFrame<T>>> {
    spec.validate()?;
    let trend = spec.resolve_trend()?;
    (0..spec.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(spec.seed, rep);
            let dev = simulate_deviations(&spec.causal, spec.len, spec.init, &mut rng)?;
            TimeSeriesFrame::from_values(dev.add(&trend))
        })
        .collect()
}

/// Shape of the synthetic trend generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthTrendConfig {
    pub min_bumps: usize,
    pub max_bumps: usize,
    /// Bump heights are uniform on `±amplitude`.
    pub amplitude: f64,
    /// Bump widths, in units of the whole series length.
    pub width_range: (f64, f64),
    /// Total drift over the series is uniform on `±drift`.
    pub drift: f64,
}

impl Default for SynthTrendConfig {
    fn default() -> Self {
        Self {
            min_bumps: 3,
            max_bumps: 6,
            amplitude: 2.0,
            width_range: (0.04, 0.12),
            drift: 2.0,
        }
    }
}

pub fn synth_trend<T: Real>(m: usize, len: usize, seed: u64) -> Matrix<T> {
    synth_trend_with(m, len, seed, &SynthTrendConfig::default())
}

/// `m` smooth curves: a linear drift plus a seeded number of logistic steps.
pub fn synth_trend_with<T: Real>(
    m: usize,
    len: usize,
    seed: u64,
    config: &SynthTrendConfig,
) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Matrix::zeros(len, m);
    for c in 0..m {
        let drift = rng.random_range(-config.drift..=config.drift);
        let count = rng.random_range(config.min_bumps..=config.max_bumps);
        let bumps: Vec<(f64, f64, f64)> = (0..count)
            .map(|_| {
                let height = rng.random_range(-config.amplitude..=config.amplitude);
                let center = rng.random_range(0.1..0.9);
                let width = rng.random_range(config.width_range.0..=config.width_range.1);
                (height, center, width)
            })
            .collect();
        for t in 0..len {
            let s = (t + 1) as f64 / len as f64;
            let bump: f64 = bumps
                .iter()
                .map(|&(h, c0, w)| h / (1.0 + (-(s - c0) / w).exp()))
                .sum();
            out[(t, c)] = T::lit(drift * s + bump);
        }
    }
    out
}

/// Mean absolute deviation between an estimated and a true trend.
pub fn mad<T: Real>(estimated: &Matrix<T>, truth: &Matrix<T>) -> Result<T> {
    if estimated.shape() != truth.shape() {
        return Err(Error::LengthMismatch {
            what: "estimated vs. true trend entries",
            expected: truth.len(),
            got: estimated.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyData);
    }
    let total: T = estimated
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    Ok(total / T::from_usize_lossy(truth.len()))
}

/// Three-series VAR(2) used for the estimation study.
pub fn benchmark_var2<T: Real>() -> CausalVarParams<T> {
    let a1 = Matrix::from_rows(&[
        &[-1.0842, -0.1245, 0.3137],
        &[-0.7008, -0.3754, -0.2064],
        &[0.3166, 0.3251, 0.2135],
    ]);
    let a2 = Matrix::from_rows(&[
        &[-0.5449, -0.3052, -0.1952],
        &[-0.4057, 0.5129, 0.3655],
        &[0.0054, -0.2911, 0.2066],
    ]);
    let sigma = Matrix::from_rows(&[
        &[0.4834, -0.2707, 0.1368],
        &[-0.2707, 0.4079, -0.0221],
        &[0.1368, -0.0221, 0.4103],
    ]);
    CausalVarParams {
        a_causal: vec![a1, a2],
        sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mad_hand_cases() {
        let est = Matrix::<f64>::from_rows(&[&[1.0], &[2.0]]);
        assert_eq!(mad(&est, &Matrix::zeros(2, 1)).unwrap(), 1.5);
        assert_eq!(mad(&est, &est).unwrap(), 0.0);
        let shifted = est.map(|v| v - 0.75);
        assert!((mad(&est, &shifted).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(
            mad(&est, &Matrix::zeros(3, 1)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn synthetic_trend_is_deterministic_and_smooth() {
        let a: Matrix<f64> = synth_trend(3, 800, 7);
        assert_eq!(a, synth_trend(3, 800, 7));
        assert_ne!(a, synth_trend(3, 800, 8));
        for c in 0..3 {
            let col = a.col_to_vec(c);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let max_step = col
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(0.0, f64::max);
            assert!(
                max_step < 0.05 * (hi - lo),
                "column {c}: step {max_step}, range {}",
                hi - lo
            );
        }
    }

    #[test]
    fn no_bumps_gives_a_straight_line() {
        let cfg = SynthTrendConfig {
            min_bumps: 0,
            max_bumps: 0,
            ..Default::default()
        };
        let a: Matrix<f64> = synth_trend_with(2, 50, 3, &cfg);
        for c in 0..2 {
            let col = a.col_to_vec(c);
            let slope = col[1] - col[0];
            assert!(col
                .windows(2)
                .all(|w| ((w[1] - w[0]) - slope).abs() < 1e-12));
        }
    }

    #[test]
    fn vanishing_noise_reproduces_the_trend() {
        let mut causal = benchmark_var2::<f64>();
        causal.sigma = causal.sigma.scale(1e-20);
        let mut spec = SimSpec::new(causal, 60, 1);
        spec.trend = TrendSource::Synthetic { seed: 4 };
        let y = &simulate(&spec).unwrap()[0];
        let mu = spec.resolve_trend().unwrap();
        assert!(y.values().sub(&mu).max_abs() < 1e-8);
    }

    #[test]
    fn short_trend_is_rejected() {
        let mut spec = SimSpec::new(benchmark_var2::<f64>(), 20, 1);
        spec.trend = TrendSource::Values(Matrix::zeros(10, 3));
        assert!(matches!(
            simulate(&spec),
            Err(Error::TrendLengthMismatch {
                needed: 20,
                got: 10
            })
        ));
    }

    #[test]
    fn replications_do_not_depend_on_count() {
        let mut spec = SimSpec::new(benchmark_var2::<f64>(), 30, 9);
        spec.replications = 3;
        let three = simulate(&spec).unwrap();
        spec.replications = 1;
        let one = simulate(&spec).unwrap();
        assert_eq!(three[0], one[0]);
        assert_ne!(three[0], three[1]);
    }

    #[test]
    fn trend_only_shifts_the_output() {
        let mut spec = SimSpec::new(benchmark_var2::<f64>(), 40, 2);
        let zero = simulate(&spec).unwrap().remove(0);
        spec.trend = TrendSource::Synthetic { seed: 11 };
        let shifted = simulate(&spec).unwrap().remove(0);
        let mu = spec.resolve_trend().unwrap();
        assert!(shifted.values().sub(zero.values()).sub(&mu).max_abs() < 1e-12);
    }
}
