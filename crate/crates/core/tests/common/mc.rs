//! Monte Carlo experiments driven by an independent simulation loop.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use deepvarwt::forecaster::{forecast_deviations, prediction_intervals, IntervalSpec};
use deepvarwt::numerics::Matrix;
use deepvarwt::var_stability::CausalVarParams;

use super::to_na;

/// Sample covariance of the rows of `x`, centered at the sample mean.
pub fn sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] - mean[c]);
    centered.transpose() * &centered / (n - 1.0)
}

fn normals<R: Rng>(rng: &mut R, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.sample(StandardNormal))
}

/// Empirical covariance of the `ℓ`-step forecast error for each `ℓ` in `steps`,
/// from `paths` continuations of a fixed history.
pub fn forecast_error_covs(
    causal: &CausalVarParams<f64>,
    steps: &[usize],
    paths: usize,
    seed: u64,
) -> Vec<DMatrix<f64>> {
    let (m, p) = (causal.dim(), causal.lag_order());
    let h = steps.iter().copied().max().unwrap();
    let recent = Matrix::from_fn(p, m, |k, c| 0.5 * (k as f64 + 1.0) - 0.3 * c as f64);
    let point = forecast_deviations(causal, &recent, h).unwrap();
    let a: Vec<DMatrix<f64>> = causal.a_causal.iter().map(to_na).collect();
    let chol = to_na(&causal.sigma).cholesky().unwrap().l();
    let mut errors: Vec<DMatrix<f64>> = steps.iter().map(|_| DMatrix::zeros(paths, m)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for path in 0..paths {
        let mut hist: Vec<DVector<f64>> = (0..p)
            .map(|k| DVector::from_row_slice(recent.row(k)))
            .collect();
        for step in 1..=h {
            let n = hist.len();
            let mut next = &chol * normals(&mut rng, m);
            for (i, ai) in a.iter().enumerate() {
                next += ai * &hist[n - 1 - i];
            }
            if let Some(slot) = steps.iter().position(|&s| s == step) {
                for c in 0..m {
                    errors[slot][(path, c)] = next[c] - point[(step - 1, c)];
                }
            }
            hist.push(next);
        }
    }
    errors
        .iter()
        .map(|e| {
            let n = e.nrows() as f64;
            e.transpose() * e / n
        })
        .collect()
}

/// Share of one-step intervals at `level` that contain the next value of a
/// scalar AR(1) with known coefficient and innovation variance.
pub fn ar1_coverage(a: f64, sigma2: f64, level: f64, reps: usize, seed: u64) -> f64 {
    let causal = CausalVarParams {
        a_causal: vec![Matrix::from_rows(&[&[a]])],
        sigma: Matrix::from_rows(&[&[sigma2]]),
    };
    let z = IntervalSpec {
        level,
        round_z: false,
    }
    .z()
    .unwrap();
    let sd = sigma2.sqrt();
    let cov = deepvarwt::forecaster::forecast_covariance(&causal, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..reps {
        let mut y = sd / (1.0 - a * a).sqrt() * rng.sample::<f64, _>(StandardNormal);
        for _ in 0..20 {
            y = a * y + sd * rng.sample::<f64, _>(StandardNormal);
        }
        let point = forecast_deviations(&causal, &Matrix::from_rows(&[&[y]]), 1).unwrap();
        let (lo, hi) = prediction_intervals(&point, &cov, z).unwrap();
        let next = a * y + sd * rng.sample::<f64, _>(StandardNormal);
        if lo[(0, 0)] <= next && next <= hi[(0, 0)] {
            hits += 1;
        }
    }
    hits as f64 / reps as f64
}
