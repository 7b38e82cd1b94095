mod common;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use deepvarwt::forecaster::forecast_covariance;
use deepvarwt::numerics::Matrix;
use deepvarwt::simulation::{benchmark_var2, replication_rng, simulate_deviations, InitMode};
use deepvarwt::var_stability::CausalVarParams;

use common::mc::*;
use common::*;

/// Sample `Cov(y_{t+k}, y_t)` of the rows of `x`.
fn sample_autocov(x: &Matrix<f64>, k: usize) -> DMatrix<f64> {
    let (n, m) = x.shape();
    let mean: Vec<f64> = (0..m)
        .map(|c| (0..n).map(|t| x[(t, c)]).sum::<f64>() / n as f64)
        .collect();
    DMatrix::from_fn(m, m, |i, j| {
        (0..n - k)
            .map(|t| (x[(t + k, i)] - mean[i]) * (x[(t, j)] - mean[j]))
            .sum::<f64>()
            / n as f64
    })
}

#[test]
fn white_noise_moments() {
    let sigma = Matrix::from_rows(&[&[1.0, 0.3], &[0.3, 0.5]]);
    let causal = CausalVarParams {
        a_causal: vec![Matrix::zeros(2, 2)],
        sigma: sigma.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let x = simulate_deviations(&causal, 100_000, InitMode::Stationary, &mut rng).unwrap();
    let g0 = sample_autocov(&x, 0);
    let g1 = sample_autocov(&x, 1);
    assert!(max_scaled_diff(&g0, &to_na(&sigma)) < 0.02);
    assert!(g1.amax() < 0.02);
    for c in 0..2 {
        let mean = (0..x.rows()).map(|t| x[(t, c)]).sum::<f64>() / x.rows() as f64;
        assert!(mean.abs() < 0.02);
    }
}

#[test]
fn benchmark_autocovariances_are_reproduced() {
    let c = benchmark_var2::<f64>();
    let theory = ma_autocovariances(&c, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = simulate_deviations(&c, 200_000, InitMode::Stationary, &mut rng).unwrap();
    for k in 0..=1 {
        let scaled = {
            let emp = sample_autocov(&x, k);
            let mut worst: f64 = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let s = (theory[0][(i, i)] * theory[0][(j, j)]).sqrt();
                    worst = worst.max((emp[(i, j)] - theory[k][(i, j)]).abs() / s);
                }
            }
            worst
        };
        assert!(scaled < 0.03, "lag {k}: scaled discrepancy {scaled}");
    }
}

fn initial_block_cov(init: InitMode, draws: usize, seed: u64) -> DMatrix<f64> {
    let c = benchmark_var2::<f64>();
    let (m, p) = (c.dim(), c.lag_order());
    let mut stacked = DMatrix::zeros(draws, m * p);
    for d in 0..draws {
        let mut rng = replication_rng(seed, d);
        let x = simulate_deviations(&c, p, init, &mut rng).unwrap();
        for k in 0..p {
            for col in 0..m {
                stacked[(d, k * m + col)] = x[(k, col)];
            }
        }
    }
    sample_cov(&stacked)
}

fn stacked_theory() -> DMatrix<f64> {
    let c = benchmark_var2::<f64>();
    let g = ma_autocovariances(&c, 1);
    let mut r = DMatrix::zeros(6, 6);
    for i in 0..2 {
        for j in 0..2 {
            let block = if i >= j {
                g[i - j].clone()
            } else {
                g[j - i].transpose()
            };
            r.view_mut((i * 3, j * 3), (3, 3)).copy_from(&block);
        }
    }
    r
}

#[test]
fn stationary_start_has_the_stationary_covariance() {
    let emp = initial_block_cov(InitMode::Stationary, 40_000, 43);
    let d = max_scaled_diff(&emp, &stacked_theory());
    assert!(d < 0.05, "scaled discrepancy {d}");
}

#[test]
fn burn_in_start_matches_the_stationary_covariance() {
    let emp = initial_block_cov(InitMode::BurnIn(200), 20_000, 44);
    let d = max_scaled_diff(&emp, &stacked_theory());
    assert!(d < 0.05, "scaled discrepancy {d}");
}

#[test]
fn forecast_error_covariance_matches_simulation() {
    let c = benchmark_var2::<f64>();
    let steps = [1, 2, 4];
    let emp = forecast_error_covs(&c, &steps, 100_000, 45);
    let theory = forecast_covariance(&c, 4).unwrap();
    for (e, &s) in emp.iter().zip(&steps) {
        let d = max_scaled_diff(e, &to_na(&theory[s - 1]));
        assert!(d < 0.02, "step {s}: scaled discrepancy {d}");
    }
}

#[test]
fn one_step_intervals_have_nominal_coverage() {
    let rate = ar1_coverage(0.5, 1.0, 0.95, 10_000, 46);
    assert!((0.94..=0.96).contains(&rate), "coverage {rate}");
}
