//! Oracle experiments shared by the integration tests and the acceptance run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deepvarwt::frame::TimeSeriesFrame;
use deepvarwt::likelihood::log_likelihood;
use deepvarwt::numerics::Matrix;
use deepvarwt::trainer::loss_and_gradient;
use deepvarwt::trend_net::{make_regressors, RegressorKind, RegressorSpec, TrendNetParams};
use deepvarwt::var_stability::{enforce_causality, pacf_to_causal, CausalVarParams, PacfSequence};

use super::*;

/// Largest oracle radius and largest disagreement with the library radius over
/// `draws` causal maps of raw entries uniform on `±3`.
pub fn causality_draws(draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_radius, mut max_diff): (f64, f64) = (0.0, 0.0);
    for _ in 0..draws {
        let m = rng.random_range(1..=3);
        let p = rng.random_range(1..=3);
        let causal = enforce_causality(&random_raw(&mut rng, m, p, 3.0)).unwrap();
        let radius = eigen_companion_radius(&causal.a_causal);
        let ours = causal.spectral_radius().unwrap();
        max_radius = max_radius.max(radius).max(ours);
        max_diff = max_diff.max((ours - radius).abs());
    }
    (max_radius, max_diff)
}

/// Largest coefficient or variance discrepancy between the scalar map and the
/// Durbin–Levinson recursion.
pub fn durbin_levinson_discrepancy(draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let p = rng.random_range(1..=6);
        let pacf: Vec<f64> = (0..p).map(|_| rng.random_range(-0.99..0.99)).collect();
        let l = rng.random_range(0.1..3.0);
        let seq = PacfSequence {
            p_mats: pacf.iter().map(|&v| Matrix::from_rows(&[&[v]])).collect(),
        };
        let causal: CausalVarParams<f64> =
            pacf_to_causal(&seq, &Matrix::from_rows(&[&[l]])).unwrap();
        for (a, e) in causal.a_causal.iter().zip(durbin_levinson(&pacf)) {
            worst = worst.max((a[(0, 0)] - e).abs());
        }
        worst = worst.max((causal.sigma[(0, 0)] - l * l).abs());
    }
    worst
}

/// Largest absolute gap between the library log-likelihood and the dense
/// Gaussian density over `models` stable draws with `m, p ≤ 2`, `T ≤ 12`.
pub fn likelihood_discrepancy(models: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < models {
        let m = rng.random_range(1..=2);
        let p = rng.random_range(1..=2);
        let n = rng.random_range(p..=12);
        let causal = enforce_causality(&well_scaled_raw(&mut rng, m, p)).unwrap();
        if causal.spectral_radius().unwrap() > 0.95 {
            continue;
        }
        let y = Matrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
        let mu = Matrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let frame = TimeSeriesFrame::from_values(y.clone()).unwrap();
        let ours = log_likelihood(&frame, &mu, &causal).unwrap();
        worst = worst.max((ours - brute_force_loglik(&y, &mu, &causal)).abs());
        checked += 1;
    }
    worst
}

/// Outcome of comparing the analytic gradient of `−ℓ` with central
/// differences.
pub struct GradientCheck {
    pub checked: usize,
    pub expected: usize,
    pub failures: Vec<String>,
}

/// Central-difference check of every trend and VAR parameter on an
/// `m = 2, p = 2, T = 30`, 4-unit instance: step `h`, tolerance
/// `rel·|fd| + abs`.
pub fn gradient_check(seed: u64, h: f64, rel: f64, abs: f64) -> GradientCheck {
    let (m, p, n, units) = (2, 2, 30, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RegressorSpec::new(RegressorKind::PolynomialWithReciprocals { degree: 3 }, n);
    let xs = make_regressors::<f64>(&spec, n);
    let mut trend = TrendNetParams::<f64>::init(spec.input_dim(), units, m, &mut rng);
    for b in trend.blocks_mut() {
        for v in b.as_mut_slice() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let raw = well_scaled_raw(&mut rng, m, p);
    let y = Matrix::from_fn(n, m, |t, c| {
        (t as f64 * 0.2 + c as f64).sin() + rng.random_range(-0.5..0.5)
    });

    let (_, grads) = loss_and_gradient(&y, &xs, &trend, &raw).unwrap();
    let mut out = GradientCheck {
        checked: 0,
        expected: trend.blocks().iter().map(|b| b.len()).sum::<usize>()
            + p * m * m
            + m * (m + 1) / 2,
        failures: Vec::new(),
    };
    let mut check =
        |analytic: f64, loss_at: &mut dyn FnMut(f64) -> f64, base: f64, label: String| {
            let fd = (loss_at(base + h) - loss_at(base - h)) / (2.0 * h);
            if (analytic - fd).abs() > rel * fd.abs() + abs {
                out.failures.push(format!(
                    "{label}: analytic {analytic:e}, finite difference {fd:e}"
                ));
            }
            out.checked += 1;
        };

    for b in 0..trend.blocks().len() {
        for i in 0..trend.blocks()[b].len() {
            let base = trend.blocks()[b].as_slice()[i];
            let mut loss_at = |v: f64| {
                let mut t = trend.clone();
                t.blocks_mut()[b].as_mut_slice()[i] = v;
                loss_and_gradient(&y, &xs, &t, &raw).unwrap().0
            };
            check(
                grads[b].as_slice()[i],
                &mut loss_at,
                base,
                format!("trend block {b} entry {i}"),
            );
        }
    }
    let nt = trend.blocks().len();
    for lag in 0..p {
        for i in 0..m * m {
            let base = raw.a_raw[lag].as_slice()[i];
            let mut loss_at = |v: f64| {
                let mut r = raw.clone();
                r.a_raw[lag].as_mut_slice()[i] = v;
                loss_and_gradient(&y, &xs, &trend, &r).unwrap().0
            };
            check(
                grads[nt + lag].as_slice()[i],
                &mut loss_at,
                base,
                format!("A_{} entry {i}", lag + 1),
            );
        }
    }
    for i in 0..raw.l_raw.len() {
        let base = raw.l_raw[i];
        let mut loss_at = |v: f64| {
            let mut r = raw.clone();
            r.l_raw[i] = v;
            loss_and_gradient(&y, &xs, &trend, &r).unwrap().0
        };
        check(
            grads[nt + p].as_slice()[i],
            &mut loss_at,
            base,
            format!("L entry {i}"),
        );
    }
    out
}
