//! Exact Gaussian log-likelihood of a VAR(p) around a trend.
//!
//! The first `p` deviations `y_t − μ_t` are scored under their stationary
//! joint law `N(0, R_p)`; the remaining `T − p` through the conditional
//! innovations `ε_t` with covariance `Σ`.

use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;
use crate::numerics::{Matrix, Tape, Var};
use crate::scalar::Real;
use crate::var_stability::{CausalVarParams, CausalVars};

/// Covariance of `(y_1ᵀ, …, y_pᵀ)ᵀ` under stationarity: block `(i, j)` is
/// `Γ(i − j)`, with `Γ(−k) = Γ(k)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialBlockCov<T> {
    pub r_p: Matrix<T>,
}

pub fn build_rp<T: Real>(causal: &CausalVarParams<T>, p: usize) -> Result<InitialBlockCov<T>> {
    let m = causal.dim();
    let gammas = causal.autocovariances(p.saturating_sub(1))?;
    let mut r_p = Matrix::zeros(m * p, m * p);
    for i in 0..p {
        for j in 0..p {
            let block = if i >= j {
                gammas[i - j].clone()
            } else {
                gammas[j - i].transpose()
            };
            r_p.set_block(i * m, j * m, &block);
        }
    }
    Ok(InitialBlockCov { r_p })
}

fn check_lengths<T: Real>(y: &Matrix<T>, mu: &Matrix<T>, p: usize) -> Result<()> {
    if mu.shape() != y.shape() {
        return Err(Error::LengthMismatch {
            what: "trend rows vs. observation rows",
            expected: y.rows(),
            got: mu.rows(),
        });
    }
    if y.rows() < p {
        return Err(Error::TooShort { len: y.rows(), p });
    }
    Ok(())
}

/// Innovations `ε_{p+1} … ε_T` as rows of a `(T − p) × m` matrix.
pub fn residuals<T: Real>(
    y: &TimeSeriesFrame<T>,
    mu: &Matrix<T>,
    causal: &CausalVarParams<T>,
) -> Result<Matrix<T>> {
    let p = causal.lag_order();
    check_lengths(y.values(), mu, p)?;
    let dev = y.values().sub(mu);
    let (n, m) = dev.shape();
    let mut eps = Matrix::zeros(n - p, m);
    for t in p..n {
        for r in 0..m {
            let mut e = dev[(t, r)];
            for (i, a) in causal.a_causal.iter().enumerate() {
                let lagged = dev.row(t - i - 1);
                e = e - (0..m).map(|c| a[(r, c)] * lagged[c]).sum::<T>();
            }
            eps[(t - p, r)] = e;
        }
    }
    Ok(eps)
}

/// Records `ℓ` for observations `y` (`T × m`), a trend node `mu` (`T × m`) and
/// causal VAR handles.
pub fn log_likelihood_on_tape<T: Real>(
    tape: &mut Tape<T>,
    y: &Matrix<T>,
    mu: Var,
    causal: &CausalVars,
) -> Result<Var> {
    let p = causal.a.len();
    check_lengths(y, tape.value(mu), p)?;
    let (n, m) = y.shape();
    let mp = m * p;

    let yv = tape.constant(y.clone());
    let dev = tape.sub(yv, mu);

    // Companion matrix and companion innovation covariance.
    let mut index = vec![None; mp * mp];
    for (i, _) in causal.a.iter().enumerate() {
        for r in 0..m {
            for c in 0..m {
                index[r * mp + i * m + c] = Some((i as u32, (r * m + c) as u32));
            }
        }
    }
    let top = tape.gather(&causal.a, mp, mp, index);
    let mut shift = Matrix::zeros(mp, mp);
    for k in m..mp {
        shift[(k, k - m)] = T::one();
    }
    let shift = tape.constant(shift);
    let companion = tape.add(top, shift);
    let mut index = vec![None; mp * mp];
    for r in 0..m {
        for c in 0..m {
            index[r * mp + c] = Some((0, (r * m + c) as u32));
        }
    }
    let sigma_star = tape.gather(&[causal.sigma], mp, mp, index);

    // The companion stationary covariance orders blocks newest first, so the
    // initial block is stacked as (d_p, …, d_1).
    let gamma_star = tape.lyapunov(companion, sigma_star)?;
    let chol_r = tape.cholesky(gamma_star)?;
    let mut index = Vec::with_capacity(mp);
    for k in 0..p {
        let row = p - 1 - k;
        index.extend((0..m).map(|c| Some((0u32, (row * m + c) as u32))));
    }
    let d_init = tape.gather(&[dev], mp, 1, index);
    let z_init = tape.solve_lower(chol_r, d_init, false)?;
    let quad_init = tape.sum_squares(z_init);
    let logdet_r = tape.logdet_gram_of_triangular(chol_r);

    let mut total = tape.add(logdet_r, quad_init);
    if n > p {
        let mut eps = tape.slice_rows(dev, p, n);
        for (i, &a) in causal.a.iter().enumerate() {
            let lagged = tape.slice_rows(dev, p - i - 1, n - i - 1);
            let pred = tape.matmul_t(lagged, a);
            eps = tape.sub(eps, pred);
        }
        let chol_s = tape.cholesky(causal.sigma)?;
        let eps_t = tape.transpose(eps);
        let z = tape.solve_lower(chol_s, eps_t, false)?;
        let quad = tape.sum_squares(z);
        let logdet_s = tape.logdet_gram_of_triangular(chol_s);
        let logdet_all = tape.scale(logdet_s, T::from_usize_lossy(n - p));
        total = tape.add(total, logdet_all);
        total = tape.add(total, quad);
    }
    let two_pi = T::lit(2.0 * std::f64::consts::PI);
    let constant = tape.constant(Matrix::from_vec(
        1,
        1,
        vec![T::from_usize_lossy(m * n) * two_pi.ln()],
    ));
    total = tape.add(total, constant);
    Ok(tape.scale(total, T::lit(-0.5)))
}

pub fn log_likelihood<T: Real>(
    y: &TimeSeriesFrame<T>,
    mu: &Matrix<T>,
    causal: &CausalVarParams<T>,
) -> Result<T> {
    let mut tape = Tape::new();
    let mu_v = tape.constant(mu.clone());
    let vars = CausalVars {
        a: causal
            .a_causal
            .iter()
            .map(|a| tape.constant(a.clone()))
            .collect(),
        sigma: tape.constant(causal.sigma.clone()),
    };
    let ll = log_likelihood_on_tape(&mut tape, y.values(), mu_v, &vars)?;
    let value = tape.scalar(ll);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("log-likelihood"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Matrix<f64> {
        Matrix::from_rows(&[&[x]])
    }

    #[test]
    fn iid_standard_normal_at_zero() {
        let y = TimeSeriesFrame::from_values(Matrix::zeros(3, 1)).unwrap();
        let causal = CausalVarParams {
            a_causal: vec![s(0.0)],
            sigma: s(1.0),
        };
        let ll = log_likelihood(&y, &Matrix::zeros(3, 1), &causal).unwrap();
        let expected = -1.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((ll - expected).abs() < 1e-14);
        assert!((ll + 2.756815).abs() < 1e-6);
    }

    #[test]
    fn ar1_initial_block() {
        let causal = CausalVarParams {
            a_causal: vec![s(0.5)],
            sigma: s(1.0),
        };
        let rp = build_rp(&causal, 1).unwrap();
        assert!((rp.r_p[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn white_noise_initial_block_is_block_diagonal() {
        let sigma = Matrix::<f64>::from_rows(&[&[1.0, 0.2], &[0.2, 0.5]]);
        let causal = CausalVarParams {
            a_causal: vec![Matrix::zeros(2, 2); 2],
            sigma: sigma.clone(),
        };
        let rp = build_rp(&causal, 2).unwrap().r_p;
        let mut expected = Matrix::zeros(4, 4);
        expected.set_block(0, 0, &sigma);
        expected.set_block(2, 2, &sigma);
        assert!(rp.sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn residuals_without_dynamics_are_deviations() {
        let y = TimeSeriesFrame::from_values(Matrix::<f64>::from_rows(&[
            &[1.0, 2.0],
            &[3.0, 5.0],
            &[-1.0, 0.0],
        ]))
        .unwrap();
        let mu = Matrix::from_rows(&[&[0.5, 0.5], &[1.0, 1.0], &[0.0, 0.0]]);
        let causal = CausalVarParams {
            a_causal: vec![Matrix::zeros(2, 2)],
            sigma: Matrix::identity(2),
        };
        let e = residuals(&y, &mu, &causal).unwrap();
        assert_eq!(e, Matrix::from_rows(&[&[2.0, 4.0], &[-1.0, 0.0]]));
        let on_trend = residuals(&y, y.values(), &causal).unwrap();
        assert_eq!(on_trend, Matrix::zeros(2, 2));
    }

    #[test]
    fn lag_order_equal_to_length_uses_initial_block_only() {
        let y = TimeSeriesFrame::from_values(Matrix::from_rows(&[&[0.3], &[-0.4]])).unwrap();
        let causal = CausalVarParams {
            a_causal: vec![s(0.35), s(0.3)],
            sigma: s(1.0),
        };
        let ll = log_likelihood(&y, &Matrix::zeros(2, 1), &causal).unwrap();
        let rp = build_rp(&causal, 2).unwrap().r_p;
        // (d_1, d_2) = (0.3, -0.4); 2x2 Gaussian density by hand.
        let det = rp[(0, 0)] * rp[(1, 1)] - rp[(0, 1)] * rp[(1, 0)];
        let (a, b) = (0.3, -0.4);
        let quad = (rp[(1, 1)] * a * a - 2.0 * rp[(0, 1)] * a * b + rp[(0, 0)] * b * b) / det;
        let expected = -0.5 * (2.0 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad);
        assert!((ll - expected).abs() < 1e-13);
    }

    #[test]
    fn length_mismatch_is_reported() {
        let y = TimeSeriesFrame::from_values(Matrix::<f64>::zeros(4, 1)).unwrap();
        let causal = CausalVarParams {
            a_causal: vec![s(0.1)],
            sigma: s(1.0),
        };
        assert!(matches!(
            log_likelihood(&y, &Matrix::zeros(3, 1), &causal),
            Err(Error::LengthMismatch { .. })
        ));
    }
}
