//! Residual diagnostics exported as tables: sample autocorrelations and
//! normal quantile–quantile pairs.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Biased sample autocorrelations `r_k = c_k / c_0` of each column for lags
/// `0..=maxlag`, where `c_k = (1/n) Σ (x_t − x̄)(x_{t+k} − x̄)`. Returns a
/// `(maxlag + 1) × m` matrix.
pub fn acf<T: Real>(x: &Matrix<T>, maxlag: usize) -> Matrix<T> {
    let (n, m) = x.shape();
    let mut out = Matrix::zeros(maxlag + 1, m);
    for c in 0..m {
        let col = x.col_to_vec(c);
        let nt = T::from_usize_lossy(n);
        let mean = col.iter().copied().sum::<T>() / nt;
        let cov = |k: usize| {
            (0..n.saturating_sub(k))
                .map(|t| (col[t] - mean) * (col[t + k] - mean))
                .sum::<T>()
                / nt
        };
        let c0 = cov(0);
        for k in 0..=maxlag {
            out[(k, c)] = if c0 > T::zero() {
                cov(k) / c0
            } else {
                T::zero()
            };
        }
    }
    out
}

/// For each column, sorted standardized values paired with standard normal
/// quantiles at plotting positions `(i − 0.5)/n`. Returns
/// `(theoretical, empirical)`, both `n × m`.
pub fn qq_pairs<T: Real>(x: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let (n, m) = x.shape();
    let normal = Normal::standard();
    let theoretical_col: Vec<T> = (0..n)
        .map(|i| T::lit(normal.inverse_cdf((i as f64 + 0.5) / n as f64)))
        .collect();
    let mut theoretical = Matrix::zeros(n, m);
    let mut empirical = Matrix::zeros(n, m);
    for c in 0..m {
        let mut col = x.col_to_vec(c);
        let nt = T::from_usize_lossy(n);
        let mean = col.iter().copied().sum::<T>() / nt;
        let sd = (col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nt).sqrt();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        for i in 0..n {
            theoretical[(i, c)] = theoretical_col[i];
            empirical[(i, c)] = if sd > T::zero() {
                (col[i] - mean) / sd
            } else {
                T::zero()
            };
        }
    }
    (theoretical, empirical)
}

/// Rows `lag,component,value`.
pub fn write_acf<T: Real, W: Write>(out: W, acf: &Matrix<T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["lag", "component", "value"])?;
    for k in 0..acf.rows() {
        for c in 0..acf.cols() {
            w.write_record([
                k.to_string(),
                (c + 1).to_string(),
                acf[(k, c)].as_f64().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `component,theoretical,empirical`.
pub fn write_qq<T: Real, W: Write>(
    out: W,
    theoretical: &Matrix<T>,
    empirical: &Matrix<T>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["component", "theoretical", "empirical"])?;
    for c in 0..theoretical.cols() {
        for i in 0..theoretical.rows() {
            w.write_record([
                (c + 1).to_string(),
                theoretical[(i, c)].as_f64().to_string(),
                empirical[(i, c)].as_f64().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
