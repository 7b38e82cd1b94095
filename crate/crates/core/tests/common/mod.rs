//! Reference computations used as independent oracles by the integration
//! tests. Nothing here calls the library's own linear algebra.

#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::DMatrix;
use rand::Rng;

use deepvarwt::numerics::Matrix;
use deepvarwt::var_stability::{CausalVarParams, RawVarParams};

pub fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Largest eigenvalue modulus of the companion matrix, from a general
/// eigensolver.
pub fn eigen_companion_radius(a: &[Matrix<f64>]) -> f64 {
    let m = a[0].rows();
    let mp = m * a.len();
    let mut c = DMatrix::<f64>::zeros(mp, mp);
    for (i, ai) in a.iter().enumerate() {
        for r in 0..m {
            for col in 0..m {
                c[(r, i * m + col)] = ai[(r, col)];
            }
        }
    }
    for k in m..mp {
        c[(k, k - m)] = 1.0;
    }
    c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Classical scalar recursion from partial autocorrelations to AR
/// coefficients.
pub fn durbin_levinson(pacf: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::new();
    for (k, &pk) in pacf.iter().enumerate() {
        let prev = phi.clone();
        phi = (0..k).map(|j| prev[j] - pk * prev[k - 1 - j]).collect();
        phi.push(pk);
    }
    phi
}

/// Autocovariances `Γ(0..=maxlag)`, `Γ(k) = Cov(y_{t+k}, y_t)`, from the
/// moving-average representation truncated once the weights vanish.
pub fn ma_autocovariances(causal: &CausalVarParams<f64>, maxlag: usize) -> Vec<DMatrix<f64>> {
    let m = causal.dim();
    let a: Vec<DMatrix<f64>> = causal.a_causal.iter().map(to_na).collect();
    let sigma = to_na(&causal.sigma);
    let mut psi: Vec<DMatrix<f64>> = vec![DMatrix::identity(m, m)];
    let scale = 1.0;
    while psi.len() < 20_000 {
        let j = psi.len();
        let mut next = DMatrix::zeros(m, m);
        for (i, ai) in a.iter().enumerate() {
            if j > i {
                next += ai * &psi[j - 1 - i];
            }
        }
        let small = next.amax() < 1e-18 * scale;
        psi.push(next);
        if small && psi.len() > maxlag + a.len() + 1 {
            break;
        }
    }
    (0..=maxlag)
        .map(|k| {
            let mut g = DMatrix::zeros(m, m);
            for j in 0..psi.len().saturating_sub(k) {
                g += &psi[j + k] * &sigma * psi[j].transpose();
            }
            g
        })
        .collect()
}

/// Joint Gaussian log-density of the stacked deviations `vec(y − μ)`, with
/// the full `Tm × Tm` covariance assembled block by block.
pub fn brute_force_loglik(y: &Matrix<f64>, mu: &Matrix<f64>, causal: &CausalVarParams<f64>) -> f64 {
    let (n, m) = y.shape();
    let gam = ma_autocovariances(causal, n);
    let mut cov = DMatrix::<f64>::zeros(n * m, n * m);
    for s in 0..n {
        for t in 0..n {
            let block = if s >= t {
                gam[s - t].clone()
            } else {
                gam[t - s].transpose()
            };
            cov.view_mut((s * m, t * m), (m, m)).copy_from(&block);
        }
    }
    let d = DMatrix::from_iterator(
        n * m,
        1,
        (0..n)
            .flat_map(|t| (0..m).map(move |c| (t, c)))
            .map(|(t, c)| y[(t, c)] - mu[(t, c)]),
    );
    let chol = cov.cholesky().expect("covariance is positive definite");
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = (d.transpose() * chol.solve(&d))[(0, 0)];
    -0.5 * ((n * m) as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

/// Raw VAR parameters with every entry uniform on `±range`.
pub fn random_raw<R: Rng>(rng: &mut R, m: usize, p: usize, range: f64) -> RawVarParams<f64> {
    let a = (0..p)
        .map(|_| Matrix::from_fn(m, m, |_, _| rng.random_range(-range..=range)))
        .collect();
    let l = Matrix::from_fn(m, m, |r, c| {
        if c <= r {
            rng.random_range(-range..=range)
        } else {
            0.0
        }
    });
    RawVarParams::new(a, &l)
}

/// Raw parameters whose diagonal scale entries stay away from zero.
pub fn well_scaled_raw<R: Rng>(rng: &mut R, m: usize, p: usize) -> RawVarParams<f64> {
    let a = (0..p)
        .map(|_| Matrix::from_fn(m, m, |_, _| rng.random_range(-1.5..=1.5)))
        .collect();
    let l = Matrix::from_fn(m, m, |r, c| match c.cmp(&r) {
        std::cmp::Ordering::Less => rng.random_range(-0.5..=0.5),
        std::cmp::Ordering::Equal => rng.random_range(0.5..=1.5),
        std::cmp::Ordering::Greater => 0.0,
    });
    RawVarParams::new(a, &l)
}

pub mod checks;
pub mod mc;

/// Largest `|a_ij − b_ij| / √(b_ii b_jj)`.
pub fn max_scaled_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs() / (b[(i, i)] * b[(j, j)]).sqrt());
        }
    }
    worst
}
