//! Plain (non-differentiable) dense kernels. The tape primitives call into
//! these for both their forward values and their adjoints.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Maximum number of jitter retries after the first failed factorization.
pub const CHOLESKY_JITTER_RETRIES: usize = 3;
/// Initial jitter, relative to the mean diagonal entry.
pub const CHOLESKY_JITTER_BASE: f64 = 1e-10;
/// Condition-number estimate above which the stationary covariance system
/// is treated as a unit root.
pub const NEAR_UNIT_ROOT_CONDITION: f64 = 1e12;

/// Cholesky factorization `m = L Lᵀ` with positive diagonal.
///
/// Only the lower triangle of `m` is read. On a non-positive pivot the
/// factorization is retried with `1e-10·trace/n` added to the diagonal,
/// escalating tenfold up to three times.
pub fn cholesky<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    cholesky_jittered(m).map(|(l, _)| l)
}

/// As [`cholesky`], also returning the diagonal jitter that was applied.
pub fn cholesky_jittered<T: Real>(m: &Matrix<T>) -> Result<(Matrix<T>, T)> {
    assert!(m.is_square(), "cholesky of non-square matrix");
    let n = m.rows();
    let mut err = match cholesky_plain(m, T::zero()) {
        Ok(l) => return Ok((l, T::zero())),
        Err(e) => e,
    };
    let mean_diag = m.trace() / T::from_usize_lossy(n);
    if !(mean_diag > T::zero()) || !mean_diag.is_finite() {
        return Err(err);
    }
    let mut jitter = T::lit(CHOLESKY_JITTER_BASE) * mean_diag;
    for _ in 0..CHOLESKY_JITTER_RETRIES {
        match cholesky_plain(m, jitter) {
            Ok(l) => {
                log::debug!("cholesky succeeded with diagonal jitter {jitter:e}");
                return Ok((l, jitter));
            }
            Err(e) => err = e,
        }
        jitter = jitter * T::lit(10.0);
    }
    Err(err)
}

fn cholesky_plain<T: Real>(m: &Matrix<T>, jitter: T) -> Result<Matrix<T>> {
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)] + jitter;
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: j,
                pivot: d.as_f64(),
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L X = B` (or `Lᵀ X = B` when `transpose`) for lower-triangular `L`.
pub fn solve_lower<T: Real>(l: &Matrix<T>, b: &Matrix<T>, transpose: bool) -> Result<Matrix<T>> {
    let n = l.rows();
    assert!(
        l.is_square() && b.rows() == n,
        "triangular solve shape mismatch"
    );
    for i in 0..n {
        if l[(i, i)] == T::zero() || !l[(i, i)].is_finite() {
            return Err(Error::SingularScale {
                index: i,
                value: l[(i, i)].as_f64(),
            });
        }
    }
    let mut x = b.clone();
    let nc = b.cols();
    if !transpose {
        for i in 0..n {
            for c in 0..nc {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s = s - l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
    } else {
        for i in (0..n).rev() {
            for c in 0..nc {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s = s - l[(k, i)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
    }
    Ok(x)
}

/// `2 Σ log |L_ii|`: log-determinant of `L Lᵀ`.
pub fn logdet_from_cholesky<T: Real>(l: &Matrix<T>) -> T {
    l.diagonal().into_iter().map(|d| d.abs().ln()).sum::<T>() * T::lit(2.0)
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        assert!(a.is_square(), "LU of non-square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut piv, mut best) = (k, lu[(k, k)].abs());
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    piv = i;
                    best = v;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::Singular);
            }
            if piv != k {
                perm.swap(piv, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        lu[(i, j)] = lu[(i, j)] - f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s = s - self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ z = b, Lᵀ w = z, x = Pᵀ w.
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s = s - self.lu[(k, i)] * z[k];
            }
            z[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s = s - self.lu[(k, i)] * z[k];
            }
            z[i] = s;
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    pub fn solve(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let mut out = Matrix::zeros(n, b.cols());
        for c in 0..b.cols() {
            let x = self.solve_vec(&b.col_to_vec(c));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, c)] = v;
            }
        }
        out
    }

    pub fn inverse(&self) -> Matrix<T> {
        self.solve(&Matrix::identity(self.dim()))
    }
}

pub fn norm_one<T: Real>(a: &Matrix<T>) -> T {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<T>())
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Factored vectorized system `(I − A⊗A) vec Γ = vec Q` of the discrete
/// Lyapunov equation `Γ = A Γ Aᵀ + Q`.
#[derive(Debug, Clone)]
pub struct LyapunovSystem<T> {
    n: usize,
    lu: Lu<T>,
    condition: T,
}

impl<T: Real> LyapunovSystem<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        assert!(a.is_square(), "Lyapunov operator of non-square matrix");
        if !a.is_finite() {
            return Err(Error::NonFinite("Lyapunov coefficient matrix"));
        }
        let n = a.rows();
        let kron = a.kron(a);
        let k = Matrix::from_fn(n * n, n * n, |i, j| {
            let id = if i == j { T::one() } else { T::zero() };
            id - kron[(i, j)]
        });
        let lu = Lu::new(&k).map_err(|_| Error::NearUnitRoot {
            condition: f64::INFINITY,
        })?;
        let condition = norm_one(&k) * norm_one(&lu.inverse());
        if !(condition.as_f64() <= NEAR_UNIT_ROOT_CONDITION) {
            return Err(Error::NearUnitRoot {
                condition: condition.as_f64(),
            });
        }
        Ok(Self { n, lu, condition })
    }

    pub fn condition(&self) -> T {
        self.condition
    }

    /// Γ with `Γ = A Γ Aᵀ + q`.
    pub fn solve(&self, q: &Matrix<T>) -> Matrix<T> {
        assert_eq!(q.shape(), (self.n, self.n));
        Matrix::from_vec(self.n, self.n, self.lu.solve_vec(q.as_slice()))
    }

    /// S with `S = Aᵀ S A + g` (the adjoint operator).
    pub fn solve_adjoint(&self, g: &Matrix<T>) -> Matrix<T> {
        assert_eq!(g.shape(), (self.n, self.n));
        Matrix::from_vec(self.n, self.n, self.lu.solve_transpose_vec(g.as_slice()))
    }
}

/// Solves `Γ = A Γ Aᵀ + Q`.
pub fn solve_discrete_lyapunov<T: Real>(a: &Matrix<T>, q: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(LyapunovSystem::new(a)?.solve(q))
}

/// `mp × mp` companion matrix: first block row `A_1 … A_p`, identity blocks on
/// the block sub-diagonal, zeros elsewhere.
pub fn companion_matrix<T: Real>(a_mats: &[Matrix<T>]) -> Matrix<T> {
    let p = a_mats.len();
    assert!(p >= 1, "companion matrix needs at least one lag");
    let m = a_mats[0].rows();
    let mut c = Matrix::zeros(m * p, m * p);
    for (i, a) in a_mats.iter().enumerate() {
        assert_eq!(a.shape(), (m, m), "lag matrices must be m x m");
        c.set_block(0, i * m, a);
    }
    for k in m..m * p {
        c[(k, k - m)] = T::one();
    }
    c
}

/// Diagonal similarity scaling by powers of two that evens out row and column
/// norms, in place.
fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let n = a.len();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[i][j] /= f;
                    a[j][i] *= f;
                }
            }
        }
    }
}

/// Reduction to upper Hessenberg form by stabilized elementary similarity
/// transforms, in place. Entries below the subdiagonal are zeroed.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x: f64 = 0.0;
        let mut pivot = m;
        for j in m..n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                pivot = j;
            }
        }
        if pivot != m {
            a.swap(pivot, m);
            for row in a.iter_mut() {
                row.swap(pivot, m);
            }
        }
        if x != 0.0 {
            for i in m + 1..n {
                let y = a[i][m - 1] / x;
                if y != 0.0 {
                    a[i][m - 1] = 0.0;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for j in 0..n {
                        a[j][m] += y * a[j][i];
                    }
                }
            }
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the Francis double-shift QR
/// iteration. `h` is 1-based (row and column 0 unused) and is destroyed.
fn hessenberg_eigenvalues(h: &mut [Vec<f64>], n: usize) -> Result<Vec<(f64, f64)>> {
    const MAX_ITS: usize = 60;
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += h[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = h[l - 1][l - 1].abs() + h[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if h[l][l - 1].abs() + s == s {
                    h[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = h[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
            } else {
                let mut y = h[nn - 1][nn - 1];
                let mut w = h[nn][nn - 1] * h[nn - 1][nn];
                if l == nn - 1 {
                    let p = 0.5 * (y - x);
                    let q = p * p + w;
                    let mut z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + z.copysign(p);
                        wr[nn - 1] = x + z;
                        wr[nn] = if z != 0.0 { x - w / z } else { x + z };
                        wi[nn - 1] = 0.0;
                        wi[nn] = 0.0;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn = nn.saturating_sub(2);
                } else {
                    if its == MAX_ITS {
                        return Err(Error::ConvergenceFailure(
                            "eigenvalue QR iteration did not converge".into(),
                        ));
                    }
                    if its > 0 && its % 10 == 0 {
                        // Exceptional shift.
                        t += x;
                        for i in 1..=nn {
                            h[i][i] -= x;
                        }
                        let s = h[nn][nn - 1].abs() + h[nn - 1][nn - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let (mut p, mut q, mut r);
                    let mut m = nn - 2;
                    loop {
                        let z = h[m][m];
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / h[m + 1][m] + h[m][m + 1];
                        q = h[m + 1][m + 1] - z - rr - ss;
                        r = h[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = h[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        h[i][i - 2] = 0.0;
                        if i != m + 2 {
                            h[i][i - 3] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = h[k][k - 1];
                            q = h[k + 1][k - 1];
                            r = if k != nn - 1 { h[k + 2][k - 1] } else { 0.0 };
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = (p * p + q * q + r * r).sqrt().copysign(p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    h[k][k - 1] = -h[k][k - 1];
                                }
                            } else {
                                h[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            let z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                let mut pj = h[k][j] + q * h[k + 1][j];
                                if k != nn - 1 {
                                    pj += r * h[k + 2][j];
                                    h[k + 2][j] -= pj * z;
                                }
                                h[k + 1][j] -= pj * y;
                                h[k][j] -= pj * x;
                            }
                            let mmin = nn.min(k + 3);
                            for i in l..=mmin {
                                let mut pi = x * h[i][k] + y * h[i][k + 1];
                                if k != nn - 1 {
                                    pi += z * h[i][k + 2];
                                    h[i][k + 2] -= pi * r;
                                }
                                h[i][k + 1] -= pi * q;
                                h[i][k] -= pi;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn == 0 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

/// All eigenvalues of a square matrix as `(re, im)` pairs, by balancing,
/// Hessenberg reduction and shifted QR.
pub fn eigenvalues<T: Real>(a: &Matrix<T>) -> Result<Vec<(T, T)>> {
    assert!(a.is_square());
    if !a.is_finite() {
        return Err(Error::NonFinite("eigenvalue input"));
    }
    let n = a.rows();
    let mut work: Vec<Vec<f64>> = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.as_f64()).collect())
        .collect();
    balance(&mut work);
    hessenberg(&mut work);
    let mut h = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            h[i + 1][j + 1] = work[i][j];
        }
    }
    Ok(hessenberg_eigenvalues(&mut h, n)?
        .into_iter()
        .map(|(re, im)| (T::lit(re), T::lit(im)))
        .collect())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<T: Real>(a: &Matrix<T>) -> Result<T> {
    Ok(eigenvalues(a)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(T::zero(), T::max))
}

/// Largest eigenvalue modulus of the companion matrix of `A_1 … A_p`.
pub fn companion_spectral_radius<T: Real>(a_mats: &[Matrix<T>]) -> Result<T> {
    spectral_radius(&companion_matrix(a_mats))
}

/// Stationary autocovariances `Γ(k) = E[(y_{t+k} − μ)(y_t − μ)ᵀ]`, k = 0..=maxlag,
/// of the causal VAR(p) with coefficients `a_mats` and innovation covariance
/// `sigma`.
pub fn stationary_autocovariances<T: Real>(
    a_mats: &[Matrix<T>],
    sigma: &Matrix<T>,
    maxlag: usize,
) -> Result<Vec<Matrix<T>>> {
    let p = a_mats.len();
    let m = sigma.rows();
    let companion = companion_matrix(a_mats);
    let mut q = Matrix::zeros(m * p, m * p);
    q.set_block(0, 0, sigma);
    let big = solve_discrete_lyapunov(&companion, &q)?.symmetrized();
    // Block (0, j) of the companion covariance is Cov(y_t, y_{t-j}) = Γ(j).
    let mut gammas: Vec<Matrix<T>> = (0..p.min(maxlag + 1))
        .map(|j| big.block(0, j * m, m, m))
        .collect();
    for k in p..=maxlag {
        let mut g = Matrix::zeros(m, m);
        for (i, a) in a_mats.iter().enumerate() {
            g.add_assign(&a.matmul(&gammas[k - i - 1]));
        }
        gammas.push(g);
    }
    // Γ(k) for k < p came from the companion solve, the remainder from the
    // Yule–Walker recursion; Γ(0) is exactly symmetric.
    if let Some(g0) = gammas.first_mut() {
        *g0 = g0.symmetrized();
    }
    Ok(gammas)
}
