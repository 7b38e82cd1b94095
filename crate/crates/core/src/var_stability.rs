//! Maps unconstrained VAR coefficient matrices to a causal VAR(p).
//!
//! Two steps: each raw `A_j` is squashed to a partial autocorrelation matrix
//! `P_j = B_j⁻¹ A_j` with `B_j B_jᵀ = I + A_j A_jᵀ` (all singular values below
//! one), then the forward/backward prediction recursion turns `P_1 … P_p` into
//! stationary coefficients, which are finally rescaled so the innovation
//! covariance is `Σ = L Lᵀ`.
//!
//! All inverses are triangular solves against Cholesky factors. The
//! computation is written once, on the tape; plain entry points evaluate it on
//! a scratch tape.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Tape, Var};
use crate::scalar::Real;

/// Trainable VAR block: `p` unconstrained `m × m` matrices and the packed
/// lower triangle (row by row, `m(m+1)/2` values) of `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawVarParams<T> {
    pub a_raw: Vec<Matrix<T>>,
    pub l_raw: Vec<T>,
}

impl<T: Real> RawVarParams<T> {
    pub fn new(a_raw: Vec<Matrix<T>>, l: &Matrix<T>) -> Self {
        Self {
            a_raw,
            l_raw: pack_lower(l),
        }
    }

    /// `A = 0` (maps to `P = 0`) with the given `L`.
    pub fn zeros(m: usize, p: usize, l: &Matrix<T>) -> Self {
        Self::new(vec![Matrix::zeros(m, m); p], l)
    }

    pub fn lag_order(&self) -> usize {
        self.a_raw.len()
    }

    pub fn dim(&self) -> usize {
        self.a_raw.first().map_or(0, |a| a.rows())
    }

    pub fn l_matrix(&self) -> Matrix<T> {
        unpack_lower(&self.l_raw, self.dim())
    }

    pub fn is_finite(&self) -> bool {
        self.a_raw.iter().all(Matrix::is_finite) && self.l_raw.iter().all(|x| x.is_finite())
    }
}

pub fn pack_lower<T: Real>(l: &Matrix<T>) -> Vec<T> {
    let m = l.rows();
    let mut v = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        for j in 0..=i {
            v.push(l[(i, j)]);
        }
    }
    v
}

pub fn unpack_lower<T: Real>(packed: &[T], m: usize) -> Matrix<T> {
    assert_eq!(packed.len(), m * (m + 1) / 2, "packed lower length");
    let mut l = Matrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        for j in 0..=i {
            l[(i, j)] = packed[k];
            k += 1;
        }
    }
    l
}

/// Causal VAR(p) coefficients and innovation covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalVarParams<T> {
    pub a_causal: Vec<Matrix<T>>,
    pub sigma: Matrix<T>,
}

impl<T: Real> CausalVarParams<T> {
    pub fn lag_order(&self) -> usize {
        self.a_causal.len()
    }

    pub fn dim(&self) -> usize {
        self.sigma.rows()
    }

    pub fn spectral_radius(&self) -> Result<T> {
        numerics::companion_spectral_radius(&self.a_causal)
    }

    /// Autocovariances `Γ(0) … Γ(maxlag)` of the stationary deviations.
    pub fn autocovariances(&self, maxlag: usize) -> Result<Vec<Matrix<T>>> {
        numerics::stationary_autocovariances(&self.a_causal, &self.sigma, maxlag)
    }
}

/// Partial autocorrelation matrices; every singular value is below one.
#[derive(Debug, Clone, PartialEq)]
pub struct PacfSequence<T> {
    pub p_mats: Vec<Matrix<T>>,
}

/// Tape handles for a [`RawVarParams`] block.
#[derive(Debug, Clone)]
pub struct RawVarVars {
    pub a: Vec<Var>,
    /// Packed lower triangle as an `m(m+1)/2 × 1` column.
    pub l_packed: Var,
    pub m: usize,
}

impl RawVarVars {
    /// Registers `A_1 … A_p` and then the packed `L` as parameter slots.
    pub fn register<T: Real>(tape: &mut Tape<T>, raw: &RawVarParams<T>) -> Self {
        let a = raw.a_raw.iter().map(|a| tape.param(a.clone())).collect();
        let l_packed = tape.param(Matrix::column(&raw.l_raw));
        Self {
            a,
            l_packed,
            m: raw.dim(),
        }
    }

    pub fn constant<T: Real>(tape: &mut Tape<T>, raw: &RawVarParams<T>) -> Self {
        let a = raw.a_raw.iter().map(|a| tape.constant(a.clone())).collect();
        let l_packed = tape.constant(Matrix::column(&raw.l_raw));
        Self {
            a,
            l_packed,
            m: raw.dim(),
        }
    }
}

/// Tape handles for the causal coefficients and `Σ`.
#[derive(Debug, Clone)]
pub struct CausalVars {
    pub a: Vec<Var>,
    pub sigma: Var,
}

/// `X M⁻¹` for lower-triangular `M`.
fn right_solve_lower<T: Real>(tape: &mut Tape<T>, x: Var, m: Var) -> Result<Var> {
    let xt = tape.transpose(x);
    let y = tape.solve_lower(m, xt, true)?;
    Ok(tape.transpose(y))
}

pub fn to_pacf_on_tape<T: Real>(tape: &mut Tape<T>, a_raw: &[Var]) -> Result<Vec<Var>> {
    let mut out = Vec::with_capacity(a_raw.len());
    for &a in a_raw {
        let m = tape.shape(a).0;
        let eye = tape.constant(Matrix::identity(m));
        let aat = tape.matmul_t(a, a);
        let gram = tape.add(eye, aat);
        let b = tape.cholesky(gram)?;
        out.push(tape.solve_lower(b, a, false)?);
    }
    Ok(out)
}

fn check_scale<T: Real>(l: &Matrix<T>) -> Result<()> {
    let tiny = T::epsilon() * l.max_abs();
    for (i, d) in l.diagonal().into_iter().enumerate() {
        if !(d.abs() > tiny) {
            return Err(Error::SingularScale {
                index: i,
                value: d.as_f64(),
            });
        }
    }
    Ok(())
}

/// Forward/backward recursion from partial autocorrelations to causal
/// coefficients, followed by the rescale to `Σ = L Lᵀ`. `l` is a lower
/// triangular `m × m` node.
pub fn pacf_to_causal_on_tape<T: Real>(
    tape: &mut Tape<T>,
    pacf: &[Var],
    l: Var,
) -> Result<CausalVars> {
    let p = pacf.len();
    assert!(p >= 1, "lag order must be at least 1");
    let m = tape.shape(l).0;
    check_scale(tape.value(l))?;

    let eye = Matrix::identity(m);
    let mut sigma_f = tape.constant(eye.clone());
    let mut sigma_b = tape.constant(eye.clone());
    let mut chol_f = tape.constant(eye.clone());
    let mut chol_b = tape.constant(eye);
    let mut fwd: Vec<Var> = Vec::with_capacity(p);
    let mut bwd: Vec<Var> = Vec::with_capacity(p);

    for (s, &ps) in pacf.iter().enumerate() {
        // A_{s+1,s+1} = L_s P (L*_s)⁻¹ and A*_{s+1,s+1} = L*_s Pᵀ L_s⁻¹
        let lp = tape.matmul(chol_f, ps);
        let a_new = right_solve_lower(tape, lp, chol_b)?;
        let pt = tape.transpose(ps);
        let lpt = tape.matmul(chol_b, pt);
        let b_new = right_solve_lower(tape, lpt, chol_f)?;

        let mut next_f = Vec::with_capacity(s + 1);
        let mut next_b = Vec::with_capacity(s + 1);
        for i in 0..s {
            let corr_f = tape.matmul(a_new, bwd[s - 1 - i]);
            next_f.push(tape.sub(fwd[i], corr_f));
            let corr_b = tape.matmul(b_new, fwd[s - 1 - i]);
            next_b.push(tape.sub(bwd[i], corr_b));
        }
        next_f.push(a_new);
        next_b.push(b_new);

        let asb = tape.matmul(a_new, sigma_b);
        let asba = tape.matmul_t(asb, a_new);
        let bsf = tape.matmul(b_new, sigma_f);
        let bsfb = tape.matmul_t(bsf, b_new);
        sigma_f = tape.sub(sigma_f, asba);
        sigma_b = tape.sub(sigma_b, bsfb);
        chol_f = tape.cholesky(sigma_f)?;
        if s + 1 < p {
            chol_b = tape.cholesky(sigma_b)?;
        }
        fwd = next_f;
        bwd = next_b;
    }

    // A_i = (L L_p⁻¹) A_{p,i} (L L_p⁻¹)⁻¹ = L (L_p⁻¹ A_{p,i} L_p) L⁻¹, with L
    // the positive-diagonal Cholesky factor of Σ = L Lᵀ.
    let sigma = tape.matmul_t(l, l);
    let l_pos = tape.cholesky(sigma)?;
    let mut a_causal = Vec::with_capacity(p);
    for &a in &fwd {
        let al = tape.matmul(a, chol_f);
        let inner = tape.solve_lower(chol_f, al, false)?;
        let outer = tape.matmul(l_pos, inner);
        a_causal.push(right_solve_lower(tape, outer, l_pos)?);
    }
    Ok(CausalVars { a: a_causal, sigma })
}

pub fn enforce_causality_on_tape<T: Real>(
    tape: &mut Tape<T>,
    raw: &RawVarVars,
) -> Result<CausalVars> {
    let pacf = to_pacf_on_tape(tape, &raw.a)?;
    let l = tape.lower_from_vec(raw.l_packed, raw.m);
    pacf_to_causal_on_tape(tape, &pacf, l)
}

pub fn to_pacf<T: Real>(a_raw: &[Matrix<T>]) -> Result<PacfSequence<T>> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = a_raw.iter().map(|a| tape.constant(a.clone())).collect();
    let p = to_pacf_on_tape(&mut tape, &vars)?;
    Ok(PacfSequence {
        p_mats: p.into_iter().map(|v| tape.value(v).clone()).collect(),
    })
}

/// Causal coefficients from partial autocorrelations `pacf` and a lower
/// triangular scale `l` with nonzero diagonal.
pub fn pacf_to_causal<T: Real>(
    pacf: &PacfSequence<T>,
    l: &Matrix<T>,
) -> Result<CausalVarParams<T>> {
    let mut tape = Tape::new();
    let p: Vec<Var> = pacf
        .p_mats
        .iter()
        .map(|m| tape.constant(m.clone()))
        .collect();
    let lv = tape.constant(l.lower());
    let out = pacf_to_causal_on_tape(&mut tape, &p, lv)?;
    Ok(read_causal(&tape, &out))
}

pub fn enforce_causality<T: Real>(raw: &RawVarParams<T>) -> Result<CausalVarParams<T>> {
    let mut tape = Tape::new();
    let vars = RawVarVars::constant(&mut tape, raw);
    let out = enforce_causality_on_tape(&mut tape, &vars)?;
    Ok(read_causal(&tape, &out))
}

pub(crate) fn read_causal<T: Real>(tape: &Tape<T>, vars: &CausalVars) -> CausalVarParams<T> {
    CausalVarParams {
        a_causal: vars.a.iter().map(|&v| tape.value(v).clone()).collect(),
        sigma: tape.value(vars.sigma).clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: f64) -> Matrix<f64> {
        Matrix::from_rows(&[&[x]])
    }

    #[test]
    fn zero_raw_gives_zero_pacf() {
        let p = to_pacf(&[Matrix::<f64>::zeros(2, 2)]).unwrap();
        assert_eq!(p.p_mats[0], Matrix::zeros(2, 2));
    }

    #[test]
    fn scalar_pacf_closed_form() {
        let p = to_pacf(&[s(1.0)]).unwrap();
        assert!((p.p_mats[0][(0, 0)] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scalar_lag_one_recursion() {
        let pacf = PacfSequence {
            p_mats: vec![s(0.6)],
        };
        let c = pacf_to_causal(&pacf, &s(1.5)).unwrap();
        assert!((c.a_causal[0][(0, 0)] - 0.6).abs() < 1e-15);
        assert!((c.sigma[(0, 0)] - 2.25).abs() < 1e-15);
    }

    #[test]
    fn scalar_lag_two_recursion() {
        let pacf = PacfSequence {
            p_mats: vec![s(0.5), s(0.3)],
        };
        let c = pacf_to_causal(&pacf, &s(1.0)).unwrap();
        assert!((c.a_causal[0][(0, 0)] - 0.35).abs() < 1e-15);
        assert!((c.a_causal[1][(0, 0)] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_pacf_gives_white_noise() {
        let l = Matrix::<f64>::from_rows(&[&[1.2, 0.0], &[-0.4, 0.7]]);
        let pacf = PacfSequence {
            p_mats: vec![Matrix::zeros(2, 2); 3],
        };
        let c = pacf_to_causal(&pacf, &l).unwrap();
        for a in &c.a_causal {
            assert!(a.max_abs() < 1e-15);
        }
        assert_eq!(c.sigma, l.matmul_t(&l));
    }

    #[test]
    fn composite_scalar_case() {
        let raw = RawVarParams::new(vec![s(1.0)], &s(1.0));
        let c = enforce_causality(&raw).unwrap();
        assert!((c.a_causal[0][(0, 0)] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.sigma, s(1.0));
    }

    #[test]
    fn negative_diagonal_scale_is_sign_normalized() {
        let a = vec![Matrix::<f64>::from_rows(&[&[0.8, -0.3], &[0.5, 0.2]])];
        let l = Matrix::<f64>::from_rows(&[&[1.0, 0.0], &[0.3, 0.9]]);
        let flipped = Matrix::from_rows(&[&[-1.0, 0.0], &[-0.3, 0.9]]);
        let c1 = enforce_causality(&RawVarParams::new(a.clone(), &l)).unwrap();
        let c2 = enforce_causality(&RawVarParams::new(a, &flipped)).unwrap();
        assert!(c1.a_causal[0].sub(&c2.a_causal[0]).max_abs() < 1e-14);
        assert_eq!(c1.sigma, c2.sigma);
    }

    #[test]
    fn singular_scale_is_rejected() {
        let raw = RawVarParams::new(vec![s(0.3)], &s(0.0));
        assert!(matches!(
            enforce_causality(&raw),
            Err(Error::SingularScale { index: 0, .. })
        ));
    }

    #[test]
    fn packing_round_trips() {
        let l = Matrix::<f64>::from_rows(&[&[1.0, 0.0, 0.0], &[2.0, 3.0, 0.0], &[4.0, 5.0, 6.0]]);
        let packed = pack_lower(&l);
        assert_eq!(packed, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unpack_lower(&packed, 3), l);
    }
}
