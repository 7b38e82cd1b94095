//! LSTM trend generator: deterministic time regressors, the recurrent cell and
//! the affine head mapping hidden states to trend vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::tape::sigmoid_scalar;
use crate::numerics::{Matrix, Tape, Var};
use crate::scalar::Real;

/// Family of deterministic time regressors fed to the LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorKind {
    /// `(s, s², …, s^d)` with `s = t/T`.
    Polynomial { degree: usize },
    /// The polynomial terms followed by `(1/s, 1/s², …, 1/s^d)`.
    PolynomialWithReciprocals { degree: usize },
}

impl RegressorKind {
    pub fn input_dim(&self) -> usize {
        match *self {
            RegressorKind::Polynomial { degree } => degree,
            RegressorKind::PolynomialWithReciprocals { degree } => 2 * degree,
        }
    }

    fn degree(&self) -> usize {
        match *self {
            RegressorKind::Polynomial { degree }
            | RegressorKind::PolynomialWithReciprocals { degree } => degree,
        }
    }
}

/// Regressor family plus the training length `T` used as the time scale.
///
/// The scale stays fixed after training, so `t ↦ x_t` is the same function
/// for in-sample and forecast time points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    pub series_len: usize,
}

impl RegressorSpec {
    pub fn new(kind: RegressorKind, series_len: usize) -> Self {
        assert!(kind.degree() >= 1, "regressor degree must be at least 1");
        assert!(series_len >= 1, "series length must be at least 1");
        Self { kind, series_len }
    }

    pub fn input_dim(&self) -> usize {
        self.kind.input_dim()
    }

    /// Regressor vector at time `t` (1-based; `t > T` allowed).
    pub fn regressor<T: Real>(&self, t: usize) -> Vec<T> {
        assert!(t >= 1, "time index is 1-based");
        let s = T::from_usize_lossy(t) / T::from_usize_lossy(self.series_len);
        let d = self.kind.degree();
        let mut x = Vec::with_capacity(self.input_dim());
        let mut acc = T::one();
        for _ in 0..d {
            acc = acc * s;
            x.push(acc);
        }
        if let RegressorKind::PolynomialWithReciprocals { .. } = self.kind {
            let inv = s.recip();
            let mut acc = T::one();
            for _ in 0..d {
                acc = acc * inv;
                x.push(acc);
            }
        }
        x
    }
}

/// Regressors `x_1 … x_len` stacked as a `len × input_dim` matrix.
pub fn make_regressors<T: Real>(spec: &RegressorSpec, len: usize) -> Matrix<T> {
    let dim = spec.input_dim();
    let mut data = Vec::with_capacity(len * dim);
    for t in 1..=len {
        data.extend(spec.regressor::<T>(t));
    }
    Matrix::from_vec(len, dim, data)
}

/// LSTM weights and biases plus the affine trend head.
///
/// Input weights are `units × input_dim`, recurrent weights `units × units`,
/// gate biases `units × 1`; the head is `W_mu` (`m × units`) and `b_mu` (`m × 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendNetParams<T> {
    pub w_xi: Matrix<T>,
    pub w_xf: Matrix<T>,
    pub w_xo: Matrix<T>,
    pub w_xc: Matrix<T>,
    pub w_hi: Matrix<T>,
    pub w_hf: Matrix<T>,
    pub w_ho: Matrix<T>,
    pub w_hc: Matrix<T>,
    pub b_i: Matrix<T>,
    pub b_f: Matrix<T>,
    pub b_o: Matrix<T>,
    pub b_c: Matrix<T>,
    pub w_mu: Matrix<T>,
    pub b_mu: Matrix<T>,
}

/// Number of parameter blocks in [`TrendNetParams`].
pub const TREND_BLOCKS: usize = 14;

impl<T: Real> TrendNetParams<T> {
    pub fn zeros(input_dim: usize, units: usize, m: usize) -> Self {
        let wx = || Matrix::zeros(units, input_dim);
        let wh = || Matrix::zeros(units, units);
        let b = || Matrix::zeros(units, 1);
        Self {
            w_xi: wx(),
            w_xf: wx(),
            w_xo: wx(),
            w_xc: wx(),
            w_hi: wh(),
            w_hf: wh(),
            w_ho: wh(),
            w_hc: wh(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
            w_mu: Matrix::zeros(m, units),
            b_mu: Matrix::zeros(m, 1),
        }
    }

    /// Weights uniform on `±1/√units`, biases zero.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, units: usize, m: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, units, m);
        let bound = 1.0 / (units as f64).sqrt();
        let mut fill = |mat: &mut Matrix<T>| {
            for v in mat.as_mut_slice() {
                *v = T::lit(rng.random_range(-bound..bound));
            }
        };
        for w in [
            &mut p.w_xi,
            &mut p.w_xf,
            &mut p.w_xo,
            &mut p.w_xc,
            &mut p.w_hi,
            &mut p.w_hf,
            &mut p.w_ho,
            &mut p.w_hc,
            &mut p.w_mu,
        ] {
            fill(w);
        }
        p
    }

    pub fn units(&self) -> usize {
        self.w_hi.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w_mu.rows()
    }

    /// Blocks in a fixed order (input weights, recurrent weights, biases, head).
    pub fn blocks(&self) -> [&Matrix<T>; TREND_BLOCKS] {
        [
            &self.w_xi, &self.w_xf, &self.w_xo, &self.w_xc, &self.w_hi, &self.w_hf, &self.w_ho,
            &self.w_hc, &self.b_i, &self.b_f, &self.b_o, &self.b_c, &self.w_mu, &self.b_mu,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix<T>; TREND_BLOCKS] {
        [
            &mut self.w_xi,
            &mut self.w_xf,
            &mut self.w_xo,
            &mut self.w_xc,
            &mut self.w_hi,
            &mut self.w_hf,
            &mut self.w_ho,
            &mut self.w_hc,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
            &mut self.w_mu,
            &mut self.b_mu,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.is_finite())
    }
}

/// Hidden and memory-cell vectors, stored as `1 × units` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Matrix<T>,
    pub c: Matrix<T>,
}

impl<T: Real> LstmState<T> {
    pub fn zeros(units: usize) -> Self {
        Self {
            h: Matrix::zeros(1, units),
            c: Matrix::zeros(1, units),
        }
    }
}

fn gate<T: Real>(
    x: &Matrix<T>,
    h: &Matrix<T>,
    wx: &Matrix<T>,
    wh: &Matrix<T>,
    b: &Matrix<T>,
) -> Matrix<T> {
    let bias = Matrix::from_vec(1, b.rows(), b.as_slice().to_vec());
    x.matmul_t(wx).add(&bias).add(&h.matmul_t(wh))
}

/// One LSTM cell update for input `x` (length `input_dim`).
pub fn lstm_step<T: Real>(
    x: &[T],
    state: &LstmState<T>,
    params: &TrendNetParams<T>,
) -> LstmState<T> {
    let x = Matrix::row_vector(x);
    let h = &state.h;
    let i = gate(&x, h, &params.w_xi, &params.w_hi, &params.b_i).map(sigmoid_scalar);
    let f = gate(&x, h, &params.w_xf, &params.w_hf, &params.b_f).map(sigmoid_scalar);
    let o = gate(&x, h, &params.w_xo, &params.w_ho, &params.b_o).map(sigmoid_scalar);
    let cand = gate(&x, h, &params.w_xc, &params.w_hc, &params.b_c).map(|v| v.tanh());
    let c = f.hadamard(&state.c).add(&i.hadamard(&cand));
    let h = o.hadamard(&c.map(|v| v.tanh()));
    LstmState { h, c }
}

/// Trend vectors `μ_1 … μ_n` (as rows of an `n × m` matrix) for regressor
/// rows `xs`, starting the recurrence from `initial`.
pub fn trend_sequence<T: Real>(
    xs: &Matrix<T>,
    params: &TrendNetParams<T>,
    initial: &LstmState<T>,
) -> Matrix<T> {
    let mut state = initial.clone();
    let mut hs = Vec::with_capacity(xs.rows());
    for t in 0..xs.rows() {
        state = lstm_step(xs.row(t), &state, params);
        hs.push(state.h.clone());
    }
    head(&Matrix::vstack(&hs), params)
}

fn head<T: Real>(hidden: &Matrix<T>, params: &TrendNetParams<T>) -> Matrix<T> {
    let mut mu = hidden.matmul_t(&params.w_mu);
    for t in 0..mu.rows() {
        for (v, &b) in mu.row_mut(t).iter_mut().zip(params.b_mu.as_slice()) {
            *v = *v + b;
        }
    }
    mu
}

/// Trend parameters registered on a tape, in [`TrendNetParams::blocks`] order.
#[derive(Debug, Clone, Copy)]
pub struct TrendNetVars {
    pub blocks: [Var; TREND_BLOCKS],
}

impl TrendNetVars {
    /// Registers every block as a trainable parameter slot.
    pub fn register<T: Real>(tape: &mut Tape<T>, params: &TrendNetParams<T>) -> Self {
        let blocks = params.blocks().map(|b| tape.param(b.clone()));
        Self { blocks }
    }
}

/// Differentiable trend: `n × m` node of trend rows for regressor rows `xs`,
/// from a zero initial state.
pub fn trend_on_tape<T: Real>(tape: &mut Tape<T>, vars: &TrendNetVars, xs: &Matrix<T>) -> Var {
    let [w_xi, w_xf, w_xo, w_xc, w_hi, w_hf, w_ho, w_hc, b_i, b_f, b_o, b_c, w_mu, b_mu] =
        vars.blocks;
    let n = xs.rows();
    let units = tape.shape(w_hi).0;
    let x = tape.constant(xs.clone());
    let input_part = |tape: &mut Tape<T>, wx: Var, b: Var| {
        let xw = tape.matmul_t(x, wx);
        let brow = tape.reshape(b, 1, units);
        tape.add_row(xw, brow)
    };
    let zi = input_part(tape, w_xi, b_i);
    let zf = input_part(tape, w_xf, b_f);
    let zo = input_part(tape, w_xo, b_o);
    let zc = input_part(tape, w_xc, b_c);

    let mut h = tape.constant(Matrix::zeros(1, units));
    let mut c = tape.constant(Matrix::zeros(1, units));
    let mut hs = Vec::with_capacity(n);
    for t in 0..n {
        let pre = |tape: &mut Tape<T>, z: Var, wh: Var| {
            let zt = tape.slice_rows(z, t, t + 1);
            let hw = tape.matmul_t(h, wh);
            tape.add(zt, hw)
        };
        let i_pre = pre(tape, zi, w_hi);
        let f_pre = pre(tape, zf, w_hf);
        let o_pre = pre(tape, zo, w_ho);
        let c_pre = pre(tape, zc, w_hc);
        let i = tape.sigmoid(i_pre);
        let f = tape.sigmoid(f_pre);
        let o = tape.sigmoid(o_pre);
        let cand = tape.tanh(c_pre);
        let keep = tape.hadamard(f, c);
        let write = tape.hadamard(i, cand);
        c = tape.add(keep, write);
        let tc = tape.tanh(c);
        h = tape.hadamard(o, tc);
        hs.push(h);
    }
    let hidden = tape.vstack(&hs);
    let proj = tape.matmul_t(hidden, w_mu);
    let m = tape.shape(b_mu).0;
    let brow = tape.reshape(b_mu, 1, m);
    tape.add_row(proj, brow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polynomial_regressors() {
        let spec = RegressorSpec::new(RegressorKind::Polynomial { degree: 3 }, 4);
        assert_eq!(spec.regressor::<f64>(2), vec![0.5, 0.25, 0.125]);
        let spec = RegressorSpec::new(RegressorKind::Polynomial { degree: 1 }, 10);
        assert_eq!(spec.regressor::<f64>(10), vec![1.0]);
    }

    #[test]
    fn reciprocal_regressors_are_one_at_series_end() {
        let spec = RegressorSpec::new(RegressorKind::PolynomialWithReciprocals { degree: 3 }, 4);
        assert_eq!(spec.regressor::<f64>(4), vec![1.0; 6]);
        assert_eq!(
            spec.regressor::<f64>(2),
            vec![0.5, 0.25, 0.125, 2.0, 4.0, 8.0]
        );
    }

    #[test]
    fn forecast_regressors_extend_the_same_formula() {
        let spec = RegressorSpec::new(RegressorKind::Polynomial { degree: 2 }, 5);
        let xs = make_regressors::<f64>(&spec, 7);
        assert_eq!(xs.row(6), &[1.4, 1.4 * 1.4][..]);
    }

    #[test]
    fn zero_network_stays_at_rest() {
        let p = TrendNetParams::<f64>::zeros(3, 4, 2);
        let s = lstm_step(&[0.3, -1.0, 2.0], &LstmState::zeros(4), &p);
        assert_eq!(s, LstmState::zeros(4));
    }

    #[test]
    fn saturated_candidate_gives_half_cell() {
        let mut p = TrendNetParams::<f64>::zeros(1, 1, 1);
        p.b_c[(0, 0)] = 40.0;
        let s = lstm_step(&[0.7], &LstmState::zeros(1), &p);
        assert!((s.c[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((s.h[(0, 0)] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((s.h[(0, 0)] - 0.23106).abs() < 1e-5);
    }

    #[test]
    fn constant_trend_from_head_bias() {
        let mut p = TrendNetParams::<f64>::zeros(3, 5, 2);
        p.b_mu = Matrix::from_rows(&[&[1.5], &[-2.0]]);
        let xs = make_regressors(
            &RegressorSpec::new(RegressorKind::Polynomial { degree: 3 }, 6),
            6,
        );
        let mu = trend_sequence(&xs, &p, &LstmState::zeros(5));
        for t in 0..6 {
            assert_eq!(mu.row(t), &[1.5, -2.0][..]);
        }
    }

    #[test]
    fn tape_trend_matches_plain_trend() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = TrendNetParams::<f64>::init(6, 5, 3, &mut rng);
        p.b_f = Matrix::from_fn(5, 1, |i, _| 0.1 * i as f64);
        p.b_mu = Matrix::from_rows(&[&[0.3], &[-0.2], &[1.0]]);
        let spec = RegressorSpec::new(RegressorKind::PolynomialWithReciprocals { degree: 3 }, 20);
        let xs = make_regressors(&spec, 20);
        let plain = trend_sequence(&xs, &p, &LstmState::zeros(5));
        let mut tape = Tape::new();
        let vars = TrendNetVars::register(&mut tape, &p);
        let mu = trend_on_tape(&mut tape, &vars, &xs);
        assert_eq!(tape.value(mu), &plain);
    }

    #[test]
    fn single_step_is_cell_then_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = TrendNetParams::<f64>::init(2, 3, 2, &mut rng);
        let xs = Matrix::from_rows(&[&[0.4, 0.16]]);
        let s = lstm_step(xs.row(0), &LstmState::zeros(3), &p);
        let direct = p.w_mu.matmul(&s.h.transpose()).add(&p.b_mu);
        let mu = trend_sequence(&xs, &p, &LstmState::zeros(3));
        assert_eq!(mu.as_slice(), direct.as_slice());
    }
}
