//! Two-phase AdaGrad training.
//!
//! Phase 1 fits the trend network alone by least squares. Phase 2 maximizes
//! the exact log-likelihood jointly over trend and VAR parameters, with a
//! separate learning rate and gradient accumulator for each group, and stops
//! once two consecutive relative changes of `ℓ` fall below `prec`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::TimeSeriesFrame;
use crate::likelihood;
use crate::numerics::{Matrix, Tape, Var};
use crate::scalar::Real;
use crate::trend_net::{
    self, make_regressors, LstmState, RegressorKind, RegressorSpec, TrendNetParams, TrendNetVars,
    TREND_BLOCKS,
};
use crate::var_stability::{self, CausalVarParams, CausalVars, RawVarParams, RawVarVars};

/// Added under the square root of the AdaGrad denominator.
pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// VAR lag order `p`.
    pub p: usize,
    /// LSTM hidden size.
    pub units: usize,
    pub regressors: RegressorKind,
    /// Phase-2 learning rate for the trend network.
    pub eta1: f64,
    /// Phase-2 learning rate for the VAR block.
    pub eta2: f64,
    /// Maximum number of Phase-2 updates `K`.
    pub max_iters: usize,
    /// Relative-change stopping threshold.
    pub prec: f64,
    pub phase1_iters: usize,
    pub phase1_eta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            p: 2,
            units: 20,
            regressors: RegressorKind::PolynomialWithReciprocals { degree: 3 },
            eta1: 0.001,
            eta2: 0.01,
            max_iters: 6000,
            prec: 1e-5,
            phase1_iters: 3000,
            phase1_eta: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.p == 0 {
            return bad("lag order p must be at least 1");
        }
        if self.units == 0 {
            return bad("units must be at least 1");
        }
        let rates = [self.eta1, self.eta2, self.phase1_eta];
        if !rates.iter().all(|r| r.is_finite() && *r >= 0.0) {
            return bad("learning rates must be finite and nonnegative");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.prec > 0.0) {
            return bad("prec must be positive");
        }
        match self.regressors {
            RegressorKind::Polynomial { degree }
            | RegressorKind::PolynomialWithReciprocals { degree }
                if degree == 0 =>
            {
                bad("regressor degree must be at least 1")
            }
            _ => Ok(()),
        }
    }
}

/// Diagonal AdaGrad: per-coordinate sums of squared gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGrad<T> {
    accum: Vec<Vec<T>>,
}

impl<T: Real> AdaGrad<T> {
    /// Accumulators shaped like `blocks`, starting at zero.
    pub fn new(block_sizes: impl IntoIterator<Item = usize>) -> Self {
        Self {
            accum: block_sizes
                .into_iter()
                .map(|n| vec![T::zero(); n])
                .collect(),
        }
    }

    pub fn accumulators(&self) -> &[Vec<T>] {
        &self.accum
    }

    /// `θ ← θ − η g / √(G + ε)` with `G` updated by `g²` first.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]], eta: T) {
        assert_eq!(params.len(), self.accum.len(), "block count");
        assert_eq!(grads.len(), self.accum.len(), "block count");
        let eps = T::lit(ADAGRAD_EPS);
        for ((theta, g), acc) in params.iter_mut().zip(grads).zip(&mut self.accum) {
            assert_eq!(theta.len(), acc.len(), "block size");
            for ((t, &gi), a) in theta.iter_mut().zip(g.iter()).zip(acc.iter_mut()) {
                *a = *a + gi * gi;
                if gi != T::zero() {
                    *t = *t - eta * gi / (*a + eps).sqrt();
                }
            }
        }
    }
}

/// Optimizer state across Phase 2: one accumulator per parameter group and the
/// most recent log-likelihood values.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub trend: AdaGrad<T>,
    pub var: AdaGrad<T>,
    pub iteration: usize,
    pub loglik_history: Vec<T>,
}

impl<T: Real> OptimizerState<T> {
    fn new(trend: &TrendNetParams<T>, var: &RawVarParams<T>) -> Self {
        Self {
            trend: AdaGrad::new(trend.blocks().iter().map(|b| b.len())),
            var: AdaGrad::new(var.a_raw.iter().map(|a| a.len()).chain([var.l_raw.len()])),
            iteration: 0,
            loglik_history: Vec::with_capacity(3),
        }
    }

    fn record(&mut self, ll: T) {
        if self.loglik_history.len() == 3 {
            self.loglik_history.remove(0);
        }
        self.loglik_history.push(ll);
    }

    /// `(rc1, rc2)`: relative changes between the last three `ℓ` values, oldest
    /// pair first. `None` until enough values exist.
    pub fn relative_changes(&self) -> (Option<T>, Option<T>) {
        let h = &self.loglik_history;
        let rel = |new: T, old: T| ((new - old) / old).abs();
        match h.len() {
            3 => (Some(rel(h[1], h[0])), Some(rel(h[2], h[1]))),
            2 => (None, Some(rel(h[1], h[0]))),
            _ => (None, None),
        }
    }
}

/// One row of the Phase-2 training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loglik: f64,
    pub rc1: Option<f64>,
    pub rc2: Option<f64>,
    pub spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel<T> {
    pub trend_params: TrendNetParams<T>,
    pub raw_var: RawVarParams<T>,
    /// Derived from `raw_var`; kept alongside it for convenience.
    pub causal: CausalVarParams<T>,
    pub regressors: RegressorSpec,
    pub final_loglik: T,
    pub iterations_used: usize,
    pub converged: bool,
}

impl<T: Real> FittedModel<T> {
    pub fn lag_order(&self) -> usize {
        self.causal.lag_order()
    }

    pub fn dim(&self) -> usize {
        self.causal.dim()
    }

    /// Training length `T` the regressors are scaled by.
    pub fn train_len(&self) -> usize {
        self.regressors.series_len
    }

    /// Trend rows `μ_1 … μ_len` from the trained network (`len` may exceed `T`).
    pub fn trend(&self, len: usize) -> Matrix<T> {
        let xs = make_regressors(&self.regressors, len);
        trend_net::trend_sequence(
            &xs,
            &self.trend_params,
            &LstmState::zeros(self.trend_params.units()),
        )
    }

    pub fn residuals(&self, y: &TimeSeriesFrame<T>) -> Result<Matrix<T>> {
        likelihood::residuals(y, &self.trend(y.len()), &self.causal)
    }
}

/// Starting VAR block: `A = 0` and `L` diagonal with the sample standard
/// deviations of first differences.
pub fn initial_var_params<T: Real>(y: &TimeSeriesFrame<T>, p: usize) -> RawVarParams<T> {
    let v = y.values();
    let (n, m) = v.shape();
    let sd: Vec<T> = (0..m)
        .map(|c| {
            if n < 3 {
                return T::one();
            }
            let diffs: Vec<T> = (1..n).map(|t| v[(t, c)] - v[(t - 1, c)]).collect();
            let k = T::from_usize_lossy(diffs.len());
            let mean = diffs.iter().copied().sum::<T>() / k;
            let var = diffs.iter().map(|&d| (d - mean) * (d - mean)).sum::<T>() / (k - T::one());
            let sd = var.sqrt();
            if sd > T::zero() && sd.is_finite() {
                sd
            } else {
                T::one()
            }
        })
        .collect();
    RawVarParams::zeros(m, p, &Matrix::diag(&sd))
}

/// Starting trend network: seeded uniform weights, zero gate biases, and the
/// head bias at the column means of `y`.
pub fn initial_trend_params<T: Real>(
    y: &TimeSeriesFrame<T>,
    config: &TrainConfig,
) -> TrendNetParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = TrendNetParams::init(
        config.regressors.input_dim(),
        config.units,
        y.dim(),
        &mut rng,
    );
    let v = y.values();
    let n = T::from_usize_lossy(v.rows());
    for c in 0..v.cols() {
        params.b_mu[(c, 0)] = (0..v.rows()).map(|t| v[(t, c)]).sum::<T>() / n;
    }
    params
}

fn blocks_as_slices<T: Real>(blocks: &[Matrix<T>]) -> Vec<&[T]> {
    blocks.iter().map(|g| g.as_slice()).collect()
}

/// Least-squares pretraining of the trend network by AdaGrad on
/// `Σ_t ‖y_t − μ_t‖²`, starting from `init`.
pub fn phase1_pretrain<T: Real>(
    y: &TimeSeriesFrame<T>,
    xs: &Matrix<T>,
    init: TrendNetParams<T>,
    config: &TrainConfig,
) -> Result<TrendNetParams<T>> {
    if y.len() < 2 {
        return Err(Error::TooShort { len: y.len(), p: 1 });
    }
    let mut params = init;
    let mut opt = AdaGrad::new(params.blocks().iter().map(|b| b.len()));
    let eta = T::lit(config.phase1_eta);
    let mut tape = Tape::new();
    for iteration in 0..config.phase1_iters {
        tape.clear();
        let vars = TrendNetVars::register(&mut tape, &params);
        let mu = trend_net::trend_on_tape(&mut tape, &vars, xs);
        let yv = tape.constant(y.values().clone());
        let diff = tape.sub(yv, mu);
        let loss = tape.sum_squares(diff);
        if !tape.scalar(loss).is_finite() {
            return Err(Error::DivergedLoss { iteration });
        }
        let grads = tape.gradient(loss).params(&tape);
        let mut blocks = params.blocks_mut();
        let mut slices: Vec<&mut [T]> = blocks.iter_mut().map(|b| b.as_mut_slice()).collect();
        opt.step(&mut slices, &blocks_as_slices(&grads), eta);
    }
    Ok(params)
}

pub fn fit<T: Real>(y: &TimeSeriesFrame<T>, config: &TrainConfig) -> Result<FittedModel<T>> {
    fit_with_log(y, config, |_| {})
}

/// Runs both phases, reporting every Phase-2 iteration to `on_iteration`.
pub fn fit_with_log<T: Real>(
    y: &TimeSeriesFrame<T>,
    config: &TrainConfig,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> Result<FittedModel<T>> {
    config.validate()?;
    let n = y.len();
    if n <= config.p {
        return Err(Error::TooShort {
            len: n,
            p: config.p,
        });
    }
    let regressors = RegressorSpec::new(config.regressors, n);
    let xs = make_regressors::<T>(&regressors, n);

    let trend0 = initial_trend_params(y, config);
    let trend_params = phase1_pretrain(y, &xs, trend0, config)?;
    let raw_var = initial_var_params(y, config.p);
    phase2(
        y,
        &xs,
        regressors,
        trend_params,
        raw_var,
        config,
        &mut on_iteration,
    )
}

/// Clears `tape` and records `ℓ` for the full model, registering the trend
/// blocks (in [`TrendNetParams::blocks`] order) and then the VAR blocks as
/// parameters.
pub fn record_loglik<T: Real>(
    tape: &mut Tape<T>,
    y: &Matrix<T>,
    xs: &Matrix<T>,
    trend: &TrendNetParams<T>,
    raw: &RawVarParams<T>,
) -> Result<(CausalVars, Var)> {
    tape.clear();
    let trend_vars = TrendNetVars::register(tape, trend);
    let var_vars = RawVarVars::register(tape, raw);
    let mu = trend_net::trend_on_tape(tape, &trend_vars, xs);
    let causal_vars = var_stability::enforce_causality_on_tape(tape, &var_vars)?;
    let ll = likelihood::log_likelihood_on_tape(tape, y, mu, &causal_vars)?;
    Ok((causal_vars, ll))
}

/// Training loss `−ℓ` and its gradient, one matrix per parameter block in
/// registration order.
pub fn loss_and_gradient<T: Real>(
    y: &Matrix<T>,
    xs: &Matrix<T>,
    trend: &TrendNetParams<T>,
    raw: &RawVarParams<T>,
) -> Result<(T, Vec<Matrix<T>>)> {
    let mut tape = Tape::new();
    let (_, ll) = record_loglik(&mut tape, y, xs, trend, raw)?;
    let loss = tape.neg(ll);
    Ok((tape.scalar(loss), tape.gradient(loss).params(&tape)))
}

/// Joint likelihood maximization from the given starting parameters.
pub fn phase2<T: Real>(
    y: &TimeSeriesFrame<T>,
    xs: &Matrix<T>,
    regressors: RegressorSpec,
    mut trend_params: TrendNetParams<T>,
    mut raw_var: RawVarParams<T>,
    config: &TrainConfig,
    on_iteration: &mut dyn FnMut(&IterationRecord),
) -> Result<FittedModel<T>> {
    let mut state = OptimizerState::new(&trend_params, &raw_var);
    let (eta1, eta2) = (T::lit(config.eta1), T::lit(config.eta2));
    let prec = T::lit(config.prec);
    let mut tape = Tape::new();
    let mut converged = false;
    let mut causal;
    let mut loglik;
    let mut k = 0;
    loop {
        let step = record_loglik(&mut tape, y.values(), xs, &trend_params, &raw_var);
        let (causal_vars, ll) = step.map_err(|e| e.at_iteration(k))?;
        loglik = tape.scalar(ll);
        if !loglik.is_finite() {
            return Err(Error::DivergedLoss { iteration: k });
        }
        causal = var_stability::read_causal(&tape, &causal_vars);
        state.record(loglik);
        state.iteration = k;
        let (rc1, rc2) = state.relative_changes();
        let radius = causal.spectral_radius().map_err(|e| e.at_iteration(k))?;
        on_iteration(&IterationRecord {
            iteration: k,
            loglik: loglik.as_f64(),
            rc1: rc1.map(Real::as_f64),
            rc2: rc2.map(Real::as_f64),
            spectral_radius: radius.as_f64(),
        });
        if let (Some(r1), Some(r2)) = (rc1, rc2) {
            if r1 <= prec && r2 <= prec {
                converged = true;
                break;
            }
        }
        if k >= config.max_iters {
            break;
        }

        let loss = tape.neg(ll);
        let grads = tape.gradient(loss).params(&tape);
        let (g_trend, g_var) = grads.split_at(TREND_BLOCKS);
        {
            let mut blocks = trend_params.blocks_mut();
            let mut slices: Vec<&mut [T]> = blocks.iter_mut().map(|b| b.as_mut_slice()).collect();
            state
                .trend
                .step(&mut slices, &blocks_as_slices(g_trend), eta1);
        }
        {
            let RawVarParams { a_raw, l_raw } = &mut raw_var;
            let mut slices: Vec<&mut [T]> = a_raw.iter_mut().map(|a| a.as_mut_slice()).collect();
            slices.push(l_raw.as_mut_slice());
            state.var.step(&mut slices, &blocks_as_slices(g_var), eta2);
        }
        k += 1;
    }
    log::info!(
        "phase 2 finished after {k} updates (converged: {converged}, loglik {:.6})",
        loglik.as_f64()
    );
    Ok(FittedModel {
        trend_params,
        raw_var,
        causal,
        regressors,
        final_loglik: loglik,
        iterations_used: k,
        converged,
    })
}
