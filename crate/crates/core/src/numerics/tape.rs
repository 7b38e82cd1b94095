//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records matrix-valued primitives in evaluation order. Each
//! recorded value is addressed by a [`Var`] handle. [`Tape::gradient`] runs one
//! reverse sweep from a scalar (`1 × 1`) node and returns the adjoint of every
//! node that influences it.
//!
//! Primitives are deliberately coarse (matmul, triangular solve, Cholesky,
//! Lyapunov solve, ...) so that tapes stay short: a likelihood over `T`
//! observations records `O(T)` nodes regardless of matrix sizes.
//!
//! ```
//! use deepvarwt::numerics::{Matrix, Tape};
//!
//! let mut tape = Tape::<f64>::new();
//! let theta = tape.param(Matrix::from_rows(&[&[3.0]]));
//! let loss = tape.sum_squares(theta);
//! let grads = tape.gradient(loss);
//! assert_eq!(grads.wrt(theta)[(0, 0)], 6.0);
//! ```

use crate::error::Result;
use crate::numerics::linalg::{self, LyapunovSystem};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Source coordinate for a [`Tape::gather`] output entry: `(source, flat index)`.
pub type GatherIndex = Option<(u32, u32)>;

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, T),
    Sigmoid(Var),
    Tanh(Var),
    Log(Var),
    Sum(Var),
    SumSquares(Var),
    Transpose(Var),
    Gather {
        sources: Vec<Var>,
        index: Vec<GatherIndex>,
    },
    Cholesky(Var),
    SolveLower {
        l: Var,
        b: Var,
        transpose: bool,
    },
    Lyapunov {
        a: Var,
        q: Var,
        system: Box<LyapunovSystem<T>>,
    },
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

/// Recording of one differentiable computation.
///
/// A tape has a single owner; independent computations use independent tapes.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: Vec<Var>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    /// Drops all nodes and parameter registrations, keeping allocations.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.params.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Registers a trainable leaf. Slots are numbered in registration order.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        let v = self.push(value, Op::Leaf);
        self.params.push(v);
        v
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> T {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "scalar() on a non-scalar node");
        m[(0, 0)]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul_t(self.value(b));
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).add(self.value(b));
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).sub(self.value(b));
        self.push(value, Op::Sub(a, b))
    }

    /// Adds the `1 × c` row `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(row));
        assert_eq!(rv.rows(), 1, "add_row expects a row vector");
        assert_eq!(av.cols(), rv.cols(), "add_row column mismatch");
        let mut value = av.clone();
        for i in 0..value.rows() {
            for (x, &r) in value.row_mut(i).iter_mut().zip(rv.as_slice()) {
                *x = *x + r;
            }
        }
        self.push(value, Op::AddRow(a, row))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).hadamard(self.value(b));
        self.push(value, Op::Hadamard(a, b))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).scale(s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.tanh());
        self.push(value, Op::Tanh(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.ln());
        self.push(value, Op::Log(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::from_vec(1, 1, vec![self.value(a).sum()]);
        self.push(value, Op::Sum(a))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).as_slice().iter().map(|&x| x * x).sum();
        self.push(Matrix::from_vec(1, 1, vec![s]), Op::SumSquares(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    /// General structural primitive: output entry `k` (row-major) is
    /// `sources[s][i]` for `index[k] = Some((s, i))`, or zero for `None`.
    pub fn gather(
        &mut self,
        sources: &[Var],
        rows: usize,
        cols: usize,
        index: Vec<GatherIndex>,
    ) -> Var {
        assert_eq!(index.len(), rows * cols, "gather index length");
        let data = index
            .iter()
            .map(|ix| match ix {
                Some((s, i)) => self.value(sources[*s as usize]).as_slice()[*i as usize],
                None => T::zero(),
            })
            .collect();
        self.push(
            Matrix::from_vec(rows, cols, data),
            Op::Gather {
                sources: sources.to_vec(),
                index,
            },
        )
    }

    /// Lower-triangular Cholesky factor; jitter is treated as a constant shift.
    pub fn cholesky(&mut self, a: Var) -> Result<Var> {
        let l = linalg::cholesky(self.value(a))?;
        Ok(self.push(l, Op::Cholesky(a)))
    }

    /// `L⁻¹ B`, or `L⁻ᵀ B` when `transpose`, for lower-triangular `L`.
    pub fn solve_lower(&mut self, l: Var, b: Var, transpose: bool) -> Result<Var> {
        let x = linalg::solve_lower(self.value(l), self.value(b), transpose)?;
        Ok(self.push(x, Op::SolveLower { l, b, transpose }))
    }

    /// Γ solving `Γ = A Γ Aᵀ + Q`.
    pub fn lyapunov(&mut self, a: Var, q: Var) -> Result<Var> {
        let system = LyapunovSystem::new(self.value(a))?;
        let gamma = system.solve(self.value(q));
        Ok(self.push(
            gamma,
            Op::Lyapunov {
                a,
                q,
                system: Box::new(system),
            },
        ))
    }

    // ---- structural helpers built on `gather` ----

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let cols = self.value(a).cols();
        let index = (start * cols..end * cols)
            .map(|i| Some((0, i as u32)))
            .collect();
        self.gather(&[a], end - start, cols, index)
    }

    pub fn block(&mut self, a: Var, r0: usize, c0: usize, rows: usize, cols: usize) -> Var {
        let ac = self.value(a).cols();
        let mut index = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                index.push(Some((0, ((r0 + i) * ac + c0 + j) as u32)));
            }
        }
        self.gather(&[a], rows, cols, index)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let n = self.value(a).len();
        assert_eq!(n, rows * cols, "reshape size mismatch");
        let index = (0..n).map(|i| Some((0, i as u32))).collect();
        self.gather(&[a], rows, cols, index)
    }

    pub fn vstack(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols();
        let mut index = Vec::new();
        let mut rows = 0;
        for (s, &p) in parts.iter().enumerate() {
            let v = self.value(p);
            assert_eq!(v.cols(), cols, "vstack column mismatch");
            rows += v.rows();
            index.extend((0..v.len()).map(|i| Some((s as u32, i as u32))));
        }
        self.gather(parts, rows, cols, index)
    }

    /// Diagonal of a square matrix as a column vector.
    pub fn diag_part(&mut self, a: Var) -> Var {
        let (n, c) = self.shape(a);
        assert_eq!(n, c, "diag_part of non-square matrix");
        let index = (0..n).map(|i| Some((0, (i * n + i) as u32))).collect();
        self.gather(&[a], n, 1, index)
    }

    /// Fills an `m × m` lower-triangular matrix row by row from the
    /// `m(m+1)/2` entries of `v`.
    pub fn lower_from_vec(&mut self, v: Var, m: usize) -> Var {
        assert_eq!(self.value(v).len(), m * (m + 1) / 2, "packed lower length");
        let mut index = vec![None; m * m];
        let mut k = 0u32;
        for i in 0..m {
            for j in 0..=i {
                index[i * m + j] = Some((0, k));
                k += 1;
            }
        }
        self.gather(&[v], m, m, index)
    }

    /// `Σ log(d_i²)` over the diagonal of `l`, i.e. `log |L Lᵀ|` for triangular `L`.
    pub fn logdet_gram_of_triangular(&mut self, l: Var) -> Var {
        let d = self.diag_part(l);
        let d2 = self.hadamard(d, d);
        let lg = self.ln(d2);
        self.sum(lg)
    }

    /// Reverse sweep from the scalar node `loss`.
    pub fn gradient(&self, loss: Var) -> Gradients<T> {
        assert_eq!(
            self.value(loss).shape(),
            (1, 1),
            "loss must be a scalar node"
        );
        let mut adj: Vec<Option<Matrix<T>>> = Vec::with_capacity(loss.0 + 1);
        adj.resize_with(loss.0 + 1, || None);
        adj[loss.0] = Some(Matrix::from_vec(1, 1, vec![T::one()]));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {
                    // Leaves keep their adjoint for lookup.
                    adj[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    // C = A Bᵀ: Ā = C̄ B, B̄ = C̄ᵀ A.
                    let ga = g.matmul(self.value(*b));
                    let gb = g.t_matmul(self.value(*a));
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *b, g.clone());
                    accumulate(&mut adj, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *b, g.scale(-T::one()));
                    accumulate(&mut adj, *a, g);
                }
                Op::AddRow(a, row) => {
                    let cols = g.cols();
                    let mut gr = Matrix::zeros(1, cols);
                    for i in 0..g.rows() {
                        for (acc, &x) in gr.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *acc = *acc + x;
                        }
                    }
                    accumulate(&mut adj, *row, gr);
                    accumulate(&mut adj, *a, g);
                }
                Op::Hadamard(a, b) => {
                    let ga = g.hadamard(self.value(*b));
                    let gb = g.hadamard(self.value(*a));
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Scale(a, s) => accumulate(&mut adj, *a, g.scale(*s)),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = g.zip_map(y, |gi, yi| gi * yi * (T::one() - yi));
                    accumulate(&mut adj, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = g.zip_map(y, |gi, yi| gi * (T::one() - yi * yi));
                    accumulate(&mut adj, *a, ga);
                }
                Op::Log(a) => {
                    let ga = g.zip_map(self.value(*a), |gi, xi| gi / xi);
                    accumulate(&mut adj, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(&mut adj, *a, Matrix::from_vec(r, c, vec![g[(0, 0)]; r * c]));
                }
                Op::SumSquares(a) => {
                    let two_g = g[(0, 0)] + g[(0, 0)];
                    accumulate(&mut adj, *a, self.value(*a).scale(two_g));
                }
                Op::Transpose(a) => accumulate(&mut adj, *a, g.transpose()),
                Op::Gather { sources, index } => {
                    let mut parts: Vec<Matrix<T>> = sources
                        .iter()
                        .map(|s| {
                            let (r, c) = self.shape(*s);
                            Matrix::zeros(r, c)
                        })
                        .collect();
                    for (k, ix) in index.iter().enumerate() {
                        if let Some((s, i)) = ix {
                            let slot = &mut parts[*s as usize].as_mut_slice()[*i as usize];
                            *slot = *slot + g.as_slice()[k];
                        }
                    }
                    for (s, part) in sources.iter().zip(parts) {
                        accumulate(&mut adj, *s, part);
                    }
                }
                Op::Cholesky(a) => {
                    let ga = cholesky_adjoint(&node.value, &g);
                    accumulate(&mut adj, *a, ga);
                }
                Op::SolveLower { l, b, transpose } => {
                    let lv = self.value(*l);
                    let x = &node.value;
                    let gb = linalg::solve_lower(lv, &g, !*transpose)
                        .expect("factor was nonsingular in the forward pass");
                    let gl = if *transpose {
                        x.matmul_t(&gb).lower().scale(-T::one())
                    } else {
                        gb.matmul_t(x).lower().scale(-T::one())
                    };
                    accumulate(&mut adj, *l, gl);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Lyapunov { a, q, system } => {
                    let s = system.solve_adjoint(&g);
                    let av = self.value(*a);
                    let gamma = &node.value;
                    // Ā = S A Γᵀ + Sᵀ A Γ
                    let sa = s.matmul(av);
                    let sta = s.t_matmul(av);
                    let ga = sa.matmul_t(gamma).add(&sta.matmul(gamma));
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *q, s);
                }
            }
        }
        Gradients {
            adjoints: adj,
            params: self.params.clone(),
        }
    }
}

fn accumulate<T: Real>(adj: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn sigmoid_scalar<T: Real>(x: T) -> T {
    sigmoid(x)
}

/// Adjoint of `A ↦ chol(A)` for symmetric `A`, given `L` and `L̄`:
/// `Ā = sym(L⁻ᵀ Φ(Lᵀ L̄) L⁻¹)` with Φ taking the lower triangle and halving
/// the diagonal.
fn cholesky_adjoint<T: Real>(l: &Matrix<T>, gl: &Matrix<T>) -> Matrix<T> {
    let n = l.rows();
    let mut phi = l.t_matmul(gl);
    let half = T::lit(0.5);
    for i in 0..n {
        for j in 0..n {
            if j > i {
                phi[(i, j)] = T::zero();
            } else if i == j {
                phi[(i, j)] = phi[(i, j)] * half;
            }
        }
    }
    // S = L⁻ᵀ Φ L⁻¹ = L⁻ᵀ (L⁻ᵀ Φᵀ)ᵀ
    let x = linalg::solve_lower(l, &phi.transpose(), true).expect("cholesky factor nonsingular");
    let s = linalg::solve_lower(l, &x.transpose(), true).expect("cholesky factor nonsingular");
    s.symmetrized()
}

/// Adjoints from one reverse sweep.
pub struct Gradients<T> {
    adjoints: Vec<Option<Matrix<T>>>,
    params: Vec<Var>,
}

impl<T: Real> Gradients<T> {
    /// Whether `v` lies upstream of the loss.
    pub fn is_connected(&self, v: Var) -> bool {
        self.adjoints.get(v.0).is_some_and(|a| a.is_some())
    }

    /// Gradient of the loss w.r.t. the value at `v`; `None` when `v` does not
    /// influence the loss.
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.adjoints.get(v.0).and_then(|a| a.as_ref())
    }

    /// Gradient w.r.t. `v`; a `1 × 1` zero when `v` is disconnected
    /// ([`Gradients::params`] gives correctly shaped zeros).
    pub fn wrt(&self, v: Var) -> Matrix<T> {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(1, 1))
    }

    /// Per-slot gradients in registration order. Disconnected slots get a
    /// zero gradient of the slot's shape and a logged warning.
    pub fn params(&self, tape: &Tape<T>) -> Vec<Matrix<T>> {
        self.params
            .iter()
            .enumerate()
            .map(|(slot, &v)| match self.get(v) {
                Some(g) => g.clone(),
                None => {
                    log::warn!("parameter slot {slot} does not influence the loss");
                    let (r, c) = tape.shape(v);
                    Matrix::zeros(r, c)
                }
            })
            .collect()
    }

    /// Errors with `DisconnectedParameter` on the first slot the loss ignores.
    pub fn require_connected(&self) -> Result<()> {
        for (slot, &v) in self.params.iter().enumerate() {
            if !self.is_connected(v) {
                return Err(crate::error::Error::DisconnectedParameter(slot));
            }
        }
        Ok(())
    }
}
