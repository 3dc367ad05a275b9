//! Dense tensors, difference mode matrices, mode-k contraction, and the
//! linear-algebra step that turns block moments into polynomial coefficients.
//!
//! The mode matrix along an axis with partition points
//! `p_α = ξ + αΔ − a` is
//!
//! ```text
//! V[α, j] = p_α^j − p_{α−1}^j ,   1 ≤ α, j ≤ N ,
//! ```
//!
//! a difference of shifted monomial powers. Its determinant has the closed
//! form `Δ^{N(N+1)/2} · ∏_{0≤i<j≤N} (j−i)` — strictly positive and
//! independent of the center `a` — so the mode solves are always well posed
//! in exact arithmetic. In floating point the matrices become severely
//! ill-conditioned as N grows; solves switch to double-double arithmetic at
//! a configurable threshold (default N ≥ 20).
//!
//! Coefficient recovery applies one linear solve per mode (LU factored once
//! per axis, fibers reused) followed by the componentwise weighting
//! `W_β = ∏_k (β_k + 1)`, producing the coefficient tensor of
//! `∑ c_β (x − a)^β`.

use std::io;

use rayon::prelude::*;

use crate::dd::Dd;
use crate::geometry::{index_iter, Grid, MultiIndex, Rect};
use crate::moments::MomentTensor;

/// Errors from tensor shape mismatches and singular solves.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("data length {found} does not match shape product {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("mode {mode} out of range for rank {rank}")]
    ModeOutOfRange { mode: usize, rank: usize },
    #[error("matrix dimension {matrix_dim} does not match mode-{mode} extent {extent}")]
    ContractionMismatch {
        matrix_dim: usize,
        mode: usize,
        extent: usize,
    },
    #[error("singular matrix in mode-{mode} solve")]
    Singular { mode: usize },
    #[error("center has {found} components, expected {expected}")]
    CenterDimension { expected: usize, found: usize },
}

// ------------------------------------------------------------------
// Dense tensors
// ------------------------------------------------------------------

/// A dense row-major tensor (last axis fastest). Rank 0 holds one value.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Copy> Tensor<T> {
    /// Wraps `data` (row-major, last axis fastest) with the given shape.
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    /// A rank-0 tensor holding a single value.
    pub fn scalar(value: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    /// A tensor of the given shape filled with one value.
    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![value; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Row-major offset of a 0-based index.
    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let mut off = 0;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[k]);
            off = off * self.shape[k] + i;
        }
        off
    }

    /// Value at a 0-based multi-index.
    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    /// Mutable value at a 0-based multi-index.
    pub fn get_mut(&mut self, idx: &[usize]) -> &mut T {
        let off = self.offset(idx);
        &mut self.data[off]
    }

    /// Componentwise conversion.
    pub fn map<U: Copy, F: Fn(T) -> U>(&self, f: F) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Stride of mode `k` (0-based) in row-major layout.
fn mode_stride(shape: &[usize], k: usize) -> usize {
    shape[k + 1..].iter().product()
}

/// Base offsets of every mode-`k` fiber, in deterministic (row-major) order.
fn fiber_offsets(shape: &[usize], k: usize) -> Vec<usize> {
    let reduced: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, &e)| e)
        .collect();
    let mut offsets = Vec::with_capacity(reduced.iter().product());
    for idx in index_iter(&reduced, 0) {
        // Re-insert a zero at position k and compute the row-major offset.
        let mut off = 0;
        let mut r = 0;
        for (j, &extent) in shape.iter().enumerate() {
            let i = if j == k {
                0
            } else {
                let v = idx[r];
                r += 1;
                v
            };
            off = off * extent + i;
        }
        offsets.push(off);
    }
    offsets
}

// ------------------------------------------------------------------
// Matrices and LU solves (generic over f64 / double-double)
// ------------------------------------------------------------------

/// A dense row-major matrix of doubles.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::DataLength {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Determinant by LU with partial pivoting (0 for singular input).
    pub fn lu_det(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "determinant needs a square matrix");
        match Lu::<f64>::factor(self.data.clone(), self.rows) {
            Ok(lu) => lu.det(),
            Err(_) => 0.0,
        }
    }

    /// 1-norm condition number estimate via explicit inverse columns.
    /// Intended for the small (N ≤ a few dozen) mode matrices.
    pub fn condition_1norm(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return 1.0;
        }
        let norm = |data: &dyn Fn(usize, usize) -> f64| -> f64 {
            (0..n)
                .map(|j| (0..n).map(|i| data(i, j).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let a_norm = norm(&|i, j| self.get(i, j));
        let lu = match Lu::<f64>::factor(self.data.clone(), n) {
            Ok(lu) => lu,
            Err(_) => return f64::INFINITY,
        };
        let mut inv_norm = 0.0f64;
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            lu.solve(&mut e);
            inv_norm = inv_norm.max(e.iter().map(|v| v.abs()).sum());
        }
        a_norm * inv_norm
    }
}

/// The scalar field the LU kernel is generic over.
pub(crate) trait Scalar:
    Copy
    + Send
    + Sync
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(x: f64) -> Self;
    fn abs(self) -> Self;
}

impl Scalar for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;
    fn from_f64(x: f64) -> f64 {
        x
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl Scalar for Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    fn from_f64(x: f64) -> Dd {
        Dd::from_f64(x)
    }
    fn abs(self) -> Dd {
        Dd::abs(self)
    }
}

/// An LU factorization with partial pivoting, reusable across many
/// right-hand sides.
pub(crate) struct Lu<T> {
    n: usize,
    a: Vec<T>,
    piv: Vec<usize>,
    sign: bool, // true = even permutation
}

impl<T: Scalar> Lu<T> {
    /// Factors a row-major `n × n` matrix.
    pub(crate) fn factor(mut a: Vec<T>, n: usize) -> Result<Self, TensorError> {
        debug_assert_eq!(a.len(), n * n);
        let mut piv = Vec::with_capacity(n);
        let mut sign = true;
        for col in 0..n {
            // Partial pivot: largest magnitude on or below the diagonal.
            let mut best = col;
            let mut best_mag = a[col * n + col].abs();
            for r in col + 1..n {
                let mag = a[r * n + col].abs();
                if mag > best_mag {
                    best = r;
                    best_mag = mag;
                }
            }
            if !(best_mag > T::ZERO) {
                return Err(TensorError::Singular { mode: col });
            }
            if best != col {
                for c in 0..n {
                    a.swap(col * n + c, best * n + c);
                }
                sign = !sign;
            }
            piv.push(best);
            let inv_pivot = T::ONE / a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] * inv_pivot;
                a[r * n + col] = factor;
                for c in col + 1..n {
                    let sub = factor * a[col * n + c];
                    a[r * n + c] = a[r * n + c] - sub;
                }
            }
        }
        Ok(Self { n, a, piv, sign })
    }

    /// Solves `A x = b` in place.
    pub(crate) fn solve(&self, b: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for (col, &p) in self.piv.iter().enumerate() {
            b.swap(col, p);
        }
        // Forward substitution with unit lower triangle.
        for r in 1..n {
            let mut acc = b[r];
            for c in 0..r {
                acc = acc - self.a[r * n + c] * b[c];
            }
            b[r] = acc;
        }
        // Back substitution.
        for r in (0..n).rev() {
            let mut acc = b[r];
            for c in r + 1..n {
                acc = acc - self.a[r * n + c] * b[c];
            }
            b[r] = acc / self.a[r * n + r];
        }
    }

    /// Determinant: product of pivots times the permutation sign.
    pub(crate) fn det(&self) -> T {
        let mut d = if self.sign { T::ONE } else { -T::ONE };
        for i in 0..self.n {
            d = d * self.a[i * self.n + i];
        }
        d
    }
}

// ------------------------------------------------------------------
// Mode matrices
// ------------------------------------------------------------------

/// The difference mode matrix of one axis: partition origin `ξ`, block
/// width `Δ`, expansion center `a`, and size `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrix {
    n: usize,
    xi: f64,
    delta: f64,
    center: f64,
    matrix: Matrix,
}

/// Builds the mode matrix `V[α, j] = (ξ+αΔ−a)^j − (ξ+(α−1)Δ−a)^j`
/// for `1 ≤ α, j ≤ n`.
///
/// ```
/// use impoly::tensorops::vandermonde;
/// let v = vandermonde(-1.0, 1.0, 0.0, 2);
/// assert_eq!(v.entry(1, 1), 1.0);
/// assert_eq!(v.entry(1, 2), -1.0);
/// assert_eq!(v.entry(2, 1), 1.0);
/// assert_eq!(v.entry(2, 2), 1.0);
/// ```
pub fn vandermonde(xi: f64, delta: f64, center: f64, n: usize) -> ModeMatrix {
    assert!(n >= 1, "mode matrix needs N >= 1");
    assert!(delta > 0.0, "block width must be positive");
    let mut data = vec![0.0; n * n];
    for alpha in 1..=n {
        let hi = xi + alpha as f64 * delta - center;
        let lo = xi + (alpha - 1) as f64 * delta - center;
        for j in 1..=n {
            data[(alpha - 1) * n + (j - 1)] = hi.powi(j as i32) - lo.powi(j as i32);
        }
    }
    ModeMatrix {
        n,
        xi,
        delta,
        center,
        matrix: Matrix::new(n, n, data).expect("square by construction"),
    }
}

impl ModeMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Entry at 1-based row `alpha`, column `j`.
    pub fn entry(&self, alpha: usize, j: usize) -> f64 {
        self.matrix.get(alpha - 1, j - 1)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Re-assembles the entries in double-double arithmetic (the axis data
    /// are exact doubles, so the entries are correctly rounded at dd
    /// precision rather than inherited from the f64 assembly).
    fn dd_entries(&self) -> Vec<Dd> {
        let n = self.n;
        let xi = Dd::from_f64(self.xi);
        let delta = Dd::from_f64(self.delta);
        let a = Dd::from_f64(self.center);
        let mut data = vec![Dd::ZERO; n * n];
        for alpha in 1..=n {
            let hi = xi + Dd::from_f64(alpha as f64) * delta - a;
            let lo = xi + Dd::from_f64((alpha - 1) as f64) * delta - a;
            for j in 1..=n {
                data[(alpha - 1) * n + (j - 1)] = hi.powi(j as u32) - lo.powi(j as u32);
            }
        }
        data
    }
}

/// Mode matrices of every axis of `grid`, expanded about `center`.
pub fn mode_matrices(grid: &Grid, center: &[f64]) -> Vec<ModeMatrix> {
    (0..grid.rank())
        .map(|k| {
            vandermonde(
                grid.base().lo()[k],
                grid.deltas()[k],
                center[k],
                grid.counts()[k],
            )
        })
        .collect()
}

/// Closed-form determinant of the size-`n` mode matrix: value, natural log,
/// and an overflow flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetValue {
    /// `Δ^{n(n+1)/2} · ∏_{0≤i<j≤n}(j−i)`; infinite when out of double range.
    pub value: f64,
    /// Natural logarithm of the value, finite far beyond the overflow point.
    pub log_value: f64,
    /// True when `value` left the representable double range (first at
    /// n = 27 when Δ = 1; the boundary shifts with Δ^{n(n+1)/2}).
    pub overflowed: bool,
}

/// Determinant of the difference mode matrix in closed form.
///
/// The product `∏_{0≤i<j≤n}(j−i)` regroups as `∏_{j=1..n} j!` (each column
/// gap contributes a factorial), and each of the `n(n+1)/2` factors carries
/// one power of `Δ`.
///
/// ```
/// use impoly::tensorops::vandermonde_det;
/// assert_eq!(vandermonde_det(1, 0.5).value, 0.5);
/// assert_eq!(vandermonde_det(2, 1.0).value, 2.0);
/// ```
pub fn vandermonde_det(n: usize, delta: f64) -> DetValue {
    assert!(n >= 1 && delta > 0.0);
    let exponent = (n * (n + 1) / 2) as i32;
    let mut value = delta.powi(exponent);
    let mut log_value = exponent as f64 * delta.ln();
    // Superfactorial ∏_{j=1..n} j!, accumulated as (n+1−k) copies of ln k.
    let mut factorial = 1.0f64;
    for j in 1..=n {
        factorial *= j as f64;
        value *= factorial;
    }
    for k in 1..=n {
        log_value += (n + 1 - k) as f64 * (k as f64).ln();
    }
    DetValue {
        value,
        log_value,
        overflowed: !value.is_finite(),
    }
}

// ------------------------------------------------------------------
// Mode-k contraction
// ------------------------------------------------------------------

/// Which matrix index to sum against the tensor mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Sum the matrix's first (row) index: `(A ·^{1→k} C)[…j…] = Σ_i A[i,j] C[…i…]`.
    First,
    /// Sum the matrix's second (column) index: `(A ·^{2→k} C)[…i…] = Σ_j A[i,j] C[…j…]`.
    Second,
}

/// Contracts one matrix index against mode `k` (1-based) of a tensor.
///
/// The mode-`k` extent becomes the matrix's free dimension; every other
/// mode keeps its extent and order.
pub fn contract(
    a: &Matrix,
    slot: Slot,
    mode: usize,
    c: &Tensor<f64>,
) -> Result<Tensor<f64>, TensorError> {
    if mode < 1 || mode > c.rank() {
        return Err(TensorError::ModeOutOfRange {
            mode,
            rank: c.rank(),
        });
    }
    let k = mode - 1;
    let extent = c.shape()[k];
    let (summed, free) = match slot {
        Slot::First => (a.rows, a.cols),
        Slot::Second => (a.cols, a.rows),
    };
    if summed != extent {
        return Err(TensorError::ContractionMismatch {
            matrix_dim: summed,
            mode,
            extent,
        });
    }

    let mut out_shape = c.shape().to_vec();
    out_shape[k] = free;
    let mut out = Tensor::filled(out_shape, 0.0);

    let in_stride = mode_stride(c.shape(), k);
    let out_stride = mode_stride(out.shape(), k);
    let in_offsets = fiber_offsets(c.shape(), k);
    let out_offsets = fiber_offsets(out.shape(), k);
    debug_assert_eq!(in_offsets.len(), out_offsets.len());

    for (&ib, &ob) in in_offsets.iter().zip(&out_offsets) {
        for r in 0..free {
            let mut acc = 0.0;
            for s in 0..extent {
                let a_entry = match slot {
                    Slot::First => a.get(s, r),
                    Slot::Second => a.get(r, s),
                };
                acc += a_entry * c.data()[ib + s * in_stride];
            }
            out.data_mut()[ob + r * out_stride] = acc;
        }
    }
    Ok(out)
}

// ------------------------------------------------------------------
// Coefficient recovery
// ------------------------------------------------------------------

/// Options for the recovery solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Axes with `N ≥` this bound are solved in double-double arithmetic.
    pub dd_threshold: usize,
    /// Condition-number estimate above which the result is flagged.
    pub condition_warn: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            dd_threshold: 20,
            condition_warn: 1e12,
        }
    }
}

/// A recovered coefficient tensor plus conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub coeffs: CoeffTensor,
    /// Largest per-mode 1-norm condition estimate.
    pub condition_estimate: f64,
    /// True when the estimate exceeded [`SolveOptions::condition_warn`]
    /// (coefficients are still returned).
    pub condition_warning: bool,
    /// True when the solves ran in double-double arithmetic.
    pub extended_precision: bool,
}

/// Solves every mode of the moment tensor against its mode matrix and applies
/// the weight `W_β = ∏_k (β_k + 1)`, yielding the coefficients of
/// `∑_β c_β (x − a)^β` on the moment grid's base rectangle.
pub fn recover_coefficients(
    d: &MomentTensor,
    mats: &[ModeMatrix],
    center: &[f64],
    opts: &SolveOptions,
) -> Result<Recovery, TensorError> {
    let values = d.values();
    let rank = values.rank();
    if mats.len() != rank {
        return Err(TensorError::ShapeMismatch {
            expected: values.shape().to_vec(),
            found: mats.iter().map(|m| m.n()).collect(),
        });
    }
    for (k, m) in mats.iter().enumerate() {
        if m.n() != values.shape()[k] {
            return Err(TensorError::ShapeMismatch {
                expected: values.shape().to_vec(),
                found: mats.iter().map(|m| m.n()).collect(),
            });
        }
    }
    if center.len() != rank {
        return Err(TensorError::CenterDimension {
            expected: rank,
            found: center.len(),
        });
    }

    let condition_estimate = mats
        .iter()
        .map(|m| m.matrix().condition_1norm())
        .fold(1.0f64, f64::max);
    let extended = mats.iter().any(|m| m.n() >= opts.dd_threshold);

    let coeff_values = if extended {
        let mut t = values.map(Dd::from_f64);
        for (k, mat) in mats.iter().enumerate() {
            let lu = Lu::<Dd>::factor(mat.dd_entries(), mat.n())
                .map_err(|_| TensorError::Singular { mode: k + 1 })?;
            mode_solve(&lu, k, &mut t);
        }
        apply_weight(&mut t);
        t.map(Dd::to_f64)
    } else {
        let mut t = values.clone();
        for (k, mat) in mats.iter().enumerate() {
            let lu = Lu::<f64>::factor(mat.matrix().data.clone(), mat.n())
                .map_err(|_| TensorError::Singular { mode: k + 1 })?;
            mode_solve(&lu, k, &mut t);
        }
        apply_weight(&mut t);
        t
    };

    Ok(Recovery {
        coeffs: CoeffTensor::new(coeff_values, center.to_vec(), d.grid().base().clone())?,
        condition_estimate,
        condition_warning: condition_estimate > opts.condition_warn,
        extended_precision: extended,
    })
}

/// Solves the factored mode matrix against every mode-`k` fiber in place.
fn mode_solve<T: Scalar>(lu: &Lu<T>, k: usize, t: &mut Tensor<T>) {
    let extent = t.shape()[k];
    let stride = mode_stride(t.shape(), k);
    let offsets = fiber_offsets(t.shape(), k);
    // Gather-solve in parallel (fibers are independent), scatter in order.
    let solved: Vec<(usize, Vec<T>)> = offsets
        .par_iter()
        .map(|&base| {
            let mut fiber: Vec<T> = (0..extent).map(|i| t.data()[base + i * stride]).collect();
            lu.solve(&mut fiber);
            (base, fiber)
        })
        .collect();
    for (base, fiber) in solved {
        for (i, v) in fiber.into_iter().enumerate() {
            t.data_mut()[base + i * stride] = v;
        }
    }
}

/// Multiplies each entry by `∏_k (β_k + 1)` for its 0-based exponent β.
fn apply_weight<T: Scalar>(t: &mut Tensor<T>) {
    let shape = t.shape().to_vec();
    for (slot, beta) in index_iter(&shape, 0).enumerate() {
        let w: usize = beta.components().iter().map(|b| b + 1).product();
        let v = t.data()[slot];
        t.data_mut()[slot] = v * T::from_f64(w as f64);
    }
}

// ------------------------------------------------------------------
// Coefficient tensors
// ------------------------------------------------------------------

/// Coefficients `c_β` of a polynomial `∑_β c_β (x − a)^β` about a center
/// `a`, attached to the rectangle the fit is valid on.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTensor {
    coeffs: Tensor<f64>,
    center: Vec<f64>,
    domain: Rect,
}

impl CoeffTensor {
    pub fn new(coeffs: Tensor<f64>, center: Vec<f64>, domain: Rect) -> Result<Self, TensorError> {
        if center.len() != coeffs.rank() || domain.dim() != coeffs.rank() {
            return Err(TensorError::CenterDimension {
                expected: coeffs.rank(),
                found: center.len(),
            });
        }
        Ok(Self {
            coeffs,
            center,
            domain,
        })
    }

    pub fn coeffs(&self) -> &Tensor<f64> {
        &self.coeffs
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn rank(&self) -> usize {
        self.coeffs.rank()
    }

    /// Coefficient at a 0-based exponent multi-index.
    pub fn get(&self, beta: &MultiIndex) -> f64 {
        self.coeffs.get(beta.components())
    }

    /// Evaluates `∑ c_β (x − a)^β` by nested Horner recursion
    /// (innermost along the last axis, whose fibers are contiguous).
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.rank());
        fn rec(data: &[f64], shape: &[usize], x: &[f64], center: &[f64]) -> f64 {
            if shape.is_empty() {
                return data[0];
            }
            let stride: usize = shape[1..].iter().product();
            let t = x[0] - center[0];
            let mut acc = 0.0;
            for a in (0..shape[0]).rev() {
                let inner = rec(
                    &data[a * stride..(a + 1) * stride],
                    &shape[1..],
                    &x[1..],
                    &center[1..],
                );
                acc = acc * t + inner;
            }
            acc
        }
        rec(self.coeffs.data(), self.coeffs.shape(), x, &self.center)
    }

    /// Exact integral of the polynomial over an axis-aligned block, by
    /// closed-form monomial antiderivatives.
    pub fn integrate_block(&self, block: &Rect) -> f64 {
        debug_assert_eq!(block.dim(), self.rank());
        // Per-axis moments m_k[β] = ((hi−a)^{β+1} − (lo−a)^{β+1}) / (β+1).
        let axis_moments: Vec<Vec<f64>> = (0..self.rank())
            .map(|k| {
                let hi = block.hi()[k] - self.center[k];
                let lo = block.lo()[k] - self.center[k];
                (0..self.coeffs.shape()[k])
                    .map(|b| {
                        let p = (b + 1) as i32;
                        (hi.powi(p) - lo.powi(p)) / p as f64
                    })
                    .collect()
            })
            .collect();
        let shape = self.coeffs.shape().to_vec();
        let mut total = 0.0;
        for (slot, beta) in index_iter(&shape, 0).enumerate() {
            let mut w = self.coeffs.data()[slot];
            for (k, &b) in beta.components().iter().enumerate() {
                w *= axis_moments[k][b];
            }
            total += w;
        }
        total
    }

    /// Writes one row per exponent (lexicographic, last axis fastest):
    /// columns `beta_1..beta_n`, then the coefficient in shortest
    /// round-trip decimal form.
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> io::Result<()> {
        for k in 0..self.rank() {
            write!(w, "beta_{},", k + 1)?;
        }
        writeln!(w, "coefficient")?;
        let shape = self.coeffs.shape().to_vec();
        for (slot, beta) in index_iter(&shape, 0).enumerate() {
            for b in beta.components() {
                write!(w, "{b},")?;
            }
            writeln!(w, "{}", self.coeffs.data()[slot])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bracket::Orientation;
    use crate::geometry::Interval;

    fn grid_1d(lo: f64, hi: f64, n: usize) -> Grid {
        Grid::uniform(Rect::new(vec![lo], vec![hi]).unwrap(), n).unwrap()
    }

    /// Exact moments of ∑ c_β (x−a)^β over each grid block, straight from
    /// the antiderivative — the test-side oracle for recovery round trips.
    fn exact_moments(
        grid: &Grid,
        center: &[f64],
        shape: &[usize],
        coeffs: &[f64],
    ) -> MomentTensor {
        let poly = CoeffTensor::new(
            Tensor::new(shape.to_vec(), coeffs.to_vec()).unwrap(),
            center.to_vec(),
            grid.base().clone(),
        )
        .unwrap();
        let values: Vec<f64> = grid
            .iterate()
            .map(|alpha| poly.integrate_block(&grid.block(&alpha).unwrap()))
            .collect();
        MomentTensor::from_values(
            Tensor::new(grid.counts().components().to_vec(), values).unwrap(),
            grid.clone(),
            Orientation::Positive,
            Interval::new(-1e6, 1e6).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn vandermonde_n1_is_delta() {
        let v = vandermonde(0.3, 0.25, 0.41, 1);
        assert!((v.entry(1, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn vandermonde_n3_matches_hand_computed_entries() {
        // ξ=−0.5, Δ=1/3, a=0: partition points −1/2, −1/6, 1/6, 1/2.
        let v = vandermonde(-0.5, 1.0 / 3.0, 0.0, 3);
        let expect = [
            [1.0 / 3.0, -2.0 / 9.0, 13.0 / 108.0],
            [1.0 / 3.0, 0.0, 1.0 / 108.0],
            [1.0 / 3.0, 2.0 / 9.0, 13.0 / 108.0],
        ];
        for alpha in 1..=3 {
            for j in 1..=3 {
                assert!(
                    (v.entry(alpha, j) - expect[alpha - 1][j - 1]).abs() < 1e-14,
                    "entry ({alpha},{j})"
                );
            }
        }
    }

    #[test]
    fn vandermonde_det_closed_form_examples() {
        assert_eq!(vandermonde_det(1, 0.5).value, 0.5);
        // N=2, Δ=1: superfactorial 1!·2! = 2, Δ^3 = 1.
        let d2 = vandermonde_det(2, 1.0);
        assert_eq!(d2.value, 2.0);
        let lu = vandermonde(-1.0, 1.0, 0.0, 2).matrix().lu_det();
        assert!((lu - d2.value).abs() < 1e-12);
        // N=3: Δ^6 · 1!·2!·3! = 12 Δ^6.
        let delta = 1.0 / 3.0;
        let d3 = vandermonde_det(3, delta);
        assert!((d3.value - 12.0 * delta.powi(6)).abs() < 1e-15);
    }

    #[test]
    fn vandermonde_det_matches_lu_and_ignores_center() {
        for n in 1..=8 {
            let delta = 0.37;
            let closed = vandermonde_det(n, delta).value;
            for &a in &[-2.0, 0.0, 0.7, 3.3] {
                let lu = vandermonde(-1.1, delta, a, n).matrix().lu_det();
                assert!(
                    (lu - closed).abs() <= 1e-10 * closed.abs(),
                    "n={n} a={a}: lu={lu:e} closed={closed:e}"
                );
            }
        }
    }

    #[test]
    fn vandermonde_det_overflow_flag() {
        // At Δ=1 the superfactorial ∏_{j=1..n} j! last fits a double at
        // n=26 (≈7.343e294) and first overflows at n=27 (exact-integer
        // check: sf(27) > 2^1024).
        let fine = vandermonde_det(26, 1.0);
        assert!(!fine.overflowed);
        assert!(fine.value.is_finite());
        assert!((fine.value - 7.34324457583598e294).abs() <= 1e-10 * fine.value);
        let over = vandermonde_det(27, 1.0);
        assert!(over.overflowed);
        assert!(over.value.is_infinite());
        assert!(over.log_value.is_finite());
        // The log path agrees with the value path where both are finite,
        // and the overflow point shifts with Δ.
        assert!((fine.log_value - fine.value.ln()).abs() < 1e-9 * fine.log_value.abs());
        assert!(!vandermonde_det(27, 0.5).overflowed);
    }

    #[test]
    fn contract_identity_leaves_tensor_unchanged() {
        let c = Tensor::new(vec![2, 3], (0..6).map(|i| i as f64).collect()).unwrap();
        for slot in [Slot::First, Slot::Second] {
            let out = contract(&Matrix::identity(3), slot, 2, &c).unwrap();
            assert_eq!(out, c);
        }
    }

    #[test]
    fn contract_collapses_to_matvec_in_rank_one() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = Tensor::new(vec![2], vec![5.0, 6.0]).unwrap();
        let out = contract(&a, Slot::Second, 1, &c).unwrap();
        assert_eq!(out.data(), &[17.0, 39.0]);
        // Slot::First sums the row index: A^T c.
        let out_t = contract(&a, Slot::First, 1, &c).unwrap();
        assert_eq!(out_t.data(), &[23.0, 34.0]);
    }

    #[test]
    fn contract_commutes_across_distinct_modes() {
        // Fixed pseudo-random 3×3×3 tensor and two matrices.
        let mut seed = 42u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let c = Tensor::new(vec![3, 3, 3], (0..27).map(|_| next()).collect()).unwrap();
        let a = Matrix::new(3, 3, (0..9).map(|_| next()).collect()).unwrap();
        let b = Matrix::new(3, 3, (0..9).map(|_| next()).collect()).unwrap();
        let left = contract(&a, Slot::First, 1, &contract(&b, Slot::Second, 3, &c).unwrap()).unwrap();
        let right = contract(&b, Slot::Second, 3, &contract(&a, Slot::First, 1, &c).unwrap()).unwrap();
        for (x, y) in left.data().iter().zip(right.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn contract_output_shape_swaps_to_free_dimension() {
        let c = Tensor::filled(vec![2, 3, 4], 1.0);
        let a = Matrix::new(5, 3, vec![0.5; 15]).unwrap();
        let out = contract(&a, Slot::Second, 2, &c).unwrap();
        assert_eq!(out.shape(), &[2, 5, 4]);
        let a2 = Matrix::new(3, 7, vec![0.5; 21]).unwrap();
        let out2 = contract(&a2, Slot::First, 2, &c).unwrap();
        assert_eq!(out2.shape(), &[2, 7, 4]);
        // Mismatched dimension errors.
        assert!(contract(&a, Slot::First, 2, &c).is_err());
    }

    #[test]
    fn recover_constant_in_one_dimension() {
        let grid = grid_1d(0.0, 1.0, 4);
        let c0 = 2.75;
        let values: Vec<f64> = grid.deltas().iter().cycle().take(4).map(|d| c0 * d).collect();
        let d = MomentTensor::from_values(
            Tensor::new(vec![4], values).unwrap(),
            grid.clone(),
            Orientation::Positive,
            Interval::new(0.0, 5.0).unwrap(),
        )
        .unwrap();
        let mats = mode_matrices(&grid, &[0.5]);
        let rec = recover_coefficients(&d, &mats, &[0.5], &SolveOptions::default()).unwrap();
        assert!((rec.coeffs.get(&MultiIndex::from([0])) - c0).abs() < 1e-12);
        for b in 1..4 {
            assert!(rec.coeffs.get(&MultiIndex::from([b])).abs() < 1e-10);
        }
        assert!(!rec.condition_warning);
        assert!(!rec.extended_precision);
    }

    #[test]
    fn recover_round_trips_a_two_dim_polynomial() {
        // g(x,y) = 1 − 2(x−a₀) + 0.5(x−a₀)(y−a₁)² + 3(y−a₁), shape (3,4).
        let base = Rect::new(vec![-1.0, 0.5], vec![2.0, 1.5]).unwrap();
        let grid = Grid::new(base, MultiIndex::from([3, 4])).unwrap();
        let center = [0.25, 1.0];
        let mut coeffs = vec![0.0; 12];
        coeffs[0] = 1.0; // constant
        coeffs[1] = 3.0; // (y−a₁)
        coeffs[4] = -2.0; // (x−a₀)
        coeffs[6] = 0.5; // (x−a₀)(y−a₁)²
        let d = exact_moments(&grid, &center, &[3, 4], &coeffs);
        let mats = mode_matrices(&grid, &center);
        let rec = recover_coefficients(&d, &mats, &center, &SolveOptions::default()).unwrap();
        for (slot, got) in rec.coeffs.coeffs().data().iter().enumerate() {
            assert!(
                (got - coeffs[slot]).abs() < 1e-9,
                "slot {slot}: {got} vs {}",
                coeffs[slot]
            );
        }
    }

    #[test]
    fn recover_is_stable_under_zero_padding() {
        // Same quadratic fitted with N=3 and N=6: shared exponents agree.
        let center = [0.2];
        let coeffs3 = [0.7, -1.3, 0.4];
        let grid3 = grid_1d(-1.0, 1.0, 3);
        let d3 = exact_moments(&grid3, &center, &[3], &coeffs3);
        let rec3 = recover_coefficients(
            &d3,
            &mode_matrices(&grid3, &center),
            &center,
            &SolveOptions::default(),
        )
        .unwrap();

        let grid6 = grid_1d(-1.0, 1.0, 6);
        let mut coeffs6 = vec![0.0; 6];
        coeffs6[..3].copy_from_slice(&coeffs3);
        let d6 = exact_moments(&grid6, &center, &[6], &coeffs6);
        let rec6 = recover_coefficients(
            &d6,
            &mode_matrices(&grid6, &center),
            &center,
            &SolveOptions::default(),
        )
        .unwrap();

        for b in 0..3 {
            let lo = rec3.coeffs.get(&MultiIndex::from([b]));
            let hi = rec6.coeffs.get(&MultiIndex::from([b]));
            assert!((lo - hi).abs() < 1e-7, "beta {b}: {lo} vs {hi}");
        }
        for b in 3..6 {
            assert!(rec6.coeffs.get(&MultiIndex::from([b])).abs() < 1e-7);
        }
    }

    #[test]
    fn recover_rank_zero_is_the_value_itself() {
        let grid = Grid::new(Rect::point(), MultiIndex::new(vec![])).unwrap();
        let d = MomentTensor::from_values(
            Tensor::scalar(1.25),
            grid,
            Orientation::Positive,
            Interval::new(0.0, 2.0).unwrap(),
        )
        .unwrap();
        let rec = recover_coefficients(&d, &[], &[], &SolveOptions::default()).unwrap();
        assert_eq!(rec.coeffs.rank(), 0);
        assert_eq!(rec.coeffs.eval(&[]), 1.25);
    }

    #[test]
    fn dd_solve_path_agrees_with_f64_on_well_conditioned_input() {
        let grid = grid_1d(-1.0, 1.0, 5);
        let center = [0.0];
        let coeffs = [0.3, -0.8, 0.05, 1.2, -0.4];
        let d = exact_moments(&grid, &center, &[5], &coeffs);
        let mats = mode_matrices(&grid, &center);
        let plain = recover_coefficients(&d, &mats, &center, &SolveOptions::default()).unwrap();
        let forced_dd = recover_coefficients(
            &d,
            &mats,
            &center,
            &SolveOptions {
                dd_threshold: 1,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert!(!plain.extended_precision);
        assert!(forced_dd.extended_precision);
        for (a, b) in plain
            .coeffs
            .coeffs()
            .data()
            .iter()
            .zip(forced_dd.coeffs.coeffs().data())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_warning_fires_on_large_n() {
        // The difference mode matrix at N=24 on a unit axis is far beyond
        // the 1e12 warning bound.
        let grid = grid_1d(0.0, 1.0, 24);
        let center = [0.5];
        let mut coeffs = vec![0.0; 24];
        coeffs[0] = 1.0;
        let d = exact_moments(&grid, &center, &[24], &coeffs);
        let mats = mode_matrices(&grid, &center);
        let rec = recover_coefficients(&d, &mats, &center, &SolveOptions::default()).unwrap();
        assert!(rec.condition_warning);
        assert!(rec.condition_estimate > 1e12);
        assert!(rec.extended_precision);
        // The constant survives the ill conditioning thanks to dd solves.
        assert!((rec.coeffs.get(&MultiIndex::from([0])) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn horner_eval_matches_naive_sum() {
        let shape = vec![3, 2, 4];
        let data: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let center = vec![0.1, -0.2, 0.3];
        let domain = Rect::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let p = CoeffTensor::new(
            Tensor::new(shape.clone(), data.clone()).unwrap(),
            center.clone(),
            domain,
        )
        .unwrap();
        let x = [0.7, 0.4, -0.9];
        let mut naive = 0.0;
        for (slot, beta) in index_iter(&shape, 0).enumerate() {
            let mut term = data[slot];
            for (k, &b) in beta.components().iter().enumerate() {
                term *= (x[k] - center[k]).powi(b as i32);
            }
            naive += term;
        }
        assert!((p.eval(&x) - naive).abs() < 1e-13);
    }

    #[test]
    fn integrate_block_matches_hand_integral() {
        // p(x) = 2 + 3(x−1)²: ∫ over [0,2] = 2·2 + 3·(1+1)/3·… compute by hand:
        // ∫₀² 2 dx = 4; ∫₀² 3(x−1)² dx = [ (x−1)³ ]₀² = 1−(−1) = 2. Total 6.
        let p = CoeffTensor::new(
            Tensor::new(vec![3], vec![2.0, 0.0, 3.0]).unwrap(),
            vec![1.0],
            Rect::new(vec![0.0], vec![2.0]).unwrap(),
        )
        .unwrap();
        let block = Rect::new(vec![0.0], vec![2.0]).unwrap();
        assert!((p.integrate_block(&block) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn coeff_csv_layout() {
        let p = CoeffTensor::new(
            Tensor::new(vec![2, 2], vec![4.0, 1.0, 2.0, 0.25]).unwrap(),
            vec![1.0, 1.0],
            Rect::new(vec![0.5, 0.5], vec![1.5, 1.5]).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "beta_1,beta_2,coefficient");
        assert_eq!(lines[1], "0,0,4");
        assert_eq!(lines[2], "0,1,1");
        assert_eq!(lines[3], "1,0,2");
        assert_eq!(lines[4], "1,1,0.25");
    }
}
