//! Block moments `d_α = ∫_{R_α} g(x) dx` of the implicit value, computed two
//! independent ways.
//!
//! The production path integrates the located jump `g(x)` directly with a
//! tensor-product Gauss–Legendre rule per block (the section integrand is the
//! implicit value itself, smooth wherever `g` is). The slow path integrates
//! the Heaviside indicator `Θ(f) = 1 where f ≥ 0` over the block × codomain
//! box by a midpoint rule — first-order only, because the integrand is
//! discontinuous — and converts volumes to moments through the affine
//! identity
//!
//! ```text
//! d_α = (1+n)/2 · |R_α| · max I + (1−n)/2 · |R_α| · min I − n · v_α ,
//! ```
//!
//! with `n` the orientation sign and `v_α` the Heaviside volume. The two
//! paths share no code, so their agreement is a genuine cross-check.
//!
//! Blocks are integrated on independent quadrature panels (never shared
//! across block boundaries), which makes moment additivity under dyadic
//! splitting hold to quadrature accuracy by construction.

use std::io;

use rayon::prelude::*;

use crate::bracket::{locate_jump, sgn, BracketError, Orientation};
use crate::geometry::{index_iter, Grid, Interval, MultiIndex, Rect};
use crate::tensorops::Tensor;
use crate::RealFn;

/// Errors from moment computation and volume-to-moment assembly.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MomentError {
    /// A quadrature section failed (typically: no sign change inside the
    /// codomain). Carries the block index and the section point.
    #[error("block {block} at node x = {x:?}: {source}")]
    Section {
        block: MultiIndex,
        x: Vec<f64>,
        source: BracketError,
    },
    /// A volume tensor's shape disagrees with the grid.
    #[error("volume shape {found:?} does not match grid counts {expected:?}")]
    Shape {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

/// Quadrature configuration for the production moment path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Gauss–Legendre nodes per axis per block.
    pub order: usize,
    /// Absolute bisection tolerance on the located jump.
    pub bisect_tol: f64,
    /// Complete sections without a sign change by the codomain endpoint that
    /// keeps the Heaviside volume consistent, instead of failing. This is the
    /// moment-side meaning of a user's force flag.
    pub force: bool,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            order: 12,
            bisect_tol: 1e-13,
            force: false,
        }
    }
}

/// The block-moment tensor `d_α` over a grid, with the codomain and
/// orientation it was computed under.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensor {
    values: Tensor<f64>,
    grid: Grid,
    orientation: Orientation,
    interval: Interval,
}

impl MomentTensor {
    /// Wraps precomputed values, validating the shape against the grid.
    pub fn from_values(
        values: Tensor<f64>,
        grid: Grid,
        orientation: Orientation,
        interval: Interval,
    ) -> Result<Self, MomentError> {
        if values.shape() != grid.counts().components() {
            return Err(MomentError::Shape {
                expected: grid.counts().components().to_vec(),
                found: values.shape().to_vec(),
            });
        }
        Ok(Self {
            values,
            grid,
            orientation,
            interval,
        })
    }

    pub fn values(&self) -> &Tensor<f64> {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// The moment of block `α` (1-based components).
    pub fn get(&self, alpha: &MultiIndex) -> f64 {
        let idx: Vec<usize> = alpha.components().iter().map(|a| a - 1).collect();
        self.values.get(&idx)
    }

    /// One row per block (lexicographic, last axis fastest): columns
    /// `alpha_1..alpha_n`, then the moment in shortest round-trip decimals.
    pub fn write_csv<W: io::Write>(&self, w: &mut W) -> io::Result<()> {
        for k in 0..self.grid.rank() {
            write!(w, "alpha_{},", k + 1)?;
        }
        writeln!(w, "moment")?;
        for (slot, alpha) in self.grid.iterate().enumerate() {
            for a in alpha.components() {
                write!(w, "{a},")?;
            }
            writeln!(w, "{}", self.values.data()[slot])?;
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration on the
/// Legendre recurrence (converges in a handful of steps from the cosine
/// initial guess). Nodes come out in ascending order.
pub(crate) fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // i-th root from the top; mirrored into both halves below.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        // Iterate to the last ulp: stop when the update no longer moves x,
        // or when it alternates between two adjacent floats.
        let mut x_prev = f64::INFINITY;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            let next = x - p / d;
            if next == x || next == x_prev {
                break;
            }
            x_prev = x;
            x = next;
        }
        let (_, deriv) = legendre_with_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term
/// recurrence.
fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

/// The endpoint that completes a section with no sign change, consistently
/// with the Heaviside volume: for `+1` orientation a wholly negative section
/// has Θ ≡ 0 (zero volume, so the jump sits at `max I`), a wholly positive
/// one has Θ ≡ 1 (full volume, jump at `min I`); mirrored for `−1`.
fn completed_jump(orientation: Orientation, interval: Interval, section_sign: i32) -> f64 {
    match (orientation, section_sign < 0) {
        (Orientation::Positive, true) => interval.hi(),
        (Orientation::Positive, false) => interval.lo(),
        (Orientation::Negative, true) => interval.lo(),
        (Orientation::Negative, false) => interval.hi(),
    }
}

/// Computes every block moment by Gauss–Legendre quadrature of the located
/// jump. Blocks run in parallel; assembly order is fixed by block index, so
/// results are bit-identical regardless of thread schedule.
pub fn moment(
    f: &dyn RealFn,
    grid: &Grid,
    interval: Interval,
    orientation: Orientation,
    quad: &QuadOptions,
) -> Result<MomentTensor, MomentError> {
    debug_assert_eq!(f.arity(), grid.rank() + 1);
    let blocks: Vec<MultiIndex> = grid.iterate().collect();
    let values: Vec<f64> = blocks
        .par_iter()
        .map(|alpha| {
            let block = grid.block(alpha).expect("iterated index is in range");
            block_moment(f, alpha, &block, interval, orientation, quad)
        })
        .collect::<Result<_, _>>()?;
    let tensor = Tensor::new(grid.counts().components().to_vec(), values)
        .expect("one value per block");
    MomentTensor::from_values(tensor, grid.clone(), orientation, interval)
}

/// Gauss–Legendre integral of `x ↦ g(x)` over one block.
fn block_moment(
    f: &dyn RealFn,
    alpha: &MultiIndex,
    block: &Rect,
    interval: Interval,
    orientation: Orientation,
    quad: &QuadOptions,
) -> Result<f64, MomentError> {
    let dim = block.dim();
    let (nodes, weights) = gauss_legendre(quad.order);
    let half: Vec<f64> = (0..dim)
        .map(|k| 0.5 * (block.hi()[k] - block.lo()[k]))
        .collect();
    let mid: Vec<f64> = block.midpoint();
    let jacobian: f64 = half.iter().product();

    let extents = vec![quad.order; dim];
    let mut acc = 0.0;
    let mut x = vec![0.0; dim];
    for idx in index_iter(&extents, 0) {
        let mut w = 1.0;
        for k in 0..dim {
            let i = idx[k];
            x[k] = mid[k] + half[k] * nodes[i];
            w *= weights[i];
        }
        let g = match locate_jump(f, &x, interval, quad.bisect_tol) {
            Ok(v) => v,
            Err(BracketError::NoSignChange { f_lo, .. }) if quad.force => {
                completed_jump(orientation, interval, sgn(f_lo))
            }
            Err(source) => {
                return Err(MomentError::Section {
                    block: alpha.clone(),
                    x: x.clone(),
                    source,
                });
            }
        };
        acc += w * g;
    }
    Ok(acc * jacobian)
}

/// Midpoint-rule estimate of the Heaviside volume
/// `v = ∫_{block × I} Θ(f) dy dx` with `nodes_per_axis` cells per axis.
/// A deliberately independent oracle: no quadrature or bisection code is
/// shared with [`moment`].
pub fn theta_volume(
    f: &dyn RealFn,
    block: &Rect,
    interval: Interval,
    nodes_per_axis: usize,
) -> Result<f64, BracketError> {
    debug_assert_eq!(f.arity(), block.dim() + 1);
    assert!(nodes_per_axis >= 1);
    let full = block.extend(interval);
    let dim = full.dim();
    let steps: Vec<f64> = (0..dim)
        .map(|k| (full.hi()[k] - full.lo()[k]) / nodes_per_axis as f64)
        .collect();
    let cell: f64 = steps.iter().product();

    // Manual odometer over the cell centers — the grid can be large and this
    // avoids per-cell allocation.
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    let mut count: u64 = 0;
    loop {
        for k in 0..dim {
            point[k] = full.lo()[k] + (idx[k] as f64 + 0.5) * steps[k];
        }
        if f.eval(&point)? >= 0.0 {
            count += 1;
        }
        // Increment, last axis fastest.
        let mut k = dim;
        loop {
            if k == 0 {
                return Ok(count as f64 * cell);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < nodes_per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Converts per-block Heaviside volumes into block moments through the
/// orientation-dependent affine identity (see the module docs).
pub fn assemble_from_volume(
    v: &Tensor<f64>,
    grid: &Grid,
    interval: Interval,
    orientation: Orientation,
) -> Result<MomentTensor, MomentError> {
    if v.shape() != grid.counts().components() {
        return Err(MomentError::Shape {
            expected: grid.counts().components().to_vec(),
            found: v.shape().to_vec(),
        });
    }
    let n = orientation.sign();
    let values: Vec<f64> = grid
        .iterate()
        .zip(v.data())
        .map(|(alpha, &vol)| {
            let measure = grid.block(&alpha).expect("in range").volume();
            0.5 * (1.0 + n) * measure * interval.hi() + 0.5 * (1.0 - n) * measure * interval.lo()
                - n * vol
        })
        .collect();
    let tensor =
        Tensor::new(grid.counts().components().to_vec(), values).expect("one value per block");
    MomentTensor::from_values(tensor, grid.clone(), orientation, interval)
}
