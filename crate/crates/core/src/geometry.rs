//! Rectangles, block grids, multi-indices, and axis-aligned affine maps.
//!
//! Everything downstream works over an axis-aligned box `R = ∏ [ξ_k, η_k]`
//! split into a tensor grid of blocks `R_α = ∏ [ξ_k + (α_k−1)Δ_k, ξ_k + α_kΔ_k]`
//! with `Δ_k = (η_k − ξ_k) / N_k`. Block indices `α` are 1-based
//! (`1 ≤ α_k ≤ N_k`); monomial exponents `β` are 0-based (`0 ≤ β_k < N_k`).
//! Both are carried by [`MultiIndex`] and the convention is stated at each
//! use site.
//!
//! Rank 0 is deliberately supported throughout: a 0-dimensional rectangle has
//! volume 1 (the empty product), its grid has exactly one block, and iteration
//! yields a single empty index. Variable-elimination chains bottom out there.

use std::fmt;

/// Errors from constructing or indexing geometric objects.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    /// Two vector arguments that must share a length do not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    /// An axis interval is empty, inverted, or non-finite.
    #[error("axis {axis}: invalid interval [{lo}, {hi}] (need finite lo < hi)")]
    BadAxis { axis: usize, lo: f64, hi: f64 },
    /// A block count of zero was requested on some axis.
    #[error("axis {axis}: block count must be at least 1")]
    ZeroCount { axis: usize },
    /// A block index lies outside `1..=N_k` on some axis.
    #[error("axis {axis}: block index {index} outside 1..={count}")]
    IndexOutOfRange {
        axis: usize,
        index: usize,
        count: usize,
    },
}

/// An ordered tuple of nonnegative integers indexing blocks (1-based α)
/// or monomial exponents (0-based β).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    components: Vec<usize>,
}

impl MultiIndex {
    /// Wraps the given components.
    pub fn new(components: Vec<usize>) -> Self {
        Self { components }
    }

    /// The index `(value, value, …, value)` of the given rank.
    pub fn uniform(rank: usize, value: usize) -> Self {
        Self {
            components: vec![value; rank],
        }
    }

    /// Number of components (the tensor rank it indexes).
    pub fn rank(&self) -> usize {
        self.components.len()
    }

    /// The components as a slice.
    pub fn components(&self) -> &[usize] {
        &self.components
    }

    /// Componentwise `self ≤ other` (both must share a rank).
    pub fn le(&self, other: &Self) -> bool {
        self.rank() == other.rank()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| a <= b)
    }
}

impl std::ops::Index<usize> for MultiIndex {
    type Output = usize;
    fn index(&self, k: usize) -> &usize {
        &self.components[k]
    }
}

impl From<&[usize]> for MultiIndex {
    fn from(s: &[usize]) -> Self {
        Self::new(s.to_vec())
    }
}

impl<const K: usize> From<[usize; K]> for MultiIndex {
    fn from(s: [usize; K]) -> Self {
        Self::new(s.to_vec())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.components.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A closed interval `[lo, hi]` with `lo < hi`, both finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    /// Builds the interval, rejecting empty, inverted, or non-finite bounds.
    pub fn new(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GeometryError::BadAxis { axis: 0, lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Clamps `v` into the interval.
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// An axis-aligned rectangle `∏_k [ξ_k, η_k]`, possibly of rank 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Rect {
    /// Builds the rectangle, validating `ξ_k < η_k` with finite bounds.
    ///
    /// ```
    /// use impoly::geometry::Rect;
    /// let r = Rect::new(vec![1.5, -0.5], vec![2.5, 0.5]).unwrap();
    /// assert_eq!(r.volume(), 1.0);
    /// assert!(Rect::new(vec![0.0], vec![0.0]).is_err());
    /// ```
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        for (k, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(GeometryError::BadAxis { axis: k, lo: a, hi: b });
            }
        }
        Ok(Self { lo, hi })
    }

    /// The unique rank-0 rectangle (a single point with volume 1).
    pub fn point() -> Self {
        Self {
            lo: Vec::new(),
            hi: Vec::new(),
        }
    }

    /// Builds a rectangle from per-axis intervals.
    pub fn from_intervals(axes: &[Interval]) -> Self {
        Self {
            lo: axes.iter().map(|i| i.lo()).collect(),
            hi: axes.iter().map(|i| i.hi()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// The `k`-th axis as an interval.
    pub fn axis(&self, k: usize) -> Interval {
        Interval {
            lo: self.lo[k],
            hi: self.hi[k],
        }
    }

    /// Product of edge lengths; 1 for rank 0 (empty product).
    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| b - a)
            .product()
    }

    /// Componentwise midpoint.
    pub fn midpoint(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Whether `x` lies inside the closed box, within slack `tol` per axis.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(k, &v)| self.lo[k] - tol <= v && v <= self.hi[k] + tol)
    }

    /// The Cartesian product `self × [axis]` (appends one axis).
    pub fn extend(&self, axis: Interval) -> Rect {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        lo.push(axis.lo());
        hi.push(axis.hi());
        Rect { lo, hi }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim() == 0 {
            return write!(f, "{{point}}");
        }
        for k in 0..self.dim() {
            if k > 0 {
                write!(f, " x ")?;
            }
            write!(f, "[{}, {}]", self.lo[k], self.hi[k])?;
        }
        Ok(())
    }
}

/// A tensor partition of a rectangle into `∏ N_k` congruent blocks per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    base: Rect,
    counts: MultiIndex,
    deltas: Vec<f64>,
}

impl Grid {
    /// Partitions `base` into `counts[k]` equal pieces along axis `k`.
    pub fn new(base: Rect, counts: MultiIndex) -> Result<Self, GeometryError> {
        if counts.rank() != base.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: base.dim(),
                found: counts.rank(),
            });
        }
        for k in 0..counts.rank() {
            if counts[k] == 0 {
                return Err(GeometryError::ZeroCount { axis: k });
            }
        }
        let deltas = (0..base.dim())
            .map(|k| (base.hi[k] - base.lo[k]) / counts[k] as f64)
            .collect();
        Ok(Self { base, counts, deltas })
    }

    /// Uniform partition: `n` blocks on every axis.
    pub fn uniform(base: Rect, n: usize) -> Result<Self, GeometryError> {
        let rank = base.dim();
        Self::new(base, MultiIndex::uniform(rank, n))
    }

    pub fn base(&self) -> &Rect {
        &self.base
    }

    pub fn counts(&self) -> &MultiIndex {
        &self.counts
    }

    /// Per-axis block widths `Δ_k`.
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn rank(&self) -> usize {
        self.counts.rank()
    }

    /// Total number of blocks `∏ N_k` (1 for rank 0).
    pub fn block_count(&self) -> usize {
        self.counts.components().iter().product()
    }

    /// The block `R_α = ∏ [ξ_k + (α_k−1)Δ_k, ξ_k + α_kΔ_k]` for a 1-based α.
    ///
    /// ```
    /// use impoly::geometry::{Grid, MultiIndex, Rect};
    /// let g = Grid::uniform(Rect::new(vec![-1.0], vec![1.0]).unwrap(), 2).unwrap();
    /// let b = g.block(&MultiIndex::from([1])).unwrap();
    /// assert_eq!((b.lo()[0], b.hi()[0]), (-1.0, 0.0));
    /// ```
    pub fn block(&self, alpha: &MultiIndex) -> Result<Rect, GeometryError> {
        if alpha.rank() != self.rank() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.rank(),
                found: alpha.rank(),
            });
        }
        let mut lo = Vec::with_capacity(self.rank());
        let mut hi = Vec::with_capacity(self.rank());
        for k in 0..self.rank() {
            let a = alpha[k];
            if a < 1 || a > self.counts[k] {
                return Err(GeometryError::IndexOutOfRange {
                    axis: k,
                    index: a,
                    count: self.counts[k],
                });
            }
            lo.push(self.base.lo[k] + (a - 1) as f64 * self.deltas[k]);
            hi.push(self.base.lo[k] + a as f64 * self.deltas[k]);
        }
        Ok(Rect { lo, hi })
    }

    /// All block indices in lexicographic order, last axis fastest.
    ///
    /// ```
    /// use impoly::geometry::{Grid, MultiIndex, Rect};
    /// let g = Grid::new(
    ///     Rect::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
    ///     MultiIndex::from([2, 2]),
    /// )
    /// .unwrap();
    /// let order: Vec<_> = g.iterate().map(|a| (a[0], a[1])).collect();
    /// assert_eq!(order, vec![(1, 1), (1, 2), (2, 1), (2, 2)]);
    /// ```
    pub fn iterate(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        index_iter(self.counts.components(), 1)
    }
}

/// Lexicographic iteration (last axis fastest) over all multi-indices with
/// components in `base..base + extents[k]`. Rank 0 yields one empty index.
pub(crate) fn index_iter(extents: &[usize], base: usize) -> IndexIter {
    IndexIter {
        extents: extents.to_vec(),
        base,
        next: Some(vec![base; extents.len()]),
    }
}

/// Iterator produced by [`index_iter`]; see [`Grid::iterate`].
pub(crate) struct IndexIter {
    extents: Vec<usize>,
    base: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for IndexIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let current = self.next.take()?;
        // Odometer increment, last axis fastest.
        let mut succ = current.clone();
        let mut k = succ.len();
        loop {
            if k == 0 {
                // Wrapped past the first axis: iteration is done.
                self.next = None;
                break;
            }
            k -= 1;
            succ[k] += 1;
            if succ[k] < self.base + self.extents[k] {
                self.next = Some(succ);
                break;
            }
            succ[k] = self.base;
        }
        Some(MultiIndex::new(current))
    }
}

/// A per-axis affine change of coordinates `x'_k = scale_k · x_k + shift_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    scale: Vec<f64>,
    shift: Vec<f64>,
}

impl AffineMap {
    /// The identity map on `dim` axes.
    pub fn identity(dim: usize) -> Self {
        Self {
            scale: vec![1.0; dim],
            shift: vec![0.0; dim],
        }
    }

    /// The map sending `rect` onto `[−1, 1]^n` (corners to corners).
    ///
    /// ```
    /// use impoly::geometry::{AffineMap, Rect};
    /// let t = AffineMap::normalize(&Rect::new(vec![0.0], vec![2.0 * std::f64::consts::PI]).unwrap());
    /// assert!((t.apply_axis(0, std::f64::consts::PI)).abs() < 1e-15);
    /// assert!((t.scale()[0] - 1.0 / std::f64::consts::PI).abs() < 1e-16);
    /// ```
    pub fn normalize(rect: &Rect) -> Self {
        let scale: Vec<f64> = (0..rect.dim())
            .map(|k| 2.0 / (rect.hi[k] - rect.lo[k]))
            .collect();
        let shift: Vec<f64> = (0..rect.dim())
            .map(|k| -(rect.hi[k] + rect.lo[k]) / (rect.hi[k] - rect.lo[k]))
            .collect();
        Self { scale, shift }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// Applies the map componentwise.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &v)| self.scale[k] * v + self.shift[k])
            .collect()
    }

    /// Applies the map on a single axis.
    pub fn apply_axis(&self, k: usize, x: f64) -> f64 {
        self.scale[k] * x + self.shift[k]
    }

    /// The inverse map (`scale` components are never zero by construction).
    pub fn invert(&self) -> Self {
        let scale: Vec<f64> = self.scale.iter().map(|s| 1.0 / s).collect();
        let shift: Vec<f64> = self
            .shift
            .iter()
            .zip(&self.scale)
            .map(|(t, s)| -t / s)
            .collect();
        Self { scale, shift }
    }

    /// The image of an axis-aligned rectangle (an axis-aligned rectangle,
    /// with bounds swapped on axes of negative scale).
    pub fn image(&self, rect: &Rect) -> Rect {
        let mut lo = Vec::with_capacity(rect.dim());
        let mut hi = Vec::with_capacity(rect.dim());
        for k in 0..rect.dim() {
            let a = self.apply_axis(k, rect.lo[k]);
            let b = self.apply_axis(k, rect.hi[k]);
            lo.push(a.min(b));
            hi.push(a.max(b));
        }
        Rect { lo, hi }
    }
}
