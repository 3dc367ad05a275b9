//! End-to-end fitting: from an implicit equation to a coefficient tensor
//! with diagnostics.
//!
//! Three drivers share one pipeline (moments → mode solves → diagnostics):
//!
//! * [`fit_polynomial`] — a single fit on the user's grid, in the user's
//!   coordinates about the user's center;
//! * [`fit_analytic`] — a strictly increasing schedule of uniform partition
//!   counts, each fit computed on the domain normalized to `[−1, 1]^n` and
//!   mapped back, with a weak-star convergence diagnostic against one fixed
//!   coarse reference grid;
//! * [`fit_dyadic`] — one fit at dyadic resolution `2^depth` per axis, with
//!   a nesting check of every coarser dyadic level against independently
//!   recomputed moments.
//!
//! [`fit_callable`] is the underlying engine over any [`RealFn`]; the
//! elimination cascade in [`crate::systems`] drives it with synthesized
//! stage functions.

use std::fmt;
use std::time::Instant;

use crate::bracket::{self, BracketError, Orientation};
use crate::expr::EvalError;
use crate::geometry::{index_iter, AffineMap, GeometryError, Grid, Interval, MultiIndex, Rect};
use crate::moments::{self, MomentError, MomentTensor, QuadOptions};
use crate::tensorops::{
    mode_matrices, recover_coefficients, CoeffTensor, SolveOptions, Tensor, TensorError,
};
use crate::RealFn;

/// Errors from problem construction or any stage of a fit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bracket(#[from] BracketError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Solve(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    /// The equation's argument count does not match the domain: an implicit
    /// equation over an `n`-dimensional rectangle takes `n + 1` arguments.
    #[error("equation takes {found} arguments but the domain requires {expected}")]
    Arity { expected: usize, found: usize },
    #[error("center {center:?} lies outside the domain")]
    CenterOutsideDomain { center: Vec<f64> },
    #[error("schedule must be non-empty, positive, and strictly increasing")]
    BadSchedule,
    #[error("dyadic depth must be at least 1")]
    BadDepth,
}

/// Numerical knobs of a fit. The defaults are the production settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Gauss–Legendre order per axis per block.
    pub quad_order: usize,
    /// Bisection tolerance on located jumps.
    pub bisect_tol: f64,
    /// Complete sections without a sign change at the consistent codomain
    /// endpoint instead of failing.
    pub force: bool,
    /// Axes with partition count at or above this run their solves in
    /// double-double arithmetic.
    pub dd_threshold: usize,
    /// Condition-estimate bound above which reports carry a warning.
    pub condition_warn: f64,
    /// Sections sampled when detecting the orientation.
    pub orientation_samples: usize,
    /// Seed for the sampled sections.
    pub seed: u64,
    /// Validation-grid resolution per axis for the report's residual.
    pub validation_per_axis: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quad_order: 12,
            bisect_tol: 1e-13,
            force: false,
            dd_threshold: 20,
            condition_warn: 1e12,
            orientation_samples: 32,
            seed: 0,
            validation_per_axis: 101,
        }
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub moments_s: f64,
    pub solve_s: f64,
    pub diagnostics_s: f64,
}

impl Timings {
    pub fn total_s(&self) -> f64 {
        self.moments_s + self.solve_s + self.diagnostics_s
    }
}

/// The result of one fit: the coefficient tensor plus its diagnostics.
#[derive(Debug, Clone)]
pub struct FitReport {
    coeffs: CoeffTensor,
    /// `max |f(x, g̃(x))|` over the half-offset validation grid, with `g̃`
    /// clamped into the codomain before evaluating `f`.
    pub residual_max: f64,
    /// `max_α |∫_{R_α} g̃ − d_α|`, recomputed from the closed-form block
    /// integrals of the fitted polynomial.
    pub block_mismatch_max: f64,
    /// Largest per-mode 1-norm condition estimate.
    pub condition_estimate: f64,
    /// True when the estimate exceeded the configured bound.
    pub condition_warning: bool,
    /// True when the mode solves ran in double-double arithmetic.
    pub extended_precision: bool,
    pub timings: Timings,
    /// Analytic mode only: `max_B |∫_B g̃ − d_B|` over the fixed coarse
    /// reference grid (3 blocks per axis).
    pub weak_star_mismatch: Option<f64>,
    /// Dyadic mode only: per level `ℓ = 0..=depth`, the worst block-average
    /// mismatch `max_B |∫_B g̃ − d_B| / |B|` against independently
    /// recomputed level-`ℓ` moments.
    pub dyadic_nesting: Option<Vec<f64>>,
}

impl FitReport {
    /// The fitted coefficient tensor.
    pub fn coefficients(&self) -> &CoeffTensor {
        &self.coeffs
    }
}

/// An implicit equation `f(x, y) = 0` over `R × I` with a fit center and a
/// verified orientation.
pub struct ImplicitProblem {
    f: Box<dyn RealFn>,
    domain: Rect,
    interval: Interval,
    center: Vec<f64>,
    orientation: Orientation,
    tolerances: Tolerances,
}

impl fmt::Debug for ImplicitProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitProblem")
            .field("arity", &self.f.arity())
            .field("domain", &self.domain)
            .field("interval", &self.interval)
            .field("center", &self.center)
            .field("orientation", &self.orientation)
            .field("tolerances", &self.tolerances)
            .finish_non_exhaustive()
    }
}

impl ImplicitProblem {
    /// Builds a problem with default tolerances, detecting the orientation
    /// from seeded sample sections. `center` defaults to the domain
    /// midpoint.
    pub fn new(
        f: Box<dyn RealFn>,
        domain: Rect,
        interval: Interval,
        center: Option<Vec<f64>>,
    ) -> Result<Self, FitError> {
        Self::with_options(f, domain, interval, center, None, Tolerances::default())
    }

    /// Full constructor. An explicit `orientation` skips detection — useful
    /// when forced completion leaves too few crossing sections to sample.
    pub fn with_options(
        f: Box<dyn RealFn>,
        domain: Rect,
        interval: Interval,
        center: Option<Vec<f64>>,
        orientation: Option<Orientation>,
        tolerances: Tolerances,
    ) -> Result<Self, FitError> {
        if f.arity() != domain.dim() + 1 {
            return Err(FitError::Arity {
                expected: domain.dim() + 1,
                found: f.arity(),
            });
        }
        let center = center.unwrap_or_else(|| domain.midpoint());
        if center.len() != domain.dim() || !domain.contains(&center, 1e-9) {
            return Err(FitError::CenterOutsideDomain { center });
        }
        let orientation = match orientation {
            Some(o) => o,
            None => detect_orientation(f.as_ref(), &domain, interval, &tolerances)?,
        };
        Ok(Self {
            f,
            domain,
            interval,
            center,
            orientation,
            tolerances,
        })
    }

    pub fn f(&self) -> &dyn RealFn {
        self.f.as_ref()
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }
}

fn detect_orientation(
    f: &dyn RealFn,
    domain: &Rect,
    interval: Interval,
    tol: &Tolerances,
) -> Result<Orientation, FitError> {
    let r = if tol.force {
        bracket::orientation_lenient(f, domain, interval, tol.orientation_samples, tol.seed)
    } else {
        bracket::orientation(f, domain, interval, tol.orientation_samples, tol.seed)
    };
    Ok(r?)
}

/// One fit on the grid with `n` blocks per axis, in the problem's original
/// coordinates about its center.
pub fn fit_polynomial(p: &ImplicitProblem, n: &MultiIndex) -> Result<FitReport, FitError> {
    fit_callable(
        p.f.as_ref(),
        &p.domain,
        p.interval,
        &p.center,
        n,
        Some(p.orientation),
        &p.tolerances,
    )
}

/// The fitting engine over any [`RealFn`]. When `orientation` is `None` it
/// is detected from sampled sections (leniently if `tol.force` is set).
pub fn fit_callable(
    f: &dyn RealFn,
    domain: &Rect,
    interval: Interval,
    center: &[f64],
    n: &MultiIndex,
    orientation: Option<Orientation>,
    tol: &Tolerances,
) -> Result<FitReport, FitError> {
    if f.arity() != domain.dim() + 1 {
        return Err(FitError::Arity {
            expected: domain.dim() + 1,
            found: f.arity(),
        });
    }
    if center.len() != domain.dim() || !domain.contains(center, 1e-9) {
        return Err(FitError::CenterOutsideDomain {
            center: center.to_vec(),
        });
    }
    let orientation = match orientation {
        Some(o) => o,
        None => detect_orientation(f, domain, interval, tol)?,
    };
    let grid = Grid::new(domain.clone(), n.clone())?;
    let quad = QuadOptions {
        order: tol.quad_order,
        bisect_tol: tol.bisect_tol,
        force: tol.force,
    };

    let clock = Instant::now();
    let d = moments::moment(f, &grid, interval, orientation, &quad)?;
    let moments_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mats = mode_matrices(&grid, center);
    let opts = SolveOptions {
        dd_threshold: tol.dd_threshold,
        condition_warn: tol.condition_warn,
    };
    let rec = recover_coefficients(&d, &mats, center, &opts)?;
    let solve_s = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let block_mismatch_max = block_mismatch(&rec.coeffs, &d);
    let residual_max = residual_callable(f, &rec.coeffs, domain, interval, tol.validation_per_axis)?;
    let diagnostics_s = clock.elapsed().as_secs_f64();

    Ok(FitReport {
        coeffs: rec.coeffs,
        residual_max,
        block_mismatch_max,
        condition_estimate: rec.condition_estimate,
        condition_warning: rec.condition_warning,
        extended_precision: rec.extended_precision,
        timings: Timings {
            moments_s,
            solve_s,
            diagnostics_s,
        },
        weak_star_mismatch: None,
        dyadic_nesting: None,
    })
}

/// A strictly increasing schedule of uniform partition counts, each fitted
/// on the domain normalized to `[−1, 1]^n` (coefficients mapped back to the
/// original coordinates). Every report carries the weak-star diagnostic:
/// the block mismatch of its fit against one fixed coarse reference grid
/// of 3 blocks per axis, with reference moments computed directly from `f`.
pub fn fit_analytic(p: &ImplicitProblem, schedule: &[usize]) -> Result<Vec<FitReport>, FitError> {
    if schedule.is_empty()
        || schedule[0] == 0
        || schedule.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(FitError::BadSchedule);
    }
    let dim = p.domain.dim();
    let map = AffineMap::normalize(&p.domain);
    let back = map.invert();
    let norm_domain = if dim == 0 {
        Rect::point()
    } else {
        Rect::new(vec![-1.0; dim], vec![1.0; dim])?
    };
    let norm_center = map.apply(&p.center);
    let normalized = NormalizedFn {
        f: p.f.as_ref(),
        back: &back,
    };

    // Fixed reference grid in original coordinates, shared by every fit in
    // the schedule.
    let ref_grid = Grid::uniform(p.domain.clone(), 3)?;
    let quad = QuadOptions {
        order: p.tolerances.quad_order,
        bisect_tol: p.tolerances.bisect_tol,
        force: p.tolerances.force,
    };
    let ref_moments = moments::moment(p.f.as_ref(), &ref_grid, p.interval, p.orientation, &quad)?;

    let volume_ratio: f64 = map.scale().iter().product();
    let mut reports = Vec::with_capacity(schedule.len());
    for &count in schedule {
        let n = MultiIndex::uniform(dim, count);
        let mut report = fit_callable(
            &normalized,
            &norm_domain,
            p.interval,
            &norm_center,
            &n,
            Some(p.orientation),
            &p.tolerances,
        )?;
        report.coeffs = map_back(report.coeffs.coeffs(), map.scale(), &p.center, &p.domain)?;
        // The normalized-block mismatch scales by the coordinate volume
        // ratio; report it in original coordinates.
        report.block_mismatch_max /= volume_ratio;
        report.weak_star_mismatch = Some(block_mismatch(&report.coeffs, &ref_moments));
        reports.push(report);
    }
    Ok(reports)
}

/// One fit at dyadic resolution `2^depth` blocks per axis, plus the nesting
/// diagnostic: at every level `ℓ ≤ depth`, the fitted polynomial's block
/// averages are compared against level-`ℓ` moments recomputed directly
/// from `f`.
pub fn fit_dyadic(p: &ImplicitProblem, depth: usize) -> Result<FitReport, FitError> {
    if depth == 0 {
        return Err(FitError::BadDepth);
    }
    let n = MultiIndex::uniform(p.domain.dim(), 1 << depth);
    let mut report = fit_polynomial(p, &n)?;

    let quad = QuadOptions {
        order: p.tolerances.quad_order,
        bisect_tol: p.tolerances.bisect_tol,
        force: p.tolerances.force,
    };
    let mut levels = Vec::with_capacity(depth + 1);
    for level in 0..=depth {
        let grid = Grid::uniform(p.domain.clone(), 1 << level)?;
        let d = moments::moment(p.f.as_ref(), &grid, p.interval, p.orientation, &quad)?;
        let worst = grid
            .iterate()
            .map(|alpha| {
                let block = grid.block(&alpha).expect("iterated index is in range");
                (report.coeffs.integrate_block(&block) - d.get(&alpha)).abs() / block.volume()
            })
            .fold(0.0, f64::max);
        levels.push(worst);
    }
    report.dyadic_nesting = Some(levels);
    Ok(report)
}

/// Evaluates a fitted polynomial at `x` (convenience alias of
/// [`CoeffTensor::eval`]).
pub fn evaluate(coeffs: &CoeffTensor, x: &[f64]) -> f64 {
    coeffs.eval(x)
}

/// `max |f(x, g̃(x))|` over an equispaced validation grid of `grid_points`
/// per axis, offset by half a step so block boundaries are never sampled;
/// `g̃(x)` is clamped into the codomain before `f` is evaluated.
pub fn residual_report(
    p: &ImplicitProblem,
    coeffs: &CoeffTensor,
    grid_points: usize,
) -> Result<f64, FitError> {
    residual_callable(p.f.as_ref(), coeffs, &p.domain, p.interval, grid_points)
}

fn residual_callable(
    f: &dyn RealFn,
    coeffs: &CoeffTensor,
    domain: &Rect,
    interval: Interval,
    grid_points: usize,
) -> Result<f64, FitError> {
    debug_assert!(grid_points >= 1);
    let dim = domain.dim();
    let extents = vec![grid_points; dim];
    let mut worst = 0.0f64;
    let mut at = vec![0.0; dim + 1];
    for idx in index_iter(&extents, 0) {
        for k in 0..dim {
            let step = (domain.hi()[k] - domain.lo()[k]) / grid_points as f64;
            at[k] = domain.lo()[k] + (idx[k] as f64 + 0.5) * step;
        }
        at[dim] = interval.clamp(coeffs.eval(&at[..dim]));
        worst = worst.max(f.eval(&at)?.abs());
    }
    Ok(worst)
}

/// `max_α |∫_{R_α} g̃ − d_α|` over the moment grid.
fn block_mismatch(coeffs: &CoeffTensor, d: &MomentTensor) -> f64 {
    let grid = d.grid();
    grid.iterate()
        .map(|alpha| {
            let block = grid.block(&alpha).expect("iterated index is in range");
            (coeffs.integrate_block(&block) - d.get(&alpha)).abs()
        })
        .fold(0.0, f64::max)
}

/// Re-expresses normalized-coordinate coefficients in original coordinates.
///
/// With `x' = T(x)` diagonal (`x'_k = s_k x_k + t_k`) and the normalized
/// center at `a' = T(a)`, powers transform componentwise:
/// `(x'_k − a'_k)^β = s_k^β (x_k − a_k)^β`, so `c_β = c'_β ∏_k s_k^{β_k}`.
fn map_back(
    normalized: &Tensor<f64>,
    scale: &[f64],
    center: &[f64],
    domain: &Rect,
) -> Result<CoeffTensor, FitError> {
    let shape = normalized.shape().to_vec();
    let data: Vec<f64> = index_iter(&shape, 0)
        .zip(normalized.data())
        .map(|(beta, &c)| {
            let factor: f64 = beta
                .components()
                .iter()
                .zip(scale)
                .map(|(&b, &s)| s.powi(b as i32))
                .product();
            c * factor
        })
        .collect();
    let tensor = Tensor::new(shape, data).expect("same shape as input");
    Ok(CoeffTensor::new(
        tensor,
        center.to_vec(),
        domain.clone(),
    )?)
}

/// Evaluates `f` after mapping the independent variables back to original
/// coordinates; the dependent variable passes through untouched.
struct NormalizedFn<'a> {
    f: &'a dyn RealFn,
    back: &'a AffineMap,
}

impl RealFn for NormalizedFn<'_> {
    fn arity(&self) -> usize {
        self.f.arity()
    }

    fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let n = point.len() - 1;
        let mut original = self.back.apply(&point[..n]);
        original.push(point[n]);
        self.f.eval(&original)
    }
}
