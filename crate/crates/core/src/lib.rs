//! Polynomial approximation of implicitly defined functions.
//!
//! Given `f(x, y) = 0` on a rectangle `R` with the dependent value confined
//! to an interval `I`, this crate produces an explicit multivariate
//! polynomial `g̃(x) ≈ g(x)` where `f(x, g(x)) = 0`, by matching block
//! moments of the implicit value on a uniform grid:
//!
//! 1. [`bracket`] — orientation detection and jump location by bisection;
//! 2. [`moments`] — block moments of the implicit value by per-block
//!    Gauss–Legendre quadrature (plus an independent Heaviside-volume path);
//! 3. [`tensorops`] — difference-Vandermonde mode matrices, mode-wise linear
//!    solves, and the coefficient tensor;
//! 4. [`solver`] — the end-to-end fit with diagnostics, plus normalized
//!    analytic and dyadic refinement drivers;
//! 5. [`systems`] — descending variable elimination for square systems,
//!    replacing solved variables by their polynomial surrogates.
//!
//! Scalar expressions come from a small infix language in [`expr`];
//! rectangles, grids, and multi-indices live in [`geometry`].
//!
//! # Example
//!
//! Recover the upper unit semicircle from `x² + y² − 1 = 0`:
//!
//! ```
//! use impoly::{fit_polynomial, Expr, ImplicitProblem, Interval, MultiIndex, Rect};
//!
//! let f = Expr::parse("x^2 + y^2 - 1", &["x", "y"]).unwrap();
//! let domain = Rect::new(vec![-0.5], vec![0.5]).unwrap();
//! let interval = Interval::new(0.0, 1.5).unwrap();
//! let problem = ImplicitProblem::new(Box::new(f), domain, interval, None).unwrap();
//! let fit = fit_polynomial(&problem, &MultiIndex::from([8])).unwrap();
//! let g = fit.coefficients();
//! assert!((g.eval(&[0.3]) - (1.0f64 - 0.09).sqrt()).abs() < 1e-6);
//! ```

pub mod bracket;
mod dd;
pub mod expr;
pub mod geometry;
pub mod moments;
pub mod solver;
pub mod systems;
pub mod tensorops;

pub use bracket::{verify_single_jump, JumpReport, Orientation};
pub use expr::{EvalError, Expr, ParseError};
pub use geometry::{AffineMap, Grid, Interval, MultiIndex, Rect};
pub use moments::{MomentTensor, QuadOptions};
pub use solver::{
    fit_analytic, fit_callable, fit_dyadic, fit_polynomial, FitError, FitReport, ImplicitProblem,
    Tolerances,
};
pub use systems::{
    choose_order, compose, eliminate, system_residual, EliminationChain, Stage, StageSpec,
    SystemError, SystemProblem,
};
pub use tensorops::{CoeffTensor, Recovery, SolveOptions, Tensor};

/// A real-valued function of a fixed number of real arguments.
///
/// The last argument is the dependent value: an equation over `n` domain
/// variables has arity `n + 1`. Implementations must be thread-safe — the
/// quadrature and verification passes evaluate in parallel.
pub trait RealFn: Sync {
    /// The number of arguments `eval` expects.
    fn arity(&self) -> usize;

    /// Evaluates at `point`, which must have exactly `arity` entries.
    fn eval(&self, point: &[f64]) -> Result<f64, EvalError>;
}

impl RealFn for Expr {
    fn arity(&self) -> usize {
        Expr::arity(self)
    }

    fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        Expr::eval(self, point)
    }
}

impl<T: RealFn + ?Sized> RealFn for &T {
    fn arity(&self) -> usize {
        (**self).arity()
    }

    fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        (**self).eval(point)
    }
}

impl<T: RealFn + ?Sized> RealFn for Box<T> {
    fn arity(&self) -> usize {
        (**self).arity()
    }

    fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        (**self).eval(point)
    }
}

/// Adapts a plain closure into a [`RealFn`] of the given arity.
///
/// ```
/// use impoly::{FnAdapter, RealFn};
///
/// let f = FnAdapter::new(2, |p: &[f64]| p[0].hypot(p[1]) - 1.0);
/// assert_eq!(f.arity(), 2);
/// assert!((f.eval(&[3.0, 4.0]).unwrap() - 4.0).abs() < 1e-15);
/// ```
pub struct FnAdapter<F> {
    arity: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnAdapter<F> {
    pub fn new(arity: usize, f: F) -> Self {
        Self { arity, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> RealFn for FnAdapter<F> {
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        debug_assert_eq!(point.len(), self.arity);
        Ok((self.f)(point))
    }
}
