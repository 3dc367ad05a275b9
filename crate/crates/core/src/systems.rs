//! Descending variable elimination for square systems.
//!
//! Given `m` equations `F_1..F_m` over `(x_1..x_n, y_1..y_m)` and an
//! elimination order, the pipeline fits one surrogate per stage:
//!
//! * the first stage fits `y_m = h(x, y_1..y_{m−1})` from its equation;
//! * each later stage eliminates the next-lower variable, evaluating the
//!   already-fitted higher surrogates **numerically** inside its equation
//!   (no symbolic composition — values only);
//! * composition then runs upward: `g_1(x)`, `g_2(x) = h(x, g_1(x))`, …
//!
//! Stage fits are ordinary [`crate::solver::fit_callable`] runs, so every
//! stage carries a full [`FitReport`] and honors the shared [`Tolerances`],
//! including forced completion. Per-stage rectangles, codomains, and centers
//! can be overridden — useful when a later stage needs a lab-coat-sized
//! enlargement of the box it probes the earlier surrogates on.
//!
//! When no order is supplied, [`choose_order`] probes candidates greedily:
//! working from the highest dependent variable down, it checks on sampled
//! sections that a candidate equation shows exactly one sign jump in the
//! variable being eliminated, with the higher variables resolved by nested
//! bisection through the already-chosen equations.

use std::fmt;

use crate::bracket::{self, sgn, Orientation};
use crate::expr::EvalError;
use crate::geometry::{index_iter, Interval, MultiIndex, Rect};
use crate::solver::{fit_callable, FitError, FitReport, Tolerances};
use crate::tensorops::CoeffTensor;
use crate::RealFn;

/// Errors from system construction, order selection, or stage fitting.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("a system needs at least one equation")]
    Empty,
    #[error("equation {index} takes {found} arguments, expected {expected} (x_1..x_n, y_1..y_m)")]
    Arity {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("an order names each equation once: got {order:?} for {m} equations")]
    BadOrder { order: Vec<usize>, m: usize },
    #[error("expected one stage spec per equation ({expected}), got {found}")]
    StageCount { expected: usize, found: usize },
    #[error("stage {stage} (equation {equation}, eliminating y_{variable}): {source}")]
    Stage {
        /// 1-based execution position.
        stage: usize,
        /// 1-based equation number.
        equation: usize,
        /// 1-based dependent-variable number.
        variable: usize,
        source: FitError,
    },
    #[error("no valid elimination order: {summary}")]
    NoValidOrder { summary: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A square system `F(x, y) = 0` on `R × I_1 × … × I_m`.
pub struct SystemProblem {
    equations: Vec<Box<dyn RealFn>>,
    domain: Rect,
    intervals: Rect,
    order: Option<Vec<usize>>,
    tolerances: Tolerances,
}

impl fmt::Debug for SystemProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemProblem")
            .field("equations", &self.equations.len())
            .field("domain", &self.domain)
            .field("intervals", &self.intervals)
            .field("order", &self.order)
            .field("tolerances", &self.tolerances)
            .finish_non_exhaustive()
    }
}

impl SystemProblem {
    /// Builds a system with default tolerances and no preset order.
    /// `domain` is the rectangle of the independent variables (a point
    /// rectangle when there are none); `intervals` is the codomain box with
    /// one axis per dependent variable. Each equation takes
    /// `domain.dim() + intervals.dim()` arguments, dependent variables last.
    pub fn new(
        equations: Vec<Box<dyn RealFn>>,
        domain: Rect,
        intervals: Rect,
    ) -> Result<Self, SystemError> {
        Self::with_options(equations, domain, intervals, None, Tolerances::default())
    }

    /// Full constructor. `order` lists 0-based equation indices in execution
    /// order: entry `j` names the equation fitted at stage `j + 1`, which
    /// eliminates dependent variable `m − j`.
    pub fn with_options(
        equations: Vec<Box<dyn RealFn>>,
        domain: Rect,
        intervals: Rect,
        order: Option<Vec<usize>>,
        tolerances: Tolerances,
    ) -> Result<Self, SystemError> {
        let m = equations.len();
        if m == 0 {
            return Err(SystemError::Empty);
        }
        if intervals.dim() != m {
            return Err(SystemError::StageCount {
                expected: m,
                found: intervals.dim(),
            });
        }
        let expected = domain.dim() + m;
        for (index, f) in equations.iter().enumerate() {
            if f.arity() != expected {
                return Err(SystemError::Arity {
                    index: index + 1,
                    expected,
                    found: f.arity(),
                });
            }
        }
        if let Some(order) = &order {
            validate_order(order, m)?;
        }
        Ok(Self {
            equations,
            domain,
            intervals,
            order,
            tolerances,
        })
    }

    pub fn equations(&self) -> &[Box<dyn RealFn>] {
        &self.equations
    }

    /// Number of independent variables.
    pub fn n(&self) -> usize {
        self.domain.dim()
    }

    /// Number of equations and dependent variables.
    pub fn m(&self) -> usize {
        self.equations.len()
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn intervals(&self) -> &Rect {
        &self.intervals
    }

    /// The preset execution order, if any.
    pub fn order(&self) -> Option<&[usize]> {
        self.order.as_deref()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }
}

fn validate_order(order: &[usize], m: usize) -> Result<(), SystemError> {
    let mut seen = vec![false; m];
    let ok = order.len() == m
        && order.iter().all(|&e| {
            if e >= m || seen[e] {
                false
            } else {
                seen[e] = true;
                true
            }
        });
    if ok {
        Ok(())
    } else {
        Err(SystemError::BadOrder {
            order: order.to_vec(),
            m,
        })
    }
}

/// Overrides for one elimination stage. Only the partition counts are
/// required; rectangle, codomain, center, and orientation fall back to the
/// problem's data (`R × I_1 × … × I_{v−1}`, `I_v`, the midpoint, detection).
#[derive(Debug, Clone)]
pub struct StageSpec {
    /// Partition counts for the stage's fit; its rank must match the stage
    /// rectangle (`n` independent axes plus one per lower dependent
    /// variable).
    pub n: MultiIndex,
    pub domain: Option<Rect>,
    pub interval: Option<Interval>,
    pub center: Option<Vec<f64>>,
    pub orientation: Option<Orientation>,
}

impl StageSpec {
    pub fn new(n: MultiIndex) -> Self {
        Self {
            n,
            domain: None,
            interval: None,
            center: None,
            orientation: None,
        }
    }
}

/// One fitted elimination stage.
#[derive(Debug, Clone)]
pub struct Stage {
    /// 0-based index of the equation this stage eliminated with.
    pub equation: usize,
    /// 0-based index of the dependent variable it solves for.
    pub variable: usize,
    /// Codomain interval the surrogate was fitted on: the stage override
    /// when one was given, the problem's interval for the variable
    /// otherwise. Later stages may widen it past the problem's box when
    /// the solved variable ranges further than the box anticipated.
    pub interval: Interval,
    /// The stage's fit, including the surrogate coefficients.
    pub report: FitReport,
}

impl Stage {
    /// The surrogate polynomial `y_{variable+1} ≈ h(x, y_1..y_{variable})`.
    pub fn surrogate(&self) -> &CoeffTensor {
        self.report.coefficients()
    }
}

/// The full chain of fitted stages, in execution order (highest dependent
/// variable first).
#[derive(Debug, Clone)]
pub struct EliminationChain {
    stages: Vec<Stage>,
    n: usize,
}

impl EliminationChain {
    /// Stages in execution order.
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Fitted codomain intervals indexed by dependent variable: entry `v`
    /// is the interval of the stage that solves `y_{v+1}`.
    pub fn codomain(&self) -> Vec<Interval> {
        let mut out: Vec<Interval> = self.stages.iter().map(|s| s.interval).collect();
        for stage in &self.stages {
            out[stage.variable] = stage.interval;
        }
        out
    }

    /// Evaluates the composed solution at `x`, feeding each surrogate the
    /// outputs of the lower ones: returns `(y_1, …, y_m)`. Values are
    /// returned raw — they are not clamped into the codomain box.
    pub fn compose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut args = x.to_vec();
        for stage in self.stages.iter().rev() {
            let y = stage.surrogate().eval(&args);
            args.push(y);
        }
        args.split_off(self.n)
    }
}

/// Evaluates the composed solution at `x` (see [`EliminationChain::compose`]).
pub fn compose(chain: &EliminationChain, x: &[f64]) -> Vec<f64> {
    chain.compose(x)
}

/// A stage's substituted equation: arguments `(x, y_1..y_{v}, t)` where `t`
/// probes dependent variable `v` (0-based), and every higher variable is the
/// value of its already-fitted surrogate.
struct StageFn<'a> {
    equation: &'a dyn RealFn,
    later: Vec<&'a CoeffTensor>,
    arity: usize,
}

impl RealFn for StageFn<'_> {
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let mut args = Vec::with_capacity(point.len() + self.later.len());
        args.extend_from_slice(point);
        for surrogate in &self.later {
            let y = surrogate.eval(&args);
            args.push(y);
        }
        self.equation.eval(&args)
    }
}

/// Runs the elimination along `order` (0-based equation indices in
/// execution order; see [`SystemProblem::with_options`]), fitting one
/// surrogate per stage with the given stage specs (also in execution
/// order).
pub fn eliminate(
    p: &SystemProblem,
    order: &[usize],
    stages: &[StageSpec],
) -> Result<EliminationChain, SystemError> {
    let (n, m) = (p.n(), p.m());
    validate_order(order, m)?;
    if stages.len() != m {
        return Err(SystemError::StageCount {
            expected: m,
            found: stages.len(),
        });
    }

    let mut fitted: Vec<Option<Stage>> = (0..m).map(|_| None).collect();
    for (exec, (&equation, spec)) in order.iter().zip(stages).enumerate() {
        let variable = m - 1 - exec;
        let stage_domain = match &spec.domain {
            Some(d) => d.clone(),
            None => {
                let mut d = p.domain.clone();
                for k in 0..variable {
                    d = d.extend(p.intervals.axis(k));
                }
                d
            }
        };
        let interval = spec
            .interval
            .unwrap_or_else(|| p.intervals.axis(variable));
        let center = spec
            .center
            .clone()
            .unwrap_or_else(|| stage_domain.midpoint());
        let later: Vec<&CoeffTensor> = (variable + 1..m)
            .map(|v| {
                fitted[v]
                    .as_ref()
                    .expect("higher stages fitted first")
                    .surrogate()
            })
            .collect();
        let stage_fn = StageFn {
            equation: p.equations[equation].as_ref(),
            later,
            arity: n + variable + 1,
        };
        let report = fit_callable(
            &stage_fn,
            &stage_domain,
            interval,
            &center,
            &spec.n,
            spec.orientation,
            &p.tolerances,
        )
        .map_err(|source| SystemError::Stage {
            stage: exec + 1,
            equation: equation + 1,
            variable: variable + 1,
            source,
        })?;
        fitted[variable] = Some(Stage {
            equation,
            variable,
            interval,
            report,
        });
    }

    let mut chain: Vec<Stage> = fitted.into_iter().map(|s| s.expect("all fitted")).collect();
    chain.reverse(); // execution order: highest variable first
    Ok(EliminationChain { stages: chain, n })
}

/// Per-equation `max |F_i(x, y(x))|` along the composed curve, over an
/// equispaced half-offset validation grid in `R`. Each composed value is
/// clamped into the codomain interval its stage was actually fitted on
/// (see [`Stage::interval`]) before the equations are evaluated — the
/// interval the surrogate is meaningful over, mirroring the
/// single-equation residual. With default stage specs those are the
/// problem's own intervals, so a one-equation system reproduces the plain
/// solver's report exactly.
pub fn system_residual(
    p: &SystemProblem,
    chain: &EliminationChain,
    grid_points: usize,
) -> Result<Vec<f64>, SystemError> {
    debug_assert!(grid_points >= 1);
    let (n, m) = (p.n(), p.m());
    let codomain = chain.codomain();
    let extents = vec![grid_points; n];
    let mut worst = vec![0.0f64; m];
    let mut at = vec![0.0; n + m];
    for idx in index_iter(&extents, 0) {
        for k in 0..n {
            let step = (p.domain.hi()[k] - p.domain.lo()[k]) / grid_points as f64;
            at[k] = p.domain.lo()[k] + (idx[k] as f64 + 0.5) * step;
        }
        let y = chain.compose(&at[..n]);
        for (v, value) in y.into_iter().enumerate() {
            at[n + v] = codomain[v].clamp(value);
        }
        for (i, f) in p.equations.iter().enumerate() {
            worst[i] = worst[i].max(f.eval(&at)?.abs());
        }
    }
    Ok(worst)
}

/// Greedily selects an elimination order by sampled probing, without
/// fitting anything.
///
/// Working from the highest dependent variable down, each unused equation
/// is tested on `samples` seeded sections of the stage rectangle: the
/// candidate must show exactly one sign jump in the variable being
/// eliminated, with all higher variables resolved through the
/// already-chosen equations by nested bisection. Ties break toward the
/// lowest equation index, making the result deterministic.
///
/// Returns 0-based equation indices in execution order, ready for
/// [`eliminate`].
pub fn choose_order(p: &SystemProblem, samples: usize) -> Result<Vec<usize>, SystemError> {
    let (n, m) = (p.n(), p.m());
    let mut chosen: Vec<Option<usize>> = vec![None; m];
    let mut used = vec![false; m];
    let mut order = Vec::with_capacity(m);
    let mut summary = String::new();

    for variable in (0..m).rev() {
        let mut stage_domain = p.domain.clone();
        for k in 0..variable {
            stage_domain = stage_domain.extend(p.intervals.axis(k));
        }
        let interval = p.intervals.axis(variable);

        let mut picked = None;
        for candidate in 0..m {
            if used[candidate] {
                continue;
            }
            let probe = ProbeFn {
                equations: &p.equations,
                chosen: &chosen,
                intervals: &p.intervals,
                candidate,
                variable,
                n,
                m,
                tol: p.tolerances.bisect_tol.max(1e-10),
            };
            match bracket::verify_single_jump(
                &probe,
                &stage_domain,
                interval,
                samples.max(1),
                64,
                p.tolerances.seed,
            ) {
                Ok(report) if report.is_clean() => {
                    picked = Some(candidate);
                    break;
                }
                Ok(report) => {
                    let (x, count) = &report.violations[0];
                    summary.push_str(&format!(
                        "y_{} via equation {}: {} sign changes at x = {:?}; ",
                        variable + 1,
                        candidate + 1,
                        count,
                        x
                    ));
                }
                Err(err) => {
                    summary.push_str(&format!(
                        "y_{} via equation {}: {}; ",
                        variable + 1,
                        candidate + 1,
                        err
                    ));
                }
            }
        }
        match picked {
            Some(candidate) => {
                used[candidate] = true;
                chosen[variable] = Some(candidate);
                order.push(candidate);
            }
            None => {
                return Err(SystemError::NoValidOrder {
                    summary: summary.trim_end_matches("; ").to_string(),
                });
            }
        }
    }
    Ok(order)
}

/// Probe for [`choose_order`]: evaluates `equations[candidate]` at
/// `(x, y_1..y_v, t)`, resolving each higher variable by bisecting its
/// chosen equation inside its codomain interval (recursively, since deeper
/// resolutions feed shallower ones).
struct ProbeFn<'a> {
    equations: &'a [Box<dyn RealFn>],
    chosen: &'a [Option<usize>],
    intervals: &'a Rect,
    candidate: usize,
    variable: usize,
    n: usize,
    m: usize,
    tol: f64,
}

impl ProbeFn<'_> {
    /// Evaluates equation `eq` given the first `known.len() − n` dependent
    /// values, resolving the rest through the chosen equations.
    fn resolved(&self, eq: usize, known: &mut Vec<f64>) -> Result<f64, EvalError> {
        let next = known.len() - self.n;
        if next == self.m {
            return self.equations[eq].eval(known);
        }
        let chosen = self.chosen[next].expect("higher variables have chosen equations");
        let interval = self.intervals.axis(next);
        let root = self.bisect(chosen, known, interval)?;
        known.push(root);
        let value = self.resolved(eq, known);
        known.pop();
        value
    }

    /// Root of `t ↦ resolved(eq, known ++ t)` on `interval` by bisection.
    fn bisect(&self, eq: usize, known: &mut Vec<f64>, interval: Interval) -> Result<f64, EvalError> {
        let mut lo = interval.lo();
        let mut hi = interval.hi();
        known.push(lo);
        let f_lo = self.resolved(eq, known)?;
        known.pop();
        known.push(hi);
        let f_hi = self.resolved(eq, known)?;
        known.pop();
        let s_lo = sgn(f_lo);
        if s_lo == sgn(f_hi) {
            return Err(EvalError {
                subexpr: format!("equation {} in y_{}", eq + 1, known.len() - self.n + 1),
                message: format!(
                    "no sign change on [{}, {}] while resolving the cascade",
                    interval.lo(),
                    interval.hi()
                ),
            });
        }
        while hi - lo > self.tol {
            let mid = 0.5 * (lo + hi);
            known.push(mid);
            let f_mid = self.resolved(eq, known)?;
            known.pop();
            if sgn(f_mid) == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl RealFn for ProbeFn<'_> {
    fn arity(&self) -> usize {
        self.n + self.variable + 1
    }

    fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let mut known = point.to_vec();
        self.resolved(self.candidate, &mut known)
    }
}
