//! Orientation detection, single-jump verification, and bisection root
//! location on sections.
//!
//! For a continuous `f(x, y)` on `R × I`, the sign function
//! `sgn f = +1 if f ≥ 0, −1 otherwise` (ties resolve to `+1`) is assumed to
//! jump exactly once along each section `y ↦ f(x, y)`. The *orientation*
//! records the jump direction: `+1` when the sign rises from `−1` to `+1` as
//! `y` increases (`f(x, min I) < 0 ≤ f(x, max I)`), `−1` when it falls. The
//! jump location is the implicit value `g(x)`, found here by bisection —
//! which needs nothing beyond continuity.
//!
//! Verification of the single-jump hypothesis is necessarily probabilistic
//! for a black-box `f`: sampled sections are scanned on an equispaced grid
//! and sign changes counted. Sampling is seeded, so reports are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::expr::EvalError;
use crate::geometry::{Interval, Rect};
use crate::RealFn;

/// Errors from orientation detection and jump location.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BracketError {
    /// `f` has the same sign at both ends of the section's codomain.
    #[error("no sign change on {interval} at x = {x:?}: f spans {f_lo:.6e} .. {f_hi:.6e}")]
    NoSignChange {
        x: Vec<f64>,
        interval: Interval,
        f_lo: f64,
        f_hi: f64,
    },
    /// Two sampled sections disagree about the jump direction.
    #[error(
        "inconsistent orientation: {first_sign:+} at x = {first:?} but {second_sign:+} at x = {second:?}"
    )]
    InconsistentOrientation {
        first: Vec<f64>,
        first_sign: i32,
        second: Vec<f64>,
        second_sign: i32,
    },
    /// Bisection hit its iteration cap before reaching the tolerance.
    #[error("bisection stalled at width {achieved:.3e} (tolerance {tol:.3e})")]
    ToleranceNotReached { achieved: f64, tol: f64 },
    /// A nonpositive or non-finite tolerance was requested.
    #[error("invalid bisection tolerance {0}")]
    InvalidTolerance(f64),
    /// The function failed to evaluate.
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// The jump direction of `sgn f` along the dependent axis: constant on all
/// of `R` under the single-jump hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Sign rises `−1 → +1` as `y` increases.
    Positive,
    /// Sign falls `+1 → −1`.
    Negative,
}

impl Orientation {
    /// The orientation as the factor `n_y(f) ∈ {+1, −1}`.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Orientation::Positive => write!(f, "+1"),
            Orientation::Negative => write!(f, "-1"),
        }
    }
}

/// The outcome of sampled single-jump verification.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpReport {
    /// Number of sections scanned.
    pub samples_checked: usize,
    /// Sections whose scan did not show exactly one sign change:
    /// the sample point and its observed change count.
    pub violations: Vec<(Vec<f64>, usize)>,
}

impl JumpReport {
    /// True when every sampled section had exactly one sign change.
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `+1` for `v ≥ 0` (ties resolve up), `−1` otherwise.
#[inline]
pub(crate) fn sgn(v: f64) -> i32 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Draws `count` sample points inside `domain` from a seeded generator.
/// The first sample is always the midpoint, anchoring symmetric cases.
fn sample_points(domain: &Rect, count: usize, seed: u64, include_midpoint: bool) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    if include_midpoint && count > 0 {
        points.push(domain.midpoint());
    }
    while points.len() < count {
        let p: Vec<f64> = (0..domain.dim())
            .map(|k| rng.gen_range(domain.lo()[k]..domain.hi()[k]))
            .collect();
        points.push(p);
        if domain.dim() == 0 {
            break; // a point domain has exactly one distinct sample
        }
    }
    points
}

/// Determines the jump direction of `sgn f` by checking the codomain
/// endpoints on sampled sections. `f` takes `domain.dim() + 1` arguments,
/// the dependent variable last.
///
/// Every sampled section must show a sign change, and all must agree on
/// its direction; otherwise the single-jump hypothesis is untenable and an
/// error reports the offending sections.
pub fn orientation(
    f: &dyn RealFn,
    domain: &Rect,
    interval: Interval,
    samples: usize,
    seed: u64,
) -> Result<Orientation, BracketError> {
    orientation_impl(f, domain, interval, samples, seed, false)
}

/// Like [`orientation`], but sections whose endpoints share a sign are
/// skipped instead of rejected. Used when sections are to be completed at a
/// codomain endpoint (the forced mode), where constant-sign sections carry
/// no direction information. At least one sampled section must still cross,
/// and all crossing sections must agree.
pub fn orientation_lenient(
    f: &dyn RealFn,
    domain: &Rect,
    interval: Interval,
    samples: usize,
    seed: u64,
) -> Result<Orientation, BracketError> {
    orientation_impl(f, domain, interval, samples, seed, true)
}

fn orientation_impl(
    f: &dyn RealFn,
    domain: &Rect,
    interval: Interval,
    samples: usize,
    seed: u64,
    skip_constant_sign: bool,
) -> Result<Orientation, BracketError> {
    debug_assert_eq!(f.arity(), domain.dim() + 1);
    let points = sample_points(domain, samples.max(1), seed, true);
    let mut first: Option<(Vec<f64>, i32)> = None;
    let mut last_constant: Option<BracketError> = None;
    for x in points {
        let mut at = x.clone();
        at.push(interval.lo());
        let f_lo = f.eval(&at)?;
        *at.last_mut().expect("has dependent slot") = interval.hi();
        let f_hi = f.eval(&at)?;
        let (s_lo, s_hi) = (sgn(f_lo), sgn(f_hi));
        if s_lo == s_hi {
            let err = BracketError::NoSignChange {
                x,
                interval,
                f_lo,
                f_hi,
            };
            if skip_constant_sign {
                last_constant = Some(err);
                continue;
            }
            return Err(err);
        }
        let sign = if s_lo < 0 { 1 } else { -1 };
        match &first {
            None => first = Some((x, sign)),
            Some((fx, fsign)) if *fsign != sign => {
                return Err(BracketError::InconsistentOrientation {
                    first: fx.clone(),
                    first_sign: *fsign,
                    second: x,
                    second_sign: sign,
                });
            }
            _ => {}
        }
    }
    match first {
        Some((_, 1)) => Ok(Orientation::Positive),
        Some(_) => Ok(Orientation::Negative),
        None => Err(last_constant.expect("at least one sample")),
    }
}

/// Locates the sign jump of `y ↦ f(x, y)` on `interval` by bisection,
/// to absolute tolerance `tol` on `y`.
///
/// ```
/// use impoly::bracket::locate_jump;
/// use impoly::expr::Expr;
/// use impoly::geometry::Interval;
/// let f = Expr::parse("x^2 + y^2 - 1", &["x", "y"]).unwrap();
/// let y = locate_jump(&f, &[0.0], Interval::new(0.0, 2.0).unwrap(), 1e-12).unwrap();
/// assert!((y - 1.0).abs() < 1e-11);
/// ```
pub fn locate_jump(
    f: &dyn RealFn,
    x: &[f64],
    interval: Interval,
    tol: f64,
) -> Result<f64, BracketError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(BracketError::InvalidTolerance(tol));
    }
    let mut at = Vec::with_capacity(x.len() + 1);
    at.extend_from_slice(x);
    at.push(interval.lo());
    let f_lo = f.eval(&at)?;
    *at.last_mut().expect("has dependent slot") = interval.hi();
    let f_hi = f.eval(&at)?;
    let s_lo = sgn(f_lo);
    if s_lo == sgn(f_hi) {
        return Err(BracketError::NoSignChange {
            x: x.to_vec(),
            interval,
            f_lo,
            f_hi,
        });
    }
    let (mut lo, mut hi) = (interval.lo(), interval.hi());
    // 64 halvings shrink any double-width interval below any positive
    // tolerance near it; 200 is a safe cap against pathological tolerances.
    for _ in 0..200 {
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        *at.last_mut().expect("has dependent slot") = mid;
        if sgn(f.eval(&at)?) == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo <= tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(BracketError::ToleranceNotReached {
            achieved: hi - lo,
            tol,
        })
    }
}

/// Scans `x_samples` seeded sections at `y_scan` equispaced codomain points
/// and counts sign changes; any count other than one is recorded as a
/// violation. Violations are data, not errors — callers decide whether to
/// stop or proceed.
pub fn verify_single_jump(
    f: &dyn RealFn,
    domain: &Rect,
    interval: Interval,
    x_samples: usize,
    y_scan: usize,
    seed: u64,
) -> Result<JumpReport, BracketError> {
    debug_assert_eq!(f.arity(), domain.dim() + 1);
    let y_scan = y_scan.max(2);
    let points = sample_points(domain, x_samples, seed, false);
    let step = interval.length() / (y_scan - 1) as f64;
    let scanned: Vec<(Vec<f64>, usize)> = points
        .into_par_iter()
        .map(|x| -> Result<(Vec<f64>, usize), BracketError> {
            let mut at = Vec::with_capacity(x.len() + 1);
            at.extend_from_slice(&x);
            at.push(0.0);
            let mut changes = 0usize;
            let mut prev = 0i32;
            for i in 0..y_scan {
                let y = if i + 1 == y_scan {
                    interval.hi()
                } else {
                    interval.lo() + i as f64 * step
                };
                *at.last_mut().expect("has dependent slot") = y;
                let s = sgn(f.eval(&at)?);
                if i > 0 && s != prev {
                    changes += 1;
                }
                prev = s;
            }
            Ok((x, changes))
        })
        .collect::<Result<_, _>>()?;
    let samples_checked = scanned.len();
    let violations = scanned
        .into_iter()
        .filter(|&(_, changes)| changes != 1)
        .collect();
    Ok(JumpReport {
        samples_checked,
        violations,
    })
}
