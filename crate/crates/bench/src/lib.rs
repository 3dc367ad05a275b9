//! Shared problem builders for the pipeline benchmarks.

use impoly::{Expr, ImplicitProblem, Interval, Rect};

/// The quarter-box sphere problem used across benchmark stages.
pub fn sphere_problem() -> ImplicitProblem {
    let f = Expr::parse("x^2 + y^2 + z^2 - 1", &["x", "y", "z"]).expect("static source parses");
    ImplicitProblem::new(
        Box::new(f),
        Rect::new(vec![-0.5, -0.5], vec![0.5, 0.5]).expect("static box"),
        Interval::new(0.0, 1.5).expect("static interval"),
        None,
    )
    .expect("sphere problem is well posed")
}

/// The eccentric Kepler problem (ε = 1) on one anomaly period.
pub fn kepler_problem() -> ImplicitProblem {
    let f = Expr::parse("E - 1*sin(E) - M", &["M", "E"]).expect("static source parses");
    let pi = std::f64::consts::PI;
    ImplicitProblem::new(
        Box::new(f),
        Rect::new(vec![0.0], vec![2.0 * pi]).expect("static box"),
        Interval::new(-pi, 3.0 * pi).expect("static interval"),
        None,
    )
    .expect("kepler problem is well posed")
}
