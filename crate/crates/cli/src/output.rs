//! Artifact rendering.
//!
//! Every file a run produces is built fully in memory first and written in
//! one pass at the end, so a failing run never leaves partial outputs.
//! Numbers are printed in shortest round-trip decimals (Rust's default
//! float `Display`); only wall-clock timings are rounded.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use impoly::{
    CoeffTensor, EliminationChain, FitReport, Grid, Interval, JumpReport, Orientation, RealFn,
    Rect, FitError,
};

use crate::config::{RunConfig, StageConfig};

/// A set of named files rendered in memory.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Creates `dir` and writes every file into it.
    pub fn write_all(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

// ------------------------------------------------------------------
// Value formatting
// ------------------------------------------------------------------

pub fn fmt_f64_list(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", inner.join(", "))
}

pub fn fmt_usize_list(values: &[usize]) -> String {
    let inner: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", inner.join(", "))
}

pub fn fmt_interval(i: Interval) -> String {
    format!("[{}, {}]", i.lo(), i.hi())
}

pub fn fmt_rect(r: &Rect) -> String {
    let axes: Vec<String> = (0..r.dim()).map(|k| fmt_interval(r.axis(k))).collect();
    format!("[{}]", axes.join(", "))
}

// ------------------------------------------------------------------
// CSV artifacts
// ------------------------------------------------------------------

/// `beta_1,…,beta_n,coefficient` rows for a fitted tensor.
pub fn coefficients_csv(coeffs: &CoeffTensor) -> String {
    let mut buf = Vec::new();
    coeffs
        .write_csv(&mut buf)
        .expect("writing CSV to memory cannot fail");
    String::from_utf8(buf).expect("coefficient CSV is ASCII")
}

/// The half-offset validation lattice: `per_axis` points per axis, each at
/// a block midpoint, so boundaries are never sampled.
pub fn lattice(domain: &Rect, per_axis: usize) -> Result<Vec<Vec<f64>>, FitError> {
    let grid = Grid::uniform(domain.clone(), per_axis.max(1))?;
    let points = grid
        .iterate()
        .map(|alpha| {
            (0..domain.dim())
                .map(|k| domain.lo()[k] + (alpha[k] as f64 - 0.5) * grid.deltas()[k])
                .collect()
        })
        .collect();
    Ok(points)
}

/// Validation-grid samples of the surrogate and its residual, one row per
/// lattice point: `x…, <dependent>, residual`. The printed value is the raw
/// surrogate; the residual evaluates `f` with it clamped into the codomain.
pub fn surface_csv(
    f: &dyn RealFn,
    domain: &Rect,
    interval: Interval,
    coeffs: &CoeffTensor,
    per_axis: usize,
    variables: &[String],
) -> Result<String, FitError> {
    let n = domain.dim();
    let mut out = String::new();
    for name in &variables[..n] {
        let _ = write!(out, "{name},");
    }
    let _ = writeln!(out, "{},residual", variables[n]);
    for x in lattice(domain, per_axis)? {
        let g = coeffs.eval(&x);
        let mut args = x.clone();
        args.push(interval.clamp(g));
        let r = f.eval(&args)?.abs();
        for v in &x {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{g},{r}");
    }
    Ok(out)
}

/// System analogue of [`surface_csv`]: `x…, y_1…y_m, residual_1…residual_m`.
/// Dependent values are the raw composition; residuals clamp each into the
/// codomain interval its stage was fitted on first.
pub fn system_surface_csv(
    equations: &[Box<dyn RealFn>],
    domain: &Rect,
    chain: &EliminationChain,
    per_axis: usize,
    variables: &[String],
) -> Result<String, FitError> {
    let n = domain.dim();
    let codomain = chain.codomain();
    let m = codomain.len();
    let mut out = String::new();
    for name in &variables[..n + m] {
        let _ = write!(out, "{name},");
    }
    let residual_cols: Vec<String> = (1..=m).map(|j| format!("residual_{j}")).collect();
    let _ = writeln!(out, "{}", residual_cols.join(","));
    for x in lattice(domain, per_axis)? {
        let ys = chain.compose(&x);
        let mut args = x.clone();
        args.extend(ys.iter().zip(&codomain).map(|(&y, i)| i.clamp(y)));
        for v in &x {
            let _ = write!(out, "{v},");
        }
        for y in &ys {
            let _ = write!(out, "{y},");
        }
        let res: Vec<String> = equations
            .iter()
            .map(|f| f.eval(&args).map(|v| v.abs().to_string()))
            .collect::<Result<_, _>>()?;
        let _ = writeln!(out, "{}", res.join(","));
    }
    Ok(out)
}

// ------------------------------------------------------------------
// Reports
// ------------------------------------------------------------------

/// Per-section verification lines shared by `verify` output and `report.txt`:
/// the section count, the violation count, and one line per violating
/// section with its observed sign-change count.
pub fn verification_lines(report: &JumpReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sections_checked = {}", report.samples_checked);
    let _ = writeln!(out, "violations = {}", report.violations.len());
    for (x, changes) in &report.violations {
        let _ = writeln!(
            out,
            "violation at {} ({changes} sign changes)",
            fmt_f64_list(x)
        );
    }
    out
}

fn fit_lines(out: &mut String, report: &FitReport) {
    let _ = writeln!(out, "residual_max = {}", report.residual_max);
    let _ = writeln!(out, "block_mismatch_max = {}", report.block_mismatch_max);
    if let Some(w) = report.weak_star_mismatch {
        let _ = writeln!(out, "weak_star_mismatch = {w}");
    }
    if let Some(levels) = &report.dyadic_nesting {
        for (level, v) in levels.iter().enumerate() {
            let _ = writeln!(out, "nesting_level_{level} = {v}");
        }
    }
    let _ = writeln!(out, "condition_estimate = {}", report.condition_estimate);
    let _ = writeln!(out, "condition_warning = {}", report.condition_warning);
    let _ = writeln!(out, "extended_precision = {}", report.extended_precision);
    let t = report.timings;
    let _ = writeln!(out, "moments_s = {:.3}", t.moments_s);
    let _ = writeln!(out, "solve_s = {:.3}", t.solve_s);
    let _ = writeln!(out, "diagnostics_s = {:.3}", t.diagnostics_s);
    let _ = writeln!(out, "total_s = {:.3}", t.total_s());
}

fn problem_lines(out: &mut String, cfg: &RunConfig) {
    let _ = writeln!(out, "mode = {}", cfg.mode.name());
    for (j, text) in cfg.equation_texts.iter().enumerate() {
        if cfg.equation_texts.len() == 1 {
            let _ = writeln!(out, "equation = {text}");
        } else {
            let _ = writeln!(out, "equation_{} = {text}", j + 1);
        }
    }
    let _ = writeln!(out, "variables = {}", cfg.variables.join(", "));
    let _ = writeln!(out, "R = {}", fmt_rect(&cfg.domain));
    let axes: Vec<String> = cfg.intervals.iter().map(|&i| fmt_interval(i)).collect();
    let _ = writeln!(out, "I = [{}]", axes.join(", "));
    let _ = writeln!(out, "seed = {}", cfg.tolerances.seed);
    let _ = writeln!(out, "force = {}", cfg.tolerances.force);
    let _ = writeln!(out, "quad_order = {}", cfg.tolerances.quad_order);
}

/// `report.txt` for the single-equation modes: the problem as run, the
/// verification summary, and one diagnostics block per fit (analytic mode
/// produces one per schedule entry).
pub fn single_report(
    cfg: &RunConfig,
    center: &[f64],
    orientation: Orientation,
    verification: &JumpReport,
    fits: &[(String, FitReport)],
) -> String {
    let mut out = String::new();
    problem_lines(&mut out, cfg);
    let _ = writeln!(out, "center = {}", fmt_f64_list(center));
    let _ = writeln!(out, "orientation = {orientation}");
    let _ = writeln!(out, "\n[verification]");
    out.push_str(&verification_lines(verification));
    for (label, report) in fits {
        let _ = writeln!(out, "\n[fit {label}]");
        fit_lines(&mut out, report);
    }
    out
}

/// `report.txt` for system mode: the problem, per-equation verification,
/// the execution order, and per-stage diagnostics plus the composed
/// per-equation residuals.
pub fn system_report(
    cfg: &RunConfig,
    verifications: &[JumpReport],
    order: &[usize],
    chain: &EliminationChain,
    residuals: &[f64],
) -> String {
    let mut out = String::new();
    problem_lines(&mut out, cfg);
    let order_1: Vec<usize> = order.iter().map(|&e| e + 1).collect();
    let _ = writeln!(out, "order = {}  # execution order, 1-based equations", fmt_usize_list(&order_1));
    for (j, v) in verifications.iter().enumerate() {
        let _ = writeln!(out, "\n[verification equation {}]", j + 1);
        out.push_str(&verification_lines(v));
    }
    for (k, stage) in chain.stages().iter().enumerate() {
        let _ = writeln!(
            out,
            "\n[stage {} | equation {} solves {}]",
            k + 1,
            stage.equation + 1,
            cfg.variables[cfg.n() + stage.variable],
        );
        fit_lines(&mut out, &stage.report);
    }
    let _ = writeln!(out, "\n[composed residuals]");
    for (j, r) in residuals.iter().enumerate() {
        let _ = writeln!(out, "residual_max_equation_{} = {r}", j + 1);
    }
    out
}

/// `manifest.txt`: the execution order plus, per stage, the coefficient
/// file, the solved variable, and the geometry the surrogate was fitted on.
pub fn manifest(
    cfg: &RunConfig,
    order: &[usize],
    chain: &EliminationChain,
    stage_cfgs: &[StageConfig],
) -> String {
    let n = cfg.n();
    let order_1: Vec<usize> = order.iter().map(|&e| e + 1).collect();
    let mut out = String::new();
    let _ = writeln!(out, "stages = {}", chain.stages().len());
    let _ = writeln!(out, "order = {}  # execution order, 1-based equations", fmt_usize_list(&order_1));
    let _ = writeln!(
        out,
        "# Composition: evaluate stages last-to-first; each surrogate takes the\n\
         # independent variables followed by every lower dependent variable."
    );
    for (k, stage) in chain.stages().iter().enumerate() {
        let surrogate = stage.surrogate();
        let args: Vec<&str> = cfg.variables[..n + stage.variable]
            .iter()
            .map(String::as_str)
            .collect();
        let spec = &stage_cfgs[k];
        let orientation = match spec.orientation {
            Some(o) => o.to_string(),
            None => "auto".to_string(),
        };
        let _ = writeln!(out, "\n[stage {}]", k + 1);
        let _ = writeln!(out, "file = stage{}_coefficients.csv", k + 1);
        let _ = writeln!(out, "equation = {}", stage.equation + 1);
        let _ = writeln!(out, "solves = {}", cfg.variables[n + stage.variable]);
        let _ = writeln!(out, "arguments = {}", args.join(", "));
        let _ = writeln!(out, "N = {}", fmt_usize_list(&spec.n));
        let _ = writeln!(out, "domain = {}", fmt_rect(surrogate.domain()));
        let _ = writeln!(out, "interval = {}", fmt_interval(stage.interval));
        let _ = writeln!(out, "center = {}", fmt_f64_list(surrogate.center()));
        let _ = writeln!(out, "orientation = {orientation}");
    }
    out
}

// ------------------------------------------------------------------
// Bench table
// ------------------------------------------------------------------

/// One timed repetition: per-stage seconds from the parallel run plus the
/// serial and parallel wall times.
#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub rep: usize,
    pub moments_s: f64,
    pub solve_s: f64,
    pub diagnostics_s: f64,
    pub serial_s: f64,
    pub parallel_s: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.serial_s / self.parallel_s
    }
}

/// `bench.csv`, rows sorted by descending speedup.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.speedup().total_cmp(&a.speedup()));
    let mut out = String::from("rep,moments_s,solve_s,diagnostics_s,serial_s,parallel_s,speedup\n");
    for r in &sorted {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.rep, r.moments_s, r.solve_s, r.diagnostics_s, r.serial_s, r.parallel_s, r.speedup()
        );
    }
    out
}
