//! Sectioned key–value run configurations.
//!
//! One file describes one run. A `[problem]` section holds the equations,
//! the variable list, the rectangle `R`, and the codomain `I`; a `[fit]`
//! section picks the mode and overrides tolerances; `[stage k]` sections
//! parameterize system stages in execution order; an optional `[output]`
//! section names the artifact directory. `#` starts a comment, keys are
//! `name = value`, and every error carries the 1-based line it came from.

use std::fmt;
use std::path::{Path, PathBuf};

use impoly::{Expr, Interval, Orientation, Rect, Tolerances};

/// A configuration problem, tagged with the line that caused it when one
/// exists (ill-formed syntax, bad value) — semantic clashes between keys
/// report without a line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// How the fit runs, with its mode-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeConfig {
    /// One fixed partition count per axis.
    Polynomial { n: Vec<usize> },
    /// Normalized fits over an increasing schedule of per-axis counts.
    Analytic { schedule: Vec<usize> },
    /// Dyadic refinement to `2^depth` blocks per axis.
    Dyadic { depth: usize },
    /// Descending variable elimination; one entry per stage, execution
    /// order (the stage eliminating the last dependent variable first).
    System { stages: Vec<StageConfig> },
}

impl ModeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModeConfig::Polynomial { .. } => "polynomial",
            ModeConfig::Analytic { .. } => "analytic",
            ModeConfig::Dyadic { .. } => "dyadic",
            ModeConfig::System { .. } => "system",
        }
    }
}

/// Per-stage overrides for system runs, mirroring `impoly::StageSpec`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    pub n: Vec<usize>,
    pub domain: Option<Rect>,
    pub interval: Option<Interval>,
    pub center: Option<Vec<f64>>,
    pub orientation: Option<Orientation>,
}

/// A fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Parsed equations, in file order.
    pub equations: Vec<Expr>,
    /// The source text of each equation, for reports.
    pub equation_texts: Vec<String>,
    /// All variable names: independent axes first, dependent last.
    pub variables: Vec<String>,
    /// The rectangle of the independent variables.
    pub domain: Rect,
    /// One codomain interval per dependent variable.
    pub intervals: Vec<Interval>,
    /// Expansion center (single-equation modes only).
    pub center: Option<Vec<f64>>,
    /// Pinned orientation (single-equation modes only).
    pub orientation: Option<Orientation>,
    /// Pinned elimination order as 0-based equation indices in execution
    /// order (system mode only).
    pub order: Option<Vec<usize>>,
    pub mode: ModeConfig,
    pub tolerances: Tolerances,
    /// Artifact directory from `[output] dir`; `--out` overrides it.
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Number of independent variables.
    pub fn n(&self) -> usize {
        self.domain.dim()
    }

    /// Number of dependent variables (= equations).
    pub fn m(&self) -> usize {
        self.intervals.len()
    }
}

/// Reads and validates the configuration at `path`. Messages do not repeat
/// the path; the caller prefixes it.
pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::general(format!("cannot read config: {e}")))?;
    parse(&text)
}

/// One `key = value` occurrence.
#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
struct RawSection {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

/// Splits the text into sections of key–value entries.
fn lex(text: &str) -> Result<Vec<RawSection>, ConfigError> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(ConfigError::at(line, "empty section name"));
            }
            sections.push(RawSection {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            ConfigError::at(line, format!("expected `key = value`, found `{content}`"))
        })?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::at(line, format!("invalid key `{key}`")));
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| ConfigError::at(line, format!("key `{key}` outside any section")))?;
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(sections)
}

/// Typed access to one section's entries, tracking which were consumed so
/// leftovers can be reported as unknown keys.
struct SectionView {
    name: String,
    entries: Vec<Entry>,
    used: Vec<bool>,
}

impl SectionView {
    fn new(raw: RawSection) -> Self {
        let used = vec![false; raw.entries.len()];
        Self {
            name: raw.name,
            entries: raw.entries,
            used,
        }
    }

    /// Consumes a single-valued key. Duplicates are an error.
    fn take(&mut self, key: &str) -> Result<Option<Entry>, ConfigError> {
        let mut found: Option<Entry> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.key == key {
                if found.is_some() {
                    return Err(ConfigError::at(
                        e.line,
                        format!("duplicate key `{key}` in [{}]", self.name),
                    ));
                }
                self.used[i] = true;
                found = Some(e.clone());
            }
        }
        Ok(found)
    }

    /// Consumes every occurrence of a repeatable key, in file order.
    fn take_all(&mut self, key: &str) -> Vec<Entry> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.key == key {
                self.used[i] = true;
                out.push(e.clone());
            }
        }
        out
    }

    fn require(&mut self, key: &str) -> Result<Entry, ConfigError> {
        self.take(key)?.ok_or_else(|| {
            ConfigError::general(format!("[{}] is missing required key `{key}`", self.name))
        })
    }

    /// Errors on the first entry nothing consumed.
    fn finish(self) -> Result<(), ConfigError> {
        for (e, used) in self.entries.iter().zip(&self.used) {
            if !used {
                return Err(ConfigError::at(
                    e.line,
                    format!("unknown key `{}` in [{}]", e.key, self.name),
                ));
            }
        }
        Ok(())
    }
}

// ------------------------------------------------------------------
// Value parsers
// ------------------------------------------------------------------

/// One element of a bracketed array: a number or an inner list of numbers.
enum Item {
    Scalar(f64),
    List(Vec<f64>),
}

fn parse_f64(text: &str, line: usize) -> Result<f64, ConfigError> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| ConfigError::at(line, format!("expected a number, found `{}`", text.trim())))
}

fn parse_usize(text: &str, line: usize) -> Result<usize, ConfigError> {
    text.trim().parse::<usize>().map_err(|_| {
        ConfigError::at(
            line,
            format!("expected a non-negative integer, found `{}`", text.trim()),
        )
    })
}

fn parse_u64(text: &str, line: usize) -> Result<u64, ConfigError> {
    text.trim().parse::<u64>().map_err(|_| {
        ConfigError::at(
            line,
            format!("expected a non-negative integer, found `{}`", text.trim()),
        )
    })
}

fn parse_bool(text: &str, line: usize) -> Result<bool, ConfigError> {
    match text.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ConfigError::at(
            line,
            format!("expected `true` or `false`, found `{other}`"),
        )),
    }
}

fn parse_orientation(text: &str, line: usize) -> Result<Orientation, ConfigError> {
    match text.trim() {
        "+1" | "1" => Ok(Orientation::Positive),
        "-1" => Ok(Orientation::Negative),
        other => Err(ConfigError::at(
            line,
            format!("expected `+1` or `-1`, found `{other}`"),
        )),
    }
}

/// Splits `body` at top-level commas (depth tracked over `[`/`]`).
fn split_top_level(body: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in body.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                pieces.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    pieces.push(&body[start..]);
    pieces
}

/// Parses `[a, b, [c, d], …]` into items. The outer brackets are required.
fn parse_array(text: &str, line: usize) -> Result<Vec<Item>, ConfigError> {
    let inner = text
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| {
            ConfigError::at(line, format!("expected a bracketed array, found `{text}`"))
        })?
        .trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    split_top_level(inner)
        .into_iter()
        .map(|piece| {
            let piece = piece.trim();
            if piece.starts_with('[') {
                let body = piece
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(|| {
                        ConfigError::at(line, format!("unbalanced brackets in `{piece}`"))
                    })?;
                let nums = split_top_level(body)
                    .into_iter()
                    .map(|n| parse_f64(n, line))
                    .collect::<Result<Vec<f64>, _>>()?;
                Ok(Item::List(nums))
            } else {
                Ok(Item::Scalar(parse_f64(piece, line)?))
            }
        })
        .collect()
}

/// A flat list of numbers: `[a, b, c]` or a bare scalar.
fn parse_f64_list(entry: &Entry) -> Result<Vec<f64>, ConfigError> {
    if !entry.value.trim().starts_with('[') {
        return Ok(vec![parse_f64(&entry.value, entry.line)?]);
    }
    parse_array(&entry.value, entry.line)?
        .into_iter()
        .map(|item| match item {
            Item::Scalar(v) => Ok(v),
            Item::List(_) => Err(ConfigError::at(
                entry.line,
                format!("`{}` must be a flat list of numbers", entry.key),
            )),
        })
        .collect()
}

/// A flat list of non-negative integers: `[2, 4, 6]` or a bare integer.
fn parse_usize_list(entry: &Entry) -> Result<Vec<usize>, ConfigError> {
    parse_f64_list(entry)?
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && v >= 0.0 && v <= usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(ConfigError::at(
                    entry.line,
                    format!("`{}` must list non-negative integers", entry.key),
                ))
            }
        })
        .collect()
}

fn pair_to_interval(pair: &[f64], entry: &Entry) -> Result<Interval, ConfigError> {
    if pair.len() != 2 {
        return Err(ConfigError::at(
            entry.line,
            format!("`{}` needs [lo, hi] pairs", entry.key),
        ));
    }
    Interval::new(pair[0], pair[1])
        .map_err(|e| ConfigError::at(entry.line, format!("`{}`: {e}", entry.key)))
}

/// `R = [[lo1,hi1],[lo2,hi2]]`; a flat `[lo,hi]` means one axis, `[]` a
/// point rectangle.
fn parse_rect(entry: &Entry) -> Result<Rect, ConfigError> {
    let items = parse_array(&entry.value, entry.line)?;
    if items.is_empty() {
        return Ok(Rect::point());
    }
    if items.iter().all(|i| matches!(i, Item::Scalar(_))) {
        let nums: Vec<f64> = items
            .iter()
            .map(|i| match i {
                Item::Scalar(v) => *v,
                Item::List(_) => unreachable!(),
            })
            .collect();
        let axis = pair_to_interval(&nums, entry)?;
        return Ok(Rect::from_intervals(&[axis]));
    }
    let axes = items
        .iter()
        .map(|item| match item {
            Item::List(pair) => pair_to_interval(pair, entry),
            Item::Scalar(_) => Err(ConfigError::at(
                entry.line,
                format!("`{}` mixes scalars and pairs", entry.key),
            )),
        })
        .collect::<Result<Vec<Interval>, _>>()?;
    Ok(Rect::from_intervals(&axes))
}

/// `I = [lo,hi]` or, for systems, `I = [[lo1,hi1],…]`.
fn parse_intervals(entry: &Entry) -> Result<Vec<Interval>, ConfigError> {
    let rect = parse_rect(entry)?;
    if rect.dim() == 0 {
        return Err(ConfigError::at(
            entry.line,
            format!("`{}` needs at least one [lo, hi] pair", entry.key),
        ));
    }
    Ok((0..rect.dim()).map(|k| rect.axis(k)).collect())
}

fn parse_variables(entry: &Entry) -> Result<Vec<String>, ConfigError> {
    let names: Vec<String> = entry
        .value
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    for name in &names {
        let mut chars = name.chars();
        let head_ok = chars
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
        if !head_ok || !name[1..].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::at(
                entry.line,
                format!("invalid variable name `{name}`"),
            ));
        }
    }
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return Err(ConfigError::at(
                entry.line,
                format!("variable `{a}` listed twice"),
            ));
        }
    }
    Ok(names)
}

// ------------------------------------------------------------------
// Assembly
// ------------------------------------------------------------------

/// Parses and validates configuration text.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let mut problem: Option<SectionView> = None;
    let mut fit: Option<SectionView> = None;
    let mut output: Option<SectionView> = None;
    let mut stages: Vec<(usize, SectionView, usize)> = Vec::new(); // (stage no, view, line)

    for raw in lex(text)? {
        let line = raw.line;
        match raw.name.as_str() {
            "problem" => {
                if problem.is_some() {
                    return Err(ConfigError::at(line, "duplicate [problem] section"));
                }
                problem = Some(SectionView::new(raw));
            }
            "fit" => {
                if fit.is_some() {
                    return Err(ConfigError::at(line, "duplicate [fit] section"));
                }
                fit = Some(SectionView::new(raw));
            }
            "output" => {
                if output.is_some() {
                    return Err(ConfigError::at(line, "duplicate [output] section"));
                }
                output = Some(SectionView::new(raw));
            }
            name => {
                let number = name
                    .strip_prefix("stage ")
                    .and_then(|s| s.trim().parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| ConfigError::at(line, format!("unknown section [{name}]")))?;
                if stages.iter().any(|(k, _, _)| *k == number) {
                    return Err(ConfigError::at(line, format!("duplicate [stage {number}]")));
                }
                stages.push((number, SectionView::new(raw), line));
            }
        }
    }

    let mut problem =
        problem.ok_or_else(|| ConfigError::general("missing [problem] section"))?;
    let mut fit = fit.ok_or_else(|| ConfigError::general("missing [fit] section"))?;

    // --- [problem] ---
    let equation_entries = problem.take_all("equation");
    if equation_entries.is_empty() {
        return Err(ConfigError::general(
            "[problem] needs at least one `equation`",
        ));
    }
    let variables = parse_variables(&problem.require("variables")?)?;
    let domain = parse_rect(&problem.require("R")?)?;
    let intervals = parse_intervals(&problem.require("I")?)?;
    let center = problem.take("center")?.map(|e| parse_f64_list(&e)).transpose()?;
    let orientation = problem
        .take("orientation")?
        .map(|e| parse_orientation(&e.value, e.line))
        .transpose()?;
    let order_entry = problem.take("order")?;

    let n = domain.dim();
    let m = intervals.len();
    if variables.len() != n + m {
        return Err(ConfigError::general(format!(
            "expected {} variables ({} independent + {} dependent), found {}",
            n + m,
            n,
            m,
            variables.len()
        )));
    }

    let var_refs: Vec<&str> = variables.iter().map(String::as_str).collect();
    let mut equations = Vec::with_capacity(equation_entries.len());
    let mut equation_texts = Vec::with_capacity(equation_entries.len());
    for entry in &equation_entries {
        let expr = Expr::parse(&entry.value, &var_refs)
            .map_err(|e| ConfigError::at(entry.line, format!("equation: {e}")))?;
        equations.push(expr);
        equation_texts.push(entry.value.clone());
    }

    // --- [fit] ---
    let mode_entry = fit.require("mode")?;
    let mut tolerances = Tolerances::default();
    if let Some(e) = fit.take("quad_order")? {
        tolerances.quad_order = parse_usize(&e.value, e.line)?;
        if tolerances.quad_order == 0 {
            return Err(ConfigError::at(e.line, "quad_order must be at least 1"));
        }
    }
    if let Some(e) = fit.take("bisect_tol")? {
        tolerances.bisect_tol = parse_f64(&e.value, e.line)?;
        if !(tolerances.bisect_tol > 0.0) {
            return Err(ConfigError::at(e.line, "bisect_tol must be positive"));
        }
    }
    if let Some(e) = fit.take("force")? {
        tolerances.force = parse_bool(&e.value, e.line)?;
    }
    if let Some(e) = fit.take("dd_threshold")? {
        tolerances.dd_threshold = parse_usize(&e.value, e.line)?;
    }
    if let Some(e) = fit.take("condition_warn")? {
        tolerances.condition_warn = parse_f64(&e.value, e.line)?;
    }
    if let Some(e) = fit.take("orientation_samples")? {
        tolerances.orientation_samples = parse_usize(&e.value, e.line)?.max(1);
    }
    if let Some(e) = fit.take("seed")? {
        tolerances.seed = parse_u64(&e.value, e.line)?;
    }
    if let Some(e) = fit.take("validation_per_axis")? {
        tolerances.validation_per_axis = parse_usize(&e.value, e.line)?.max(1);
    }

    let n_entry = fit.take("N")?;
    let schedule_entry = fit.take("schedule")?;
    let depth_entry = fit.take("depth")?;

    let mode = match mode_entry.value.trim() {
        "polynomial" => {
            let e = n_entry.ok_or_else(|| {
                ConfigError::at(mode_entry.line, "mode polynomial requires `N` in [fit]")
            })?;
            reject(&schedule_entry, "schedule", "polynomial")?;
            reject(&depth_entry, "depth", "polynomial")?;
            let counts = parse_usize_list(&e)?;
            validate_counts(&counts, n, &e)?;
            ModeConfig::Polynomial { n: counts }
        }
        "analytic" => {
            let e = schedule_entry.ok_or_else(|| {
                ConfigError::at(mode_entry.line, "mode analytic requires `schedule` in [fit]")
            })?;
            reject(&n_entry, "N", "analytic")?;
            reject(&depth_entry, "depth", "analytic")?;
            let schedule = parse_usize_list(&e)?;
            if schedule.is_empty() {
                return Err(ConfigError::at(e.line, "schedule must not be empty"));
            }
            if schedule.contains(&0) {
                return Err(ConfigError::at(e.line, "schedule counts must be positive"));
            }
            if schedule.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ConfigError::at(
                    e.line,
                    "schedule must be strictly increasing",
                ));
            }
            ModeConfig::Analytic { schedule }
        }
        "dyadic" => {
            let e = depth_entry.ok_or_else(|| {
                ConfigError::at(mode_entry.line, "mode dyadic requires `depth` in [fit]")
            })?;
            reject(&n_entry, "N", "dyadic")?;
            reject(&schedule_entry, "schedule", "dyadic")?;
            let depth = parse_usize(&e.value, e.line)?;
            if depth == 0 {
                return Err(ConfigError::at(e.line, "depth must be at least 1"));
            }
            ModeConfig::Dyadic { depth }
        }
        "system" => {
            reject(&n_entry, "N", "system (use [stage k] sections)")?;
            reject(&schedule_entry, "schedule", "system")?;
            reject(&depth_entry, "depth", "system")?;
            ModeConfig::System { stages: Vec::new() } // filled below
        }
        other => {
            return Err(ConfigError::at(
                mode_entry.line,
                format!(
                    "unknown mode `{other}` (expected polynomial, analytic, dyadic, or system)"
                ),
            ));
        }
    };

    // --- mode-specific shape checks ---
    let is_system = matches!(mode, ModeConfig::System { .. });
    if is_system {
        if equations.len() != m {
            return Err(ConfigError::general(format!(
                "system mode needs one equation per codomain interval: {} equations, {} intervals",
                equations.len(),
                m
            )));
        }
        if center.is_some() || orientation.is_some() {
            return Err(ConfigError::general(
                "in system mode, center and orientation belong to [stage k] sections",
            ));
        }
    } else {
        if equations.len() != 1 {
            return Err(ConfigError::general(format!(
                "mode {} takes exactly one equation, found {}",
                mode.name(),
                equations.len()
            )));
        }
        if m != 1 {
            return Err(ConfigError::general(format!(
                "mode {} takes a single [lo, hi] codomain, found {m} intervals",
                mode.name()
            )));
        }
        if let Some(c) = &center {
            if c.len() != n {
                return Err(ConfigError::general(format!(
                    "center has {} entries but R has {} axes",
                    c.len(),
                    n
                )));
            }
        }
        if !stages.is_empty() {
            let (k, _, line) = &stages[0];
            return Err(ConfigError::at(
                *line,
                format!("[stage {k}] is only meaningful in system mode"),
            ));
        }
        if order_entry.is_some() {
            return Err(ConfigError::general(
                "`order` is only meaningful in system mode",
            ));
        }
    }

    let order = match order_entry {
        Some(e) if is_system => {
            let raw = parse_usize_list(&e)?;
            if raw.len() != m {
                return Err(ConfigError::at(
                    e.line,
                    format!("order must list all {m} equations"),
                ));
            }
            let mut zero_based = Vec::with_capacity(m);
            for &k in &raw {
                if k < 1 || k > m {
                    return Err(ConfigError::at(
                        e.line,
                        format!("order entries are 1-based equation numbers in 1..={m}"),
                    ));
                }
                if zero_based.contains(&(k - 1)) {
                    return Err(ConfigError::at(e.line, format!("equation {k} repeats in order")));
                }
                zero_based.push(k - 1);
            }
            Some(zero_based)
        }
        _ => None,
    };

    // --- [stage k] sections ---
    let mode = if let ModeConfig::System { .. } = mode {
        if stages.len() != m {
            return Err(ConfigError::general(format!(
                "system mode needs [stage 1] … [stage {m}], found {} stage sections",
                stages.len()
            )));
        }
        stages.sort_by_key(|(k, _, _)| *k);
        let mut specs = Vec::with_capacity(m);
        for (index, (k, mut view, line)) in stages.into_iter().enumerate() {
            if k != index + 1 {
                return Err(ConfigError::at(
                    line,
                    format!("expected [stage {}], found [stage {k}]", index + 1),
                ));
            }
            // Stage k (execution order) eliminates dependent variable
            // m − k (0-based), so its surrogate has n + m − k arguments.
            let rank = n + m - k;
            let n_entry = view.require("N")?;
            let counts = parse_usize_list(&n_entry)?;
            if counts.len() != rank || counts.contains(&0) {
                return Err(ConfigError::at(
                    n_entry.line,
                    format!("[stage {k}] N needs {rank} positive counts"),
                ));
            }
            let stage_domain = view.take("domain")?.map(|e| parse_rect(&e)).transpose()?;
            if let Some(d) = &stage_domain {
                if d.dim() != rank {
                    return Err(ConfigError::general(format!(
                        "[stage {k}] domain needs {rank} axes, found {}",
                        d.dim()
                    )));
                }
            }
            let stage_interval = view
                .take("interval")?
                .map(|e| {
                    let axes = parse_intervals(&e)?;
                    if axes.len() != 1 {
                        return Err(ConfigError::at(
                            e.line,
                            format!("[stage {k}] interval is a single [lo, hi]"),
                        ));
                    }
                    Ok(axes[0])
                })
                .transpose()?;
            let stage_center = view.take("center")?.map(|e| parse_f64_list(&e)).transpose()?;
            if let Some(c) = &stage_center {
                if c.len() != rank {
                    return Err(ConfigError::general(format!(
                        "[stage {k}] center needs {rank} entries, found {}",
                        c.len()
                    )));
                }
            }
            let stage_orientation = view
                .take("orientation")?
                .map(|e| parse_orientation(&e.value, e.line))
                .transpose()?;
            view.finish()?;
            specs.push(StageConfig {
                n: counts,
                domain: stage_domain,
                interval: stage_interval,
                center: stage_center,
                orientation: stage_orientation,
            });
        }
        ModeConfig::System { stages: specs }
    } else {
        mode
    };

    // --- [output] ---
    let out_dir = match output {
        Some(mut view) => {
            let dir = view.take("dir")?.map(|e| PathBuf::from(e.value));
            view.finish()?;
            dir
        }
        None => None,
    };

    problem.finish()?;
    fit.finish()?;

    Ok(RunConfig {
        equations,
        equation_texts,
        variables,
        domain,
        intervals,
        center,
        orientation,
        order,
        mode,
        tolerances,
        out_dir,
    })
}

fn reject(entry: &Option<Entry>, key: &str, mode: &str) -> Result<(), ConfigError> {
    match entry {
        Some(e) => Err(ConfigError::at(
            e.line,
            format!("`{key}` is not meaningful for mode {mode}"),
        )),
        None => Ok(()),
    }
}

fn validate_counts(counts: &[usize], n: usize, entry: &Entry) -> Result<(), ConfigError> {
    if counts.len() != n || counts.contains(&0) {
        return Err(ConfigError::at(
            entry.line,
            format!("N needs {n} positive counts (one per R axis)"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CIRCLE: &str = "\
[problem]
equation = x^2 + y^2 - 1
variables = x, y
R = [-1, 1]
I = [0, 2]

[fit]
mode = analytic
schedule = [2, 4, 6]
";

    #[test]
    fn parses_single_equation_config() {
        let cfg = parse(CIRCLE).unwrap();
        assert_eq!(cfg.n(), 1);
        assert_eq!(cfg.m(), 1);
        assert_eq!(cfg.variables, ["x", "y"]);
        assert_eq!(cfg.domain.lo(), &[-1.0]);
        assert_eq!(cfg.intervals[0].hi(), 2.0);
        assert_eq!(
            cfg.mode,
            ModeConfig::Analytic {
                schedule: vec![2, 4, 6]
            }
        );
        assert!(cfg.center.is_none());
        assert!(cfg.out_dir.is_none());
    }

    #[test]
    fn parses_system_config_with_stage_overrides() {
        let text = "\
[problem]
equation = x + y^2 + z^3 - 6
equation = x^3*y - z - 1
variables = x, y, z
R = [[0.5, 1.5]]
I = [[1.5, 2.5], [-2, 8]]
order = [2, 1]

[fit]
mode = system

[stage 1]
N = [4, 4]

[stage 2]
N = [25]
domain = [[-0.5, 2]]
interval = [0, 5]
center = [1]
orientation = +1

[output]
dir = out/nondege
";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.m(), 2);
        assert_eq!(cfg.order, Some(vec![1, 0]));
        let ModeConfig::System { stages } = &cfg.mode else {
            panic!("expected system mode");
        };
        assert_eq!(stages[0].n, [4, 4]);
        assert_eq!(stages[1].n, [25]);
        assert_eq!(stages[1].interval.unwrap().hi(), 5.0);
        assert_eq!(stages[1].center.as_deref(), Some(&[1.0][..]));
        assert_eq!(stages[1].orientation, Some(Orientation::Positive));
        assert_eq!(cfg.out_dir.as_deref(), Some(Path::new("out/nondege")));
    }

    #[test]
    fn tolerance_overrides_apply() {
        let text = "\
[problem]
equation = x^2 + y^2 - 1
variables = x, y
R = [-1, 1]
I = [0, 2]

[fit]
mode = polynomial
N = [6]
quad_order = 24
force = true
seed = 7
";
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.tolerances.quad_order, 24);
        assert!(cfg.tolerances.force);
        assert_eq!(cfg.tolerances.seed, 7);
        assert_eq!(cfg.mode, ModeConfig::Polynomial { n: vec![6] });
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "\
[problem]
equation = x^2 + y^2 - 1
variables = x, y
R = [-1, 1]
I = oops

[fit]
mode = polynomial
N = [4]
";
        let err = parse(bad).unwrap_err();
        assert_eq!(err.line, Some(5));
        assert!(err.to_string().contains("line 5"), "{err}");

        let unknown = format!("{CIRCLE}typo_key = 3\n");
        let err = parse(&unknown).unwrap_err();
        assert_eq!(err.line, Some(10));
        assert!(err.message.contains("typo_key"));
    }

    #[test]
    fn expression_errors_point_at_the_equation_line() {
        let bad = "\
[problem]
equation = x^2 + * y
variables = x, y
R = [-1, 1]
I = [0, 2]

[fit]
mode = polynomial
N = [4]
";
        let err = parse(bad).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.starts_with("equation:"), "{err}");
    }

    #[test]
    fn empty_schedule_is_rejected() {
        let bad = CIRCLE.replace("schedule = [2, 4, 6]", "schedule = []");
        let err = parse(&bad).unwrap_err();
        assert!(err.message.contains("empty"), "{err}");
    }

    #[test]
    fn mode_parameter_mismatches_are_rejected() {
        let bad = CIRCLE.replace("schedule = [2, 4, 6]", "N = [4]");
        let err = parse(&bad).unwrap_err();
        assert!(err.message.contains("requires `schedule`"), "{err}");

        let bad = format!("{CIRCLE}depth = 3\n");
        let err = parse(&bad).unwrap_err();
        assert!(err.message.contains("not meaningful"), "{err}");
    }

    #[test]
    fn variable_count_must_match_geometry() {
        let bad = CIRCLE.replace("variables = x, y", "variables = x, y, z");
        let err = parse(&bad).unwrap_err();
        assert!(err.message.contains("expected 2 variables"), "{err}");
    }

    #[test]
    fn order_entries_are_validated() {
        let base = "\
[problem]
equation = x - y + 0*z
equation = x + y - z
variables = x, y, z
R = [[0, 1]]
I = [[-5, 5], [-5, 5]]
order = [1, 1]

[fit]
mode = system

[stage 1]
N = [3, 3]

[stage 2]
N = [3]
";
        let err = parse(base).unwrap_err();
        assert!(err.message.contains("repeats"), "{err}");
        let ok = parse(&base.replace("order = [1, 1]", "order = [2, 1]")).unwrap();
        assert_eq!(ok.order, Some(vec![1, 0]));
        let err = parse(&base.replace("order = [1, 1]", "order = [0, 1]")).unwrap_err();
        assert!(err.message.contains("1-based"), "{err}");
    }
}
