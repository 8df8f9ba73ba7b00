//! Convergence sweeps: run configuration, orchestration on a thread pool, and
//! CSV, JSON and SVG output. Also the kernel verification and model
//! comparison drivers used by the command-line tool.

use crate::assembly::{assemble_old, EntryCase};
use crate::csvfmt::format_g17;
use crate::error::{Error, Result};
use crate::exact::{build_exact, check_contrast, LocalExactSolution};
use crate::kernel::BRANCH_TOL;
use crate::mesh::{build_mesh, build_mesh_capped, InterfaceMesh, RationalInterface};
use crate::norms::{compute_errors, fit_slope, ErrorReport};
use crate::oracle::oracle_entry;
use crate::problem::{CoefficientField, ModelKind, ProblemConfig, Sigma3Policy};
use crate::solvers::run_model;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const CSV_HEADER: &str = "h,s,b,sigma1,sigma2,sigma3,alpha,model,l2,h1,energy,interface_abs,walltime_ms";
pub const THREADS_ENV: &str = "FRACTRANS_THREADS";
pub const VERIFY_MAX_CELLS: usize = 32;
pub const VERIFY_TOL: f64 = 1e-5;

/// Ends of the default `1-s` range of a coupled sweep.
pub const COUPLED_ONE_MINUS_S: (f64, f64) = (4e-2, 5e-4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Every `(model, s, level)` combination.
    Grid,
    /// `s_values[i]` paired with `levels[i]`.
    Coupled,
}

/// How a coupled sweep fills in `s` when none is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// `1-s` geometric between the ends of [`COUPLED_ONE_MINUS_S`].
    Geometric,
    /// `1-s = h/4`.
    QuarterH,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub b: RationalInterface,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: Option<Sigma3Policy>,
    pub alpha: f64,
    pub s_values: Vec<f64>,
    /// Mesh refinements; level `k` has `q·2^k` cells for `b = p/q`.
    pub levels: Vec<u32>,
    pub models: Vec<ModelKind>,
    pub out_dir: PathBuf,
    pub sweep: SweepKind,
    pub plot: bool,
    pub allow_critical: bool,
}

/// Parses flat `key = value` text. Blank lines and `#` comments are
/// skipped; `[section]` headers are ignored.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value, got '{raw}'", no + 1)))?;
        let v = v.trim().trim_matches('"');
        out.push((k.trim().to_ascii_lowercase().replace('-', "_"), v.to_string()));
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{key}: '{v}' is not a number")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Parse(format!("{key}: '{v}' is not a boolean"))),
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty())
}

pub fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    split_list(v).map(|t| parse_f64(key, t)).collect()
}

/// Comma list of integers or inclusive ranges `a..b`.
pub fn parse_level_list(v: &str) -> Result<Vec<u32>> {
    let bad = |t: &str| Error::Parse(format!("levels: '{t}' is not a level or a range a..b"));
    let mut out = Vec::new();
    for t in split_list(v) {
        if let Some((a, b)) = t.split_once("..") {
            let a: u32 = a.parse().map_err(|_| bad(t))?;
            let b: u32 = b.trim_start_matches('=').parse().map_err(|_| bad(t))?;
            if a > b {
                return Err(bad(t));
            }
            out.extend(a..=b);
        } else {
            out.push(t.parse().map_err(|_| bad(t))?);
        }
    }
    Ok(out)
}

pub fn parse_models(v: &str) -> Result<Vec<ModelKind>> {
    if v.trim().eq_ignore_ascii_case("all") {
        return Ok(ModelKind::ALL.to_vec());
    }
    let mut out: Vec<ModelKind> = split_list(v).map(str::parse).collect::<Result<_>>()?;
    out.dedup();
    Ok(out)
}

/// `n` values of `1-s` spaced geometrically from `hi` down to `lo`.
pub fn geometric_one_minus_s(n: usize, hi: f64, lo: f64) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    (0..n).map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64)).collect()
}

impl RunConfig {
    /// Builds a configuration from key/value pairs; later pairs win, so
    /// flag overrides go after file contents.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            map.insert(k.to_ascii_lowercase().replace('-', "_"), v);
        }
        let mut cfg = RunConfig {
            b: RationalInterface::new(1, 2)?,
            sigma1: 1.0,
            sigma2: 1.0,
            sigma3: None,
            alpha: 0.0,
            s_values: Vec::new(),
            levels: Vec::new(),
            models: ModelKind::ALL.to_vec(),
            out_dir: PathBuf::from("out"),
            sweep: SweepKind::Grid,
            plot: true,
            allow_critical: false,
        };
        let mut pairing = Pairing::Geometric;
        let mut one_minus_s = None;
        for (k, v) in &map {
            match k.as_str() {
                "b" => cfg.b = v.parse()?,
                "sigma1" => cfg.sigma1 = parse_f64(k, v)?,
                "sigma2" => cfg.sigma2 = parse_f64(k, v)?,
                "sigma3" => cfg.sigma3 = Some(v.parse()?),
                "alpha" => cfg.alpha = parse_f64(k, v)?,
                "s" => cfg.s_values = parse_f64_list(k, v)?,
                "one_minus_s" => one_minus_s = Some(parse_f64_list(k, v)?),
                "levels" => cfg.levels = parse_level_list(v)?,
                "models" => cfg.models = parse_models(v)?,
                "out" | "out_dir" => cfg.out_dir = PathBuf::from(v),
                "plot" => cfg.plot = parse_bool(k, v)?,
                "allow_critical" => cfg.allow_critical = parse_bool(k, v)?,
                "sweep" => {
                    cfg.sweep = match v.trim().to_ascii_lowercase().as_str() {
                        "grid" => SweepKind::Grid,
                        "coupled" => SweepKind::Coupled,
                        _ => return Err(Error::Parse(format!("sweep: '{v}' is neither grid nor coupled"))),
                    }
                }
                "pairing" => {
                    pairing = match v.trim().to_ascii_lowercase().as_str() {
                        "geometric" => Pairing::Geometric,
                        "quarter_h" | "quarter-h" => Pairing::QuarterH,
                        _ => return Err(Error::Parse(format!("pairing: '{v}' is neither geometric nor quarter-h"))),
                    }
                }
                other => return Err(Error::Parse(format!("unknown configuration key '{other}'"))),
            }
        }
        if let Some(oms) = one_minus_s {
            if map.contains_key("s") {
                return Err(Error::config("give either s or one_minus_s, not both"));
            }
            cfg.s_values = oms.iter().map(|d| 1.0 - d).collect();
        }
        if cfg.sweep == SweepKind::Coupled && cfg.s_values.is_empty() && !cfg.levels.is_empty() {
            cfg.s_values = match pairing {
                Pairing::Geometric => {
                    let (hi, lo) = COUPLED_ONE_MINUS_S;
                    geometric_one_minus_s(cfg.levels.len(), hi, lo).iter().map(|d| 1.0 - d).collect()
                }
                Pairing::QuarterH => {
                    cfg.levels.iter().map(|&k| 1.0 - 0.25 / ((cfg.b.denominator() as f64) * 2f64.powi(k as i32))).collect()
                }
            };
        }
        Ok(cfg)
    }

    /// Reads `path` and applies `overrides` on top.
    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = parse_key_values(&text)?;
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(pairs)
    }

    pub fn problem(&self, s: f64) -> ProblemConfig {
        ProblemConfig { b: self.b, sigma1: self.sigma1, sigma2: self.sigma2, sigma3: self.sigma3, alpha: self.alpha, s }
    }

    /// Checks everything that can be checked before any run.
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::config("model list is empty"));
        }
        if self.levels.is_empty() {
            return Err(Error::config("level list is empty"));
        }
        if self.s_values.is_empty() {
            return Err(Error::config("s list is empty"));
        }
        if self.sweep == SweepKind::Coupled && self.s_values.len() != self.levels.len() {
            return Err(Error::config(format!(
                "coupled sweep pairs s with levels but got {} s values and {} levels",
                self.s_values.len(),
                self.levels.len()
            )));
        }
        self.problem(0.75).source()?;
        CoefficientField::new(self.sigma1, self.sigma2, 0.0)?;
        for &k in &self.levels {
            build_mesh(self.b, k)?;
        }
        for &kind in &self.models {
            self.problem(0.75).sigma3_for(kind)?;
            let lower = if kind.is_reconstructed() { 0.5 } else { 0.0 };
            if kind.is_fractional() {
                if let Some(&s) = self.s_values.iter().find(|&&s| !(s > lower && s < 1.0)) {
                    return Err(Error::domain(format!("s = {s} outside ({lower}, 1) for the {kind} model")));
                }
            }
        }
        if !self.allow_critical {
            check_contrast(self.b.value(), self.sigma1, self.sigma2)?;
        }
        Ok(())
    }

    /// Runs in deterministic order: model, then level, then `s`.
    pub fn jobs(&self) -> Vec<Job> {
        let mut models = self.models.clone();
        models.sort();
        models.dedup();
        let mut out = Vec::new();
        for model in models {
            match self.sweep {
                SweepKind::Grid => {
                    for &level in &self.levels {
                        for &s in &self.s_values {
                            out.push(Job { model, level, s });
                        }
                    }
                }
                SweepKind::Coupled => {
                    for (&level, &s) in self.levels.iter().zip(&self.s_values) {
                        out.push(Job { model, level, s });
                    }
                }
            }
        }
        out
    }

    fn to_json(&self) -> serde_json::Value {
        json!({
            "b": self.b.to_string(),
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "sigma3": self.sigma3.map(|p| p.to_string()).unwrap_or_else(|| "model-default".into()),
            "alpha": self.alpha,
            "s": self.s_values,
            "levels": self.levels,
            "models": self.models.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "sweep": self.sweep,
            "allow_critical": self.allow_critical,
            "plot": self.plot,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Job {
    pub model: ModelKind,
    pub level: u32,
    pub s: f64,
}

/// One successful run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub h: f64,
    pub s: f64,
    pub b: RationalInterface,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub alpha: f64,
    pub model: ModelKind,
    pub level: u32,
    pub report: ErrorReport,
    pub walltime_ms: f64,
}

impl ConvergenceRecord {
    pub fn csv_row(&self) -> String {
        let r = &self.report;
        let g = format_g17;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            g(self.h),
            g(self.s),
            g(self.b.value()),
            g(self.sigma1),
            g(self.sigma2),
            g(self.sigma3),
            g(self.alpha),
            self.model.name(),
            g(r.l2),
            g(r.h1),
            g(r.energy),
            g(r.interface_abs),
            self.walltime_ms
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub class: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub job: Job,
    pub outcome: std::result::Result<ConvergenceRecord, RunFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub model: ModelKind,
    pub metric: &'static str,
    /// `"one_minus_s"` or `"h"`.
    pub against: &'static str,
    pub fixed_h: Option<f64>,
    pub slope: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub runs: Vec<RunEntry>,
    pub skipped: Vec<Job>,
    pub slopes: Vec<SlopeFit>,
}

impl SweepOutcome {
    pub fn records(&self) -> impl Iterator<Item = &ConvergenceRecord> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (&Job, &RunFailure)> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().err().map(|f| (&r.job, f)))
    }

    pub fn slope(&self, model: ModelKind, metric: &str, against: &str) -> Option<f64> {
        self.slopes.iter().find(|f| f.model == model && f.metric == metric && f.against == against).map(|f| f.slope)
    }
}

const METRICS: [&str; 4] = ["l2", "h1", "energy", "interface_abs"];

fn metric(r: &ErrorReport, name: &str) -> f64 {
    match name {
        "l2" => r.l2,
        "h1" => r.h1,
        "energy" => r.energy,
        _ => r.interface_abs,
    }
}

/// Thread pool capped by `FRACTRANS_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n = v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::config(format!("cannot build thread pool: {e}")))
}

fn failure(e: &Error) -> RunFailure {
    RunFailure { class: e.class(), message: e.to_string() }
}

/// Solves one model and measures its error. Without an exact solution the
/// error columns are NaN.
pub fn run_one(
    kind: ModelKind,
    problem: &ProblemConfig,
    mesh: &InterfaceMesh,
    level: u32,
    exact: Option<&LocalExactSolution>,
) -> Result<ConvergenceRecord> {
    let start = Instant::now();
    let sigma3 = problem.sigma3_for(kind)?;
    let sol = run_model(kind, problem, mesh)?;
    let report = match exact {
        Some(u) => compute_errors(&sol, u, mesh, problem.s)?,
        None => ErrorReport { l2: f64::NAN, h1: f64::NAN, energy: f64::NAN, interface_abs: f64::NAN },
    };
    Ok(ConvergenceRecord {
        h: mesh.h(),
        s: problem.s,
        b: problem.b,
        sigma1: problem.sigma1,
        sigma2: problem.sigma2,
        sigma3,
        alpha: problem.alpha,
        model: kind,
        level,
        report,
        walltime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Validates `cfg`, then runs every job on the pool. Individual failures are
/// recorded and do not stop the sweep.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let exact = match build_exact(cfg.b.value(), cfg.sigma1, cfg.sigma2, cfg.alpha) {
        Ok(u) => Some(u),
        Err(Error::CriticalContrast { .. }) if cfg.allow_critical => None,
        Err(e) => return Err(e),
    };
    let (jobs, skipped): (Vec<Job>, Vec<Job>) =
        cfg.jobs().into_iter().partition(|j| exact.is_some() || j.model.is_fractional());
    let pool = thread_pool()?;
    let runs: Vec<RunEntry> = pool.install(|| {
        jobs.par_iter()
            .map(|&job| {
                let outcome = build_mesh(cfg.b, job.level)
                    .and_then(|mesh| run_one(job.model, &cfg.problem(job.s), &mesh, job.level, exact.as_ref()))
                    .map_err(|e| failure(&e));
                RunEntry { job, outcome }
            })
            .collect()
    });
    let slopes = fit_slopes(cfg.sweep, &runs);
    Ok(SweepOutcome { runs, skipped, slopes })
}

fn fit_slopes(sweep: SweepKind, runs: &[RunEntry]) -> Vec<SlopeFit> {
    let mut groups: BTreeMap<(ModelKind, u32), Vec<&ConvergenceRecord>> = BTreeMap::new();
    for rec in runs.iter().filter_map(|r| r.outcome.as_ref().ok()) {
        let level = if sweep == SweepKind::Grid { rec.level } else { 0 };
        groups.entry((rec.model, level)).or_default().push(rec);
    }
    let mut out = Vec::new();
    for ((model, _), recs) in groups {
        for name in METRICS {
            let points: Vec<(f64, f64)> = recs
                .iter()
                .map(|r| (if sweep == SweepKind::Grid { 1.0 - r.s } else { r.h }, metric(&r.report, name)))
                .collect();
            if let Ok(slope) = fit_slope(&points) {
                out.push(SlopeFit {
                    model,
                    metric: name,
                    against: if sweep == SweepKind::Grid { "one_minus_s" } else { "h" },
                    fixed_h: (sweep == SweepKind::Grid).then(|| recs[0].h),
                    slope,
                    points: points.len(),
                });
            }
        }
    }
    out
}

pub fn write_records_csv<'a, W, I>(mut w: W, records: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ConvergenceRecord>,
{
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn manifest_json(cfg: &RunConfig, outcome: &SweepOutcome, outputs: &[(&str, &Path)]) -> serde_json::Value {
    let runs: Vec<serde_json::Value> = outcome
        .runs
        .iter()
        .map(|r| {
            let mut v = json!({
                "model": r.job.model.name(),
                "level": r.job.level,
                "s": r.job.s,
            });
            match &r.outcome {
                Ok(rec) => {
                    v["status"] = json!("ok");
                    v["h"] = json!(rec.h);
                }
                Err(f) => {
                    v["status"] = json!("failed");
                    v["error_class"] = json!(f.class);
                    v["message"] = json!(f.message);
                }
            }
            v
        })
        .collect();
    let failures: Vec<serde_json::Value> = outcome
        .failures()
        .map(|(j, f)| json!({"model": j.model.name(), "level": j.level, "s": j.s, "error_class": f.class, "message": f.message}))
        .collect();
    let skipped: Vec<serde_json::Value> = outcome
        .skipped
        .iter()
        .map(|j| json!({"model": j.model.name(), "level": j.level, "s": j.s, "reason": "critical contrast"}))
        .collect();
    let outputs: serde_json::Map<String, serde_json::Value> =
        outputs.iter().map(|(k, p)| (k.to_string(), json!(p.display().to_string()))).collect();
    json!({
        "tool": "fractrans",
        "versions": {
            "fractrans-core": env!("CARGO_PKG_VERSION"),
            "csv_schema": CSV_HEADER,
        },
        "config": cfg.to_json(),
        "runs": runs,
        "skipped": skipped,
        "failures": failures,
        "slopes": outcome.slopes,
        "outputs": outputs,
    })
}

/// Log-log chart of the H1 error: against `1-s` per (model, level) for a
/// grid sweep, against `h` per model for a coupled one.
pub fn render_svg(sweep: SweepKind, outcome: &SweepOutcome) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in outcome.records() {
        let (label, x) = match sweep {
            SweepKind::Grid => (format!("{} h={}", r.model, format_g17(r.h)), 1.0 - r.s),
            SweepKind::Coupled => (r.model.to_string(), r.h),
        };
        if x > 0.0 && r.report.h1 > 0.0 && r.report.h1.is_finite() {
            series.entry(label).or_default().push((x.log10(), r.report.h1.log10()));
        }
    }
    let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    if all.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, W / 2.0, H / 2.0);
        svg.push_str("</svg>\n");
        return svg;
    }
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min).floor();
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
        (lo, if hi > lo { hi } else { lo + 1.0 })
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let _ = writeln!(
        svg,
        r#"<path d="M{a} {b} L{a} {c} L{d} {c}" stroke="black" fill="none"/>"#,
        a = PAD,
        b = PAD,
        c = H - PAD,
        d = W - PAD
    );
    for e in (x0 as i32)..=(x1 as i32) {
        let x = px(e as f64);
        let _ = writeln!(svg, r#"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="black"/>"#, H - PAD, H - PAD + 5.0);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{e}</text>"#, H - PAD + 18.0);
    }
    for e in (y0 as i32)..=(y1 as i32) {
        let y = py(e as f64);
        let _ = writeln!(svg, r#"<line x1="{}" y1="{y:.1}" x2="{PAD}" y2="{y:.1}" stroke="black"/>"#, PAD - 5.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{e}</text>"#, PAD - 8.0, y + 4.0);
    }
    let xlabel = if sweep == SweepKind::Grid { "1 - s" } else { "h" };
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 15.0);
    let _ = writeln!(svg, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">H1 error</text>"#, H / 2.0, H / 2.0);
    let guides: &[f64] = if sweep == SweepKind::Grid { &[1.0] } else { &[1.0, 0.85] };
    let anchor = all.iter().copied().fold((f64::NEG_INFINITY, 0.0), |a, p| if p.0 > a.0 { p } else { a });
    for (k, &slope) in guides.iter().enumerate() {
        let y_at = |x: f64| anchor.1 + 0.3 + slope * (x - anchor.0);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="{}"/>"#,
            px(x0),
            py(y_at(x0)),
            px(x1),
            py(y_at(x1)),
            if k == 0 { "6 4" } else { "2 3" }
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" fill="gray">slope {slope}</text>"#, W - PAD - 60.0, PAD + 14.0 * k as f64);
    }
    svg.push_str(&format!(r#"<clipPath id="plot"><rect x="{PAD}" y="{PAD}" width="{}" height="{}"/></clipPath>"#, W - 2.0 * PAD, H - 2.0 * PAD));
    svg.push('\n');
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        for &(x, y) in &pts {
            let _ = writeln!(svg, r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{color}"/>"#, px(x), py(y));
        }
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" fill="{color}">{label}</text>"#, PAD + 10.0, PAD + 14.0 * k as f64);
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone)]
pub struct ConvergenceArtifacts {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub svg: Option<PathBuf>,
    pub outcome: SweepOutcome,
}

/// Runs the sweep and writes `convergence.csv`, `manifest.json` and, when
/// plotting is on, `convergence.svg` into the output directory.
pub fn cli_convergence(cfg: &RunConfig) -> Result<ConvergenceArtifacts> {
    let outcome = run_sweep(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let csv = cfg.out_dir.join("convergence.csv");
    let manifest = cfg.out_dir.join("manifest.json");
    let svg = cfg.plot.then(|| cfg.out_dir.join("convergence.svg"));
    let mut buf = Vec::new();
    write_records_csv(&mut buf, outcome.records())?;
    std::fs::write(&csv, buf)?;
    if let Some(p) = &svg {
        std::fs::write(p, render_svg(cfg.sweep, &outcome))?;
    }
    let mut outputs = vec![("csv", csv.as_path())];
    if let Some(p) = &svg {
        outputs.push(("svg", p.as_path()));
    }
    let m = manifest_json(cfg, &outcome, &outputs);
    let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&manifest, text + "\n")?;
    Ok(ConvergenceArtifacts { csv, manifest, svg, outcome })
}

/// Worst closed-form/oracle gap within one entry class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDiscrepancy {
    pub s: f64,
    pub level: u32,
    pub n_cells: usize,
    pub half_branch: bool,
    pub case_class: &'static str,
    pub entries: usize,
    pub max_rel: f64,
    /// Oracle failed on some entry of the class.
    pub oracle_failed: bool,
}

impl KernelDiscrepancy {
    pub fn flagged(&self) -> bool {
        self.oracle_failed || !(self.max_rel <= VERIFY_TOL)
    }
}

const CLASS_ORDER: [&str; 3] = ["diag-5-cases", "superdiag-4-cases", "far-3-cases"];

/// Compares every closed-form entry with the quadrature oracle. The gap is
/// relative to `max(|oracle|, 1e-9·max|A|)`.
pub fn verify_kernels(b: RationalInterface, coeff: &CoefficientField, s_list: &[f64], levels: &[u32]) -> Result<Vec<KernelDiscrepancy>> {
    if s_list.is_empty() || levels.is_empty() {
        return Err(Error::config("verify-kernels needs at least one s and one level"));
    }
    let meshes: Vec<(u32, InterfaceMesh)> =
        levels.iter().map(|&k| build_mesh_capped(b, k, VERIFY_MAX_CELLS).map(|m| (k, m))).collect::<Result<_>>()?;
    if let Some(&s) = s_list.iter().find(|&&s| !(s > 0.0 && s < 1.0)) {
        return Err(Error::domain(format!("s = {s} outside (0, 1)")));
    }
    let pool = thread_pool()?;
    let mut out = Vec::new();
    for &s in s_list {
        for (level, mesh) in &meshes {
            let a = assemble_old(mesh, coeff, s)?;
            let floor = 1e-9 * a.max_abs();
            let n = mesh.n_interior();
            let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| (i..=n).map(move |j| (i, j))).collect();
            let gaps: Vec<(&'static str, Option<f64>)> = pool.install(|| {
                pairs
                    .par_iter()
                    .map(|&(i, j)| {
                        let class = EntryCase::classify(mesh, i, j).class_name();
                        let gap = oracle_entry(mesh, i, j, coeff, s)
                            .ok()
                            .map(|o| (a.get(i - 1, j - 1) - o).abs() / o.abs().max(floor));
                        (class, gap)
                    })
                    .collect()
            });
            for class in CLASS_ORDER {
                let mine: Vec<Option<f64>> = gaps.iter().filter(|g| g.0 == class).map(|g| g.1).collect();
                if mine.is_empty() {
                    continue;
                }
                out.push(KernelDiscrepancy {
                    s,
                    level: *level,
                    n_cells: mesh.n_cells(),
                    half_branch: (s - 0.5).abs() <= BRANCH_TOL,
                    case_class: class,
                    entries: mine.len(),
                    max_rel: mine.iter().flatten().copied().fold(0.0, f64::max),
                    oracle_failed: mine.iter().any(Option::is_none),
                });
            }
        }
    }
    Ok(out)
}

pub fn write_discrepancy_csv<W: Write>(mut w: W, rows: &[KernelDiscrepancy]) -> std::io::Result<()> {
    writeln!(w, "s,level,n_cells,branch,case_class,entries,max_rel_discrepancy,status")?;
    for r in rows {
        let status = if r.oracle_failed {
            "oracle-failed"
        } else if r.flagged() {
            "exceeds"
        } else {
            "ok"
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            format_g17(r.s),
            r.level,
            r.n_cells,
            if r.half_branch { "half" } else { "general" },
            r.case_class,
            r.entries,
            format_g17(r.max_rel),
            status
        )?;
    }
    Ok(())
}

/// Every model in `models` at one `(problem, level)`; failures are kept in
/// place.
pub fn compare_models(problem: &ProblemConfig, level: u32, models: &[ModelKind]) -> Result<Vec<RunEntry>> {
    if models.is_empty() {
        return Err(Error::config("model list is empty"));
    }
    let mesh = build_mesh(problem.b, level)?;
    let exact = build_exact(problem.b.value(), problem.sigma1, problem.sigma2, problem.alpha).ok();
    let pool = thread_pool()?;
    Ok(pool.install(|| {
        models
            .par_iter()
            .map(|&model| {
                let job = Job { model, level, s: problem.s };
                let outcome = run_one(model, problem, &mesh, level, exact.as_ref()).map_err(|e| failure(&e));
                RunEntry { job, outcome }
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_key_values(text).unwrap()
    }

    #[test]
    fn key_value_parsing() {
        let p = pairs("# test A1\n[run]\nb = 1/2\nsigma2 = -0.5 # right\nmodels = \"new, simplified\"\n\n");
        assert_eq!(p.len(), 3);
        assert_eq!(p[1], ("sigma2".into(), "-0.5".into()));
        assert!(parse_key_values("b 1/2").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut p = pairs("b = 1/2\ns = 0.75\nlevels = 8\nsigma2 = -0.5");
        p.push(("sigma2".into(), "-2".into()));
        p.push(("levels".into(), "3..5".into()));
        let c = RunConfig::from_pairs(p).unwrap();
        assert_eq!(c.sigma2, -2.0);
        assert_eq!(c.levels, vec![3, 4, 5]);
        assert_eq!(c.models.len(), 5);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(RunConfig::from_pairs(pairs("sigma4 = 1")), Err(Error::Parse(_))));
    }

    #[test]
    fn empty_model_list_rejected() {
        let c = RunConfig::from_pairs(pairs("s = 0.75\nlevels = 2\nmodels = ")).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(matches!(run_sweep(&c), Err(Error::Config(_))));
    }

    #[test]
    fn validation() {
        let ok = RunConfig::from_pairs(pairs("s = 0.75\nlevels = 2")).unwrap();
        assert!(ok.validate().is_ok());
        let low = RunConfig { s_values: vec![0.4], ..ok.clone() };
        assert!(matches!(low.validate(), Err(Error::Domain(_))));
        let old_only = RunConfig { models: vec![ModelKind::Old], ..low };
        assert!(old_only.validate().is_ok());
        let crit = RunConfig { sigma2: -1.0, ..ok.clone() };
        assert!(matches!(crit.validate(), Err(Error::CriticalContrast { .. })));
        assert!(RunConfig { allow_critical: true, ..crit }.validate().is_ok());
        let cross = RunConfig { sigma3: Some(Sigma3Policy::Value(0.5)), ..ok.clone() };
        assert!(matches!(cross.validate(), Err(Error::Config(_))));
        let mismatch = RunConfig { sweep: SweepKind::Coupled, levels: vec![2, 3], ..ok };
        assert!(matches!(mismatch.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn coupled_pairings() {
        let c = RunConfig::from_pairs(pairs("sweep = coupled\nlevels = 3,5,7")).unwrap();
        let oms: Vec<f64> = c.s_values.iter().map(|s| 1.0 - s).collect();
        assert!((oms[0] - 4e-2).abs() < 1e-15 && (oms[2] - 5e-4).abs() < 1e-15);
        assert!((oms[1] - (4e-2f64 * 5e-4).sqrt()).abs() < 1e-15);
        let q = RunConfig::from_pairs(pairs("sweep = coupled\npairing = quarter-h\nlevels = 3,4\nb = 3/4")).unwrap();
        assert!((1.0 - q.s_values[0] - 0.25 / 32.0).abs() < 1e-15);
        assert_eq!(q.jobs().len(), 10);
    }

    #[test]
    fn job_order_is_canonical() {
        let c = RunConfig::from_pairs(pairs("s = 0.9, 0.8\nlevels = 2,1\nmodels = simplified, local-fem")).unwrap();
        let jobs = c.jobs();
        assert_eq!(jobs.len(), 8);
        assert_eq!(jobs[0], Job { model: ModelKind::LocalFem, level: 2, s: 0.9 });
        assert_eq!(jobs[7], Job { model: ModelKind::Simplified, level: 1, s: 0.8 });
    }

    #[test]
    fn failures_are_recorded_and_sweep_continues() {
        let mut c = RunConfig::from_pairs(pairs("s = 0.75\nlevels = 1, 20\nmodels = local-fem")).unwrap();
        c.levels = vec![1, 2];
        let out = run_sweep(&c).unwrap();
        assert_eq!(out.runs.len(), 2);
        assert_eq!(out.failures().count(), 0);
        // Level 13 for b = 1/2 has 16384 cells, above the dense cap.
        c.models = vec![ModelKind::Old];
        c.levels = vec![1, 13];
        let out = run_sweep(&c).unwrap();
        assert_eq!(out.runs.len(), 2);
        let fails: Vec<_> = out.failures().collect();
        assert_eq!(fails.len(), 1);
        assert_eq!(fails[0].1.class, "capacity");
        let m = manifest_json(&c, &out, &[]);
        assert_eq!(m["runs"].as_array().unwrap().len(), 2);
        assert_eq!(m["failures"][0]["error_class"], "capacity");
    }

    #[test]
    fn critical_runs_only_fractional_models() {
        let c = RunConfig::from_pairs(pairs("s = 0.75\nlevels = 2\nsigma2 = -1\nallow_critical = true")).unwrap();
        let out = run_sweep(&c).unwrap();
        assert_eq!(out.skipped.len(), 2);
        assert_eq!(out.runs.len(), 3);
        assert!(out.records().all(|r| r.model.is_fractional() && r.report.h1.is_nan()));
    }

    #[test]
    fn csv_rows_follow_schema() {
        let c = RunConfig::from_pairs(pairs("s = 0.8,0.9,0.95\nlevels = 3\nmodels = simplified\nsigma2 = -0.5")).unwrap();
        let out = run_sweep(&c).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, out.records()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 13));
        assert!(lines[1].starts_with("0.0625,0.80000000000000004,0.5,1,-0.5,0,0,simplified,"));
        assert!(out.slope(ModelKind::Simplified, "h1", "one_minus_s").is_some());
    }

    #[test]
    fn svg_is_well_formed() {
        let c = RunConfig::from_pairs(pairs("s = 0.8,0.9\nlevels = 2,3\nmodels = local-fem,simplified")).unwrap();
        let svg = render_svg(SweepKind::Grid, &run_sweep(&c).unwrap());
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        let empty = SweepOutcome { runs: vec![], skipped: vec![], slopes: vec![] };
        assert!(render_svg(SweepKind::Coupled, &empty).contains("no data"));
    }

    #[test]
    fn verify_rejects_large_meshes() {
        let b = RationalInterface::new(1, 2).unwrap();
        let c = CoefficientField::constant(1.0).unwrap();
        assert!(matches!(verify_kernels(b, &c, &[0.75], &[5]), Err(Error::Capacity { .. })));
    }

    #[test]
    fn verify_small_mesh() {
        let b = RationalInterface::new(1, 2).unwrap();
        let c = CoefficientField::new(1.0, -1.0, 0.0).unwrap();
        let rows = verify_kernels(b, &c, &[0.5, 0.75], &[2]).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().any(|r| r.half_branch));
        assert!(rows.iter().all(|r| !r.flagged()), "{rows:?}");
    }

    #[test]
    fn geometric_spacing() {
        let v = geometric_one_minus_s(5, 4e-2, 5e-4);
        for w in v.windows(3) {
            assert!((w[1] * w[1] - w[0] * w[2]).abs() < 1e-18);
        }
        assert_eq!(geometric_one_minus_s(1, 0.1, 0.01), vec![0.1]);
    }
}
