//! Sweeps over sparsity levels and seeds, and writes the resulting artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rvscgd_core::optimizer::{init_rng, initial_weights};
use rvscgd_core::population::{angle, population_loss};
use rvscgd_core::{
    LimitDiagnostics, PreconditionPolicy, PreconditionReport, RunChecks, Solver, Termination,
    TraceRecord,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::plot;
use crate::teacher::build_teacher;
use crate::HarnessError;

#[derive(Debug, Clone, Serialize)]
pub struct PreconditionSummary {
    pub theta0: f64,
    pub initial_angle: bool,
    pub beta_bound: bool,
    pub lambda_bound: bool,
    pub eta_bound: bool,
    pub beta_max: f64,
    pub lambda_max: f64,
    pub eta_max: f64,
}

impl From<&PreconditionReport> for PreconditionSummary {
    fn from(p: &PreconditionReport) -> Self {
        PreconditionSummary {
            theta0: p.theta0,
            initial_angle: p.initial_angle,
            beta_bound: p.beta_bound,
            lambda_bound: p.lambda_bound,
            eta_bound: p.eta_bound,
            beta_max: p.beta_max,
            lambda_max: p.lambda_max,
            eta_max: p.eta_max,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsSummary {
    pub theta_bar: f64,
    pub gamma_bar: f64,
    pub gamma_defined: bool,
    pub collinearity_residual: f64,
    pub c_estimate: f64,
    pub c_upper: f64,
    pub c_in_range: bool,
    pub sine_residual: f64,
    pub w_error: f64,
    pub w_error_bound: f64,
    pub w_bound_holds: bool,
    pub u_error: f64,
    pub u_error_bound: f64,
    pub u_bound_holds: bool,
}

impl From<&LimitDiagnostics> for DiagnosticsSummary {
    fn from(d: &LimitDiagnostics) -> Self {
        DiagnosticsSummary {
            theta_bar: d.theta_bar,
            gamma_bar: d.gamma_bar,
            gamma_defined: d.gamma_defined,
            collinearity_residual: d.collinearity_residual,
            c_estimate: d.c_estimate,
            c_upper: d.c_upper,
            c_in_range: d.c_in_range(),
            sine_residual: d.sine_residual,
            w_error: d.w_error,
            w_error_bound: d.w_error_bound,
            w_bound_holds: d.w_bound_holds(),
            u_error: d.u_error,
            u_error_bound: d.u_error_bound,
            u_bound_holds: d.u_bound_holds(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChecksSummary {
    pub max_theta_increase: f64,
    pub max_lagrangian_increase: f64,
    pub max_half_update_increase: f64,
    pub first_theta_violation: Option<u64>,
    pub first_lagrangian_violation: Option<u64>,
    pub first_guard_violation: Option<u64>,
    pub max_guard: f64,
    pub c_min: f64,
    pub c_max: f64,
}

impl From<&RunChecks> for ChecksSummary {
    fn from(c: &RunChecks) -> Self {
        ChecksSummary {
            max_theta_increase: c.max_theta_increase,
            max_lagrangian_increase: c.max_lagrangian_increase,
            max_half_update_increase: c.max_half_update_increase,
            first_theta_violation: c.first_theta_violation,
            first_lagrangian_violation: c.first_lagrangian_violation,
            first_guard_violation: c.first_guard_violation,
            max_guard: c.max_guard,
            c_min: c.c_min,
            c_max: c.c_max,
        }
    }
}

/// Final measurements of one `(s, seed)` run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub s: usize,
    pub seed: u64,
    pub theta0: f64,
    /// `θ(ū, w*)`; absent when the final split variable is zero.
    pub theta_u_wstar: Option<f64>,
    pub theta_w_wstar: f64,
    /// `f(ū)`; absent together with `theta_u_wstar`.
    pub f_u: Option<f64>,
    pub u_l0: usize,
    pub iterations: u64,
    pub termination: &'static str,
    pub preconditions: PreconditionSummary,
    pub diagnostics: DiagnosticsSummary,
    pub checks: ChecksSummary,
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub summary: RunSummary,
    pub trace: Vec<TraceRecord>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub s: usize,
    pub seed: u64,
    pub outcome: Result<CellOutput, String>,
}

/// Runs one `(s, seed)` cell.
pub fn run_cell(cfg: &ExperimentConfig, s: usize, seed: u64) -> Result<CellOutput, HarnessError> {
    let start = Instant::now();
    let wstar = build_teacher(cfg.d, s)?;
    let hp = cfg.hyperparams(seed)?;
    let k = hp.k;
    let w0 = initial_weights(&wstar, hp.delta, &mut init_rng(seed))?;
    let mut solver = Solver::new(hp, &wstar)?;
    let out = solver.run(&w0, PreconditionPolicy::Warn)?;
    let u = &out.state.u;
    let theta_u_wstar = angle(u, &wstar).ok();
    let f_u = match theta_u_wstar {
        Some(_) => Some(population_loss(u, &wstar, k)?),
        None => None,
    };
    let summary = RunSummary {
        s,
        seed,
        theta0: out.preconditions.theta0,
        theta_u_wstar,
        theta_w_wstar: angle(&out.state.w, &wstar)?,
        f_u,
        u_l0: u.iter().filter(|x| **x != 0.0).count(),
        iterations: out.state.t,
        termination: match out.termination {
            Termination::StepTol => "step_tol",
            Termination::MaxIters => "max_iters",
        },
        preconditions: (&out.preconditions).into(),
        diagnostics: (&out.diagnostics).into(),
        checks: (&out.checks).into(),
    };
    Ok(CellOutput {
        summary,
        trace: out.trace,
        wall_time: start.elapsed(),
    })
}

/// Runs every `(s, seed)` cell in parallel. Results come back ordered by
/// sparsity level, then seed, regardless of scheduling.
pub fn run_sweep(cfg: &ExperimentConfig) -> Vec<CellResult> {
    let cells: Vec<(usize, u64)> = cfg
        .sparsity_levels
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    cells
        .par_iter()
        .map(|&(s, seed)| CellResult {
            s,
            seed,
            outcome: run_cell(cfg, s, seed).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Median of the non-missing values; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub const MEASURES: [&str; 4] = ["theta_u_wstar", "theta_w_wstar", "f_u", "u_l0"];

fn measure(r: &RunSummary, name: &str) -> Option<f64> {
    match name {
        "theta_u_wstar" => r.theta_u_wstar,
        "theta_w_wstar" => Some(r.theta_w_wstar),
        "f_u" => r.f_u,
        "u_l0" => Some(r.u_l0 as f64),
        _ => None,
    }
}

/// Per-level aggregate of one measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub median: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub s: usize,
    pub runs: usize,
    pub theta_u_wstar: Aggregate,
    pub theta_w_wstar: Aggregate,
    pub f_u: Aggregate,
    pub u_l0: Aggregate,
}

fn aggregate(runs: &[&RunSummary], name: &str) -> Aggregate {
    let v: Vec<f64> = runs.iter().filter_map(|r| measure(r, name)).collect();
    Aggregate {
        median: median(&v),
        min: v.iter().copied().reduce(f64::min),
        max: v.iter().copied().reduce(f64::max),
    }
}

/// Aggregates over seeds. Levels with no successful run are left out.
pub fn summarize(cfg: &ExperimentConfig, cells: &[CellResult]) -> Vec<LevelSummary> {
    cfg.sparsity_levels
        .iter()
        .filter_map(|&s| {
            let runs: Vec<&RunSummary> = cells
                .iter()
                .filter(|c| c.s == s)
                .filter_map(|c| c.outcome.as_ref().ok().map(|o| &o.summary))
                .collect();
            if runs.is_empty() {
                return None;
            }
            Some(LevelSummary {
                s,
                runs: runs.len(),
                theta_u_wstar: aggregate(&runs, "theta_u_wstar"),
                theta_w_wstar: aggregate(&runs, "theta_w_wstar"),
                f_u: aggregate(&runs, "f_u"),
                u_l0: aggregate(&runs, "u_l0"),
            })
        })
        .collect()
}

fn level_field(l: &LevelSummary, name: &str) -> Aggregate {
    match name {
        "theta_u_wstar" => l.theta_u_wstar,
        "theta_w_wstar" => l.theta_w_wstar,
        "f_u" => l.f_u,
        _ => l.u_l0,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Median table: one row per measure, one column per sparsity level.
pub fn median_table(levels: &[LevelSummary]) -> String {
    let mut out = String::from("measure");
    for l in levels {
        let _ = write!(out, ",s={}", l.s);
    }
    out.push('\n');
    for name in MEASURES {
        out.push_str(name);
        for l in levels {
            let _ = write!(out, ",{}", cell(level_field(l, name).median));
        }
        out.push('\n');
    }
    out
}

/// Companion table with the per-level minimum and maximum over seeds.
pub fn range_table(levels: &[LevelSummary]) -> String {
    let mut out = String::from("measure");
    for l in levels {
        let _ = write!(out, ",s={}", l.s);
    }
    out.push('\n');
    for name in MEASURES {
        for (suffix, pick) in [("min", 0), ("max", 1)] {
            let _ = write!(out, "{name}_{suffix}");
            for l in levels {
                let a = level_field(l, name);
                let _ = write!(out, ",{}", cell(if pick == 0 { a.min } else { a.max }));
            }
            out.push('\n');
        }
    }
    out
}

pub const TRACE_HEADER: &str =
    "iter,theta,gamma,lagrangian,floss,u_sparsity,step_norm,gamma_defined";

/// Trace rows with shortest round-trip float formatting.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{},{:e},{}",
            r.t,
            r.theta,
            r.gamma,
            r.lagrangian,
            r.floss,
            r.u_sparsity,
            r.step_norm,
            u8::from(r.gamma_defined)
        );
    }
    out
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a ExperimentConfig,
    levels: &'a [LevelSummary],
    runs: Vec<&'a RunSummary>,
}

#[derive(Serialize)]
struct Timing {
    s: usize,
    seed: u64,
    seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub s: usize,
    pub seed: u64,
    pub error: String,
}

/// What a sweep wrote and what went wrong along the way.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Manifest {
    pub status: &'static str,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub failures: Vec<Failure>,
    pub error: Option<String>,
}

impl Manifest {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

struct Writer<'a> {
    root: &'a Path,
    manifest: &'a mut Manifest,
}

impl Writer<'_> {
    fn put(&mut self, rel: &str, contents: &[u8]) -> Result<(), HarnessError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| HarnessError::io(&path, e))?;
        self.manifest.files.push(PathBuf::from(rel));
        Ok(())
    }
}

/// Runs the sweep and writes every artifact under `cfg.output_dir`.
///
/// All writes happen on the calling thread after the parallel runs finish.
/// `timings.json` holds wall-clock times and is the only artifact that
/// differs between repeated runs of the same configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Manifest {
    let mut manifest = Manifest::default();
    let result = run_into(cfg, &mut manifest);
    manifest.status = match (&result, manifest.failures.is_empty()) {
        (Ok(()), true) => "ok",
        (Ok(()), false) => "partial",
        (Err(_), _) => "error",
    };
    if let Err(e) = result {
        manifest.error = Some(e.to_string());
    }
    // Best effort; the caller also receives the manifest directly.
    if let Ok(json) = serde_json::to_string_pretty(&manifest) {
        let _ = std::fs::create_dir_all(&cfg.output_dir);
        let _ = std::fs::write(cfg.output_dir.join("manifest.json"), json + "\n");
    }
    manifest
}

fn run_into(cfg: &ExperimentConfig, manifest: &mut Manifest) -> Result<(), HarnessError> {
    cfg.validate()?;
    let cells = run_sweep(cfg);
    let levels = summarize(cfg, &cells);
    for &s in &cfg.sparsity_levels {
        if !levels.iter().any(|l| l.s == s) {
            manifest
                .warnings
                .push(format!("s={s}: no successful run, column omitted"));
        }
    }
    for c in &cells {
        match &c.outcome {
            Err(e) => manifest.failures.push(Failure {
                s: c.s,
                seed: c.seed,
                error: e.clone(),
            }),
            Ok(o) => {
                let r = &o.summary;
                if r.theta_u_wstar.is_none() {
                    manifest.warnings.push(format!(
                        "s={} seed={}: final split variable is zero",
                        c.s, c.seed
                    ));
                }
                if let Some(t) = r.checks.first_guard_violation {
                    manifest.warnings.push(format!(
                        "s={} seed={}: step guard exceeded at t={t}",
                        c.s, c.seed
                    ));
                }
                if !(r.preconditions.initial_angle
                    && r.preconditions.beta_bound
                    && r.preconditions.lambda_bound
                    && r.preconditions.eta_bound)
                {
                    manifest.warnings.push(format!(
                        "s={} seed={}: preconditions do not all hold",
                        c.s, c.seed
                    ));
                }
            }
        }
    }

    let root = cfg.output_dir.clone();
    let mut w = Writer {
        root: &root,
        manifest,
    };
    for c in &cells {
        if let Ok(o) = &c.outcome {
            let stem = format!("s{}_seed{}", c.s, c.seed);
            w.put(
                &format!("traces/trace_{stem}.csv"),
                trace_csv(&o.trace).as_bytes(),
            )?;
            if cfg.emit_plot {
                let series = plot::angle_series(&o.trace);
                w.put(
                    &format!("plots/angle_{stem}.csv"),
                    plot::series_csv(&series).as_bytes(),
                )?;
                let title = format!("angle to teacher, s = {}, seed = {}", c.s, c.seed);
                w.put(
                    &format!("plots/angle_{stem}.svg"),
                    plot::line_chart_svg(&series, &title).as_bytes(),
                )?;
            }
        }
    }
    w.put("summary.csv", median_table(&levels).as_bytes())?;
    w.put("summary_range.csv", range_table(&levels).as_bytes())?;
    let runs = cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().map(|o| &o.summary))
        .collect();
    let json = serde_json::to_string_pretty(&SummaryFile {
        config: cfg,
        levels: &levels,
        runs,
    })?;
    w.put("summary.json", (json + "\n").as_bytes())?;
    let timings: Vec<Timing> = cells
        .iter()
        .filter_map(|c| {
            let o = c.outcome.as_ref().ok()?;
            Some(Timing {
                s: c.s,
                seed: c.seed,
                seconds: o.wall_time.as_secs_f64(),
            })
        })
        .collect();
    w.put(
        "timings.json",
        (serde_json::to_string_pretty(&timings)? + "\n").as_bytes(),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[f64::NAN, 1.0]), Some(1.0));
    }

    fn quick() -> ExperimentConfig {
        ExperimentConfig {
            sparsity_levels: vec![2, 4],
            seeds: vec![1, 2, 3],
            max_iters: 300,
            eta: 1e-2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sweep_is_ordered_and_reproducible() {
        let cfg = quick();
        let a = run_sweep(&cfg);
        let b = run_sweep(&cfg);
        let keys: Vec<_> = a.iter().map(|c| (c.s, c.seed)).collect();
        assert_eq!(keys, vec![(2, 1), (2, 2), (2, 3), (4, 1), (4, 2), (4, 3)]);
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.outcome.as_ref().unwrap(), y.outcome.as_ref().unwrap());
            assert_eq!(trace_csv(&x.trace), trace_csv(&y.trace));
        }
    }

    #[test]
    fn summary_matches_final_trace_row() {
        let cfg = quick();
        for c in run_sweep(&cfg) {
            let o = c.outcome.unwrap();
            let last = o.trace.last().unwrap();
            assert_eq!(last.t, o.summary.iterations);
            assert_eq!(last.theta, o.summary.theta_w_wstar);
            assert_eq!(last.u_sparsity, o.summary.u_l0);
            let k = cfg.k as f64;
            if let (Some(t), Some(f)) = (o.summary.theta_u_wstar, o.summary.f_u) {
                assert!((f - k * t / (2.0 * std::f64::consts::PI)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn tables_have_one_column_per_level() {
        let cfg = quick();
        let levels = summarize(&cfg, &run_sweep(&cfg));
        let t = median_table(&levels);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "measure,s=2,s=4");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("theta_u_wstar,"));
        assert_eq!(range_table(&levels).lines().count(), 9);
    }

    #[test]
    fn failed_levels_are_omitted() {
        let cfg = quick();
        let mut cells = run_sweep(&cfg);
        for c in cells.iter_mut().filter(|c| c.s == 4) {
            c.outcome = Err("boom".into());
        }
        let levels = summarize(&cfg, &cells);
        assert_eq!(levels.len(), 1);
        assert_eq!(median_table(&levels).lines().next(), Some("measure,s=2"));
    }
}
