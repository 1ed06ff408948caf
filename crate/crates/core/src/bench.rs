//! Drivers behind the command-line tool: full recovery runs, convergence
//! sweeps and the inequality grid checks, with their report files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::Experiment;
use crate::error::Result;
use crate::lemmas::{
    check_g_bound, check_g_bound_against, check_power_inequalities, g_value, GBoundReport, PowerReport,
};
use crate::pipeline::{run_job, run_sweep as sweep_rows, JobOutput, JobSettings, SlopeFit, SweepReport};
use crate::precision;

/// Outcome of one recovery run.
#[derive(Debug, Clone)]
pub struct RecoverReport {
    pub job: JobOutput,
    /// Plan ratio falls short of what bound propagation needs.
    pub warnings: Vec<String>,
    /// `None` when no check applies (noisy samples).
    pub bounds_hold: Option<bool>,
}

impl RecoverReport {
    pub fn passed(&self) -> bool {
        self.bounds_hold != Some(false)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = self.job.result.to_json();
        let plan = &self.job.plan;
        v["plan"] = serde_json::json!({
            "x0": plan.point.expr,
            "x0_value": precision::to_decimal(&plan.x0),
            "d0": plan.point.scan.d0,
            "k_scan": plan.point.scan.k_scan,
            "t1": precision::to_decimal(&plan.t1),
            "rho": precision::to_decimal(&plan.rho),
            "n": plan.n,
            "times": plan.times.iter().map(precision::to_decimal).collect::<Vec<_>>(),
            "precision": plan.precision,
        });
        v["warnings"] = serde_json::json!(self.warnings);
        v["passed"] = serde_json::json!(self.passed());
        v
    }

    pub fn summary(&self) -> String {
        let r = &self.job.result;
        let mut s = String::new();
        let _ = writeln!(s, "n = {}, m = {}, working precision {} bits", self.job.plan.n, r.m, r.mantissa_bits);
        let _ = writeln!(s, "rho = {}, t1 = {}", self.job.plan.rho.to_f64(), self.job.plan.t1.to_f64());
        let _ = writeln!(s, "A0 = {:.9} (+/- {:.2e})", r.a0.value.to_f64(), r.a0.error.to_f64());
        if let Some(e) = &r.l2_error {
            let _ = writeln!(s, "L2 error = {:.6e} (numeric budget {:.3e})", e.to_f64(), r.l2_budget.to_f64());
        }
        let _ = writeln!(s, "{:>4} {:>24} {:>14} {:>14}", "k", "c_bar", "bound", "error");
        for k in 0..r.c_bar.len() {
            let err = r.coefficient_errors.as_ref().map_or("-".to_string(), |e| format!("{:.3e}", e[k]));
            let _ =
                writeln!(s, "{:>4} {:>24.16e} {:>14.3e} {:>14}", k + 1, r.c_bar[k].to_f64(), r.apriori_bounds[k], err);
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let verdict = match self.bounds_hold {
            Some(true) => "all bounds hold",
            Some(false) => "BOUND VIOLATION",
            None => "bounds not checked (noisy samples)",
        };
        let _ = writeln!(s, "{verdict}");
        s
    }
}

fn ratio_warning(result: &crate::recovery::RecoveryResult, rho: f64) -> Option<String> {
    result.induction_violation.map(|(k, j)| {
        format!(
            "rho = {rho} is too small for the coefficient bounds to propagate (fails at k = {k}, j = {j}); \
             use rho = \"safe\" for a ratio that guarantees them"
        )
    })
}

/// Run the experiment at its first `n`.
pub fn run_recover(exp: &Experiment) -> Result<RecoverReport> {
    let settings = JobSettings { n: exp.ns[0], ..exp.settings.clone() };
    let job = run_job(&exp.dynamics, &exp.datum, &exp.point, &settings)?;
    let warnings = ratio_warning(&job.result, settings.rho).into_iter().collect();
    let bounds_hold = if settings.noise.is_some() { None } else { job.result.bounds_hold() };
    Ok(RecoverReport { job, warnings, bounds_hold })
}

pub fn write_recover(report: &RecoverReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("result.json"), pretty(&report.to_json()))?;
    std::fs::write(dir.join("trace.json"), report.job.trace.to_json())?;
    std::fs::write(dir.join("summary.txt"), report.summary())?;
    Ok(())
}

/// Sweep over the experiment's `n` list.
pub fn run_sweep(exp: &Experiment) -> Result<SweepReport> {
    sweep_rows(&exp.dynamics, &exp.datum, &exp.point, &exp.settings, &exp.ns)
}

pub fn sweep_passed(report: &SweepReport, noisy: bool) -> bool {
    noisy || report.violations() == 0
}

pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("sweep.csv"), report.to_csv())?;
    std::fs::write(dir.join("sweep.json"), pretty(&report.to_json()))?;
    std::fs::write(dir.join("timings.json"), pretty(&report.timings_json()))?;
    Ok(())
}

pub fn sweep_summary(report: &SweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>4} {:>4} {:>14} {:>14} {:>14} {:>8}", "n", "m", "l2_error", "budget", "violation", "bits");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:>4} {:>4} {:>14.6e} {:>14.3e} {:>14.3e} {:>8}",
            r.n,
            r.m,
            r.l2_error.to_f64(),
            r.l2_budget.to_f64(),
            r.max_bound_violation.to_f64(),
            r.mantissa_bits
        );
    }
    match &report.fit {
        SlopeFit::Fitted { slope, residual, rows, .. } => {
            let _ = writeln!(s, "fitted slope {slope:.4} (rms residual {residual:.3e}, {rows} rows)");
        }
        SlopeFit::Floor { rows } => {
            let _ = writeln!(s, "slope: floor ({rows} rows above the precision floor)");
        }
    }
    s
}

/// Grid sizes for [`run_lemma_checks`].
#[derive(Debug, Clone, Serialize)]
pub struct LemmaGrid {
    pub orders: Vec<u32>,
    pub x_max: u64,
    pub k_max: u64,
    pub l_max: u32,
    /// Replaces `2N ln 2` in the g-bound check; a negative control hook.
    pub threshold: Option<f64>,
}

impl Default for LemmaGrid {
    fn default() -> Self {
        LemmaGrid { orders: vec![1, 2, 3, 4], x_max: 200, k_max: 50, l_max: 8, threshold: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub grid: LemmaGrid,
    pub g_bounds: Vec<GBoundReport>,
    pub powers: PowerReport,
    /// `g(2, 1)` for `N = 1`, i.e. `ln(8/3)`.
    pub g_spot: f64,
    pub passed: bool,
}

pub fn run_lemma_checks(grid: &LemmaGrid) -> LemmaReport {
    let g_bounds: Vec<_> = grid
        .orders
        .iter()
        .map(|&n| match grid.threshold {
            Some(t) => check_g_bound_against(n, grid.x_max, t),
            None => check_g_bound(n, grid.x_max),
        })
        .collect();
    let powers = check_power_inequalities(grid.k_max, grid.l_max);
    let passed = g_bounds.iter().all(|r| r.passed) && powers.passed;
    LemmaReport { grid: grid.clone(), g_bounds, powers, g_spot: g_value(1, 2, 1), passed }
}

impl LemmaReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.g_bounds {
            let _ = writeln!(
                s,
                "g bound N={}: max {:.6} at {:?} vs 2N ln 2 = {:.6}, min {:.6}: {}",
                r.order_half,
                r.max_value,
                r.argmax,
                r.threshold,
                r.min_value,
                if r.passed { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            s,
            "power inequalities k <= {}, l <= {}: {} cases, {}",
            self.powers.k_max,
            self.powers.l_max,
            self.powers.checked,
            if self.powers.passed { "pass" } else { "FAIL" }
        );
        let _ = writeln!(s, "g(2,1) for N=1: {:.9}", self.g_spot);
        s
    }
}

pub fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

/// Process exit status for a failed run.
pub fn exit_code(e: &crate::Error) -> i32 {
    use crate::Error::*;
    match e {
        Config(_)
        | Parse(_)
        | Io(_)
        | InvalidArgument(_)
        | EmptyCoefficients
        | SignPatternViolation(_)
        | InvalidProfile(_) => 2,
        TolUnachievable { .. } | PrecisionInsufficient { .. } | IllConditioned { .. } => 3,
        ResonantPoint(_) | RhoBelowThreshold { .. } | RootBracketFailure { .. } => 4,
    }
}

pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
}
