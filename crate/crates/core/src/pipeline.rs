//! End-to-end jobs: size precision, build the plan, sample, recover; and
//! convergence sweeps over `n` with a log-log rate fit.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::forward::{sample_trace_with, Dynamics, Trace};
use crate::precision::{self, Tolerance, GUARD_BITS};
use crate::recovery::{self, precision_gate, sampling_policy, RecoveryResult};
use crate::schedule::{model_times_estimate, SamplingPlan, SamplingPoint};

/// Default certified tolerance on `A₀(t₁)`.
pub const DEFAULT_A0_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct JobSettings {
    pub t1: f64,
    pub rho: f64,
    pub n: usize,
    /// Bits by which amplified sample errors stay below the smallest bound.
    pub guard_bits: u32,
    pub a0_tol: f64,
    /// Overrides the policy's sample tolerance.
    pub sample_tol: Option<f64>,
    /// Overrides the policy's working precision.
    pub precision: Option<u32>,
    /// Raise an overridden precision to the recovery gate instead of failing.
    pub auto_raise: bool,
    /// Uniform noise of this absolute magnitude added to every sample, and its seed.
    pub noise: Option<(f64, u64)>,
}

impl JobSettings {
    pub fn new(t1: f64, rho: f64, n: usize) -> Self {
        JobSettings {
            t1,
            rho,
            n,
            guard_bits: GUARD_BITS,
            a0_tol: DEFAULT_A0_TOL,
            sample_tol: None,
            precision: None,
            auto_raise: true,
            noise: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JobOutput {
    pub plan: SamplingPlan,
    pub trace: Trace,
    pub result: RecoveryResult,
}

fn profile_of(dynamics: &Dynamics) -> Option<&crate::profile::DiffusivityProfile> {
    match dynamics {
        Dynamics::Autonomous(_) => None,
        Dynamics::Rescaled(p) => Some(p),
    }
}

/// Plan for `dynamics` at the precision the job needs.
pub fn plan_for(
    dynamics: &Dynamics,
    f: &InitialDatum,
    point: &SamplingPoint,
    s: &JobSettings,
) -> Result<(SamplingPlan, Vec<Tolerance>)> {
    let spec = dynamics.recovery_operator();
    let threshold = match dynamics {
        Dynamics::Autonomous(spec) => spec.rho_threshold(),
        Dynamics::Rescaled(_) => crate::operator::rho_threshold(1),
    };
    if !(s.rho > threshold) {
        return Err(Error::RhoBelowThreshold { rho: s.rho, threshold });
    }
    if s.n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let times = model_times_estimate(profile_of(dynamics), s.t1, s.rho, s.n);
    let policy = sampling_policy(&spec, f, &times, s.guard_bits);
    let gate = precision_gate(&spec, &times);
    let bits = match s.precision {
        None => policy.bits,
        Some(p) if p >= gate => p,
        Some(_) if s.auto_raise => gate,
        Some(p) => return Err(Error::PrecisionInsufficient { have: p, need: gate }),
    };
    let tols = match s.sample_tol {
        Some(t) => vec![Tolerance::new(t)?; s.n],
        None => policy.tolerances,
    };
    let plan = match dynamics {
        Dynamics::Autonomous(spec) => SamplingPlan::autonomous(spec, point, s.t1, s.rho, s.n, bits)?,
        Dynamics::Rescaled(profile) => SamplingPlan::rescaled(profile, point, s.t1, s.rho, s.n, bits)?,
    };
    Ok((plan, tols))
}

/// Synthesize the trace for `f`, recover, and account errors against `f`.
pub fn run_job(dynamics: &Dynamics, f: &InitialDatum, point: &SamplingPoint, s: &JobSettings) -> Result<JobOutput> {
    let (plan, tols) = plan_for(dynamics, f, point, s)?;
    let mut trace = sample_trace_with(dynamics, f, &plan, &tols)?;
    if let Some((magnitude, seed)) = s.noise {
        trace.inject_noise(magnitude, seed);
    }
    let result = recovery::recover(&dynamics.recovery_operator(), &plan, &trace, Some(f), s.a0_tol)?;
    Ok(JobOutput { plan, trace, result })
}

/// One row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub m: usize,
    pub l2_error: Float,
    pub l2_budget: Float,
    pub max_bound_violation: Float,
    pub mantissa_bits: u32,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SlopeFit {
    Fitted {
        slope: f64,
        intercept: f64,
        residual: f64,
        rows: usize,
    },
    /// Fewer than two rows clear the precision floor.
    Floor {
        rows: usize,
    },
}

impl SlopeFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            SlopeFit::Fitted { slope, .. } => Some(*slope),
            SlopeFit::Floor { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub fit: SlopeFit,
}

/// Rows with `error > 10 · budget` carry model error; only those are fitted.
pub fn fit_rate(rows: &[SweepRow]) -> SlopeFit {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.l2_error > Float::with_val(precision::BOUND_BITS, &r.l2_budget * 10u32) && r.l2_error > 0)
        .map(|r| ((r.n as f64).ln(), precision::log2_abs(&r.l2_error) * std::f64::consts::LN_2))
        .collect();
    if pts.len() < 2 {
        return SlopeFit::Floor { rows: pts.len() };
    }
    let (slope, intercept, residual) = least_squares(&pts);
    SlopeFit::Fitted { slope, intercept, residual, rows: pts.len() }
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, rms residual)`.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - a * p.0 - b).powi(2)).sum();
    (a, b, (rss / n).sqrt())
}

/// One job per `n` on the same datum; rows in the order of `ns`.
pub fn run_sweep(
    dynamics: &Dynamics,
    f: &InitialDatum,
    point: &SamplingPoint,
    base: &JobSettings,
    ns: &[usize],
) -> Result<SweepReport> {
    if ns.len() < 3 {
        return Err(Error::InvalidArgument(format!("a sweep needs at least 3 values of n, got {}", ns.len())));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sweep values of n must be strictly increasing".into()));
    }
    let rows = ns
        .par_iter()
        .map(|&n| {
            let start = Instant::now();
            let s = JobSettings { n, ..base.clone() };
            let out = run_job(dynamics, f, point, &s)?;
            let r = out.result;
            Ok(SweepRow {
                n,
                m: r.m,
                l2_error: r.l2_error.clone().expect("truth supplied"),
                l2_budget: r.l2_budget.clone(),
                max_bound_violation: r.max_bound_violation().expect("truth supplied"),
                mantissa_bits: r.mantissa_bits,
                wall_time: start.elapsed(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_rate(&rows);
    Ok(SweepReport { rows, fit })
}

impl SweepReport {
    pub const CSV_HEADER: &'static str = "n,m,l2_error,l2_budget,max_bound_violation,mantissa_bits";

    /// Deterministic CSV: 17 significant digits, no timings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{}\n",
                r.n,
                r.m,
                r.l2_error.to_f64(),
                r.l2_budget.to_f64(),
                r.max_bound_violation.to_f64(),
                r.mantissa_bits
            ));
        }
        out
    }

    /// Full-precision sidecar; deterministic, no timings.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "n": r.n,
                    "m": r.m,
                    "l2_error": precision::to_decimal(&r.l2_error),
                    "l2_budget": precision::to_decimal(&r.l2_budget),
                    "max_bound_violation": precision::to_decimal(&r.max_bound_violation),
                    "mantissa_bits": r.mantissa_bits,
                })
            })
            .collect();
        serde_json::json!({ "rows": rows, "fit": self.fit })
    }

    /// Wall times per row, kept apart from the reproducible outputs.
    pub fn timings_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| serde_json::json!({ "n": r.n, "wall_time_s": r.wall_time.as_secs_f64() }))
            .collect();
        serde_json::json!({ "rows": rows })
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.max_bound_violation > 0).count()
    }
}
